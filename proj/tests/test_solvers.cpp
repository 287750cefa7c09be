#include <doctest.h>

#include <cmath>

#include "framelab/moving_frame.hpp"
#include "framelab/noise.hpp"
#include "framelab/semigroups.hpp"
#include "framelab/solvers.hpp"

using namespace framelab;

namespace {

CoefficientPair scalar_coefficients(std::function<double(double)> drift_of_y, double sigma_const) {
    return state_coefficients(
        [drift_of_y](double, const Vec& x) { return Vec{drift_of_y(x[0])}; },
        [sigma_const](double, const Vec&) {
            Matrix m(1, 1);
            m(0, 0) = sigma_const;
            return m;
        });
}

}  // namespace

TEST_CASE("euler scheme basics") {
    TimeGrid grid(1.0, 256);
    DriverBundle driver = sample_driver(grid, 1, 3, 0);

    SUBCASE("zero coefficients hold the path constant") {
        CoefficientPair zero = scalar_coefficients([](double) { return 0.0; }, 0.0);
        PathRecord y = euler_maruyama(zero, Vec{0.7}, driver);
        for (int i = 0; i <= 256; ++i) CHECK(y.at(i)[0] == 0.7);
    }
    SUBCASE("linear decay hits e^{-1} within 2 dt") {
        CoefficientPair decay = scalar_coefficients([](double y) { return -y; }, 0.0);
        PathRecord y = euler_maruyama(decay, Vec{1.0}, driver);
        CHECK(std::abs(y.at(256)[0] - std::exp(-1.0)) <= 2.0 * grid.dt());
    }
    SUBCASE("unit diffusion telescopes to the driver sums") {
        CoefficientPair diffusion = scalar_coefficients([](double) { return 0.0; }, 1.0);
        PathRecord y = euler_maruyama(diffusion, Vec{0.25}, driver);
        PathRecord sums = cumulative_path(driver);
        for (int i = 0; i <= 256; ++i) CHECK(y.at(i)[0] - 0.25 == doctest::Approx(sums.at(i)[0]).epsilon(1e-14));
    }
    SUBCASE("blow-up triggers the divergence guard with a step index") {
        TimeGrid coarse(30.0, 60);
        DriverBundle d = sample_driver(coarse, 1, 3, 0);
        CoefficientPair cubic = scalar_coefficients([](double y) { return y * y * y; }, 0.0);
        try {
            euler_maruyama(cubic, Vec{2.0}, d);
            FAIL("expected DivergenceError");
        } catch (const DivergenceError& e) {
            CHECK(e.step >= 0);
            CHECK(e.step < 60);
        }
    }
}

TEST_CASE("exponential Euler scheme") {
    const int n_modes = 4;
    DiagonalSemigroup sg = DiagonalSemigroup::natural(n_modes);
    TimeGrid grid(1.0, 256);
    DriverBundle driver = sample_driver(grid, n_modes, 17, 0);

    SUBCASE("with zero coefficients the path is the exact semigroup orbit") {
        CoefficientPair zero = state_coefficients(
            [n_modes](double, const Vec&) { return Vec(static_cast<std::size_t>(n_modes), 0.0); },
            [n_modes](double, const Vec&) { return Matrix(n_modes, n_modes); });
        Vec x0{1.0, -2.0, 3.0, 0.5};
        PathRecord x = exp_euler_mild(sg, zero, x0, driver);
        double worst = 0.0;
        for (int i = 0; i <= 256; ++i) {
            Vec expected = sg.apply(grid.time(i), x0);
            for (int k = 0; k < n_modes; ++k) worst = std::max(worst, std::abs(expected[k] - x.at(i)[k]));
        }
        CHECK(worst <= 1e-13);
    }
    SUBCASE("constant forcing of mode 1 approximates the convolution 1 - e^{-t}") {
        CoefficientPair forcing = state_coefficients(
            [n_modes](double, const Vec&) {
                Vec a(static_cast<std::size_t>(n_modes), 0.0);
                a[0] = 1.0;
                return a;
            },
            [n_modes](double, const Vec&) { return Matrix(n_modes, n_modes); });
        PathRecord x = exp_euler_mild(sg, forcing, Vec(static_cast<std::size_t>(n_modes), 0.0), driver);
        CHECK(std::abs(x.at(256)[0] - (1.0 - std::exp(-1.0))) <= 2.0 * grid.dt());
    }
    SUBCASE("the scheme is linear in the driver for constant sigma") {
        CoefficientPair additive = state_coefficients(
            [n_modes](double, const Vec&) { return Vec(static_cast<std::size_t>(n_modes), 0.0); },
            [n_modes](double, const Vec&) {
                Vec d(static_cast<std::size_t>(n_modes), 0.5);
                return Matrix::diagonal(d);
            });
        PathRecord x1 = exp_euler_mild(sg, additive, Vec(static_cast<std::size_t>(n_modes), 0.0), driver);
        DriverBundle doubled = driver;
        for (Vec& row : doubled.increments)
            for (double& v : row) v *= 2.0;
        PathRecord x2 = exp_euler_mild(sg, additive, Vec(static_cast<std::size_t>(n_modes), 0.0), doubled);
        double worst = 0.0;
        for (int i = 0; i <= 256; ++i)
            for (int k = 0; k < n_modes; ++k) worst = std::max(worst, std::abs(x2.at(i)[k] - 2.0 * x1.at(i)[k]));
        CHECK(worst <= 1e-12);
    }
    SUBCASE("the output satisfies the discrete mild identity") {
        CoefficientPair mixed = state_coefficients(
            [](double, const Vec& x) {
                Vec a(x.size());
                for (std::size_t c = 0; c < x.size(); ++c) a[c] = 0.3 - 0.5 * x[c];
                return a;
            },
            [n_modes](double, const Vec& x) {
                Vec d(x);
                for (double& v : d) v = 0.1 + 0.05 * std::sin(v);
                return Matrix::diagonal(d);
            });
        PathRecord x = exp_euler_mild(sg, mixed, Vec{0.4, 0.1, -0.2, 0.9}, driver);
        CHECK(mild_residual(sg, mixed, x, driver) <= 1e-10);
    }
}

TEST_CASE("solver paths have no lookahead: frozen-prefix recomputation") {
    const int n_modes = 2;
    DiagonalSemigroup sg = DiagonalSemigroup::natural(n_modes);
    TimeGrid grid(1.0, 64);
    DriverBundle driver = sample_driver(grid, n_modes, 5, 2);
    CoefficientPair coeffs = state_coefficients(
        [](double, const Vec& x) {
            Vec a(x.size());
            for (std::size_t c = 0; c < x.size(); ++c) a[c] = std::cos(x[c]);
            return a;
        },
        [](double, const Vec& x) {
            Vec d(x);
            for (double& v : d) v = 0.2 * std::tanh(v) + 0.1;
            return Matrix::diagonal(d);
        });
    PathRecord x = exp_euler_mild(sg, coeffs, Vec{0.3, -0.6}, driver);
    const double dt = grid.dt();
    for (int i : {0, 13, 40, 63}) {
        double t = grid.time(i);
        PathRecord frozen = prefix_freeze(x, t);
        Vec bracket = frozen.at(i);
        axpy(dt, coeffs.alpha(t, frozen), bracket);
        Matrix s = coeffs.sigma(t, frozen);
        const Vec& dw = driver.step(i);
        for (int r = 0; r < s.rows(); ++r)
            for (int c = 0; c < s.cols(); ++c) bracket[r] += s(r, c) * dw[c];
        Vec next = sg.apply(dt, bracket);
        for (int k = 0; k < n_modes; ++k) CHECK(next[k] == x.at(i + 1)[k]);
    }
}

TEST_CASE("discrete Ito sums") {
    TimeGrid grid(1.0, 16);
    DriverBundle driver = sample_driver(grid, 3, 12, 0);

    SUBCASE("zero integrand gives the zero path") {
        std::vector<Matrix> zeros(16, Matrix(3, 3));
        PathRecord out = discrete_ito(zeros, driver);
        CHECK(sup_distance(out, zero_path(grid, 3)) == 0.0);
    }
    SUBCASE("identity integrand accumulates the driver") {
        Vec ones(3, 1.0);
        std::vector<Matrix> ids(16, Matrix::diagonal(ones));
        PathRecord out = discrete_ito(ids, driver);
        PathRecord sums = cumulative_path(driver);
        CHECK(sup_distance(out, sums) <= 1e-15);
    }
    SUBCASE("shape mismatch is rejected") {
        std::vector<Matrix> bad(16, Matrix(3, 2));
        CHECK_THROWS_AS(discrete_ito(bad, driver), DimensionError);
        std::vector<Matrix> too_few(15, Matrix(3, 3));
        CHECK_THROWS_AS(discrete_ito(too_few, driver), DimensionError);
    }
}

TEST_CASE("Ito isometry holds within Monte Carlo error") {
    // deterministic time-varying integrand, E ||I(1)||^2 = sum_j ||M_j||_F^2 dt
    TimeGrid grid(1.0, 16);
    const int n_paths = 1 << 13;
    std::vector<Matrix> integrand;
    double predicted = 0.0;
    for (int j = 0; j < 16; ++j) {
        Matrix m(2, 2);
        m(0, 0) = std::cos(0.3 * j);
        m(0, 1) = 0.2;
        m(1, 1) = std::sin(0.2 * j) + 1.2;
        integrand.push_back(m);
        predicted += frobenius_norm(m) * frobenius_norm(m) * grid.dt();
    }
    double sum = 0.0, sumsq = 0.0;
    for (int p = 0; p < n_paths; ++p) {
        DriverBundle driver = sample_driver(grid, 2, 777, static_cast<std::uint64_t>(p));
        PathRecord out = discrete_ito(integrand, driver);
        double v = dot(out.at(16), out.at(16));
        sum += v;
        sumsq += v * v;
    }
    double mean = sum / n_paths;
    double se = std::sqrt((sumsq / n_paths - mean * mean) / n_paths);
    CHECK(std::abs(mean - predicted) <= 5.0 * se);
}

TEST_CASE("strong-order sanity under driver refinement") {
    // Lipschitz state-dependent coefficients; halving dt twice should shrink
    // the gap to the next refinement by at least 1.5 on average.
    const int n_paths = 32;
    const int fine_steps = 512;
    TimeGrid fine(1.0, fine_steps);
    CoefficientPair coeffs = state_coefficients(
        [](double, const Vec& x) {
            Vec a(x.size());
            for (std::size_t c = 0; c < x.size(); ++c) a[c] = std::sin(x[c]);
            return a;
        },
        [](double, const Vec& x) {
            Vec d(x);
            for (double& v : d) v = 0.4 * std::cos(v);
            return Matrix::diagonal(d);
        });
    Vec y0{0.5, -0.25};
    double gap_coarse = 0.0, gap_fine = 0.0;
    for (int p = 0; p < n_paths; ++p) {
        DriverBundle fine_driver = sample_driver(fine, 2, 31415, static_cast<std::uint64_t>(p));
        PathRecord y16 = euler_maruyama(coeffs, y0, coarsen_driver(fine_driver, 16));
        PathRecord y4 = euler_maruyama(coeffs, y0, coarsen_driver(fine_driver, 4));
        PathRecord y1 = euler_maruyama(coeffs, y0, fine_driver);
        double sup_a = 0.0, sup_b = 0.0;
        for (int i = 0; i <= fine_steps / 16; ++i) {
            Vec diff = y16.at(i);
            for (int c = 0; c < 2; ++c) diff[c] -= y4.at(i * 4)[c];
            sup_a = std::max(sup_a, norm(diff));
        }
        for (int i = 0; i <= fine_steps / 4; ++i) {
            Vec diff = y4.at(i);
            for (int c = 0; c < 2; ++c) diff[c] -= y1.at(i * 4)[c];
            sup_b = std::max(sup_b, norm(diff));
        }
        gap_coarse += sup_a;
        gap_fine += sup_b;
    }
    CHECK(gap_coarse / gap_fine >= 1.5);
}

TEST_CASE("solve dispatcher selects the scheme") {
    TimeGrid grid(1.0, 32);
    DiagonalSemigroup sg = DiagonalSemigroup::natural(1);
    DriverBundle driver = sample_driver(grid, 1, 2, 2);
    CoefficientPair decay = scalar_coefficients([](double y) { return -y; }, 0.0);
    SolveConfig cfg;
    cfg.grid = grid;
    cfg.initial = Vec{1.0};
    cfg.scheme = Scheme::euler_maruyama;
    PathRecord em = solve(cfg, decay, driver, sg);
    cfg.scheme = Scheme::exp_euler_mild;
    PathRecord ee = solve(cfg, decay, driver, sg);
    CHECK(em.at(32)[0] != ee.at(32)[0]);  // the mild scheme adds the semigroup factor
    CHECK(std::abs(em.at(32)[0] - std::exp(-1.0)) <= 2.0 * grid.dt());   // dY = -Y dt
    CHECK(std::abs(ee.at(32)[0] - std::exp(-2.0)) <= 2.0 * grid.dt());   // dX = (A X - X) dt, A = -1
}
