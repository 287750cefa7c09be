#include <doctest.h>

#include <cmath>

#include "framelab/semigroups.hpp"
#include "framelab/solvers.hpp"
#include "framelab/uniqueness_lab.hpp"

using namespace framelab;

TEST_CASE("sign convention") {
    CHECK(sgn(0.0) == -1.0);
    CHECK(sgn(3.2) == 1.0);
    CHECK(sgn(-1e-300) == -1.0);
    CHECK(sgn(1e-300) == 1.0);
}

namespace {

// independent oracle for E[X^k(t)^2]: (e^{-2kt}/k^2) int_0^t e^{2ks} ds by
// Simpson quadrature, cross-checked against the closed form
double moment_oracle_quadrature(double rate, double t, int n = 2000) {
    double h = t / n;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        double a = i * h, b2 = (i + 1) * h, mid = a + 0.5 * h;
        acc += h / 6.0 * (std::exp(2.0 * rate * a) + 4.0 * std::exp(2.0 * rate * mid) + std::exp(2.0 * rate * b2));
    }
    return std::exp(-2.0 * rate * t) / (rate * rate) * acc;
}

}  // namespace

TEST_CASE("moment oracle quadrature agrees with the closed form") {
    for (int k = 1; k <= 4; ++k)
        for (double t : {0.5, 1.0}) {
            double closed = (1.0 - std::exp(-2.0 * k * t)) / (2.0 * k * k * k);
            CHECK(moment_oracle_quadrature(k, t) == doctest::Approx(closed).epsilon(1e-10));
        }
}

TEST_CASE("tanaka simulation basics") {
    TanakaConfig cfg;
    cfg.n_modes = 3;
    cfg.grid = TimeGrid(1.0, 256);
    cfg.seed = 77;

    SUBCASE("zero driver keeps both processes at zero") {
        DriverBundle z = sample_driver(cfg.grid, cfg.n_modes, cfg.seed, 0);
        for (Vec& row : z.increments) row.assign(row.size(), 0.0);
        TanakaPaths p = tanaka_simulate_with_driver(cfg, z);
        CHECK(sup_distance(p.x, zero_path(cfg.grid, 3)) == 0.0);
        CHECK(sup_distance(p.b, zero_path(cfg.grid, 3)) == 0.0);
    }
    SUBCASE("the recursion matches the generic mild solver with sign coefficients") {
        TanakaPaths p = tanaka_simulate(cfg, 5);
        DiagonalSemigroup sg = DiagonalSemigroup::natural(cfg.n_modes);
        CoefficientPair sign_coeffs = state_coefficients(
            [&](double, const Vec& x) { return Vec(x.size(), 0.0); },
            [&](double, const Vec& x) {
                Vec d(x.size());
                for (std::size_t k = 0; k < x.size(); ++k) d[k] = sgn(x[k]) / (k + 1.0);
                return Matrix::diagonal(d);
            });
        PathRecord via_solver = exp_euler_mild(sg, sign_coeffs, Vec(3, 0.0), p.driver);
        CHECK(sup_distance(via_solver, p.x) == 0.0);
    }
    SUBCASE("second moments sit inside the oracle band") {
        const int n_paths = 2000;
        Vec sum(3, 0.0), sumsq(3, 0.0);
        for (int p = 0; p < n_paths; ++p) {
            TanakaPaths paths = tanaka_simulate(cfg, static_cast<std::uint64_t>(p));
            for (int k = 0; k < 3; ++k) {
                double v = paths.x.at(256)[k] * paths.x.at(256)[k];
                sum[k] += v;
                sumsq[k] += v * v;
            }
        }
        for (int k = 0; k < 3; ++k) {
            double mean = sum[k] / n_paths;
            double se = std::sqrt((sumsq[k] / n_paths - mean * mean) / n_paths);
            double oracle = moment_oracle_quadrature(k + 1.0, 1.0);
            CHECK(std::abs(mean - oracle) <= 4.0 * se + 5.0 * cfg.grid.dt());
        }
    }
    SUBCASE("Var(B^k(t)) = t / k^2 within Monte Carlo error") {
        const int n_paths = 2000;
        Vec sum(3, 0.0), sumsq(3, 0.0);
        for (int p = 0; p < n_paths; ++p) {
            TanakaPaths paths = tanaka_simulate(cfg, static_cast<std::uint64_t>(p) + 50000);
            for (int k = 0; k < 3; ++k) {
                double v = paths.b.at(256)[k];
                sum[k] += v * v;
                sumsq[k] += v * v * v * v;
            }
        }
        for (int k = 0; k < 3; ++k) {
            double mean = sum[k] / n_paths;
            double se = std::sqrt((sumsq[k] / n_paths - mean * mean) / n_paths);
            CHECK(std::abs(mean - 1.0 / ((k + 1.0) * (k + 1.0))) <= 5.0 * se);
        }
    }
}

TEST_CASE("sign flip residual") {
    TanakaConfig cfg;
    cfg.n_modes = 2;
    cfg.grid = TimeGrid(1.0, 512);
    cfg.seed = 31;

    SUBCASE("the flipped path solves the same recursion exactly") {
        for (std::uint64_t s = 0; s < 20; ++s) {
            TanakaPaths p = tanaka_simulate(cfg, s);
            SignFlipResidual r = signflip_residual(p.x, p.driver);
            CHECK(r.defect == 0.0);
            CHECK(r.excluded >= cfg.n_modes);  // the start X(0) = 0 is always excluded
        }
    }
    SUBCASE("zero driver: everything is excluded, defect reported as zero") {
        DriverBundle z = sample_driver(cfg.grid, cfg.n_modes, cfg.seed, 0);
        for (Vec& row : z.increments) row.assign(row.size(), 0.0);
        TanakaPaths p = tanaka_simulate_with_driver(cfg, z);
        SignFlipResidual r = signflip_residual(p.x, p.driver);
        CHECK(r.defect == 0.0);
        CHECK(r.excluded == r.total);
    }
    SUBCASE("a perturbed driver is detected") {
        TanakaPaths p = tanaka_simulate(cfg, 3);
        p.driver.increments[100][0] += 0.5;
        SignFlipResidual r = signflip_residual(p.x, p.driver);
        CHECK(r.defect > 0.0);
    }
}

TEST_CASE("reconstruction through integration by parts") {
    SUBCASE("zero input reconstructs to zero") {
        TimeGrid grid(1.0, 128);
        PathRecord zero = zero_path(grid, 2);
        CHECK(sup_distance(tanaka_phi_reconstruct(zero), zero) == 0.0);
    }
    SUBCASE("deterministic ramp input matches the hand-computed value") {
        // B(s) = s, k = 1: X(1) = 1 - e^{-1} int_0^1 e^s s ds = 1 - e^{-1}
        TimeGrid grid(1.0, 1024);
        PathRecord ramp = zero_path(grid, 1);
        for (int i = 0; i <= 1024; ++i) ramp.at(i)[0] = grid.time(i);
        PathRecord rec = tanaka_phi_reconstruct(ramp);
        // oracle via quadrature of int_0^1 e^s s ds
        double q = 0.0;
        int n = 4000;
        for (int i = 0; i < n; ++i) {
            double a = i / static_cast<double>(n), b = (i + 1) / static_cast<double>(n), mid = 0.5 * (a + b);
            q += (b - a) / 6.0 * (a * std::exp(a) + 4.0 * mid * std::exp(mid) + b * std::exp(b));
        }
        double oracle = 1.0 - std::exp(-1.0) * q;
        CHECK(rec.at(1024)[0] == doctest::Approx(oracle).epsilon(1e-6));
        CHECK(rec.at(1024)[0] == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-6));
    }
    SUBCASE("reconstruction error shrinks under grid refinement") {
        const int n_paths = 16;
        double coarse_mean = 0.0, fine_mean = 0.0;
        for (int p = 0; p < n_paths; ++p) {
            TanakaConfig fine_cfg;
            fine_cfg.n_modes = 2;
            fine_cfg.grid = TimeGrid(1.0, 2048);
            fine_cfg.seed = 11;
            DriverBundle fine_driver = sample_driver(fine_cfg.grid, 2, 11, static_cast<std::uint64_t>(p));
            TanakaConfig coarse_cfg = fine_cfg;
            coarse_cfg.grid = TimeGrid(1.0, 1024);
            auto sup_err = [](const TanakaPaths& paths) {
                PathRecord rec = tanaka_phi_reconstruct(paths.b);
                double worst = 0.0;
                for (int i = 0; i < paths.x.grid.n_points(); ++i)
                    for (int k = 0; k < paths.x.dim(); ++k)
                        worst = std::max(worst, std::abs(paths.x.at(i)[k] - rec.at(i)[k]));
                return worst;
            };
            fine_mean += sup_err(tanaka_simulate_with_driver(fine_cfg, fine_driver));
            coarse_mean += sup_err(tanaka_simulate_with_driver(coarse_cfg, coarsen_driver(fine_driver, 2)));
        }
        CHECK(fine_mean < coarse_mean);
    }
}

TEST_CASE("two-sample Kolmogorov-Smirnov") {
    SUBCASE("identical samples pass with statistic zero") {
        Vec a(200);
        for (int i = 0; i < 200; ++i) a[i] = std::sin(i * 0.7);
        LawTestReport r = ks_two_sample(a, a, 0.001);
        CHECK(r.statistic == 0.0);
        CHECK(r.pass);
    }
    SUBCASE("disjointly shifted uniforms fail decisively") {
        SplitMix64 u(9);
        Vec a(1000), b(1000);
        for (int i = 0; i < 1000; ++i) {
            a[i] = u.uniform();
            b[i] = 0.5 + u.uniform();
        }
        LawTestReport r = ks_two_sample(a, b, 0.001);
        CHECK(r.statistic > 0.4);
        CHECK_FALSE(r.pass);
    }
    SUBCASE("same-law independent samples pass (seeded)") {
        GaussianStream g(123, 0), h(123, 1);
        Vec a(2000), b(2000);
        for (int i = 0; i < 2000; ++i) {
            a[i] = g.next();
            b[i] = h.next();
        }
        LawTestReport r = ks_two_sample(a, b, 0.001);
        CHECK(r.pass);
        Vec shifted = b;
        for (double& v : shifted) v += 0.5;
        CHECK_FALSE(ks_two_sample(a, shifted, 0.001).pass);
    }
    SUBCASE("threshold constant matches c(0.001) ~ 1.95") {
        Vec a(100, 0.0), b(100, 0.0);
        for (int i = 0; i < 100; ++i) {
            a[i] = i;
            b[i] = i + 0.25;
        }
        LawTestReport r = ks_two_sample(a, b, 0.001);
        double c = r.threshold / std::sqrt((100.0 + 100.0) / (100.0 * 100.0));
        CHECK(c == doctest::Approx(1.9495).epsilon(1e-3));
    }
    SUBCASE("tiny samples are rejected") {
        Vec a(50, 0.0), b(200, 0.0);
        CHECK_THROWS_AS(ks_two_sample(a, b, 0.001), PreconditionError);
    }
}

TEST_CASE("law flip test at small scale") {
    TanakaConfig cfg;
    cfg.n_modes = 1;
    cfg.grid = TimeGrid(1.0, 256);
    cfg.n_paths = 400;
    cfg.seed = 2024;
    LawFlipResult r = law_flip_test(cfg, 0.001);
    CHECK(r.flip.pass);
    CHECK(r.reconstruction.pass);
    CHECK(r.flip.n_a == 400);
    // a deliberately biased sample fails the same comparison
    Vec direct(400), biased(400);
    for (int p = 0; p < 400; ++p) {
        TanakaPaths paths = tanaka_simulate(cfg, static_cast<std::uint64_t>(p));
        direct[p] = paths.x.at(256)[0];
        biased[p] = direct[p] + 0.5;
    }
    CHECK_FALSE(ks_two_sample(direct, biased, 0.001).pass);
}

TEST_CASE("pathwise non-uniqueness demo") {
    TanakaConfig cfg;
    cfg.n_modes = 1;
    cfg.grid = TimeGrid(1.0, 256);
    cfg.n_paths = 200;
    cfg.seed = 5;
    SUBCASE("sign flip holds while paths escape") {
        PathwiseDemoResult r = pathwise_nonuniqueness_demo(cfg);
        CHECK(r.pass);
        CHECK(r.flip_defect == 0.0);
        CHECK(r.escape_probability >= 0.9);
        CHECK_FALSE(r.degenerate);
    }
    SUBCASE("an absurd threshold inverts the probability") {
        PathwiseDemoResult r = pathwise_nonuniqueness_demo(cfg, 1e9, 0.9);
        CHECK(r.escape_probability == 0.0);
        CHECK_FALSE(r.pass);
    }
}

TEST_CASE("monotonicity certificate on the three reference families") {
    auto const_l = [](double l) { return [l](double, double) { return l; }; };

    StateCoefficients contraction;
    contraction.alpha = [](double, const Vec& x) {
        Vec a(x.size());
        for (std::size_t c = 0; c < x.size(); ++c) a[c] = -x[c];
        return a;
    };
    contraction.sigma = [](double, const Vec& x) { return Matrix(static_cast<int>(x.size()), 1); };
    CHECK(monotone_certificate(contraction, const_l(0.0), 256, 2.0, 3, 1.0, 5).pass);

    StateCoefficients expansion;
    expansion.alpha = [](double, const Vec& x) { return x; };
    expansion.sigma = [](double, const Vec& x) { return Matrix(static_cast<int>(x.size()), 1); };
    CHECK(monotone_certificate(expansion, const_l(2.0), 256, 2.0, 3, 1.0, 5).pass);
    CHECK_FALSE(monotone_certificate(expansion, const_l(1.0), 256, 2.0, 3, 1.0, 5).pass);

    StateCoefficients multiplicative;
    multiplicative.alpha = [](double, const Vec& x) { return Vec(x.size(), 0.0); };
    multiplicative.sigma = [](double, const Vec& x) {
        Matrix m(1, 1);
        m(0, 0) = x[0];
        return m;
    };
    CHECK(monotone_certificate(multiplicative, const_l(1.0), 256, 2.0, 1, 1.0, 5).pass);
}

TEST_CASE("gronwall gap experiment") {
    TimeGrid grid(1.0, 128);
    IdentityGroup id;
    StateCoefficients contraction;
    contraction.alpha = [](double, const Vec& x) {
        Vec a(x.size());
        for (std::size_t c = 0; c < x.size(); ++c) a[c] = -x[c];
        return a;
    };
    Vec sig{0.3, 0.2};
    contraction.sigma = [sig](double, const Vec&) { return Matrix::diagonal(sig); };
    Vec y0{0.5, -0.5};
    Vec dir{1.0, 0.0};

    SUBCASE("eps = 0 keeps the gap at zero") {
        GronwallReport r = gronwall_gap_experiment(contraction, id, 0.0, 2.0, 128, y0, dir, 0.0, grid, 8, 2, 7);
        CHECK(r.max_ratio == 0.0);
        CHECK(r.identical_gap == 0.0);
        CHECK(r.pass);
    }
    SUBCASE("contraction: the mean-square gap never grows") {
        GronwallReport r = gronwall_gap_experiment(contraction, id, 0.0, 2.0, 128, y0, dir, 0.1, grid, 16, 2, 7);
        CHECK(r.pass);
        for (std::size_t i = 1; i < r.mean_sq_gap.size(); ++i) CHECK(r.mean_sq_gap[i] <= r.mean_sq_gap[i - 1] + 1e-15);
    }
    SUBCASE("an uncertified pair is refused") {
        StateCoefficients expansion;
        expansion.alpha = [](double, const Vec& x) { return x; };
        expansion.sigma = [sig](double, const Vec&) { return Matrix::diagonal(sig); };
        CHECK_THROWS_AS(gronwall_gap_experiment(expansion, id, 1.0, 2.0, 128, y0, dir, 0.1, grid, 8, 2, 7),
                        PreconditionError);
    }
}
