#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "framelab/core.hpp"
#include "framelab/moving_frame.hpp"
#include "framelab/noise.hpp"
#include "framelab/solvers.hpp"
#include "framelab/spaces.hpp"

namespace framelab {

// Sign convention with sgn(0) = -1; the asymmetry at zero is what breaks the
// exact sign-flip identity only on the null set of exact-zero states.
inline double sgn(double x) { return x > 0.0 ? 1.0 : -1.0; }

// Infinite-dimensional Tanaka equation, truncated to n_modes:
//   dX = A X dt + sigma(X) dW,  X(0) = 0,
// with A = diag(-k) and sigma(h) = diag(sgn(h_k)/k).
struct TanakaConfig {
    int n_modes = 4;
    TimeGrid grid{1.0, 1024};
    int n_paths = 1000;
    std::uint64_t seed = 1;
};

struct TanakaPaths {
    PathRecord x;  // state path, mode k solves the k-th scalar Tanaka dynamics
    PathRecord b;  // accumulated sign-integral; a Q-Wiener process in law
    DriverBundle driver;
};

// Componentwise exponential Euler recursion
//   X^k_{i+1} = e^{-k dt} ( X^k_i + (1/k) sgn(X^k_i) dbeta^k_i ),
//   B^k_{i+1} = B^k_i + (1/k) sgn(X^k_i) dbeta^k_i.
// The stiff factor e^{-k dt} keeps high modes stable at moderate dt.
inline TanakaPaths tanaka_simulate_with_driver(const TanakaConfig& cfg, DriverBundle driver) {
    if (!cfg.grid.same_as(driver.grid) || driver.n_modes != cfg.n_modes)
        throw DimensionError("tanaka_simulate_with_driver: driver does not match the configuration");
    TanakaPaths out;
    out.driver = std::move(driver);
    out.x = zero_path(cfg.grid, cfg.n_modes);
    out.b = zero_path(cfg.grid, cfg.n_modes);
    const double dt = cfg.grid.dt();
    Vec decay(static_cast<std::size_t>(cfg.n_modes));
    for (int k = 0; k < cfg.n_modes; ++k) decay[k] = std::exp(-(k + 1.0) * dt);
    for (int i = 0; i < cfg.grid.n_steps(); ++i) {
        const Vec& dw = out.driver.step(i);
        for (int k = 0; k < cfg.n_modes; ++k) {
            double rate = k + 1.0;
            double xk = out.x.at(i)[k];
            double db = sgn(xk) / rate * dw[k];
            out.x.at(i + 1)[k] = decay[k] * (xk + db);
            out.b.at(i + 1)[k] = out.b.at(i)[k] + db;
        }
    }
    return out;
}

inline TanakaPaths tanaka_simulate(const TanakaConfig& cfg, std::uint64_t stream_id) {
    return tanaka_simulate_with_driver(cfg, sample_driver(cfg.grid, cfg.n_modes, cfg.seed, stream_id));
}

struct SignFlipResidual {
    double defect = 0.0;
    long excluded = 0;  // steps with an exact-zero state, where sgn is asymmetric
    long total = 0;
};

// Defect of -X in the same recursion driven by the same increments. Away from
// exact zeros, sgn(-x) = -sgn(x) makes the flipped recursion identical, so the
// defect vanishes even in floating point (negation is exact).
inline SignFlipResidual signflip_residual(const PathRecord& x, const DriverBundle& driver) {
    if (!x.grid.same_as(driver.grid)) throw DimensionError("signflip_residual: grid mismatch");
    SignFlipResidual r;
    const double dt = x.grid.dt();
    for (int k = 0; k < x.dim(); ++k) {
        double rate = k + 1.0;
        double decay = std::exp(-rate * dt);
        for (int i = 0; i < x.grid.n_steps(); ++i) {
            ++r.total;
            double xk = x.at(i)[k];
            if (xk == 0.0) {
                ++r.excluded;
                continue;
            }
            double flipped_next = decay * (-xk + sgn(-xk) / rate * driver.step(i)[k]);
            r.defect = std::max(r.defect, std::abs(-x.at(i + 1)[k] - flipped_next));
        }
    }
    return r;
}

// Reconstruction X = Phi(B) through integration by parts:
//   X^k(t) = B^k(t) - k e^{-kt} int_0^t e^{ks} B^k(s) ds,
// with the time integral evaluated by the trapezoidal rule on the grid. This
// realizes the measurable solution map B -> X concretely.
inline PathRecord tanaka_phi_reconstruct(const PathRecord& b) {
    b.validate();
    PathRecord out = zero_path(b.grid, b.dim());
    const double dt = b.grid.dt();
    for (int k = 0; k < b.dim(); ++k) {
        double rate = k + 1.0;
        double integral = 0.0;
        out.at(0)[k] = b.at(0)[k];
        for (int i = 1; i < b.grid.n_points(); ++i) {
            double t0 = b.grid.time(i - 1);
            double t1 = b.grid.time(i);
            integral += 0.5 * dt * (std::exp(rate * t0) * b.at(i - 1)[k] + std::exp(rate * t1) * b.at(i)[k]);
            out.at(i)[k] = b.at(i)[k] - rate * std::exp(-rate * t1) * integral;
        }
    }
    return out;
}

struct LawTestReport {
    double statistic = 0.0;
    double threshold = 0.0;
    double alpha = 0.0;
    std::size_t n_a = 0;
    std::size_t n_b = 0;
    bool pass = false;
};

// Two-sample Kolmogorov-Smirnov test with the large-sample threshold
//   c(alpha) sqrt((n_a + n_b) / (n_a n_b)),  c(alpha) = sqrt(-ln(alpha/2)/2).
inline LawTestReport ks_two_sample(Vec a, Vec b, double alpha_level) {
    if (a.size() < 100 || b.size() < 100)
        throw PreconditionError("ks_two_sample: need at least 100 samples per side");
    if (!(alpha_level > 0.0 && alpha_level < 1.0)) throw DomainError("ks_two_sample: alpha must be in (0,1)");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        double va = a[i];
        double vb = b[j];
        if (va <= vb) ++i;
        if (vb <= va) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    LawTestReport r;
    r.statistic = d;
    r.alpha = alpha_level;
    r.n_a = a.size();
    r.n_b = b.size();
    r.threshold = std::sqrt(-0.5 * std::log(alpha_level / 2.0)) * std::sqrt((na + nb) / (na * nb));
    r.pass = d <= r.threshold;
    return r;
}

struct LawFlipResult {
    LawTestReport flip;            // X^1(t_end) against -X'^1(t_end), independent drivers
    LawTestReport reconstruction;  // X^1(t_end) against Phi(B)^1(t_end), same paths
    bool pass() const { return flip.pass && reconstruction.pass; }
};

// Marginal operationalization of uniqueness in law: the terminal law of the
// first mode must match its sign-flipped copy from independent drivers, and
// the functional reconstruction from B must reproduce it.
inline LawFlipResult law_flip_test(const TanakaConfig& cfg, double alpha_level) {
    Vec direct(static_cast<std::size_t>(cfg.n_paths));
    Vec reconstructed(static_cast<std::size_t>(cfg.n_paths));
    Vec mirrored(static_cast<std::size_t>(cfg.n_paths));
    for (int p = 0; p < cfg.n_paths; ++p) {
        TanakaPaths paths = tanaka_simulate(cfg, static_cast<std::uint64_t>(p));
        direct[p] = paths.x.at(cfg.grid.n_steps())[0];
        reconstructed[p] = tanaka_phi_reconstruct(paths.b).at(cfg.grid.n_steps())[0];
        TanakaPaths other = tanaka_simulate(cfg, static_cast<std::uint64_t>(cfg.n_paths + p));
        mirrored[p] = -other.x.at(cfg.grid.n_steps())[0];
    }
    LawFlipResult result;
    result.flip = ks_two_sample(direct, mirrored, alpha_level);
    result.reconstruction = ks_two_sample(direct, reconstructed, alpha_level);
    return result;
}

struct PathwiseDemoResult {
    double escape_probability = 0.0;  // P( sup_t 2 |X^1(t)| > threshold )
    double flip_defect = 0.0;
    long flip_excluded = 0;
    long flip_total = 0;
    bool degenerate = false;  // every step excluded (zero driver)
    bool pass = false;
};

// Pathwise non-uniqueness demo: with the same driver, -X solves the same
// recursion (zero flip residual away from exact zeros) while the paths
// themselves are far apart with high probability.
inline PathwiseDemoResult pathwise_nonuniqueness_demo(const TanakaConfig& cfg, double threshold = 0.1,
                                                      double prob_min = 0.9) {
    PathwiseDemoResult result;
    long exceed = 0;
    for (int p = 0; p < cfg.n_paths; ++p) {
        TanakaPaths paths = tanaka_simulate(cfg, static_cast<std::uint64_t>(p));
        double sup = 0.0;
        for (int i = 0; i <= cfg.grid.n_steps(); ++i) sup = std::max(sup, std::abs(paths.x.at(i)[0]));
        if (2.0 * sup > threshold) ++exceed;
        SignFlipResidual flip = signflip_residual(paths.x, paths.driver);
        result.flip_defect = std::max(result.flip_defect, flip.defect);
        result.flip_excluded += flip.excluded;
        result.flip_total += flip.total;
    }
    result.escape_probability = static_cast<double>(exceed) / cfg.n_paths;
    result.degenerate = result.flip_excluded == result.flip_total;
    result.pass = result.flip_defect == 0.0 && (result.degenerate || result.escape_probability >= prob_min);
    return result;
}

// Progressively measurable state-dependent coefficients (t, x) -> (H, L2).
struct StateCoefficients {
    std::function<Vec(double, const Vec&)> alpha;
    std::function<Matrix(double, const Vec&)> sigma;
};

struct CertificateResult {
    double max_defect = 0.0;
    double tolerance = 1e-9;
    bool pass = false;
};

// Monotonicity certificate: samples pairs ||x||, ||y|| <= radius and times,
// and checks
//   2 <x-y, alpha(t,x) - alpha(t,y)> + ||sigma(t,x) - sigma(t,y)||_HS^2
//     <= L(t, radius) ||x-y||^2
// up to the stated tolerance. When time_step is positive the sampled times
// are snapped to that grid; coefficients transported by a gridded shift group
// are only defined there.
inline CertificateResult monotone_certificate(const StateCoefficients& coeffs,
                                              const std::function<double(double, double)>& lipschitz, int n_samples,
                                              double radius, int dim, double t_max, std::uint64_t seed,
                                              double weight = 1.0, double time_step = 0.0) {
    GaussianStream g(seed, 0x6d6f6e6fu);
    SplitMix64 u(derive_stream_state(seed, 0x63657274u));
    CertificateResult result;
    auto sample_ball = [&](bool boundary) {
        Vec x(static_cast<std::size_t>(dim));
        for (int c = 0; c < dim; ++c) x[static_cast<std::size_t>(c)] = g.next();
        double n2 = norm(x, weight);
        double target = boundary ? radius : radius * u.uniform();
        if (n2 > 0.0)
            for (double& v : x) v *= target / n2;
        return x;
    };
    for (int s = 0; s < n_samples; ++s) {
        double t = t_max * u.uniform();
        if (time_step > 0.0) t = std::min(t_max, std::round(t / time_step) * time_step);
        Vec x = sample_ball(s % 4 == 0);
        Vec y = sample_ball(s % 4 == 1);
        Vec ax = coeffs.alpha(t, x);
        Vec ay = coeffs.alpha(t, y);
        Matrix sx = coeffs.sigma(t, x);
        Matrix sy = coeffs.sigma(t, y);
        Vec dxy(x.size());
        for (std::size_t c = 0; c < x.size(); ++c) dxy[c] = x[c] - y[c];
        Vec da(ax.size());
        for (std::size_t c = 0; c < ax.size(); ++c) da[c] = ax[c] - ay[c];
        double hs2 = 0.0;
        for (std::size_t c = 0; c < sx.raw().size(); ++c) {
            double d = sx.raw()[c] - sy.raw()[c];
            hs2 += d * d;
        }
        hs2 *= weight;
        double defect = 2.0 * dot(dxy, da, weight) + hs2 - lipschitz(t, radius) * dot(dxy, dxy, weight);
        result.max_defect = std::max(result.max_defect, defect);
    }
    result.pass = result.max_defect <= result.tolerance;
    return result;
}

// Coefficients transported by a unitary group:
//   alpha_bar(t, x) = U_t^* alpha(t, U_t x),  sigma_bar(t, x) = U_t^* sigma(t, U_t x).
// Unitarity makes the monotonicity constant carry over unchanged.
template <class Group>
StateCoefficients transported_state_coefficients(const Group& group, const StateCoefficients& coeffs) {
    StateCoefficients out;
    out.alpha = [&group, coeffs](double t, const Vec& x) { return group.apply(-t, coeffs.alpha(t, group.apply(t, x))); };
    out.sigma = [&group, coeffs](double t, const Vec& x) {
        Matrix s = coeffs.sigma(t, group.apply(t, x));
        Matrix outm(s.rows(), s.cols());
        for (int j = 0; j < s.cols(); ++j) outm.set_column(j, group.apply(-t, s.column(j)));
        return outm;
    };
    return out;
}

struct IdentityGroup {
    Vec apply(double, const Vec& v) const { return v; }
};

struct GronwallReport {
    double lipschitz = 0.0;
    double eps = 0.0;
    Vec times;
    Vec mean_sq_gap;
    Vec bound;  // eps^2 e^{L t}
    double max_ratio = 0.0;
    double identical_gap = 0.0;
    double certificate_defect = 0.0;
    double transported_certificate_defect = 0.0;
    bool pass = false;
};

// Gronwall stability run for a certified monotone pair: two Euler solves with
// the same driver, started eps apart, must keep the mean-square gap under
// 1.1 eps^2 e^{L t}; identical starts must coincide.
template <class Group>
GronwallReport gronwall_gap_experiment(const StateCoefficients& coeffs, const Group& group, double lipschitz,
                                       double radius, int certificate_samples, const Vec& y0, const Vec& gap_dir,
                                       double eps, const TimeGrid& grid, int n_paths, int n_driver_modes,
                                       std::uint64_t seed, double weight = 1.0) {
    auto l_fn = [lipschitz](double, double) { return lipschitz; };
    const int dim = static_cast<int>(y0.size());
    CertificateResult cert =
        monotone_certificate(coeffs, l_fn, certificate_samples, radius, dim, grid.t_end(), seed, weight);
    if (!cert.pass)
        throw PreconditionError("gronwall_gap_experiment: monotonicity certificate failed (max defect " +
                                std::to_string(cert.max_defect) + ")");
    StateCoefficients transported = transported_state_coefficients(group, coeffs);
    CertificateResult cert_t = monotone_certificate(transported, l_fn, certificate_samples, radius, dim, grid.t_end(),
                                                    seed + 1, weight, grid.dt());

    CoefficientPair pair = state_coefficients(transported.alpha, transported.sigma);

    GronwallReport report;
    report.lipschitz = lipschitz;
    report.eps = eps;
    report.certificate_defect = cert.max_defect;
    report.transported_certificate_defect = cert_t.max_defect;
    report.times.resize(static_cast<std::size_t>(grid.n_points()));
    report.bound.resize(static_cast<std::size_t>(grid.n_points()));
    report.mean_sq_gap.assign(static_cast<std::size_t>(grid.n_points()), 0.0);
    for (int i = 0; i < grid.n_points(); ++i) {
        report.times[i] = grid.time(i);
        report.bound[i] = eps * eps * std::exp(lipschitz * grid.time(i));
    }

    Vec y0_shifted = y0;
    double gn = norm(gap_dir, weight);
    if (!(gn > 0.0)) throw PreconditionError("gronwall_gap_experiment: gap direction must be nonzero");
    for (std::size_t c = 0; c < y0_shifted.size(); ++c) y0_shifted[c] += eps * gap_dir[c] / gn;

    for (int p = 0; p < n_paths; ++p) {
        DriverBundle driver = sample_driver(grid, n_driver_modes, seed, static_cast<std::uint64_t>(p));
        PathRecord a = euler_maruyama(pair, y0, driver, weight);
        if (p == 0) {
            PathRecord a2 = euler_maruyama(pair, y0, driver, weight);
            report.identical_gap = sup_distance(a, a2);
        }
        PathRecord b = euler_maruyama(pair, y0_shifted, driver, weight);
        for (int i = 0; i < grid.n_points(); ++i) {
            Vec diff = a.at(i);
            for (std::size_t c = 0; c < diff.size(); ++c) diff[c] -= b.at(i)[c];
            double d = norm(diff, weight);
            report.mean_sq_gap[i] += d * d;
        }
    }
    for (double& v : report.mean_sq_gap) v /= n_paths;

    report.max_ratio = 0.0;
    for (int i = 0; i < grid.n_points(); ++i) {
        double ratio = report.bound[i] > 0.0 ? report.mean_sq_gap[i] / report.bound[i]
                                             : (report.mean_sq_gap[i] == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
        report.max_ratio = std::max(report.max_ratio, ratio);
    }
    report.pass = report.max_ratio <= 1.1 && report.identical_gap <= 1e-12 && cert_t.pass;
    return report;
}

}  // namespace framelab
