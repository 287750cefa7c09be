#pragma once

#include <cmath>
#include <string>
#include <utility>

#include "framelab/core.hpp"
#include "framelab/moving_frame.hpp"
#include "framelab/noise.hpp"
#include "framelab/spaces.hpp"

namespace framelab {

inline constexpr double default_divergence_guard = 1e9;

enum class Scheme { euler_maruyama, exp_euler_mild };

struct SolveConfig {
    TimeGrid grid;
    Scheme scheme = Scheme::euler_maruyama;
    Vec initial;
};

namespace detail {

inline void check_state(const Vec& y, double guard, int step) {
    if (!all_finite(y) || norm(y) > guard)
        throw DivergenceError("solver state left the admissible region", step);
}

}  // namespace detail

// Explicit Euler scheme for path-dependent SDEs:
//   Y(t_{i+1}) = Y(t_i) + alpha(t_i, Y^{(i)}) dt + sigma(t_i, Y^{(i)}) dW_i.
// Coefficients must be adapted (see adaptedness_defect); the path handed to
// the evaluators is correct on [0, t_i] and an adapted evaluator never reads
// beyond that.
inline PathRecord euler_maruyama(const CoefficientPair& coeffs, const Vec& y0, const DriverBundle& driver,
                                 double weight = 1.0, double guard = default_divergence_guard) {
    const TimeGrid& grid = driver.grid;
    const double dt = grid.dt();
    PathRecord y = constant_path(grid, y0, weight);
    for (int i = 0; i < grid.n_steps(); ++i) {
        double t = grid.time(i);
        Vec next = y.at(i);
        axpy(dt, coeffs.alpha(t, y), next);
        Matrix s = coeffs.sigma(t, y);
        if (s.cols() != driver.n_modes) throw DimensionError("euler_maruyama: diffusion columns != driver modes");
        if (s.rows() != static_cast<int>(next.size())) throw DimensionError("euler_maruyama: diffusion rows != state dim");
        const Vec& dw = driver.step(i);
        for (int r = 0; r < s.rows(); ++r) {
            double acc = 0.0;
            for (int j = 0; j < s.cols(); ++j) acc += s(r, j) * dw[static_cast<std::size_t>(j)];
            next[static_cast<std::size_t>(r)] += acc;
        }
        detail::check_state(next, guard, i);
        y.at(i + 1) = std::move(next);
    }
    return y;
}

// Exponential Euler scheme for the mild form:
//   X(t_{i+1}) = S_dt [ X(t_i) + alpha(t_i, X^{(i)}) dt + sigma(t_i, X^{(i)}) dW_i ].
// The full-step factor on the whole bracket makes the scheme unroll exactly to
// the discrete variation-of-constants formula with left-endpoint kernels
// S_{t_{i+1} - t_j}; see mild_residual.
template <class Semigroup>
PathRecord exp_euler_mild(const Semigroup& sg, const CoefficientPair& coeffs, const Vec& x0,
                          const DriverBundle& driver, double weight = 1.0,
                          double guard = default_divergence_guard) {
    const TimeGrid& grid = driver.grid;
    const double dt = grid.dt();
    PathRecord x = constant_path(grid, x0, weight);
    for (int i = 0; i < grid.n_steps(); ++i) {
        double t = grid.time(i);
        Vec bracket = x.at(i);
        axpy(dt, coeffs.alpha(t, x), bracket);
        Matrix s = coeffs.sigma(t, x);
        if (s.cols() != driver.n_modes) throw DimensionError("exp_euler_mild: diffusion columns != driver modes");
        const Vec& dw = driver.step(i);
        for (int r = 0; r < s.rows(); ++r) {
            double acc = 0.0;
            for (int j = 0; j < s.cols(); ++j) acc += s(r, j) * dw[static_cast<std::size_t>(j)];
            bracket[static_cast<std::size_t>(r)] += acc;
        }
        Vec next = sg.apply(dt, bracket);
        detail::check_state(next, guard, i);
        x.at(i + 1) = std::move(next);
    }
    return x;
}

// Adapter so a frame group can serve as the semigroup of the lifted equation.
template <MovingFrameModel Frame>
struct FrameGroupSemigroup {
    const Frame* frame;
    Vec apply(double t, const Vec& v) const {
        if (t < 0.0) throw DomainError("FrameGroupSemigroup: t must be nonnegative");
        return frame->group(t, v);
    }
};

// Residual of the exponential Euler output in the discrete mild identity
//   X(t_n) = S_{t_n} X(0) + sum_{j<n} S_{t_n - t_j} [ alpha_j dt + sigma_j dW_j ],
// evaluated by re-unrolling with the same coefficient values.
template <class Semigroup>
double mild_residual(const Semigroup& sg, const CoefficientPair& coeffs, const PathRecord& x,
                     const DriverBundle& driver) {
    const TimeGrid& grid = x.grid;
    const double dt = grid.dt();
    double worst = 0.0;
    std::vector<Vec> increments(static_cast<std::size_t>(grid.n_steps()));
    for (int j = 0; j < grid.n_steps(); ++j) {
        double t = grid.time(j);
        Vec inc(static_cast<std::size_t>(x.dim()), 0.0);
        axpy(dt, coeffs.alpha(t, x), inc);
        Matrix s = coeffs.sigma(t, x);
        const Vec& dw = driver.step(j);
        for (int r = 0; r < s.rows(); ++r) {
            double acc = 0.0;
            for (int c = 0; c < s.cols(); ++c) acc += s(r, c) * dw[static_cast<std::size_t>(c)];
            inc[static_cast<std::size_t>(r)] += acc;
        }
        increments[static_cast<std::size_t>(j)] = std::move(inc);
    }
    for (int n = 1; n <= grid.n_steps(); ++n) {
        Vec rhs = sg.apply(grid.time(n), x.at(0));
        for (int j = 0; j < n; ++j) axpy(1.0, sg.apply(grid.time(n - j), increments[static_cast<std::size_t>(j)]), rhs);
        Vec diff = x.at(n);
        for (std::size_t c = 0; c < diff.size(); ++c) diff[c] -= rhs[c];
        worst = std::max(worst, norm(diff, x.weight));
    }
    return worst;
}

// Left-endpoint Ito sums: cumulative sum_{j<i} M_j dW_j for a given sequence
// of operators M_j at times t_0..t_{n-1}.
inline PathRecord discrete_ito(const std::vector<Matrix>& integrand, const DriverBundle& driver, double weight = 1.0) {
    const TimeGrid& grid = driver.grid;
    if (static_cast<int>(integrand.size()) != grid.n_steps())
        throw DimensionError("discrete_ito: need one operator per step");
    const int rows = integrand.empty() ? 0 : integrand.front().rows();
    PathRecord out = zero_path(grid, rows, weight);
    Vec acc(static_cast<std::size_t>(rows), 0.0);
    for (int i = 0; i < grid.n_steps(); ++i) {
        const Matrix& m = integrand[static_cast<std::size_t>(i)];
        if (m.rows() != rows || m.cols() != driver.n_modes) throw DimensionError("discrete_ito: operator shape mismatch");
        const Vec& dw = driver.step(i);
        for (int r = 0; r < rows; ++r) {
            double s = 0.0;
            for (int j = 0; j < m.cols(); ++j) s += m(r, j) * dw[static_cast<std::size_t>(j)];
            acc[static_cast<std::size_t>(r)] += s;
        }
        out.at(i + 1) = acc;
    }
    return out;
}

inline PathRecord solve(const SolveConfig& cfg, const CoefficientPair& coeffs, const DriverBundle& driver,
                        const DiagonalSemigroup& sg, double weight = 1.0) {
    if (!cfg.grid.same_as(driver.grid)) throw DimensionError("solve: config grid differs from driver grid");
    if (cfg.scheme == Scheme::euler_maruyama) return euler_maruyama(coeffs, cfg.initial, driver, weight);
    return exp_euler_mild(sg, coeffs, cfg.initial, driver, weight);
}

}  // namespace framelab
