#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "framelab/core.hpp"
#include "framelab/noise.hpp"
#include "framelab/solvers.hpp"
#include "framelab/spaces.hpp"

namespace framelab {

// Operator-valued integrand b_bar(t, x) = b(t, x) J^{-1}, stored with columns
// indexed by the covariance eigenbasis. lambda holds the eigenvalues of Q, so
// the Hilbert-Schmidt norm in the weighted basis is
//   || b_bar ||^2 = sum_k lambda_k || column_k ||^2,
// which equals the plain Hilbert-Schmidt norm of b.
struct OperatorIntegrand {
    int rows = 0;
    Vec lambda;
    std::function<Matrix(double, const PathRecord&)> eval;

    int cols() const { return static_cast<int>(lambda.size()); }
};

inline double weighted_hs_norm(const Matrix& m, const Vec& lambda) {
    if (m.cols() != static_cast<int>(lambda.size())) throw DimensionError("weighted_hs_norm: column count mismatch");
    double s = 0.0;
    for (int j = 0; j < m.cols(); ++j) {
        double col = 0.0;
        for (int i = 0; i < m.rows(); ++i) col += m(i, j) * m(i, j);
        s += lambda[static_cast<std::size_t>(j)] * col;
    }
    return std::sqrt(s);
}

// Stage 1: keep the operator while its weighted Hilbert-Schmidt norm is <= j,
// otherwise replace it by zero.
inline OperatorIntegrand hs_truncate(const OperatorIntegrand& b, double hs_bound) {
    OperatorIntegrand out = b;
    out.eval = [b, hs_bound](double t, const PathRecord& x) {
        Matrix m = b.eval(t, x);
        if (weighted_hs_norm(m, b.lambda) <= hs_bound) return m;
        return Matrix(m.rows(), m.cols());
    };
    return out;
}

// Stage 2: finite rank, keeping the first `rank` eigenbasis columns.
inline OperatorIntegrand finite_rank(const OperatorIntegrand& b, int rank) {
    if (rank < 1 || rank > b.cols())
        throw RangeError("finite_rank: rank " + std::to_string(rank) + " outside 1.." + std::to_string(b.cols()));
    OperatorIntegrand out = b;
    out.eval = [b, rank](double t, const PathRecord& x) {
        Matrix m = b.eval(t, x);
        for (int j = rank; j < m.cols(); ++j)
            for (int i = 0; i < m.rows(); ++i) m(i, j) = 0.0;
        return m;
    };
    return out;
}

// Stage 3: sliding-window average ell * int_{t - 1/ell}^{t} b(s, x) ds.
// The integrand is treated as the left-continuous step function taking the
// value b(s_q, x) on each grid cell (s_q - dt, s_q], and as zero below time
// zero; the integral of that step function over the window is computed
// exactly. With a one-cell window the average reduces to b(t, x) itself. At
// t = 0 the window degenerates entirely below the origin and the operator
// falls back to the instantaneous value, which keeps the first Riemann block
// of the staged sums meaningful.
inline OperatorIntegrand time_mollify(const OperatorIntegrand& b, int mollify_rate, const TimeGrid& grid) {
    if (mollify_rate < 1) throw DomainError("time_mollify: rate must be positive");
    OperatorIntegrand out = b;
    out.eval = [b, mollify_rate, grid](double t, const PathRecord& x) {
        int q = grid.index_of(t);
        if (q == 0) return b.eval(t, x);
        const double dt = grid.dt();
        const double window_lo = std::max(t - 1.0 / mollify_rate, 0.0);
        Matrix acc(b.rows, b.cols());
        while (q >= 1) {
            double s = grid.time(q);
            if (s <= window_lo + 1e-12 * std::max(1.0, s)) break;
            double width = s - std::max(s - dt, window_lo);
            Matrix m = b.eval(s, x);
            double w = width * mollify_rate;
            for (int i = 0; i < m.rows(); ++i)
                for (int j = 0; j < m.cols(); ++j) acc(i, j) += w * m(i, j);
            --q;
        }
        return acc;
    };
    return out;
}

// Stage 4: piecewise-constant time discretization at the points [m t] / m.
inline OperatorIntegrand step_discretize(const OperatorIntegrand& b, int step_rate, const TimeGrid& grid) {
    const double cells = 1.0 / (step_rate * grid.dt());
    const int c = static_cast<int>(std::lround(cells));
    if (c < 1 || std::abs(cells - c) > 1e-9)
        throw CommensurabilityError("step_discretize: 1/m must be an integer multiple of dt");
    OperatorIntegrand out = b;
    out.eval = [b, step_rate](double t, const PathRecord& x) {
        double floored = std::floor(t * step_rate + 1e-9) / step_rate;
        return b.eval(floored, x);
    };
    return out;
}

// One stage of the approximation array: (j, k, ell, m).
struct ApproxStage {
    double hs_bound = 0.0;
    int rank = 1;
    int mollify_rate = 1;
    int step_rate = 1;
};

// Per-horizon stage sequence; the same quadruples are used for every integer
// horizon T <= t_max. Entries must grow componentwise.
struct ApproxSchedule {
    int t_max = 1;
    std::vector<ApproxStage> stages;

    void validate() const {
        if (t_max < 1) throw DomainError("ApproxSchedule: t_max must be positive");
        for (std::size_t i = 0; i < stages.size(); ++i) {
            const ApproxStage& s = stages[i];
            if (!(s.hs_bound > 0.0) || s.rank < 1 || s.mollify_rate < 1 || s.step_rate < 1)
                throw DomainError("ApproxSchedule: stage entries must be positive");
            if (i > 0) {
                const ApproxStage& p = stages[i - 1];
                if (s.hs_bound < p.hs_bound || s.rank < p.rank || s.mollify_rate < p.mollify_rate ||
                    s.step_rate < p.step_rate)
                    throw DomainError("ApproxSchedule: stages must be componentwise nondecreasing");
            }
        }
    }
};

inline OperatorIntegrand staged_integrand(const OperatorIntegrand& b, const ApproxStage& stage, const TimeGrid& grid) {
    return step_discretize(time_mollify(finite_rank(hs_truncate(b, stage.hs_bound), stage.rank), stage.mollify_rate, grid),
                           stage.step_rate, grid);
}

// Riemann sum of the staged integrand against Q-Wiener increments over the
// blocks [(i-1)/m, i/m], accumulated as a running path: the value on
// [(i-1)/m, i/m) is the sum of the first i-1 block contributions. With the
// degenerate stage (j >= sup norm, full rank, one-cell window, 1/m = dt) this
// reproduces the plain discrete Ito sum exactly.
inline PathRecord staged_riemann_sum(const OperatorIntegrand& b, const PathRecord& x, const QWienerPath& q,
                                     const ApproxStage& stage, int t_max, double weight = 1.0) {
    if (!x.grid.same_as(q.grid)) throw DimensionError("staged_riemann_sum: path and driver grids differ");
    if (static_cast<int>(q.lambda.size()) != b.cols())
        throw DimensionError("staged_riemann_sum: integrand columns != driver modes");
    const TimeGrid& grid = q.grid;
    const double dt = grid.dt();
    const double cells = 1.0 / (stage.step_rate * dt);
    const int c = static_cast<int>(std::lround(cells));
    if (c < 1 || std::abs(cells - c) > 1e-9)
        throw CommensurabilityError("staged_riemann_sum: 1/m must be an integer multiple of dt");

    OperatorIntegrand staged = staged_integrand(b, stage, grid);
    const double horizon = std::min(static_cast<double>(t_max), grid.t_end());
    const int last_block = static_cast<int>(std::floor(horizon * stage.step_rate + 1e-9));

    PathRecord out = zero_path(grid, b.rows, weight);
    Vec acc(static_cast<std::size_t>(b.rows), 0.0);
    int g = 1;
    for (int i = 1; i <= last_block; ++i) {
        int start = (i - 1) * c;
        int end = i * c;
        for (; g < end; ++g) out.at(g) = acc;
        Matrix m = staged.eval(grid.time(start), x);
        for (int r = 0; r < b.rows; ++r) {
            double s = 0.0;
            for (int j = 0; j < m.cols(); ++j) s += m(r, j) * (q.cumulative[end][j] - q.cumulative[start][j]);
            acc[static_cast<std::size_t>(r)] += s;
        }
        out.at(g++) = acc;
    }
    for (; g <= grid.n_steps(); ++g) out.at(g) = acc;
    return out;
}

struct ConvergenceStudy {
    std::vector<ApproxStage> stages;
    Vec errors;
    double final_error = 0.0;
    double tolerance = 0.0;
    bool nonincreasing = false;
    bool pass = false;
};

// Compare the staged sums against the plain discrete Ito sum of b = b_bar J
// at the grid resolution, stage by stage.
inline ConvergenceStudy convergence_study(const OperatorIntegrand& b, const PathRecord& x, const QWienerPath& q,
                                          const ApproxSchedule& schedule, double tolerance) {
    schedule.validate();
    DriverBundle driver = recover_components(q);
    std::vector<Matrix> composed(static_cast<std::size_t>(q.grid.n_steps()));
    Vec j_diag(q.lambda.size());
    for (std::size_t k = 0; k < q.lambda.size(); ++k) j_diag[k] = std::sqrt(q.lambda[k]);
    for (int i = 0; i < q.grid.n_steps(); ++i) {
        Matrix m = b.eval(q.grid.time(i), x);
        for (int r = 0; r < m.rows(); ++r)
            for (int j = 0; j < m.cols(); ++j) m(r, j) *= j_diag[static_cast<std::size_t>(j)];
        composed[static_cast<std::size_t>(i)] = std::move(m);
    }
    PathRecord reference = discrete_ito(composed, driver);

    ConvergenceStudy study;
    study.stages = schedule.stages;
    study.tolerance = tolerance;
    study.nonincreasing = true;
    for (const ApproxStage& stage : schedule.stages) {
        PathRecord approx = staged_riemann_sum(b, x, q, stage, schedule.t_max);
        double err = sup_distance(approx, reference);
        if (!study.errors.empty() && err > study.errors.back() + 1e-12) study.nonincreasing = false;
        study.errors.push_back(err);
    }
    study.final_error = study.errors.empty() ? 0.0 : study.errors.back();
    study.pass = study.nonincreasing && study.final_error <= tolerance;
    return study;
}

}  // namespace framelab
