#pragma once

#include <functional>
#include <utility>

#include "framelab/core.hpp"
#include "framelab/noise.hpp"
#include "framelab/semigroups.hpp"
#include "framelab/spaces.hpp"

namespace framelab {

// Whether an evaluator reads only the current path value w(t) or the whole
// prefix w|[0,t]. State-dependent coefficients admit a cheap transport path.
enum class Dependence { state, path };

// Drift/diffusion evaluators on a path space, with the adaptedness contract:
// the output at time t may depend on the path only through its values on
// [0, t]. Compliance is checked with adaptedness_defect against prefix_freeze.
struct CoefficientPair {
    std::function<Vec(double, const PathRecord&)> alpha;
    std::function<Matrix(double, const PathRecord&)> sigma;
    Dependence dependence = Dependence::path;
};

// Wrap plain functions of the current state x = w(t).
inline CoefficientPair state_coefficients(std::function<Vec(double, const Vec&)> alpha,
                                          std::function<Matrix(double, const Vec&)> sigma) {
    CoefficientPair c;
    c.dependence = Dependence::state;
    c.alpha = [alpha](double t, const PathRecord& w) { return alpha(t, w.at(w.grid.index_of(t))); };
    c.sigma = [sigma](double t, const PathRecord& w) { return sigma(t, w.at(w.grid.index_of(t))); };
    return c;
}

// Max deviation of the evaluators under prefix freezing, probed on seeded
// random-walk paths. Zero (up to roundoff) iff the pair is adapted in the
// testable sense.
inline double adaptedness_defect(const CoefficientPair& coeffs, const TimeGrid& grid, int dim, double weight,
                                 int n_probes, std::uint64_t seed) {
    GaussianStream g(seed, 0x61646170u);
    const double sdt = std::sqrt(grid.dt());
    double worst = 0.0;
    for (int p = 0; p < n_probes; ++p) {
        PathRecord w = zero_path(grid, dim, weight);
        for (int c = 0; c < dim; ++c) w.at(0)[c] = g.next();
        for (int i = 0; i < grid.n_steps(); ++i)
            for (int c = 0; c < dim; ++c) w.at(i + 1)[c] = w.at(i)[c] + sdt * g.next();
        // probe a spread of freeze times including the endpoints
        for (int i : {0, grid.n_steps() / 3, 2 * grid.n_steps() / 3, grid.n_steps()}) {
            double t = grid.time(i);
            PathRecord frozen = prefix_freeze(w, t);
            Vec a1 = coeffs.alpha(t, w);
            Vec a2 = coeffs.alpha(t, frozen);
            for (std::size_t c = 0; c < a1.size(); ++c) a1[c] -= a2[c];
            worst = std::max(worst, norm(a1));
            Matrix s1 = coeffs.sigma(t, w);
            Matrix s2 = coeffs.sigma(t, frozen);
            double acc = 0.0;
            for (std::size_t c = 0; c < s1.raw().size(); ++c) {
                double d = s1.raw()[c] - s2.raw()[c];
                acc += d * d;
            }
            worst = std::max(worst, std::sqrt(acc));
        }
    }
    return worst;
}

// a(t, w) = U_{-t} l alpha(t, w): the drift carried into the moving frame.
template <MovingFrameModel Frame>
Vec frame_drift(const Frame& frame, const CoefficientPair& coeffs, double t, const PathRecord& w) {
    frame.require_time(t);
    return frame.group(-t, frame.embed(coeffs.alpha(t, w)));
}

// b(t, w) = U_{-t} l sigma(t, w), column by column.
template <MovingFrameModel Frame>
Matrix frame_diffusion(const Frame& frame, const CoefficientPair& coeffs, double t, const PathRecord& w) {
    frame.require_time(t);
    Matrix s = coeffs.sigma(t, w);
    Matrix out(frame.big_dim(), s.cols());
    for (int j = 0; j < s.cols(); ++j) out.set_column(j, frame.group(-t, frame.embed(s.column(j))));
    return out;
}

namespace detail {

// Component of w(0) orthogonal to the embedded state space.
template <MovingFrameModel Frame>
Vec orthogonal_start(const Frame& frame, const Vec& w0) {
    Vec embedded = frame.embed(frame.project(w0));
    Vec out = w0;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= embedded[i];
    return out;
}

template <MovingFrameModel Frame>
Vec unwind_point(const Frame& frame, const Vec& w_t, const Vec& pi2_w0, double t) {
    Vec z = w_t;
    for (std::size_t i = 0; i < z.size(); ++i) z[i] -= pi2_w0[i];
    return frame.project(frame.group(t, z));
}

}  // namespace detail

// Unwind the moving frame: w |-> pi U_t (w(t) - Pi_2 w(0)), mapping frame
// processes back to state-space paths. With w(0) in the range of the
// embedding the correction term vanishes and this is just pi U w. Carries the
// solution correspondence: a frame process Y built from a state path X
// unwinds back to X.
template <MovingFrameModel Frame>
PathRecord unwind_path(const Frame& frame, const PathRecord& w) {
    w.validate();
    if (w.dim() != frame.big_dim()) throw DimensionError("unwind_path: path does not live in the frame space");
    Vec pi2_w0 = detail::orthogonal_start(frame, w.at(0));
    PathRecord out = zero_path(w.grid, frame.state_dim(), 1.0);
    for (int i = 0; i < w.grid.n_points(); ++i) {
        double t = w.grid.time(i);
        frame.require_time(t);
        out.at(i) = detail::unwind_point(frame, w.at(i), pi2_w0, t);
    }
    return out;
}

// Wind a state path into the frame: v |-> (t -> U_{-t} l v(t)). Right inverse
// of unwind_path (exactly, since the wound path starts in the embedded range).
template <MovingFrameModel Frame>
PathRecord wind_path(const Frame& frame, const PathRecord& v) {
    v.validate();
    if (v.dim() != frame.state_dim()) throw DimensionError("wind_path: path does not live in the state space");
    frame.require_horizon(v.grid.t_end());
    PathRecord out = zero_path(v.grid, frame.big_dim(), frame.weight());
    for (int i = 0; i < v.grid.n_points(); ++i) {
        double t = v.grid.time(i);
        frame.require_time(t);
        out.at(i) = frame.group(-t, frame.embed(v.at(i)));
    }
    return out;
}

namespace detail {

// Evaluate the state-space coefficients on the unwound path. For
// state-dependent pairs only the current unwound value is needed; for
// path-dependent pairs the whole unwound prefix is materialized and frozen.
template <MovingFrameModel Frame>
PathRecord unwound_argument(const Frame& frame, const CoefficientPair& coeffs, double t, const PathRecord& w) {
    Vec pi2_w0 = orthogonal_start(frame, w.at(0));
    if (coeffs.dependence == Dependence::state)
        return constant_path(w.grid, unwind_point(frame, w.at(w.grid.index_of(t)), pi2_w0, t), 1.0);
    int it = w.grid.index_of(t);
    PathRecord v = zero_path(w.grid, frame.state_dim(), 1.0);
    for (int i = 0; i <= it; ++i) v.at(i) = unwind_point(frame, w.at(i), pi2_w0, w.grid.time(i));
    for (int i = it + 1; i < w.grid.n_points(); ++i) v.at(i) = v.at(it);
    return v;
}

}  // namespace detail

// The transported pair (alpha_bar, sigma_bar)(t, w) = (a, b)(t, Gamma(w)):
// coefficients of the frame-space SDE equivalent to the original equation.
template <MovingFrameModel Frame>
CoefficientPair transported_coefficients(const Frame& frame, const CoefficientPair& coeffs) {
    CoefficientPair out;
    out.dependence = coeffs.dependence;
    out.alpha = [&frame, coeffs](double t, const PathRecord& w) {
        PathRecord v = detail::unwound_argument(frame, coeffs, t, w);
        return frame.group(-t, frame.embed(coeffs.alpha(t, v)));
    };
    out.sigma = [&frame, coeffs](double t, const PathRecord& w) {
        PathRecord v = detail::unwound_argument(frame, coeffs, t, w);
        Matrix s = coeffs.sigma(t, v);
        Matrix big(frame.big_dim(), s.cols());
        for (int j = 0; j < s.cols(); ++j) big.set_column(j, frame.group(-t, frame.embed(s.column(j))));
        return big;
    };
    return out;
}

// The four frame-space coefficient maps of one state-space pair, bundled with
// back-references to the frame and the pair they transport:
//   drift/diffusion:  a(t, w) = U_{-t} l alpha(t, w),  b(t, w) = U_{-t} l sigma(t, w)
//   transported():    (alpha_bar, sigma_bar)(t, w) = (a, b)(t, Gamma(w)).
// The referenced frame and pair must outlive this object.
template <MovingFrameModel Frame>
struct FrameCoefficients {
    const Frame* frame = nullptr;
    CoefficientPair base;

    Vec drift(double t, const PathRecord& w) const { return frame_drift(*frame, base, t, w); }
    Matrix diffusion(double t, const PathRecord& w) const { return frame_diffusion(*frame, base, t, w); }
    CoefficientPair transported() const { return transported_coefficients(*frame, base); }
};

// Lifted coefficients (alpha_hat, sigma_hat)(t, w) = l (alpha, sigma)(t, pi w)
// for the frame-space equation driven by the group generator.
template <MovingFrameModel Frame>
CoefficientPair lifted_coefficients(const Frame& frame, const CoefficientPair& coeffs) {
    CoefficientPair out;
    out.dependence = coeffs.dependence;
    auto projected_argument = [&frame, coeffs](double t, const PathRecord& w) {
        if (coeffs.dependence == Dependence::state)
            return constant_path(w.grid, frame.project(w.at(w.grid.index_of(t))), 1.0);
        int it = w.grid.index_of(t);
        PathRecord v = zero_path(w.grid, frame.state_dim(), 1.0);
        for (int i = 0; i <= it; ++i) v.at(i) = frame.project(w.at(i));
        for (int i = it + 1; i < w.grid.n_points(); ++i) v.at(i) = v.at(it);
        return v;
    };
    out.alpha = [&frame, coeffs, projected_argument](double t, const PathRecord& w) {
        return frame.embed(coeffs.alpha(t, projected_argument(t, w)));
    };
    out.sigma = [&frame, coeffs, projected_argument](double t, const PathRecord& w) {
        Matrix s = coeffs.sigma(t, projected_argument(t, w));
        Matrix big(frame.big_dim(), s.cols());
        for (int j = 0; j < s.cols(); ++j) big.set_column(j, frame.embed(s.column(j)));
        return big;
    };
    return out;
}

// Frame process built from a state path and its driver:
//   Y(0) = l X(0),  Y(t_{i+1}) = Y(t_i) + a(t_i, X) dt + b(t_i, X) dW_i,
// the discrete left-endpoint form of Y = l X(0) + int a ds + int b dW.
template <MovingFrameModel Frame>
PathRecord frame_process(const Frame& frame, const CoefficientPair& coeffs, const PathRecord& x,
                         const DriverBundle& driver) {
    x.validate();
    if (!x.grid.same_as(driver.grid)) throw DimensionError("frame_process: path and driver grids differ");
    frame.require_horizon(x.grid.t_end());
    const double dt = x.grid.dt();
    PathRecord y = zero_path(x.grid, frame.big_dim(), frame.weight());
    y.at(0) = frame.embed(x.at(0));
    for (int i = 0; i < x.grid.n_steps(); ++i) {
        double t = x.grid.time(i);
        Vec next = y.at(i);
        axpy(dt, frame_drift(frame, coeffs, t, x), next);
        Matrix s = coeffs.sigma(t, x);
        const Vec& dw = driver.step(i);
        if (s.cols() != driver.n_modes) throw DimensionError("frame_process: diffusion columns != driver modes");
        for (int j = 0; j < s.cols(); ++j)
            if (dw[static_cast<std::size_t>(j)] != 0.0)
                axpy(dw[static_cast<std::size_t>(j)], frame.group(-t, frame.embed(s.column(j))), next);
        y.at(i + 1) = std::move(next);
    }
    return y;
}

// Pointwise projection pi of a frame-space path; maps solutions of the lifted
// equation to solutions of the original one.
template <MovingFrameModel Frame>
PathRecord project_pointwise(const Frame& frame, const PathRecord& z) {
    z.validate();
    if (z.dim() != frame.big_dim()) throw DimensionError("project_pointwise: path does not live in the frame space");
    PathRecord out = zero_path(z.grid, frame.state_dim(), 1.0);
    for (int i = 0; i < z.grid.n_points(); ++i) out.at(i) = frame.project(z.at(i));
    return out;
}

}  // namespace framelab
