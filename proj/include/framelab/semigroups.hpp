#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <string>
#include <vector>

#include "framelab/core.hpp"
#include "framelab/spaces.hpp"

namespace framelab {

// Diagonal contraction semigroup S_t h = (e^{-lambda_k t} h_k); the generator
// acts as h_k -> -lambda_k h_k.
class DiagonalSemigroup {
  public:
    explicit DiagonalSemigroup(Vec rates) : rates_(std::move(rates)) {
        for (double r : rates_)
            if (!(r > 0.0)) throw DomainError("DiagonalSemigroup: rates must be positive");
    }

    static DiagonalSemigroup natural(int n_modes) {
        Vec r(static_cast<std::size_t>(n_modes));
        for (int k = 0; k < n_modes; ++k) r[k] = static_cast<double>(k + 1);
        return DiagonalSemigroup(std::move(r));
    }

    int dim() const { return static_cast<int>(rates_.size()); }
    const Vec& rates() const { return rates_; }

    Vec apply(double t, const Vec& v) const {
        if (t < 0.0) throw DomainError("DiagonalSemigroup: t must be nonnegative");
        if (v.size() != rates_.size()) throw DimensionError("DiagonalSemigroup: dimension mismatch");
        Vec out(v.size());
        for (std::size_t k = 0; k < v.size(); ++k) out[k] = std::exp(-rates_[k] * t) * v[k];
        return out;
    }

  private:
    Vec rates_;
};

// Uniform spatial grid with points x_i = x_min + i h, i = 0..n_points-1
// (half-open window [x_min, x_max)).
class SpatialGrid {
  public:
    SpatialGrid() = default;
    SpatialGrid(double x_min, double x_max, double h) : x_min_(x_min), x_max_(x_max), h_(h) {
        if (!(h > 0.0)) throw DomainError("SpatialGrid: spacing must be positive");
        double span = (x_max - x_min) / h;
        n_points_ = static_cast<int>(std::lround(span));
        if (n_points_ < 1 || std::abs(span - n_points_) > 1e-9 * std::max(1.0, span))
            throw DomainError("SpatialGrid: (x_max - x_min)/h must be a positive integer");
    }

    double x_min() const { return x_min_; }
    double x_max() const { return x_max_; }
    double h() const { return h_; }
    int n_points() const { return n_points_; }
    double point(int i) const { return x_min_ + h_ * i; }

    // Number of cells a time shift t corresponds to; throws if off-grid.
    int shift_steps(double t) const {
        double x = t / h_;
        int s = static_cast<int>(std::lround(x));
        if (std::abs(x - s) > 1e-9 * std::max(1.0, std::abs(x)))
            throw CommensurabilityError("shift by t = " + std::to_string(t) +
                                        " is not an integer multiple of h = " + std::to_string(h_));
        return s;
    }

  private:
    double x_min_ = 0.0;
    double x_max_ = 1.0;
    double h_ = 1.0;
    int n_points_ = 1;
};

// values[i] <- values[i + s], zero fill outside the window.
inline void shift_values(const Vec& in, Vec& out, int s) {
    const int n = static_cast<int>(in.size());
    for (int i = 0; i < n; ++i) {
        int j = i + s;
        out[i] = (j >= 0 && j < n) ? in[j] : 0.0;
    }
}

// Left translation group (U_t h)(x) = h(x + t) on a gridded window; shifts are
// restricted to integer multiples of h so no interpolation ever happens.
class TranslationGroup {
  public:
    explicit TranslationGroup(SpatialGrid grid) : grid_(grid) {}

    const SpatialGrid& grid() const { return grid_; }

    GridFunction apply(double t, const GridFunction& f) const {
        require_compatible(f);
        GridFunction out = f;
        shift_values(f.values, out.values, grid_.shift_steps(t));
        return out;
    }

    Vec apply_flat(double t, const Vec& v) const {
        if (static_cast<int>(v.size()) != grid_.n_points())
            throw DimensionError("TranslationGroup: vector does not match the grid");
        Vec out(v.size());
        shift_values(v, out, grid_.shift_steps(t));
        return out;
    }

  private:
    void require_compatible(const GridFunction& f) const {
        if (f.n_points() != grid_.n_points() || std::abs(f.x_min - grid_.x_min()) > 1e-12 ||
            std::abs(f.h - grid_.h()) > 1e-12)
            throw DimensionError("TranslationGroup: grid function does not match the group grid");
    }

    SpatialGrid grid_;
};

template <class F>
concept MovingFrameModel = requires(const F f, double t, const Vec& v) {
    { f.state_dim() } -> std::convertible_to<int>;
    { f.big_dim() } -> std::convertible_to<int>;
    { f.weight() } -> std::convertible_to<double>;
    { f.embed(v) } -> std::convertible_to<Vec>;
    { f.project(v) } -> std::convertible_to<Vec>;
    { f.group(t, v) } -> std::convertible_to<Vec>;
    { f.require_time(t) };
};

// Unitary dilation of a diagonal contraction semigroup.
//
// Each factor e^{-lambda_k t} is realized by left translation on its own copy
// of the gridded line with the profile
//     f_k(x) = c_k e^{lambda_k x} for x < 0,  0 otherwise,
// normalized so ||f_k|| = 1 in the discrete norm. Then
//     <f_k, U_t f_k> = e^{-lambda_k t}
// holds exactly on the grid up to the left-boundary truncation, whose size
// e^{2 lambda_k x_min} is recorded per mode. The embedding l maps e_k to f_k
// in copy k; pi is its discrete adjoint, so pi l = I and the isometry of l
// are exact by construction.
class DilationFrame {
  public:
    DilationFrame(Vec rates, SpatialGrid grid, double tail_tolerance = 1e-6)
        : rates_(std::move(rates)), grid_(grid) {
        if (rates_.empty()) throw DomainError("DilationFrame: need at least one mode");
        mode_points_ = grid_.n_points();
        tail_bounds_.resize(rates_.size());
        profiles_.reserve(rates_.size());
        for (std::size_t k = 0; k < rates_.size(); ++k) {
            double lam = rates_[k];
            if (!(lam > 0.0)) throw DomainError("DilationFrame: rates must be positive");
            tail_bounds_[k] = std::exp(2.0 * lam * grid_.x_min());
            if (tail_bounds_[k] > tail_tolerance)
                throw WindowError("DilationFrame: window truncation e^{2 lambda x_min} = " +
                                  std::to_string(tail_bounds_[k]) + " exceeds tolerance for mode " +
                                  std::to_string(k + 1));
            GridFunction f;
            f.x_min = grid_.x_min();
            f.h = grid_.h();
            f.values.assign(static_cast<std::size_t>(mode_points_), 0.0);
            double s = 0.0;
            for (int i = 0; i < mode_points_; ++i) {
                double x = grid_.point(i);
                if (x < 0.0) {
                    f.values[i] = std::exp(lam * x);
                    s += f.values[i] * f.values[i];
                }
            }
            double c = 1.0 / std::sqrt(grid_.h() * s);
            for (double& v : f.values) v *= c;
            profiles_.push_back(std::move(f));
        }
    }

    int state_dim() const { return static_cast<int>(rates_.size()); }
    int big_dim() const { return state_dim() * mode_points_; }
    int mode_points() const { return mode_points_; }
    double weight() const { return grid_.h(); }
    const Vec& rates() const { return rates_; }
    const SpatialGrid& grid() const { return grid_; }
    const GridFunction& profile(int k) const { return profiles_[static_cast<std::size_t>(k)]; }
    const Vec& tail_bounds() const { return tail_bounds_; }

    // l v = sum_k v_k f_k, each in its own copy of the line.
    Vec embed(const Vec& v) const {
        if (static_cast<int>(v.size()) != state_dim()) throw DimensionError("DilationFrame::embed: dimension mismatch");
        Vec out(static_cast<std::size_t>(big_dim()), 0.0);
        for (int k = 0; k < state_dim(); ++k) {
            const Vec& f = profiles_[static_cast<std::size_t>(k)].values;
            double vk = v[static_cast<std::size_t>(k)];
            if (vk == 0.0) continue;
            double* dst = out.data() + static_cast<std::size_t>(k) * mode_points_;
            for (int i = 0; i < mode_points_; ++i) dst[i] = vk * f[static_cast<std::size_t>(i)];
        }
        return out;
    }

    // pi g = (<f_k, g_k>)_k, the discrete adjoint of embed.
    Vec project(const Vec& g) const {
        if (static_cast<int>(g.size()) != big_dim()) throw DimensionError("DilationFrame::project: dimension mismatch");
        Vec out(static_cast<std::size_t>(state_dim()), 0.0);
        for (int k = 0; k < state_dim(); ++k) {
            const Vec& f = profiles_[static_cast<std::size_t>(k)].values;
            const double* src = g.data() + static_cast<std::size_t>(k) * mode_points_;
            double acc = 0.0;
            for (int i = 0; i < mode_points_; ++i) acc += f[static_cast<std::size_t>(i)] * src[i];
            out[static_cast<std::size_t>(k)] = grid_.h() * acc;
        }
        return out;
    }

    // U_t: per-mode index shift by t/h with zero fill.
    Vec group(double t, const Vec& g) const {
        if (static_cast<int>(g.size()) != big_dim()) throw DimensionError("DilationFrame::group: dimension mismatch");
        int s = grid_.shift_steps(t);
        Vec out(g.size(), 0.0);
        const int m = mode_points_;
        for (int k = 0; k < state_dim(); ++k) {
            const double* src = g.data() + static_cast<std::size_t>(k) * m;
            double* dst = out.data() + static_cast<std::size_t>(k) * m;
            int lo = std::max(0, -s);
            int hi = std::min(m, m - s);
            for (int i = lo; i < hi; ++i) dst[i] = src[i + s];
        }
        return out;
    }

    void require_time(double t) const { grid_.shift_steps(t); }

    // Transported states must stay inside the window: the horizon cannot
    // exceed x_max.
    void require_horizon(double t_end) const {
        if (t_end > grid_.x_max() + 1e-12)
            throw WindowError("DilationFrame: horizon t_end = " + std::to_string(t_end) +
                              " exceeds the window x_max = " + std::to_string(grid_.x_max()));
    }

  private:
    Vec rates_;
    SpatialGrid grid_;
    int mode_points_ = 0;
    std::vector<GridFunction> profiles_;
    Vec tail_bounds_;
};

// Group case: the diagonal semigroup already extends to a group on the state
// space itself, so the frame is trivial (l = pi = identity, U_t = e^{-A t}).
class DiagonalGroupFrame {
  public:
    explicit DiagonalGroupFrame(Vec rates) : rates_(std::move(rates)) {
        for (double r : rates_)
            if (!(r > 0.0)) throw DomainError("DiagonalGroupFrame: rates must be positive");
    }

    int state_dim() const { return static_cast<int>(rates_.size()); }
    int big_dim() const { return state_dim(); }
    double weight() const { return 1.0; }
    const Vec& rates() const { return rates_; }

    Vec embed(const Vec& v) const { return v; }
    Vec project(const Vec& g) const { return g; }

    Vec group(double t, const Vec& g) const {
        if (g.size() != rates_.size()) throw DimensionError("DiagonalGroupFrame::group: dimension mismatch");
        Vec out(g.size());
        for (std::size_t k = 0; k < g.size(); ++k) out[k] = std::exp(-rates_[k] * t) * g[k];
        return out;
    }

    void require_time(double) const {}
    void require_horizon(double) const {}

  private:
    Vec rates_;
};

static_assert(MovingFrameModel<DilationFrame>);
static_assert(MovingFrameModel<DiagonalGroupFrame>);

// max over (t, k) of || pi U_t l e_k - e^{-lambda_k t} e_k ||.
inline double diagram_error(const DilationFrame& frame, const Vec& times, const std::vector<int>& modes) {
    double worst = 0.0;
    for (int k : modes) {
        if (k < 1 || k > frame.state_dim()) throw RangeError("diagram_error: mode index out of range");
        Vec e(static_cast<std::size_t>(frame.state_dim()), 0.0);
        e[static_cast<std::size_t>(k - 1)] = 1.0;
        Vec lifted = frame.embed(e);
        for (double t : times) {
            Vec moved = frame.group(t, lifted);
            Vec back = frame.project(moved);
            double target = std::exp(-frame.rates()[static_cast<std::size_t>(k - 1)] * t);
            back[static_cast<std::size_t>(k - 1)] -= target;
            worst = std::max(worst, norm(back));
        }
    }
    return worst;
}

}  // namespace framelab
