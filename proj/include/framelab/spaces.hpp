#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "framelab/core.hpp"

namespace framelab {

// Uniform time grid on [0, t_end] with points t_i = i * dt.
class TimeGrid {
  public:
    TimeGrid() = default;
    TimeGrid(double t_end, int n_steps) : t_end_(t_end), n_steps_(n_steps) {
        if (!(t_end > 0.0)) throw DomainError("TimeGrid: t_end must be positive");
        if (n_steps < 1) throw DomainError("TimeGrid: n_steps must be positive");
    }

    double t_end() const { return t_end_; }
    int n_steps() const { return n_steps_; }
    int n_points() const { return n_steps_ + 1; }
    double dt() const { return t_end_ / n_steps_; }
    double time(int i) const { return i * dt(); }

    // Index of a grid time; throws if t is not a grid point.
    int index_of(double t) const {
        double x = t / dt();
        int i = static_cast<int>(std::lround(x));
        if (i < 0 || i > n_steps_ || std::abs(x - i) > 1e-9 * std::max(1.0, std::abs(x)))
            throw PreconditionError("TimeGrid: t = " + std::to_string(t) + " is not a grid point");
        return i;
    }

    bool same_as(const TimeGrid& other) const {
        return n_steps_ == other.n_steps_ && std::abs(t_end_ - other.t_end_) <= 1e-12 * std::max(1.0, t_end_);
    }

  private:
    double t_end_ = 1.0;
    int n_steps_ = 1;
};

using StateVector = Vec;

// Function sampled on a uniform spatial grid; inner product carries the h weight.
struct GridFunction {
    double x_min = 0.0;
    double h = 1.0;
    Vec values;

    double x_max() const { return x_min + h * static_cast<double>(values.size()); }
    double point(int i) const { return x_min + h * i; }
    int n_points() const { return static_cast<int>(values.size()); }
};

inline double dot(const Vec& a, const Vec& b, double weight = 1.0) {
    if (a.size() != b.size()) throw DimensionError("dot: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return weight * s;
}

inline double norm(const Vec& v, double weight = 1.0) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(weight * s);
}

inline double norm(const GridFunction& f) { return norm(f.values, f.h); }

inline double inner(const GridFunction& f, const GridFunction& g) {
    if (f.values.size() != g.values.size()) throw DimensionError("inner: grid size mismatch");
    return dot(f.values, g.values, f.h);
}

// Time-gridded sample path with values in a finite-dimensional state space.
// `weight` is the discrete inner-product weight of that space: 1 for plain
// coordinate vectors, the spatial spacing h for gridded L2 states.
struct PathRecord {
    TimeGrid grid;
    std::vector<Vec> states;
    double weight = 1.0;

    int dim() const { return states.empty() ? 0 : static_cast<int>(states.front().size()); }

    const Vec& at(int i) const { return states[static_cast<std::size_t>(i)]; }
    Vec& at(int i) { return states[static_cast<std::size_t>(i)]; }

    void validate() const {
        if (static_cast<int>(states.size()) != grid.n_points())
            throw DimensionError("PathRecord: " + std::to_string(states.size()) + " states on a grid with " +
                                 std::to_string(grid.n_points()) + " points");
        for (const Vec& s : states)
            if (static_cast<int>(s.size()) != dim()) throw DimensionError("PathRecord: ragged state dimensions");
    }
};

inline PathRecord zero_path(const TimeGrid& grid, int dim, double weight = 1.0) {
    PathRecord p;
    p.grid = grid;
    p.states.assign(static_cast<std::size_t>(grid.n_points()), Vec(static_cast<std::size_t>(dim), 0.0));
    p.weight = weight;
    return p;
}

inline PathRecord constant_path(const TimeGrid& grid, const Vec& value, double weight = 1.0) {
    PathRecord p;
    p.grid = grid;
    p.states.assign(static_cast<std::size_t>(grid.n_points()), value);
    p.weight = weight;
    return p;
}

// Truncated Frechet-type path metric
//   sum_{k=1..k_max} 2^{-k} ( sup_{t_i <= k} ||w1(t_i) - w2(t_i)|| and 1 ).
// The dropped tail of the series is bounded by 2^{-k_max}.
inline double path_metric(const PathRecord& w1, const PathRecord& w2, int k_max) {
    if (!w1.grid.same_as(w2.grid)) throw DimensionError("path_metric: paths live on different time grids");
    if (w1.dim() != w2.dim()) throw DimensionError("path_metric: state dimension mismatch");
    if (k_max < 1) throw PreconditionError("path_metric: k_max must be positive");
    if (static_cast<double>(k_max) > w1.grid.t_end() + 1e-9)
        throw PreconditionError("path_metric: k_max exceeds the path horizon");

    const double dt = w1.grid.dt();
    double total = 0.0;
    double sup = 0.0;
    int i = 0;
    Vec diff(static_cast<std::size_t>(w1.dim()));
    for (int k = 1; k <= k_max; ++k) {
        // extend the running sup over grid points with t_i <= k
        while (i <= w1.grid.n_steps() && i * dt <= k + 1e-12) {
            const Vec& a = w1.at(i);
            const Vec& b = w2.at(i);
            for (std::size_t c = 0; c < diff.size(); ++c) diff[c] = a[c] - b[c];
            sup = std::max(sup, norm(diff, w1.weight));
            ++i;
        }
        total += std::ldexp(std::min(sup, 1.0), -k);
    }
    return total;
}

// Path equal to w on [0, t] and frozen at w(t) afterwards. This is the
// computable probe for adaptedness: an evaluator e(t, .) is adapted iff
// e(t, w) == e(t, prefix_freeze(w, t)) for every grid t.
inline PathRecord prefix_freeze(const PathRecord& w, double t) {
    int i = w.grid.index_of(t);
    PathRecord out = w;
    for (int j = i + 1; j <= w.grid.n_steps(); ++j) out.at(j) = w.at(i);
    return out;
}

inline double sup_distance(const PathRecord& a, const PathRecord& b) {
    if (!a.grid.same_as(b.grid)) throw DimensionError("sup_distance: time grid mismatch");
    if (a.dim() != b.dim()) throw DimensionError("sup_distance: dimension mismatch");
    double sup = 0.0;
    Vec diff(static_cast<std::size_t>(a.dim()));
    for (int i = 0; i < a.grid.n_points(); ++i) {
        for (std::size_t c = 0; c < diff.size(); ++c) diff[c] = a.at(i)[c] - b.at(i)[c];
        sup = std::max(sup, norm(diff, a.weight));
    }
    return sup;
}

}  // namespace framelab
