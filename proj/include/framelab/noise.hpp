#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "framelab/core.hpp"
#include "framelab/spaces.hpp"

namespace framelab {

// SplitMix64 engine (Vigna's fixed-increment SplittableRandom variant).
// Passes BigCrush and is trivially seedable, which is all we need: every
// Monte Carlo stream is derived from (seed, stream_id) and never shared.
class SplitMix64 {
  public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform on (0, 1]
    double uniform() { return (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53; }

  private:
    std::uint64_t state_;
};

inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Hash (seed, stream_id) into a SplitMix64 state. Distinct stream ids give
// statistically independent streams without any shared generator state.
inline std::uint64_t derive_stream_state(std::uint64_t seed, std::uint64_t stream_id) {
    return mix64(seed ^ mix64(0x9e3779b97f4a7c15ull * (stream_id + 1)));
}

// Standard normal variates via Box-Muller on top of SplitMix64.
class GaussianStream {
  public:
    GaussianStream(std::uint64_t seed, std::uint64_t stream_id) : eng_(derive_stream_state(seed, stream_id)) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = eng_.uniform();
        double u2 = eng_.uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

  private:
    SplitMix64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// K independent Brownian increment streams on a time grid. Column k holds the
// i.i.d. N(0, dt) increments of the k-th scalar Wiener process. The bundle is
// a pure function of (seed, stream_id, grid, K).
struct DriverBundle {
    TimeGrid grid;
    int n_modes = 0;
    std::vector<Vec> increments;  // n_steps rows of length n_modes
    std::uint64_t seed = 0;
    std::uint64_t stream_id = 0;

    const Vec& step(int i) const { return increments[static_cast<std::size_t>(i)]; }
};

inline DriverBundle sample_driver(const TimeGrid& grid, int n_modes, std::uint64_t seed, std::uint64_t stream_id) {
    if (n_modes < 1) throw DomainError("sample_driver: need at least one mode");
    DriverBundle d;
    d.grid = grid;
    d.n_modes = n_modes;
    d.seed = seed;
    d.stream_id = stream_id;
    d.increments.assign(static_cast<std::size_t>(grid.n_steps()), Vec(static_cast<std::size_t>(n_modes)));
    GaussianStream g(seed, stream_id);
    const double sdt = std::sqrt(grid.dt());
    for (int i = 0; i < grid.n_steps(); ++i)
        for (int k = 0; k < n_modes; ++k) d.increments[i][k] = sdt * g.next();
    return d;
}

// Sum consecutive increment groups: the same Brownian path on a coarser grid.
inline DriverBundle coarsen_driver(const DriverBundle& d, int factor) {
    if (factor < 1 || d.grid.n_steps() % factor != 0)
        throw PreconditionError("coarsen_driver: factor must divide n_steps");
    DriverBundle out;
    out.grid = TimeGrid(d.grid.t_end(), d.grid.n_steps() / factor);
    out.n_modes = d.n_modes;
    out.seed = d.seed;
    out.stream_id = d.stream_id;
    out.increments.assign(static_cast<std::size_t>(out.grid.n_steps()), Vec(static_cast<std::size_t>(d.n_modes), 0.0));
    for (int i = 0; i < d.grid.n_steps(); ++i)
        for (int k = 0; k < d.n_modes; ++k) out.increments[i / factor][k] += d.increments[i][k];
    return out;
}

// Trace-class Wiener path W_bar = sum_k beta_k J e_k for a diagonal
// Hilbert-Schmidt embedding J = diag(j_k); covariance eigenvalues are j_k^2.
struct QWienerPath {
    TimeGrid grid;
    int n_modes = 0;
    std::vector<Vec> cumulative;  // n_steps+1 rows of length n_modes
    Vec lambda;                   // covariance eigenvalues
    std::uint64_t seed = 0;
    std::uint64_t stream_id = 0;

    Vec increment(int i) const {
        Vec d(static_cast<std::size_t>(n_modes));
        for (int k = 0; k < n_modes; ++k) d[k] = cumulative[i + 1][k] - cumulative[i][k];
        return d;
    }
};

inline Vec default_embedding_diagonal(int n_modes) {
    Vec j(static_cast<std::size_t>(n_modes));
    for (int k = 0; k < n_modes; ++k) j[k] = 1.0 / (k + 1);
    return j;
}

inline QWienerPath to_q_wiener(const DriverBundle& d, const Vec& j_diag) {
    if (static_cast<int>(j_diag.size()) != d.n_modes)
        throw DimensionError("to_q_wiener: embedding diagonal has wrong length");
    for (double j : j_diag)
        if (!(j > 0.0)) throw DomainError("to_q_wiener: embedding diagonal entries must be positive");
    QWienerPath q;
    q.grid = d.grid;
    q.n_modes = d.n_modes;
    q.seed = d.seed;
    q.stream_id = d.stream_id;
    q.lambda.assign(j_diag.size(), 0.0);
    for (std::size_t k = 0; k < j_diag.size(); ++k) q.lambda[k] = j_diag[k] * j_diag[k];
    q.cumulative.assign(static_cast<std::size_t>(d.grid.n_points()), Vec(static_cast<std::size_t>(d.n_modes), 0.0));
    for (int i = 0; i < d.grid.n_steps(); ++i)
        for (int k = 0; k < d.n_modes; ++k) q.cumulative[i + 1][k] = q.cumulative[i][k] + j_diag[k] * d.increments[i][k];
    return q;
}

// Left inverse of to_q_wiener: beta_k = lambda_k^{-1/2} <W_bar, e_k>.
inline DriverBundle recover_components(const QWienerPath& q) {
    DriverBundle d;
    d.grid = q.grid;
    d.n_modes = q.n_modes;
    d.seed = q.seed;
    d.stream_id = q.stream_id;
    d.increments.assign(static_cast<std::size_t>(q.grid.n_steps()), Vec(static_cast<std::size_t>(q.n_modes)));
    Vec inv_j(static_cast<std::size_t>(q.n_modes));
    for (int k = 0; k < q.n_modes; ++k) {
        if (!(q.lambda[k] > 0.0))
            throw SingularEmbeddingError("recover_components: covariance eigenvalue " + std::to_string(k + 1) +
                                         " is not positive");
        inv_j[k] = 1.0 / std::sqrt(q.lambda[k]);
    }
    for (int i = 0; i < q.grid.n_steps(); ++i)
        for (int k = 0; k < q.n_modes; ++k)
            d.increments[i][k] = inv_j[k] * (q.cumulative[i + 1][k] - q.cumulative[i][k]);
    return d;
}

inline PathRecord cumulative_path(const DriverBundle& d) {
    PathRecord p = zero_path(d.grid, d.n_modes);
    for (int i = 0; i < d.grid.n_steps(); ++i)
        for (int k = 0; k < d.n_modes; ++k) p.at(i + 1)[k] = p.at(i)[k] + d.increments[i][k];
    return p;
}

}  // namespace framelab
