#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace framelab {

using Vec = std::vector<double>;

// Error taxonomy. Everything derives from std::runtime_error so the CLI can
// report any failure uniformly; the concrete types let tests pin error paths.
struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

struct CommensurabilityError : std::runtime_error {
    explicit CommensurabilityError(const std::string& what) : std::runtime_error(what) {}
};

struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

struct WindowError : std::runtime_error {
    explicit WindowError(const std::string& what) : std::runtime_error(what) {}
};

struct RangeError : std::runtime_error {
    explicit RangeError(const std::string& what) : std::runtime_error(what) {}
};

struct PreconditionError : std::runtime_error {
    explicit PreconditionError(const std::string& what) : std::runtime_error(what) {}
};

struct SingularEmbeddingError : std::runtime_error {
    explicit SingularEmbeddingError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a solver state leaves the admissible region; carries the step.
struct DivergenceError : std::runtime_error {
    int step;
    DivergenceError(const std::string& what, int step_index)
        : std::runtime_error(what + " (step " + std::to_string(step_index) + ")"), step(step_index) {}
};

// Dense row-major matrix, sized once. Used for diffusion operators sigma(t,w)
// with rows = state dimension and cols = driving noise modes.
class Matrix {
  public:
    Matrix() = default;
    Matrix(int rows, int cols)
        : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, 0.0) {
        if (rows < 0 || cols < 0) throw DimensionError("Matrix: negative extent");
    }

    static Matrix diagonal(const Vec& d) {
        Matrix m(static_cast<int>(d.size()), static_cast<int>(d.size()));
        for (std::size_t i = 0; i < d.size(); ++i) m(static_cast<int>(i), static_cast<int>(i)) = d[i];
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols_ + j]; }

    Vec column(int j) const {
        Vec c(rows_);
        for (int i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
        return c;
    }

    void set_column(int j, const Vec& c) {
        for (int i = 0; i < rows_; ++i) (*this)(i, j) = c[i];
    }

    const Vec& raw() const { return data_; }

  private:
    int rows_ = 0;
    int cols_ = 0;
    Vec data_;
};

inline Vec matvec(const Matrix& m, const Vec& x) {
    if (static_cast<int>(x.size()) != m.cols())
        throw DimensionError("matvec: operator has " + std::to_string(m.cols()) + " columns, vector has " +
                             std::to_string(x.size()));
    Vec y(m.rows(), 0.0);
    for (int i = 0; i < m.rows(); ++i) {
        double acc = 0.0;
        for (int j = 0; j < m.cols(); ++j) acc += m(i, j) * x[j];
        y[i] = acc;
    }
    return y;
}

inline double frobenius_norm(const Matrix& m) {
    double s = 0.0;
    for (double v : m.raw()) s += v * v;
    return std::sqrt(s);
}

inline void axpy(double a, const Vec& x, Vec& y) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

inline bool all_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace framelab
