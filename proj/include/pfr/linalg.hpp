#pragma once

// Dense row-major matrices and the symmetric eigensolver behind the PFR
// eigenproblems.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pfr/errors.hpp"

namespace pfr {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw DimensionError("matrix data size " + std::to_string(data_.size()) +
                           " does not match " + std::to_string(rows_) + "x" +
                           std::to_string(cols_));
    }
  }
  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw DimensionError("ragged matrix literal");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  std::vector<double> column(std::size_t j) const {
    std::vector<double> out(rows_);
    for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
    return out;
  }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

inline Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " times " +
                         std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out[j] += aik * brow[j];
    }
  }
  return c;
}

inline Matrix operator+(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("matrix add: shape mismatch");
  Matrix c = a;
  auto cd = c.data();
  const auto bd = b.data();
  for (std::size_t i = 0; i < cd.size(); ++i) cd[i] += bd[i];
  return c;
}

inline Matrix operator-(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("matrix sub: shape mismatch");
  Matrix c = a;
  auto cd = c.data();
  const auto bd = b.data();
  for (std::size_t i = 0; i < cd.size(); ++i) cd[i] -= bd[i];
  return c;
}

inline Matrix operator*(double s, const Matrix& a) {
  Matrix c = a;
  for (double& v : c.data()) v *= s;
  return c;
}

/// y = A x
inline std::vector<double> multiply(const Matrix& a, std::span<const double> x) {
  if (x.size() != a.cols()) throw DimensionError("matrix-vector: size mismatch");
  std::vector<double> y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto r = a.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) s += r[j] * x[j];
    y[i] = s;
  }
  return y;
}

/// y = A^T x
inline std::vector<double> multiply_transposed(const Matrix& a, std::span<const double> x) {
  if (x.size() != a.rows()) throw DimensionError("transposed matrix-vector: size mismatch");
  std::vector<double> y(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto r = a.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) y[j] += r[j] * x[i];
  }
  return y;
}

inline double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

inline double trace(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < std::min(a.rows(), a.cols()); ++i) s += a(i, i);
  return s;
}

inline bool all_finite(const Matrix& a) {
  return std::all_of(a.data().begin(), a.data().end(), [](double v) { return std::isfinite(v); });
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

/// Square matrix with bitwise-symmetric entries. Construction symmetrizes as
/// (A + A^T) / 2 and rejects non-finite input.
class SymmetricMatrix {
 public:
  explicit SymmetricMatrix(const Matrix& a) : entries_(a.rows(), a.cols()) {
    if (a.rows() != a.cols() || a.rows() == 0) {
      throw DimensionError("symmetric matrix must be square and non-empty, got " +
                           std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
    }
    if (!all_finite(a)) throw InputError("symmetric matrix has non-finite entries");
    const std::size_t n = a.rows();
    for (std::size_t i = 0; i < n; ++i) {
      entries_(i, i) = a(i, i);
      for (std::size_t j = i + 1; j < n; ++j) {
        const double v = 0.5 * (a(i, j) + a(j, i));
        entries_(i, j) = v;
        entries_(j, i) = v;
      }
    }
  }

  std::size_t order() const noexcept { return entries_.rows(); }
  const Matrix& entries() const noexcept { return entries_; }
  double operator()(std::size_t i, std::size_t j) const { return entries_(i, j); }

 private:
  Matrix entries_;
};

/// Eigenvalues ascending; `vectors` holds the matching orthonormal
/// eigenvectors as columns (n x d).
struct EigenPairs {
  std::vector<double> values;
  Matrix vectors;
};

namespace detail {

inline constexpr int kMaxJacobiSweeps = 100;

inline double off_diagonal_norm(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i + 1; j < a.cols(); ++j) s += a(i, j) * a(i, j);
  return std::sqrt(2.0 * s);
}

/// Cyclic Jacobi on a copy of `sym`. Returns the diagonalized matrix's
/// diagonal and the accumulated rotations (columns are eigenvectors), both in
/// the original index order.
inline std::pair<std::vector<double>, Matrix> jacobi(const SymmetricMatrix& sym) {
  const std::size_t n = sym.order();
  Matrix a = sym.entries();
  Matrix v = Matrix::identity(n);
  const double threshold = 1e-12 * frobenius_norm(a);
  const double skip = threshold / static_cast<double>(n);

  bool converged = off_diagonal_norm(a) <= threshold;
  for (int sweep = 0; sweep < kMaxJacobiSweeps && !converged; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= skip) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t;
        if (std::abs(theta) > 1e150) {
          t = 0.5 / theta;
        } else {
          t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        }
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          const double akp = a(k, p);
          const double akq = a(k, q);
          const double new_kp = c * akp - s * akq;
          const double new_kq = s * akp + c * akq;
          a(k, p) = new_kp;
          a(p, k) = new_kp;
          a(k, q) = new_kq;
          a(q, k) = new_kq;
        }
        a(p, p) -= t * apq;
        a(q, q) += t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
    converged = off_diagonal_norm(a) <= threshold;
  }
  if (!converged) {
    throw NumericalError("Jacobi eigensolver did not converge in " +
                         std::to_string(kMaxJacobiSweeps) + " sweeps");
  }
  std::vector<double> diag(n);
  for (std::size_t i = 0; i < n; ++i) diag[i] = a(i, i);
  return {std::move(diag), std::move(v)};
}

/// Flip the column so its largest-magnitude entry (lowest index on ties) is
/// positive.
inline void apply_sign_convention(std::vector<double>& column) {
  std::size_t arg = 0;
  for (std::size_t i = 1; i < column.size(); ++i) {
    if (std::abs(column[i]) > std::abs(column[arg])) arg = i;
  }
  if (column[arg] < 0.0) {
    for (double& c : column) c = -c;
  }
}

}  // namespace detail

/// The `d` algebraically smallest eigenpairs of `a`, ascending. Degenerate
/// eigenspaces come back as some orthonormal basis; only the residual and
/// orthonormality are guaranteed there.
inline EigenPairs eigh_smallest(const SymmetricMatrix& a, std::size_t d) {
  const std::size_t n = a.order();
  if (d < 1 || d > n) {
    throw DimensionError("eigh_smallest: requested " + std::to_string(d) +
                         " eigenpairs of an order-" + std::to_string(n) + " matrix");
  }
  auto [diag, rotations] = detail::jacobi(a);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return diag[x] < diag[y]; });

  EigenPairs out;
  out.values.resize(d);
  out.vectors = Matrix(n, d);
  for (std::size_t k = 0; k < d; ++k) {
    out.values[k] = diag[order[k]];
    std::vector<double> col = rotations.column(order[k]);
    detail::apply_sign_convention(col);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = col[i];
  }
  return out;
}

inline EigenPairs eigh(const SymmetricMatrix& a) { return eigh_smallest(a, a.order()); }

/// Solves A x = b for symmetric positive definite A by Cholesky. Returns
/// nullopt when A is not numerically positive definite.
inline std::optional<std::vector<double>> solve_spd(const Matrix& a, std::span<const double> b) {
  const std::size_t n = a.rows();
  if (a.cols() != n || b.size() != n) throw DimensionError("solve_spd: shape mismatch");
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = a(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
    if (!(diag > 0.0)) return std::nullopt;
    l(j, j) = std::sqrt(diag);
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = a(i, j);
      for (std::size_t k = 0; k < j; ++k) v -= l(i, k) * l(j, k);
      l(i, j) = v / l(j, j);
    }
  }
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double v = b[i];
    for (std::size_t k = 0; k < i; ++k) v -= l(i, k) * y[k];
    y[i] = v / l(i, i);
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double v = y[i];
    for (std::size_t k = i + 1; k < n; ++k) v -= l(k, i) * x[k];
    x[i] = v / l(i, i);
  }
  return x;
}

}  // namespace pfr
