#pragma once

// Square banded matrices with an unpivoted banded LU, and the banded
// Cholesky factorization K = R^T R used for sparse precision matrices.

#include "priorkryl/core.hpp"
#include "priorkryl/operators.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace priorkryl {

/// n x n matrix with `lower` subdiagonals and `upper` superdiagonals, stored
/// row by row: entry (i, j) lives at i * (lower + upper + 1) + (j - i + lower).
class BandedMatrix {
 public:
  BandedMatrix() = default;
  BandedMatrix(Index n, Index lower, Index upper)
      : n_(n), lower_(lower), upper_(upper),
        data_(static_cast<std::size_t>(n * (lower + upper + 1)), 0.0) {
    if (n < 1 || lower < 0 || upper < 0) {
      throw InputError("BandedMatrix: invalid shape n=" + std::to_string(n) +
                       " lower=" + std::to_string(lower) +
                       " upper=" + std::to_string(upper));
    }
  }

  /// Banded view of a dense square matrix with the given bandwidths.
  /// Entries outside the band must be zero.
  static BandedMatrix from_dense(const Matrix& a, Index lower, Index upper) {
    if (a.rows() != a.cols()) throw DimensionError("BandedMatrix::from_dense: not square");
    BandedMatrix b(a.rows(), lower, upper);
    for (Index i = 0; i < a.rows(); ++i) {
      for (Index j = 0; j < a.cols(); ++j) {
        if (j - i > upper || i - j > lower) {
          if (a(i, j) != 0.0) {
            throw InputError("BandedMatrix::from_dense: entry (" + std::to_string(i) +
                             "," + std::to_string(j) + ") outside band");
          }
        } else {
          b.at(i, j) = a(i, j);
        }
      }
    }
    return b;
  }

  Index rows() const { return n_; }
  Index cols() const { return n_; }
  Index lower() const { return lower_; }
  Index upper() const { return upper_; }

  bool in_band(Index i, Index j) const {
    return j - i <= upper_ && i - j <= lower_ && i >= 0 && j >= 0 && i < n_ && j < n_;
  }
  double& at(Index i, Index j) { return data_[offset(i, j)]; }
  double at(Index i, Index j) const { return data_[offset(i, j)]; }
  double coeff(Index i, Index j) const { return in_band(i, j) ? at(i, j) : 0.0; }

  Index first_col(Index i) const { return std::max<Index>(0, i - lower_); }
  Index last_col(Index i) const { return std::min<Index>(n_ - 1, i + upper_); }

  Vector apply(const Vector& x) const {
    detail::require_size(x.size(), n_, "BandedMatrix::apply");
    Vector y(n_);
    for (Index i = 0; i < n_; ++i) {
      double acc = 0.0;
      for (Index j = first_col(i); j <= last_col(i); ++j) acc += at(i, j) * x[j];
      y[i] = acc;
    }
    return y;
  }

  Vector apply_adjoint(const Vector& u) const {
    detail::require_size(u.size(), n_, "BandedMatrix::apply_adjoint");
    Vector y = Vector::Zero(n_);
    for (Index i = 0; i < n_; ++i) {
      for (Index j = first_col(i); j <= last_col(i); ++j) y[j] += at(i, j) * u[i];
    }
    return y;
  }

  Matrix to_dense() const {
    Matrix d = Matrix::Zero(n_, n_);
    for (Index i = 0; i < n_; ++i) {
      for (Index j = first_col(i); j <= last_col(i); ++j) d(i, j) = at(i, j);
    }
    return d;
  }

  BandedMatrix scaled(double factor) const {
    BandedMatrix b = *this;
    for (double& v : b.data_) v *= factor;
    return b;
  }

 private:
  std::size_t offset(Index i, Index j) const {
    return static_cast<std::size_t>(i * (lower_ + upper_ + 1) + (j - i + lower_));
  }

  Index n_ = 0;
  Index lower_ = 0;
  Index upper_ = 0;
  std::vector<double> data_;
};

/// Doolittle LU without pivoting, A = L U, L unit lower with A's lower
/// bandwidth, U upper with A's upper bandwidth. Suitable for triangular
/// factors and for diagonally dominant band matrices.
class BandedLU {
 public:
  BandedLU() = default;
  explicit BandedLU(const BandedMatrix& a) : lu_(a) {
    const Index n = lu_.rows();
    for (Index k = 0; k < n; ++k) {
      const double pivot = lu_.at(k, k);
      if (pivot == 0.0 || !std::isfinite(pivot)) {
        throw NumericalError("BandedLU: zero or non-finite pivot at row " +
                             std::to_string(k));
      }
      const Index row_end = std::min<Index>(n - 1, k + lu_.lower());
      const Index col_end = std::min<Index>(n - 1, k + lu_.upper());
      for (Index i = k + 1; i <= row_end; ++i) {
        const double l = lu_.at(i, k) / pivot;
        lu_.at(i, k) = l;
        if (l == 0.0) continue;
        for (Index j = k + 1; j <= col_end; ++j) lu_.at(i, j) -= l * lu_.at(k, j);
      }
    }
  }

  Index dim() const { return lu_.rows(); }

  /// x = A^-1 y
  Vector solve(const Vector& y) const {
    detail::require_size(y.size(), dim(), "BandedLU::solve");
    const Index n = dim();
    Vector x = y;
    for (Index i = 0; i < n; ++i) {
      for (Index j = lu_.first_col(i); j < i; ++j) x[i] -= lu_.at(i, j) * x[j];
    }
    for (Index i = n - 1; i >= 0; --i) {
      for (Index j = i + 1; j <= lu_.last_col(i); ++j) x[i] -= lu_.at(i, j) * x[j];
      x[i] /= lu_.at(i, i);
    }
    return x;
  }

  /// x = A^-T y, i.e. solves U^T L^T x = y.
  Vector solve_transpose(const Vector& y) const {
    detail::require_size(y.size(), dim(), "BandedLU::solve_transpose");
    const Index n = dim();
    Vector x = y;
    // U^T z = y: forward, column-oriented over rows of U.
    for (Index i = 0; i < n; ++i) {
      x[i] /= lu_.at(i, i);
      const double xi = x[i];
      for (Index j = i + 1; j <= lu_.last_col(i); ++j) x[j] -= lu_.at(i, j) * xi;
    }
    // L^T x = z: backward.
    for (Index i = n - 1; i >= 0; --i) {
      const double xi = x[i];
      for (Index j = lu_.first_col(i); j < i; ++j) x[j] -= lu_.at(i, j) * xi;
    }
    return x;
  }

 private:
  BandedMatrix lu_;
};

/// Upper-triangular banded R with R^T R = K for a symmetric positive definite
/// sparse K whose entries vanish beyond `bandwidth` off the diagonal.
inline BandedMatrix banded_cholesky(const SparseMatrix& k, Index bandwidth) {
  if (k.rows() != k.cols()) {
    throw DimensionError("banded_cholesky: matrix is " + std::to_string(k.rows()) +
                         "x" + std::to_string(k.cols()));
  }
  const Index n = k.rows();
  if (bandwidth < 0) throw InputError("banded_cholesky: negative bandwidth");
  BandedMatrix r(n, 0, bandwidth);

  double max_abs = 0.0;
  for (double v : k.values()) max_abs = std::max(max_abs, std::abs(v));
  const double sym_tol = 1e-12 * std::max(1.0, max_abs);

  for (Index i = 0; i < n; ++i) {
    const auto cols = k.row_columns(i);
    const auto vals = k.row_values(i);
    for (std::size_t t = 0; t < cols.size(); ++t) {
      const Index j = cols[t];
      if (std::abs(j - i) > bandwidth) {
        if (vals[t] == 0.0) continue;
        throw InputError("banded_cholesky: entry (" + std::to_string(i) + "," +
                         std::to_string(j) + ") lies outside bandwidth " +
                         std::to_string(bandwidth));
      }
      if (std::abs(vals[t] - k.coeff(j, i)) > sym_tol) {
        throw InputError("banded_cholesky: matrix not symmetric at (" +
                         std::to_string(i) + "," + std::to_string(j) + ")");
      }
      if (j >= i) r.at(i, j) = vals[t];
    }
  }

  // Right-looking update restricted to the band.
  for (Index i = 0; i < n; ++i) {
    const double d = r.at(i, i);
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw NumericalError("banded_cholesky: nonpositive pivot " + std::to_string(d) +
                           " at row " + std::to_string(i));
    }
    const double rii = std::sqrt(d);
    r.at(i, i) = rii;
    const Index end = r.last_col(i);
    for (Index j = i + 1; j <= end; ++j) r.at(i, j) /= rii;
    for (Index p = i + 1; p <= end; ++p) {
      const double rip = r.at(i, p);
      if (rip == 0.0) continue;
      for (Index q = p; q <= end; ++q) r.at(p, q) -= rip * r.at(i, q);
    }
  }
  return r;
}

}  // namespace priorkryl
