#pragma once

// Linear operators: the LinearOperator concept, dense and compressed-row
// realizations, and the right-priorconditioned composite A B^-1.

#include "priorkryl/core.hpp"

#include <Eigen/SVD>
#include <Eigen/SparseCore>

#include <algorithm>
#include <concepts>
#include <span>
#include <type_traits>
#include <string>
#include <utility>
#include <vector>

namespace priorkryl {

/// A real m-by-n map known through its action and the action of its adjoint.
template <class T>
concept LinearOperator = requires(const T& op, const Vector& v) {
  { op.rows() } -> std::convertible_to<Index>;
  { op.cols() } -> std::convertible_to<Index>;
  { op.apply(v) } -> std::convertible_to<Vector>;
  { op.apply_adjoint(v) } -> std::convertible_to<Vector>;
};

/// Anything providing B^-1 and B^-T on n-vectors.
template <class T>
concept InvertibleFactor = requires(const T& f, const Vector& v) {
  { f.dim() } -> std::convertible_to<Index>;
  { f.solve_B(v) } -> std::convertible_to<Vector>;
  { f.solve_Bt(v) } -> std::convertible_to<Vector>;
};

class IdentityOperator {
 public:
  explicit IdentityOperator(Index n) : n_(n) {}
  Index rows() const { return n_; }
  Index cols() const { return n_; }
  Vector apply(const Vector& x) const {
    detail::require_size(x.size(), n_, "IdentityOperator::apply");
    return x;
  }
  Vector apply_adjoint(const Vector& u) const {
    detail::require_size(u.size(), n_, "IdentityOperator::apply_adjoint");
    return u;
  }

 private:
  Index n_;
};

/// Dense row-major matrix. All entries must be finite.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  explicit DenseMatrix(RowMajorMatrix entries) : a_(std::move(entries)) {
    if (!a_.allFinite()) throw InputError("DenseMatrix: non-finite entry");
  }
  explicit DenseMatrix(const Matrix& entries) : DenseMatrix(RowMajorMatrix(entries)) {}
  // expressions such as Matrix::Identity(n, n)
  template <class Derived>
    requires(!std::is_same_v<Derived, Matrix> && !std::is_same_v<Derived, RowMajorMatrix>)
  explicit DenseMatrix(const Eigen::MatrixBase<Derived>& entries)
      : DenseMatrix(RowMajorMatrix(entries)) {}

  Index rows() const { return a_.rows(); }
  Index cols() const { return a_.cols(); }
  const RowMajorMatrix& entries() const { return a_; }
  Matrix to_dense() const { return a_; }

  Vector apply(const Vector& x) const {
    if (x.size() != cols()) {
      throw DimensionError("DenseMatrix::apply: matrix is " + shape() +
                           ", vector has length " + std::to_string(x.size()));
    }
    return a_ * x;
  }
  Vector apply_adjoint(const Vector& u) const {
    if (u.size() != rows()) {
      throw DimensionError("DenseMatrix::apply_adjoint: matrix is " + shape() +
                           ", vector has length " + std::to_string(u.size()));
    }
    return a_.transpose() * u;
  }

 private:
  std::string shape() const {
    return std::to_string(rows()) + "x" + std::to_string(cols());
  }
  RowMajorMatrix a_;
};

/// Compressed-row sparse matrix. Column indices are strictly increasing
/// within a row. Rows are appended one at a time.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(Index rows, Index cols) : rows_(rows), cols_(cols) {
    offsets_.reserve(static_cast<std::size_t>(rows) + 1);
  }

  /// Appends the next row. Entries need not be sorted; duplicate columns are
  /// rejected.
  void append_row(std::vector<std::pair<Index, double>> entries) {
    if (completed_rows() >= rows_) {
      throw DimensionError("SparseMatrix::append_row: all " +
                           std::to_string(rows_) + " rows already set");
    }
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t k = 0; k < entries.size(); ++k) {
      const Index c = entries[k].first;
      if (c < 0 || c >= cols_) {
        throw DimensionError("SparseMatrix::append_row: column " +
                             std::to_string(c) + " outside [0," +
                             std::to_string(cols_) + ")");
      }
      if (k > 0 && entries[k - 1].first == c) {
        throw InputError("SparseMatrix::append_row: duplicate column " +
                         std::to_string(c));
      }
    }
    // validated first so a rejected row leaves the matrix untouched
    for (const auto& [c, v] : entries) {
      cols_idx_.push_back(c);
      values_.push_back(v);
    }
    offsets_.push_back(static_cast<Index>(values_.size()));
  }

  /// Assembles from (row, col, value) triplets; duplicates are summed.
  static SparseMatrix from_triplets(Index rows, Index cols,
                                    std::vector<Eigen::Triplet<double>> triplets) {
    std::sort(triplets.begin(), triplets.end(), [](const auto& a, const auto& b) {
      return a.row() != b.row() ? a.row() < b.row() : a.col() < b.col();
    });
    SparseMatrix s(rows, cols);
    std::size_t k = 0;
    for (Index r = 0; r < rows; ++r) {
      std::vector<std::pair<Index, double>> row;
      while (k < triplets.size() && triplets[k].row() == r) {
        if (!row.empty() && row.back().first == triplets[k].col()) {
          row.back().second += triplets[k].value();
        } else {
          row.emplace_back(triplets[k].col(), triplets[k].value());
        }
        ++k;
      }
      s.append_row(std::move(row));
    }
    if (k != triplets.size()) {
      throw DimensionError("SparseMatrix::from_triplets: row index out of range");
    }
    return s;
  }

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index nonzeros() const { return static_cast<Index>(values_.size()); }
  Index completed_rows() const { return static_cast<Index>(offsets_.size()) - 1; }

  std::span<const Index> offsets() const { return offsets_; }
  std::span<const Index> column_indices() const { return cols_idx_; }
  std::span<const double> values() const { return values_; }

  std::span<const Index> row_columns(Index r) const {
    return std::span<const Index>(cols_idx_).subspan(
        static_cast<std::size_t>(offsets_[r]),
        static_cast<std::size_t>(offsets_[r + 1] - offsets_[r]));
  }
  std::span<const double> row_values(Index r) const {
    return std::span<const double>(values_).subspan(
        static_cast<std::size_t>(offsets_[r]),
        static_cast<std::size_t>(offsets_[r + 1] - offsets_[r]));
  }

  /// Entry (r, c) by binary search within the row; zero when absent.
  double coeff(Index r, Index c) const {
    const auto cols = row_columns(r);
    const auto it = std::lower_bound(cols.begin(), cols.end(), c);
    if (it == cols.end() || *it != c) return 0.0;
    return row_values(r)[static_cast<std::size_t>(it - cols.begin())];
  }

  Vector apply(const Vector& x) const {
    check_complete();
    detail::require_size(x.size(), cols_, "SparseMatrix::apply");
    Vector y(rows_);
    for (Index r = 0; r < rows_; ++r) {
      double acc = 0.0;
      for (Index k = offsets_[r]; k < offsets_[r + 1]; ++k) {
        acc += values_[k] * x[cols_idx_[k]];
      }
      y[r] = acc;
    }
    return y;
  }

  Vector apply_adjoint(const Vector& u) const {
    check_complete();
    detail::require_size(u.size(), rows_, "SparseMatrix::apply_adjoint");
    Vector y = Vector::Zero(cols_);
    for (Index r = 0; r < rows_; ++r) {
      const double ur = u[r];
      for (Index k = offsets_[r]; k < offsets_[r + 1]; ++k) {
        y[cols_idx_[k]] += values_[k] * ur;
      }
    }
    return y;
  }

  Matrix to_dense() const {
    check_complete();
    Matrix d = Matrix::Zero(rows_, cols_);
    for (Index r = 0; r < rows_; ++r) {
      for (Index k = offsets_[r]; k < offsets_[r + 1]; ++k) {
        d(r, cols_idx_[k]) = values_[k];
      }
    }
    return d;
  }

  SparseMatrix scaled(double factor) const {
    SparseMatrix s = *this;
    for (double& v : s.values_) v *= factor;
    return s;
  }

 private:
  void check_complete() const {
    if (completed_rows() != rows_) {
      throw DimensionError("SparseMatrix: only " + std::to_string(completed_rows()) +
                           " of " + std::to_string(rows_) + " rows assembled");
    }
  }

  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<Index> offsets_{0};
  std::vector<Index> cols_idx_;
  std::vector<double> values_;
};

/// c * A, used by whitening.
template <LinearOperator Op>
class ScaledOperator {
 public:
  ScaledOperator(Op base, double scale) : base_(std::move(base)), scale_(scale) {}
  Index rows() const { return base_.rows(); }
  Index cols() const { return base_.cols(); }
  double scale() const { return scale_; }
  const Op& base() const { return base_; }
  Vector apply(const Vector& x) const { return scale_ * base_.apply(x); }
  Vector apply_adjoint(const Vector& u) const {
    return scale_ * base_.apply_adjoint(u);
  }

 private:
  Op base_;
  double scale_;
};

/// The composite A B^-1 acting on whitened coordinates w = B x.
/// Holds references: base and prior must outlive the operator.
template <LinearOperator Op, InvertibleFactor Prior>
class PriorconditionedOperator {
 public:
  PriorconditionedOperator(const Op& base, const Prior& prior)
      : base_(&base), prior_(&prior) {
    if (prior.dim() != base.cols()) {
      throw DimensionError("PriorconditionedOperator: operator has " +
                           std::to_string(base.cols()) + " columns, prior dimension " +
                           std::to_string(prior.dim()));
    }
  }
  Index rows() const { return base_->rows(); }
  Index cols() const { return base_->cols(); }
  const Op& base() const { return *base_; }
  const Prior& prior() const { return *prior_; }

  Vector apply(const Vector& w) const { return base_->apply(prior_->solve_B(w)); }
  Vector apply_adjoint(const Vector& u) const {
    return prior_->solve_Bt(base_->apply_adjoint(u));
  }

 private:
  const Op* base_;
  const Prior* prior_;
};

/// Materializes any operator column by column (A e_j).
template <LinearOperator Op>
Matrix to_dense(const Op& op) {
  if constexpr (requires { { op.to_dense() } -> std::convertible_to<Matrix>; }) {
    return op.to_dense();
  } else {
    Matrix d(op.rows(), op.cols());
    Vector e = Vector::Zero(op.cols());
    for (Index j = 0; j < op.cols(); ++j) {
      e[j] = 1.0;
      d.col(j) = op.apply(e);
      e[j] = 0.0;
    }
    return d;
  }
}

/// Full singular value decomposition A = U diag(s) V^T.
struct SvdResult {
  Matrix U;                ///< m x m orthogonal
  Vector singular_values;  ///< min(m,n) values, nonincreasing
  Matrix V;                ///< n x n orthogonal

  /// Number of singular values above kRankTolerance * max.
  Index rank() const {
    if (singular_values.size() == 0 || singular_values[0] == 0.0) return 0;
    const double cutoff = kRankTolerance * singular_values[0];
    return static_cast<Index>(
        (singular_values.array() > cutoff).count());
  }
};

/// Two-sided Jacobi SVD. Pass thin = true to get only the leading
/// min(m,n) columns of U and V.
inline SvdResult svd(const Matrix& a, bool thin = false) {
  if (!a.allFinite()) throw InputError("svd: matrix has non-finite entries");
  const unsigned opts = thin ? (Eigen::ComputeThinU | Eigen::ComputeThinV)
                             : (Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::JacobiSVD<Matrix> solver(a, opts);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("svd: Jacobi sweeps did not converge for " +
                         std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " matrix");
  }
  return SvdResult{solver.matrixU(), solver.singularValues(), solver.matrixV()};
}

inline SvdResult svd(const DenseMatrix& a, bool thin = false) {
  return svd(a.to_dense(), thin);
}

}  // namespace priorkryl
