#pragma once

// Gaussian priors x ~ N(0, C) through a factorization C^-1 = B^T B, and the
// two concrete priors of the experiments: a second-order smoothness prior in
// 1D and a Whittle-Matern type prior on an n x n pixel grid.

#include "priorkryl/banded.hpp"
#include "priorkryl/core.hpp"
#include "priorkryl/operators.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <optional>
#include <string>
#include <utility>

namespace priorkryl {

/// Zero-mean Gaussian prior with precision C^-1 = B^T B. B is kept in band
/// form together with its LU factors so that B, B^T, B^-1 and B^-T all cost
/// O(n * bandwidth).
class GaussianPrior {
 public:
  GaussianPrior() = default;
  explicit GaussianPrior(BandedMatrix factor) : b_(std::move(factor)), lu_(b_) {}

  /// B = upper Cholesky factor of a dense SPD precision matrix.
  static GaussianPrior from_precision(const Matrix& precision) {
    if (precision.rows() != precision.cols()) {
      throw DimensionError("GaussianPrior::from_precision: matrix not square");
    }
    Eigen::LLT<Matrix> llt(precision);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("GaussianPrior::from_precision: precision not positive definite");
    }
    const Matrix r = llt.matrixU();
    return GaussianPrior(BandedMatrix::from_dense(r, 0, precision.rows() - 1));
  }

  /// Prior with the given dense SPD covariance.
  static GaussianPrior from_covariance(const Matrix& covariance) {
    Eigen::LLT<Matrix> llt(covariance);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("GaussianPrior::from_covariance: covariance not positive definite");
    }
    const Matrix inv = llt.solve(Matrix::Identity(covariance.rows(), covariance.cols()));
    return from_precision(0.5 * (inv + inv.transpose()));
  }

  Index dim() const { return b_.rows(); }
  const BandedMatrix& factor() const { return b_; }

  Vector apply_B(const Vector& x) const { return b_.apply(x); }
  Vector apply_Bt(const Vector& x) const { return b_.apply_adjoint(x); }
  Vector solve_B(const Vector& y) const { return lu_.solve(y); }
  Vector solve_Bt(const Vector& y) const { return lu_.solve_transpose(y); }

  /// C x = B^-1 B^-T x
  Vector apply_C(const Vector& x) const { return solve_B(solve_Bt(x)); }
  /// C^-1 x = B^T B x
  Vector apply_precision(const Vector& x) const { return apply_Bt(apply_B(x)); }

  Matrix dense_factor() const { return b_.to_dense(); }

  Matrix dense_covariance() const {
    const Index n = dim();
    Matrix c(n, n);
    Vector e = Vector::Zero(n);
    for (Index j = 0; j < n; ++j) {
      e[j] = 1.0;
      c.col(j) = apply_C(e);
      e[j] = 0.0;
    }
    return 0.5 * (c + c.transpose());
  }

  Matrix dense_precision() const {
    const Matrix b = dense_factor();
    return b.transpose() * b;
  }

  /// diag(C), the pointwise prior variances, as sum_j (B^-1 e_j)_i^2.
  Vector variances() const {
    const Index n = dim();
    Vector d = Vector::Zero(n);
    Vector e = Vector::Zero(n);
    for (Index j = 0; j < n; ++j) {
      e[j] = 1.0;
      d += solve_B(e).cwiseAbs2();
      e[j] = 0.0;
    }
    return d;
  }

 private:
  BandedMatrix b_;
  BandedLU lu_;
};

// ---------------------------------------------------------------------------
// Second-order smoothness prior on a 1D grid

/// beta * L with L = [alpha; (-1 2 -1) interior rows; alpha]. L is
/// tridiagonal; its first and last rows only carry the diagonal alpha.
inline BandedMatrix second_order_matrix(Index n, double alpha, double beta) {
  if (n < 3) {
    throw InputError("second-order prior needs n >= 3 for the (-1,2,-1) stencil, got n=" +
                     std::to_string(n));
  }
  if (!(beta > 0.0)) throw InputError("second-order prior: beta must be positive");
  if (!(alpha > 0.0)) throw InputError("second-order prior: alpha must be positive");
  BandedMatrix l(n, 1, 1);
  l.at(0, 0) = beta * alpha;
  l.at(n - 1, n - 1) = beta * alpha;
  for (Index i = 1; i < n - 1; ++i) {
    l.at(i, i - 1) = -beta;
    l.at(i, i) = 2.0 * beta;
    l.at(i, i + 1) = -beta;
  }
  return l;
}

/// max diag(C) / min diag(C) for the second-order prior. Independent of beta.
inline double variance_spread(Index n, double alpha) {
  const GaussianPrior p(second_order_matrix(n, alpha, 1.0));
  const Vector v = p.variances();
  return v.maxCoeff() / v.minCoeff();
}

struct AlphaBracket {
  double lo = 1e-8;
  double hi = 1e2;
};

/// Golden-section search over log(alpha) for the most uniform pointwise
/// variance. With this boundary structure the attainable spread levels off
/// near 8/7 for large n.
inline double calibrate_alpha(Index n, double beta = 1.0, AlphaBracket bracket = {}) {
  if (n < 3) throw InputError("calibrate_alpha: n must be >= 3");
  if (!(beta > 0.0)) throw InputError("calibrate_alpha: beta must be positive");
  if (!(bracket.lo > 0.0 && bracket.hi > bracket.lo)) {
    throw InputError("calibrate_alpha: invalid bracket");
  }
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  const double log_lo = std::log(bracket.lo);
  const double log_hi = std::log(bracket.hi);
  double a = log_lo, b = log_hi;
  auto f = [n](double la) { return variance_spread(n, std::exp(la)); };
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 200 && (b - a) > 1e-9; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  const double best = 0.5 * (a + b);
  const double edge_tol = 1e-6 * (log_hi - log_lo);
  if (best - log_lo < edge_tol || log_hi - best < edge_tol) {
    throw NumericalError("calibrate_alpha: optimum at bracket edge [" +
                         std::to_string(bracket.lo) + ", " + std::to_string(bracket.hi) +
                         "], best spread " + std::to_string(f(best)));
  }
  return std::exp(best);
}

struct SecondOrderPrior1D {
  Index n = 0;
  double alpha = 0.0;
  double beta = 1.0;
  GaussianPrior prior;

  BandedMatrix matrix() const { return prior.factor(); }
};

/// alpha = std::nullopt selects the calibrated (uniform variance) value.
inline SecondOrderPrior1D build_second_order_prior(Index n, double beta,
                                                   std::optional<double> alpha) {
  if (n < 3) {
    throw InputError("build_second_order_prior: n must be >= 3, got " + std::to_string(n));
  }
  const double a = alpha ? *alpha : calibrate_alpha(n, beta);
  return SecondOrderPrior1D{n, a, beta, GaussianPrior(second_order_matrix(n, a, beta))};
}

// ---------------------------------------------------------------------------
// Whittle-Matern type precision on an n x n grid

/// Scaling of the 1D three-point Laplacian D = s * tridiag(1, -2, 1).
enum class LaplacianScaling {
  Paper,     ///< s = 1/n^2
  Standard,  ///< s = n^2 = 1/h^2
};

inline double laplacian_scale(Index n, LaplacianScaling scaling) {
  const double nn = static_cast<double>(n) * static_cast<double>(n);
  return scaling == LaplacianScaling::Paper ? 1.0 / nn : nn;
}

/// K = -I (x) D - D (x) I + (1/l^2) I, pixels numbered p = row * n + col.
/// `lambda_pixels` is the correlation length in pixels; the shift uses the
/// same length in domain units, l = lambda_pixels / n.
inline SparseMatrix whittle_matern_precision(Index n, double lambda_pixels,
                                             LaplacianScaling scaling) {
  if (n < 1) throw InputError("whittle_matern_precision: n must be >= 1");
  if (!(lambda_pixels > 0.0)) {
    throw InputError("whittle_matern_precision: lambda must be positive");
  }
  const double s = laplacian_scale(n, scaling);
  const double l = lambda_pixels / static_cast<double>(n);
  const double shift = 1.0 / (l * l);
  const Index big_n = n * n;
  SparseMatrix k(big_n, big_n);
  for (Index row = 0; row < n; ++row) {
    for (Index col = 0; col < n; ++col) {
      std::vector<std::pair<Index, double>> entries;
      const Index p = row * n + col;
      if (row > 0) entries.emplace_back(p - n, -s);
      if (col > 0) entries.emplace_back(p - 1, -s);
      entries.emplace_back(p, 4.0 * s + shift);
      if (col + 1 < n) entries.emplace_back(p + 1, -s);
      if (row + 1 < n) entries.emplace_back(p + n, -s);
      k.append_row(std::move(entries));
    }
  }
  return k;
}

struct WhittleMaternPrior {
  Index side = 0;
  double lambda = 0.0;
  LaplacianScaling scaling = LaplacianScaling::Standard;
  SparseMatrix precision;
  GaussianPrior prior;  ///< B = R with K = R^T R, upper bandwidth n
};

inline WhittleMaternPrior build_whittle_matern_prior(Index n, double lambda_pixels,
                                                     LaplacianScaling scaling) {
  SparseMatrix k = whittle_matern_precision(n, lambda_pixels, scaling);
  BandedMatrix r = banded_cholesky(k, n);
  return WhittleMaternPrior{n, lambda_pixels, scaling, std::move(k),
                            GaussianPrior(std::move(r))};
}

}  // namespace priorkryl
