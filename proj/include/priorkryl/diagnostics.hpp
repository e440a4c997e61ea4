#pragma once

// Spectral and subspace diagnostics for CGLS/PCGLS runs: GSVD of (A, B),
// null-space projector and fractions, the Lanczos tridiagonal implied by a
// CGLS trace, eigen-projections of the initial residual, the residual
// identity xi_k, the CG convergence bound, and C-orthogonality cosines.

#include "priorkryl/core.hpp"
#include "priorkryl/operators.hpp"
#include "priorkryl/priors.hpp"
#include "priorkryl/solvers.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace priorkryl {

// ---------------------------------------------------------------------------
// Null space

/// Orthogonal projector onto N(A), held as I - Q Q^T with Q an orthonormal
/// basis of R(A^T).
class NullspaceProjector {
 public:
  NullspaceProjector() = default;
  explicit NullspaceProjector(Matrix range_basis) : q_(std::move(range_basis)) {}

  Index dim() const { return q_.rows(); }
  Index rank() const { return q_.cols(); }
  const Matrix& range_basis() const { return q_; }

  Vector apply(const Vector& x) const {
    detail::require_size(x.size(), dim(), "NullspaceProjector::apply");
    return x - q_ * (q_.transpose() * x);
  }

  Matrix matrix() const {
    return Matrix::Identity(dim(), dim()) - q_ * q_.transpose();
  }

 private:
  Matrix q_;
};

/// Projector built from the right singular vectors of A above the rank cutoff.
inline NullspaceProjector nullspace_projector(const Matrix& a) {
  const SvdResult s = svd(a, /*thin=*/true);
  return NullspaceProjector(s.V.leftCols(s.rank()));
}

inline NullspaceProjector nullspace_projector(const DenseMatrix& a) {
  return nullspace_projector(a.to_dense());
}

/// ||P x|| / ||x||, clamped to [0, 1].
inline double nullspace_fraction(const NullspaceProjector& p, const Vector& x) {
  const double nx = x.norm();
  if (nx == 0.0) throw InputError("nullspace_fraction: zero vector");
  return std::clamp(p.apply(x).norm() / nx, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Spectrum of A^T A

/// Nonzero eigenpairs of A^T A in ascending order of eigenvalue.
struct SpectralData {
  Vector eigenvalues;   ///< lambda_1 <= ... <= lambda_r, all above the cutoff
  Matrix eigenvectors;  ///< n x r, orthonormal columns q_i
  Index n = 0;

  Index rank() const { return eigenvalues.size(); }
  double lambda_min() const { return eigenvalues[0]; }
  double lambda_max() const { return eigenvalues[rank() - 1]; }
  double condition() const { return lambda_max() / lambda_min(); }
};

inline SpectralData spectral_data(const Matrix& a) {
  const SvdResult s = svd(a, /*thin=*/true);
  const Index r = s.rank();
  SpectralData out;
  out.n = a.cols();
  out.eigenvalues.resize(r);
  out.eigenvectors.resize(a.cols(), r);
  for (Index i = 0; i < r; ++i) {
    const Index src = r - 1 - i;
    out.eigenvalues[i] = s.singular_values[src] * s.singular_values[src];
    out.eigenvectors.col(i) = s.V.col(src);
  }
  return out;
}

/// Spectrum of A~^T A~ for A~ = A B^-1.
inline Matrix priorconditioned_dense(const Matrix& a, const GaussianPrior& prior) {
  detail::require_size(prior.dim(), a.cols(), "priorconditioned_dense: prior dimension");
  Matrix at(a.rows(), a.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    at.row(i) = prior.solve_Bt(a.row(i).transpose()).transpose();
  }
  return at;
}

/// |r0^T q_i| for every nonzero eigendirection, same order as `spectral`.
inline Vector eigen_projections(const SpectralData& spectral, const Vector& r0) {
  detail::require_size(r0.size(), spectral.n, "eigen_projections: residual");
  return (spectral.eigenvectors.transpose() * r0).cwiseAbs();
}

/// r^T (A^T A)^+ r, the squared energy norm of a normal-equations residual
/// (equals ||A (x_* - x)||^2 for r = A^T (b - A x)).
inline double residual_energy_sq(const SpectralData& spectral, const Vector& r) {
  const Vector c = spectral.eigenvectors.transpose() * r;
  return (c.array().square() / spectral.eigenvalues.array()).sum();
}

// ---------------------------------------------------------------------------
// GSVD

/// A = U [0 | S_A] X^-1,  B = V diag(I, S_B) X^-1, with sA nondecreasing,
/// sB nonincreasing and sA^2 + sB^2 = 1.
struct GsvdResult {
  Matrix U;     ///< m x m
  Matrix V;     ///< n x n
  Matrix X;     ///< n x n
  Matrix Xinv;  ///< n x n
  Vector sA;    ///< m
  Vector sB;    ///< m

  Index m() const { return U.rows(); }
  Index n() const { return V.rows(); }
  Matrix x_prime() const { return X.leftCols(n() - m()); }
  Matrix x_dprime() const { return X.rightCols(m()); }
  Vector generalized_values() const { return sA.cwiseQuotient(sB); }
};

/// GSVD via the SVD of A~ = A B^-1 = U [0 | S~] V^T. With sB = 1/sqrt(1 + s~^2)
/// and sA = s~ sB, X = B^-1 V diag(I, S_B).
inline GsvdResult gsvd(const Matrix& a, const GaussianPrior& prior) {
  const Index m = a.rows();
  const Index n = a.cols();
  if (m >= n) {
    throw InputError("gsvd: expects m < n, got " + std::to_string(m) + "x" +
                     std::to_string(n));
  }
  const Matrix at = priorconditioned_dense(a, prior);
  const SvdResult s = svd(at);
  const double smax = s.singular_values[0];
  const double smin = s.singular_values[m - 1];
  if (!(smin > kRankTolerance * smax)) {
    throw NumericalError("gsvd: A is rank deficient, smallest singular value of A B^-1 is " +
                         std::to_string(smin) + " (largest " + std::to_string(smax) + ")");
  }

  GsvdResult g;
  g.U.resize(m, m);
  g.V.resize(n, n);
  g.sA.resize(m);
  g.sB.resize(m);
  g.V.leftCols(n - m) = s.V.rightCols(n - m);
  for (Index j = 0; j < m; ++j) {
    const Index src = m - 1 - j;
    const double st = s.singular_values[src];
    g.U.col(j) = s.U.col(src);
    g.V.col(n - m + j) = s.V.col(src);
    g.sB[j] = 1.0 / std::sqrt(1.0 + st * st);
    g.sA[j] = st * g.sB[j];
  }

  Vector scale = Vector::Ones(n);
  scale.tail(m) = g.sB;
  g.X.resize(n, n);
  for (Index c = 0; c < n; ++c) g.X.col(c) = prior.solve_B(scale[c] * g.V.col(c));
  const Matrix b = prior.dense_factor();
  g.Xinv = scale.cwiseInverse().asDiagonal() * g.V.transpose() * b;
  return g;
}

inline GsvdResult gsvd(const DenseMatrix& a, const GaussianPrior& prior) {
  return gsvd(a.to_dense(), prior);
}

/// Residuals of the GSVD identities, all relative.
struct GsvdChecks {
  double recon_a = 0.0;         ///< ||A - U [0|S_A] X^-1||_F / ||A||_F
  double recon_b = 0.0;         ///< ||B - V diag(I,S_B) X^-1||_F / ||B||_F
  double sum_squares = 0.0;     ///< max_j |sA_j^2 + sB_j^2 - 1|
  double null_residual = 0.0;   ///< ||A X'||_F / (||A||_F ||X'||_F)
  double diag_offmass = 0.0;    ///< off-diagonal mass of X^T C^-1 X, relative
  double c_cross = 0.0;         ///< ||X'^T C^-1 X''||_F relative
  double diag_deviation = 0.0;  ///< ||X^T C^-1 X - diag(I, S_B^2)||_F relative
  bool ordered = true;          ///< sA nondecreasing and sB nonincreasing
};

inline GsvdChecks gsvd_checks(const Matrix& a, const GaussianPrior& prior,
                              const GsvdResult& g) {
  const Index m = g.m();
  const Index n = g.n();
  GsvdChecks c;
  Matrix sa_block = Matrix::Zero(m, n);
  sa_block.rightCols(m) = g.sA.asDiagonal();
  c.recon_a = (a - g.U * sa_block * g.Xinv).norm() / a.norm();

  const Matrix b = prior.dense_factor();
  Vector sb_diag = Vector::Ones(n);
  sb_diag.tail(m) = g.sB;
  c.recon_b = (b - g.V * sb_diag.asDiagonal() * g.Xinv).norm() / b.norm();

  c.sum_squares = (g.sA.array().square() + g.sB.array().square() - 1.0).abs().maxCoeff();

  const Matrix xp = g.x_prime();
  c.null_residual = (a * xp).norm() / (a.norm() * xp.norm());

  const Matrix bx = b * g.X;
  const Matrix gram = bx.transpose() * bx;  // X^T C^-1 X
  const double gnorm = gram.norm();
  Matrix off = gram;
  off.diagonal().setZero();
  c.diag_offmass = off.norm() / gnorm;
  c.c_cross = gram.topRightCorner(n - m, m).norm() / gnorm;
  Vector expected = Vector::Ones(n);
  expected.tail(m) = g.sB.array().square();
  c.diag_deviation = (gram - Matrix(expected.asDiagonal())).norm() / gnorm;

  for (Index j = 1; j < m; ++j) {
    if (g.sA[j] < g.sA[j - 1] || g.sB[j] > g.sB[j - 1]) c.ordered = false;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Lanczos view of a CGLS trace

/// Tridiagonal T_k = L^T Delta^-1 L with L = Phi U Phi^-1, assembled from the
/// CGLS coefficients. U is unit upper bidiagonal with -beta_0..-beta_{k-2} on
/// the superdiagonal, so L has -sqrt(beta_j) there. T_k equals V_k^T A^T A V_k
/// for the normalized residual basis.
struct LanczosView {
  Index k = 0;
  Matrix T;
  Vector ritz;   ///< eigenvalues of T, ascending
  Vector Delta;  ///< alpha_0..alpha_{k-1}
  Vector Phi;    ///< ||r_0||..||r_{k-1}||
  Matrix Ubid;
  Matrix L;
};

inline LanczosView lanczos_tridiagonal(const IterationTrace& trace, Index k) {
  if (k < 1 || k > trace.iterations()) {
    throw InputError("lanczos_tridiagonal: k = " + std::to_string(k) +
                     " outside the " + std::to_string(trace.iterations()) +
                     " recorded iterations");
  }
  LanczosView v;
  v.k = k;
  v.Delta.resize(k);
  v.Phi.resize(k);
  v.Ubid = Matrix::Identity(k, k);
  for (Index j = 0; j < k; ++j) {
    v.Delta[j] = trace.alphas[static_cast<std::size_t>(j)];
    v.Phi[j] = trace.nres_norms[static_cast<std::size_t>(j)];
    if (j + 1 < k) v.Ubid(j, j + 1) = -trace.betas[static_cast<std::size_t>(j)];
  }
  v.L = v.Phi.asDiagonal() * v.Ubid * v.Phi.cwiseInverse().asDiagonal();
  v.T = v.L.transpose() * v.Delta.cwiseInverse().asDiagonal() * v.L;
  v.T = 0.5 * (v.T + v.T.transpose());

  Vector diag = v.T.diagonal();
  Vector sub = k > 1 ? Vector(v.T.diagonal(-1)) : Vector(0);
  Eigen::SelfAdjointEigenSolver<Matrix> es;
  es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw NumericalError("lanczos_tridiagonal: tridiagonal eigensolver failed at k = " +
                         std::to_string(k));
  }
  v.ritz = es.eigenvalues();
  return v;
}

/// V_k^T (A^T A) V_k computed from the recorded basis, for an operator in the
/// coordinates of the basis (A for CGLS, A B^-1 for PCGLS).
template <LinearOperator Op>
Matrix projected_tridiagonal(const IterationTrace& trace, const Op& op, Index k) {
  if (static_cast<Index>(trace.basis.size()) < k) {
    throw InputError("projected_tridiagonal: basis holds " +
                     std::to_string(trace.basis.size()) + " vectors, need " +
                     std::to_string(k));
  }
  Matrix av(op.rows(), k);
  for (Index j = 0; j < k; ++j) av.col(j) = op.apply(trace.basis[static_cast<std::size_t>(j)]);
  return av.transpose() * av;
}

/// r_k as a vector: ||r_k|| v_k from the basis, or the stored final residual.
inline Vector normal_residual(const IterationTrace& trace, Index k) {
  if (k == trace.iterations()) return trace.final_residual;
  if (k < 0 || k > trace.iterations()) {
    throw InputError("normal_residual: k = " + std::to_string(k) + " out of range");
  }
  if (static_cast<Index>(trace.basis.size()) <= k) {
    throw InputError("normal_residual: residual basis was not recorded");
  }
  return trace.nres_norms[static_cast<std::size_t>(k)] *
         trace.basis[static_cast<std::size_t>(k)];
}

/// xi_k with  ||r_k||^2_{(A^T A)^+} = S / xi^(2k+1),
///   S = sum_i prod_j (lambda_i - theta_j)^2 (r_0^T q_i)^2,
/// solved in closed form in log space. Empty when the residual vanishes.
inline std::optional<double> residual_identity_xi(const IterationTrace& trace,
                                                  const SpectralData& spectral, Index k) {
  if (k < 1 || k > spectral.rank()) {
    throw InputError("residual_identity_xi: k = " + std::to_string(k) +
                     " must lie in [1, rank = " + std::to_string(spectral.rank()) + "]");
  }
  const Vector rk = normal_residual(trace, k);
  const double energy = residual_energy_sq(spectral, rk);
  if (!(energy > 0.0) || rk.norm() == 0.0) return std::nullopt;

  const LanczosView view = lanczos_tridiagonal(trace, k);
  const Vector r0 = normal_residual(trace, 0);
  const Vector c = spectral.eigenvectors.transpose() * r0;

  // log-sum-exp over eigendirections
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(spectral.rank()));
  for (Index i = 0; i < spectral.rank(); ++i) {
    if (c[i] == 0.0) continue;
    double t = 2.0 * std::log(std::abs(c[i]));
    bool zero = false;
    for (Index j = 0; j < k; ++j) {
      const double diff = std::abs(spectral.eigenvalues[i] - view.ritz[j]);
      if (diff == 0.0) {
        zero = true;
        break;
      }
      t += 2.0 * std::log(diff);
    }
    if (!zero) terms.push_back(t);
  }
  if (terms.empty()) return std::nullopt;
  const double tmax = *std::max_element(terms.begin(), terms.end());
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - tmax);
  const double log_s = tmax + std::log(acc);
  return std::exp((log_s - std::log(energy)) / static_cast<double>(2 * k + 1));
}

enum class ResidualNorm {
  Energy,     ///< ||r||_{(A^T A)^+}; the norm in which the CG bound is a theorem
  Euclidean,  ///< plain ||r||
};

/// 2 ((sqrt(kappa)-1)/(sqrt(kappa)+1))^k ||r_0|| - ||r_k||, kappa over the
/// nonzero spectrum.
inline double convergence_bound_margin(const IterationTrace& trace,
                                       const SpectralData& spectral, Index k,
                                       ResidualNorm norm = ResidualNorm::Energy) {
  if (spectral.rank() == 0) throw InputError("convergence_bound_margin: empty spectrum");
  if (k < 0 || k > trace.iterations()) {
    throw InputError("convergence_bound_margin: k = " + std::to_string(k) + " out of range");
  }
  const double sk = std::sqrt(spectral.condition());
  const double rate = (sk - 1.0) / (sk + 1.0);
  double r0 = 0.0, rk = 0.0;
  if (norm == ResidualNorm::Euclidean) {
    r0 = trace.nres_norms.front();
    rk = trace.nres_norms[static_cast<std::size_t>(k)];
  } else {
    r0 = std::sqrt(residual_energy_sq(spectral, normal_residual(trace, 0)));
    rk = std::sqrt(residual_energy_sq(spectral, normal_residual(trace, k)));
  }
  const double bound = k == 0 ? 2.0 * r0 : 2.0 * std::pow(rate, static_cast<double>(k)) * r0;
  return bound - rk;
}

// ---------------------------------------------------------------------------
// C-orthogonality of N(A) and R(A^T)

struct COrthogonality {
  double min_cos = 0.0;
  double max_cos = 0.0;
};

/// Cosines of the principal angles between N(A) and R(A^T) in the inner
/// product <x, y>_C = x^T C^-1 y: singular values of Qz^T Qy where Qz, Qy are
/// orthonormal bases of B N(A) and B R(A^T).
inline COrthogonality c_orthogonality_angles(const Matrix& a, const GaussianPrior& prior) {
  const Index m = a.rows();
  const Index n = a.cols();
  detail::require_size(prior.dim(), n, "c_orthogonality_angles: prior dimension");
  const SvdResult s = svd(a);
  const Index r = s.rank();
  if (r < std::min(m, n)) {
    throw NumericalError("c_orthogonality_angles: A is rank deficient (rank " +
                         std::to_string(r) + ")");
  }
  if (r == n) return {0.0, 0.0};  // trivial null space

  auto b_basis = [&prior](const Matrix& cols) {
    Matrix mapped(cols.rows(), cols.cols());
    for (Index j = 0; j < cols.cols(); ++j) mapped.col(j) = prior.apply_B(cols.col(j));
    Eigen::HouseholderQR<Matrix> qr(mapped);
    return Matrix(qr.householderQ() * Matrix::Identity(cols.rows(), cols.cols()));
  };
  const Matrix qy = b_basis(s.V.leftCols(r));
  const Matrix qz = b_basis(s.V.rightCols(n - r));
  const Eigen::JacobiSVD<Matrix> cross(qz.transpose() * qy);
  const Vector cosines = cross.singularValues();
  return {std::clamp(cosines.minCoeff(), 0.0, 1.0), std::clamp(cosines.maxCoeff(), 0.0, 1.0)};
}

// ---------------------------------------------------------------------------
// Aggregate report over a trace

struct DiagnosticsReport {
  std::vector<double> nullspace_fractions;        ///< per iterate, nu_0 = 0
  std::vector<std::vector<double>> ritz_history;  ///< per k, empty at k = 0
  Vector eigenvalues;                             ///< nonzero spectrum, ascending
  Vector eigen_projections;                       ///< |r_0^T q_i|
  std::optional<COrthogonality> orth_index;
  std::vector<std::optional<double>> xi_history;  ///< per k, empty at 0 and k > rank
  std::vector<double> bound_margins;              ///< per k, energy norm
};

/// Needs a trace recorded with basis and iterates. `spectral` describes the
/// operator the trace was run on (A~ for PCGLS); `projector` acts on x space.
inline DiagnosticsReport analyze_trace(const IterationTrace& trace,
                                       const SpectralData& spectral,
                                       const NullspaceProjector* projector) {
  DiagnosticsReport rep;
  const Index kmax = trace.iterations();
  rep.eigenvalues = spectral.eigenvalues;
  rep.eigen_projections = eigen_projections(spectral, normal_residual(trace, 0));
  for (Index k = 0; k <= kmax; ++k) {
    if (projector != nullptr && !trace.iterates.empty()) {
      const Vector& x = trace.iterates[static_cast<std::size_t>(k)];
      rep.nullspace_fractions.push_back(x.norm() == 0.0 ? 0.0 : nullspace_fraction(*projector, x));
    }
    if (k == 0) {
      rep.ritz_history.emplace_back();
      rep.xi_history.emplace_back(std::nullopt);
    } else {
      const LanczosView v = lanczos_tridiagonal(trace, k);
      rep.ritz_history.emplace_back(v.ritz.data(), v.ritz.data() + v.ritz.size());
      rep.xi_history.push_back(k <= spectral.rank()
                                   ? residual_identity_xi(trace, spectral, k)
                                   : std::nullopt);
    }
    rep.bound_margins.push_back(convergence_bound_margin(trace, spectral, k));
  }
  return rep;
}

}  // namespace priorkryl
