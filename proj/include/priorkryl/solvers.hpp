#pragma once

// CGLS and priorconditioned CGLS with discrepancy-principle stopping and
// full iteration tracing, plus the closed-form MAP solve and data helpers.

#include "priorkryl/core.hpp"
#include "priorkryl/operators.hpp"
#include "priorkryl/priors.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace priorkryl {

/// b = A x + e with e ~ N(0, sigma^2 I).
template <LinearOperator Op>
struct ObservationModel {
  Op op;
  Vector b;
  double sigma = 1.0;

  ObservationModel(Op a, Vector data, double noise_std)
      : op(std::move(a)), b(std::move(data)), sigma(noise_std) {
    detail::require_size(b.size(), op.rows(), "ObservationModel: data vector");
    if (!(sigma > 0.0)) {
      throw InputError("ObservationModel: sigma must be positive, got " +
                       std::to_string(sigma));
    }
  }

  Index m() const { return op.rows(); }
  Index n() const { return op.cols(); }
};

template <LinearOperator Op>
ObservationModel(Op, Vector, double) -> ObservationModel<Op>;

struct SolveOptions {
  double tau = 1.2;  ///< discrepancy safeguard factor, >= 1
  int max_iter = 500;
  bool record_basis = false;
  bool record_iterates = true;
};

enum class StopReason { Discrepancy, MaxIter, Stagnation };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::Discrepancy: return "DISCREPANCY";
    case StopReason::MaxIter: return "MAX_ITER";
    case StopReason::Stagnation: return "STAGNATION";
  }
  return "?";
}

/// History of a CGLS run. For a run of k iterations:
///   iterates            x_0 .. x_k            (k+1, if recorded)
///   alphas, betas       alpha_0..alpha_{k-1}, beta_0..beta_{k-1}  (k each;
///                       beta_j = ||r_{j+1}||^2/||r_j||^2 is stored as soon
///                       as r_{j+1} exists, including at termination)
///   discrepancy_norms   ||b - A x_j||, j = 0..k
///   nres_norms          ||r_j|| = ||A^T (b - A x_j)||, j = 0..k
///   basis               v_j = r_j/||r_j||, j = 0..k-1 (if recorded)
///   final_residual      r_k
/// For PCGLS the iterates are x~_j = B^-1 w_j while alphas, betas, residuals
/// and the basis live in w coordinates.
struct IterationTrace {
  std::vector<Vector> iterates;
  std::vector<double> alphas;
  std::vector<double> betas;
  std::vector<double> discrepancy_norms;
  std::vector<double> nres_norms;
  std::vector<Vector> basis;
  Vector final_residual;
  double threshold = 0.0;  ///< squared-discrepancy threshold tau m sigma^2
  StopReason stop_reason = StopReason::MaxIter;

  Index iterations() const { return static_cast<Index>(alphas.size()); }
};

struct SolveResult {
  Vector solution;
  IterationTrace trace;
};

/// Relative size below which the normal-equations residual counts as zero.
inline constexpr double kStagnationTolerance = 1e-14;

namespace detail {

template <LinearOperator Op, class MapIterate>
SolveResult cgls_core(const Op& op, const Vector& b, double threshold,
                      const SolveOptions& opts, MapIterate&& map_iterate) {
  if (opts.tau < 1.0) {
    throw InputError("cgls: tau must be >= 1, got " + std::to_string(opts.tau));
  }
  if (opts.max_iter < 1) throw InputError("cgls: max_iter must be positive");
  detail::require_size(b.size(), op.rows(), "cgls: data vector");

  SolveResult out;
  IterationTrace& tr = out.trace;
  tr.threshold = threshold;

  Vector x = Vector::Zero(op.cols());
  Vector d = b;
  Vector r = op.apply_adjoint(d);
  double gamma = r.squaredNorm();
  const double r0_norm = std::sqrt(gamma);

  tr.discrepancy_norms.push_back(d.norm());
  tr.nres_norms.push_back(r0_norm);
  if (opts.record_iterates) tr.iterates.push_back(map_iterate(x));

  auto finish = [&](StopReason why) {
    tr.stop_reason = why;
    tr.final_residual = r;
    out.solution = map_iterate(x);
    return out;
  };

  if (d.squaredNorm() < threshold) return finish(StopReason::Discrepancy);
  if (r0_norm == 0.0) return finish(StopReason::Stagnation);

  Vector p = r;
  for (int j = 0; j < opts.max_iter; ++j) {
    if (opts.record_basis) tr.basis.push_back(r / std::sqrt(gamma));
    const Vector q = op.apply(p);
    const double qq = q.squaredNorm();
    if (qq == 0.0) return finish(StopReason::Stagnation);
    const double alpha = gamma / qq;
    if (!std::isfinite(alpha)) {
      throw NumericalError("cgls: non-finite step length at iteration " + std::to_string(j));
    }
    x += alpha * p;
    d -= alpha * q;
    r = op.apply_adjoint(d);
    const double gamma_next = r.squaredNorm();
    const double beta = gamma_next / gamma;
    if (!std::isfinite(gamma_next) || !std::isfinite(beta)) {
      throw NumericalError("cgls: non-finite residual at iteration " + std::to_string(j));
    }
    tr.alphas.push_back(alpha);
    tr.betas.push_back(beta);
    const double dnorm = d.norm();
    tr.discrepancy_norms.push_back(dnorm);
    tr.nres_norms.push_back(std::sqrt(gamma_next));
    if (opts.record_iterates) tr.iterates.push_back(map_iterate(x));

    p = r + beta * p;
    gamma = gamma_next;

    if (dnorm * dnorm < threshold) return finish(StopReason::Discrepancy);
    if (std::sqrt(gamma) < kStagnationTolerance * r0_norm) {
      return finish(StopReason::Stagnation);
    }
  }
  return finish(StopReason::MaxIter);
}

}  // namespace detail

/// Squared-discrepancy threshold tau * m * sigma^2.
template <LinearOperator Op>
double discrepancy_threshold(const ObservationModel<Op>& model, double tau) {
  return tau * static_cast<double>(model.m()) * model.sigma * model.sigma;
}

/// CGLS from x_0 = 0, stopped at the first k with ||b - A x_k||^2 < tau m sigma^2.
template <LinearOperator Op>
SolveResult cgls_solve(const ObservationModel<Op>& model, const SolveOptions& opts = {}) {
  return detail::cgls_core(model.op, model.b, discrepancy_threshold(model, opts.tau), opts,
                           [](const Vector& x) { return x; });
}

/// CGLS on A B^-1 w = b from w_0 = 0; reports x~_j = B^-1 w_j.
template <LinearOperator Op, InvertibleFactor Prior>
SolveResult pcgls_solve(const ObservationModel<Op>& model, const Prior& prior,
                        const SolveOptions& opts = {}) {
  const PriorconditionedOperator<Op, Prior> composite(model.op, prior);
  return detail::cgls_core(composite, model.b, discrepancy_threshold(model, opts.tau), opts,
                           [&prior](const Vector& w) { return Vector(prior.solve_B(w)); });
}

/// (A/sigma) x = b/sigma with unit noise variance.
template <LinearOperator Op>
ObservationModel<ScaledOperator<Op>> whiten(const ObservationModel<Op>& model) {
  const double s = 1.0 / model.sigma;
  return ObservationModel<ScaledOperator<Op>>(ScaledOperator<Op>(model.op, s), s * model.b,
                                              1.0);
}

/// Dense size above which the direct MAP solve refuses to run.
inline constexpr Index kMaxDirectSize = 5000;

/// Exact MAP estimate: (A^T A / sigma^2 + B^T B) x = A^T b / sigma^2.
template <LinearOperator Op>
Vector tikhonov_map_direct(const ObservationModel<Op>& model, const GaussianPrior& prior) {
  if (model.n() > kMaxDirectSize) {
    throw InputError("tikhonov_map_direct: n = " + std::to_string(model.n()) +
                     " exceeds dense limit " + std::to_string(kMaxDirectSize));
  }
  detail::require_size(prior.dim(), model.n(), "tikhonov_map_direct: prior dimension");
  const double w = 1.0 / (model.sigma * model.sigma);
  const Matrix a = to_dense(model.op);
  const Matrix b = prior.dense_factor();
  const Matrix normal = w * (a.transpose() * a) + b.transpose() * b;
  Eigen::LLT<Matrix> llt(normal);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("tikhonov_map_direct: normal matrix not positive definite");
  }
  return llt.solve(w * (a.transpose() * model.b));
}

/// Adds i.i.d. N(0, sigma^2) deviates. Uniforms come from std::mt19937_64
/// (53 high bits), normals from the Box-Muller transform using both outputs
/// of each pair, so a seed reproduces the same vector on every platform.
inline Vector add_noise(const Vector& clean, double sigma, std::uint64_t seed) {
  if (sigma < 0.0) throw InputError("add_noise: sigma must be nonnegative");
  Vector out = clean;
  if (sigma == 0.0) return out;
  std::mt19937_64 gen(seed);
  auto uniform = [&gen]() {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;  // [0, 1)
  };
  const Index m = clean.size();
  for (Index i = 0; i < m; i += 2) {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    out[i] += sigma * radius * std::cos(angle);
    if (i + 1 < m) out[i + 1] += sigma * radius * std::sin(angle);
  }
  return out;
}

}  // namespace priorkryl
