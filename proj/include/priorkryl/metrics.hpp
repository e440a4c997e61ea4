#pragma once

// Image quality: Gaussian-windowed SSIM and the relative error.

#include "priorkryl/core.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace priorkryl {

enum class DynamicRange {
  MaxMinusMin,  ///< L = max - min of the original
  Ratio,        ///< L = max / min of the original (needs min > 0)
};

struct SsimParams {
  double window_std = 1.5;
  Index window_radius = 5;
  DynamicRange range = DynamicRange::MaxMinusMin;
  std::optional<double> L;  ///< explicit dynamic range, overrides `range`
  double k1 = 0.01;         ///< gamma1 = k1 L
  double k2 = 0.03;         ///< gamma2 = k2 L
};

struct SsimResult {
  double mean = 0.0;
  Matrix map;  ///< local SSIM at every pixel
  double L = 0.0;
  double gamma1 = 0.0;
  double gamma2 = 0.0;
};

inline double dynamic_range(const Matrix& original, const SsimParams& params) {
  if (params.L) return *params.L;
  const double hi = original.maxCoeff();
  const double lo = original.minCoeff();
  if (params.range == DynamicRange::MaxMinusMin) return hi - lo;
  if (!(lo > 0.0)) {
    throw InputError("ssim: ratio dynamic range needs a positive minimum, got " +
                     std::to_string(lo));
  }
  return hi / lo;
}

/// Local statistics under a truncated Gaussian window, renormalized to the
/// part of the window inside the image; variances and covariance are centred.
///   SSIM = (2 mu_o mu_r + g1)(2 s_or + g2) / ((mu_o^2 + mu_r^2 + g1)(s_o^2 + s_r^2 + g2))
/// A factor whose denominator vanishes counts as 1.
inline SsimResult ssim(const Matrix& original, const Matrix& reconstructed,
                       const SsimParams& params = {}) {
  if (original.rows() != reconstructed.rows() || original.cols() != reconstructed.cols()) {
    throw DimensionError("ssim: images are " + std::to_string(original.rows()) + "x" +
                         std::to_string(original.cols()) + " and " +
                         std::to_string(reconstructed.rows()) + "x" +
                         std::to_string(reconstructed.cols()));
  }
  if (original.size() == 0) throw InputError("ssim: empty image");
  if (!original.allFinite() || !reconstructed.allFinite()) {
    throw InputError("ssim: non-finite pixel");
  }
  if (!(params.window_std > 0.0) ||
      static_cast<double>(params.window_radius) < 3.0 * params.window_std) {
    throw InputError("ssim: window radius must be at least 3 standard deviations");
  }

  SsimResult res;
  res.L = dynamic_range(original, params);
  res.gamma1 = params.k1 * res.L;
  res.gamma2 = params.k2 * res.L;

  const Index rad = params.window_radius;
  std::vector<double> w(static_cast<std::size_t>(2 * rad + 1));
  for (Index i = -rad; i <= rad; ++i) {
    const double z = static_cast<double>(i) / params.window_std;
    w[static_cast<std::size_t>(i + rad)] = std::exp(-0.5 * z * z);
  }

  const Index rows = original.rows();
  const Index cols = original.cols();
  res.map.resize(rows, cols);
  auto ratio = [](double num, double den) { return den == 0.0 ? 1.0 : num / den; };

  for (Index r = 0; r < rows; ++r) {
    const Index r0 = std::max<Index>(0, r - rad), r1 = std::min<Index>(rows - 1, r + rad);
    for (Index c = 0; c < cols; ++c) {
      const Index c0 = std::max<Index>(0, c - rad), c1 = std::min<Index>(cols - 1, c + rad);
      double wsum = 0.0, mo = 0.0, mr = 0.0;
      for (Index i = r0; i <= r1; ++i) {
        for (Index j = c0; j <= c1; ++j) {
          const double wij =
              w[static_cast<std::size_t>(i - r + rad)] * w[static_cast<std::size_t>(j - c + rad)];
          wsum += wij;
          mo += wij * original(i, j);
          mr += wij * reconstructed(i, j);
        }
      }
      mo /= wsum;
      mr /= wsum;
      double vo = 0.0, vr = 0.0, cov = 0.0;
      for (Index i = r0; i <= r1; ++i) {
        for (Index j = c0; j <= c1; ++j) {
          const double wij =
              w[static_cast<std::size_t>(i - r + rad)] * w[static_cast<std::size_t>(j - c + rad)];
          const double eo = original(i, j) - mo;
          const double er = reconstructed(i, j) - mr;
          vo += wij * eo * eo;
          vr += wij * er * er;
          cov += wij * eo * er;
        }
      }
      vo /= wsum;
      vr /= wsum;
      cov /= wsum;
      const double lum = ratio(2.0 * mo * mr + res.gamma1, mo * mo + mr * mr + res.gamma1);
      const double cs = ratio(2.0 * cov + res.gamma2, vo + vr + res.gamma2);
      res.map(r, c) = lum * cs;
    }
  }
  res.mean = res.map.mean();
  return res;
}

/// ||x - truth|| / ||truth||
inline double relative_error(const Vector& x, const Vector& truth) {
  detail::require_size(x.size(), truth.size(), "relative_error");
  const double nt = truth.norm();
  if (nt == 0.0) throw InputError("relative_error: zero truth vector");
  return (x - truth).norm() / nt;
}

}  // namespace priorkryl
