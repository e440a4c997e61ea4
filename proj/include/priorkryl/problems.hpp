#pragma once

// Test problems: 1D deconvolution with an Airy kernel and parallel-beam
// sparse-view tomography on a pixel grid over [-1/2, 1/2]^2.

#include "priorkryl/core.hpp"
#include "priorkryl/operators.hpp"
#include "priorkryl/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace priorkryl {

// ---------------------------------------------------------------------------
// Deconvolution

/// Bessel function of the first kind, order one. std::cyl_bessel_j is only
/// defined for x >= 0; J1 is odd.
inline double bessel_j1(double x) {
  const double v = std::cyl_bessel_j(1.0, std::abs(x));
  return x < 0.0 ? -v : v;
}

/// (J1(kappa t) / (kappa t))^2, equal to 1/4 at t = 0.
inline double airy_kernel(double t, double kappa) {
  if (!(kappa > 0.0)) throw InputError("airy_kernel: kappa must be positive");
  const double x = std::abs(kappa * t);
  double ratio = 0.0;
  if (x < 1e-6) {
    // J1(x)/x = 1/2 - x^2/16 + x^4/384 - ...
    const double x2 = x * x;
    ratio = 0.5 - x2 / 16.0 + x2 * x2 / 384.0;
  } else {
    ratio = bessel_j1(x) / x;
  }
  return ratio * ratio;
}

/// 1 / (1 + exp(-steepness (s - center))) at s_j = j/n, j = 0..n-1.
inline Vector sigmoid_truth(Index n, double center = 0.5, double steepness = 15.0) {
  if (n < 1) throw InputError("sigmoid_truth: n must be positive");
  Vector f(n);
  for (Index j = 0; j < n; ++j) {
    const double s = static_cast<double>(j) / static_cast<double>(n);
    f[j] = 1.0 / (1.0 + std::exp(-steepness * (s - center)));
  }
  return f;
}

/// Equispaced interior abscissae (1..m)/(m+1).
inline std::vector<double> default_t_points(Index m) {
  std::vector<double> t(static_cast<std::size_t>(m));
  for (Index l = 0; l < m; ++l) {
    t[static_cast<std::size_t>(l)] = static_cast<double>(l + 1) / static_cast<double>(m + 1);
  }
  return t;
}

struct DeconvProblem {
  Index n = 0;
  Index m = 0;
  double kappa = 0.0;
  std::vector<double> t_points;
  std::vector<double> s_points;  ///< s_k = k/n, k = 0..n-1
  Vector truth;
  DenseMatrix matrix;  ///< a_{l,k} = a(t_l - s_k) / n
  Vector clean;        ///< matrix * truth
};

inline DenseMatrix deconv_matrix(Index n, double kappa, const std::vector<double>& t_points) {
  const Index m = static_cast<Index>(t_points.size());
  RowMajorMatrix a(m, n);
  for (Index l = 0; l < m; ++l) {
    for (Index k = 0; k < n; ++k) {
      const double s = static_cast<double>(k) / static_cast<double>(n);
      a(l, k) = airy_kernel(t_points[static_cast<std::size_t>(l)] - s, kappa) /
                static_cast<double>(n);
    }
  }
  return DenseMatrix(std::move(a));
}

/// Assembles the forward matrix, the clean data A x_true and b = A x_true + e,
/// e ~ N(0, sigma^2 I) drawn with add_noise(seed).
inline std::pair<DeconvProblem, ObservationModel<DenseMatrix>> build_deconv_problem(
    Index n, Index m, double kappa, std::vector<double> t_points, Vector truth, double sigma,
    std::uint64_t seed) {
  if (m < 1 || n < 1) throw InputError("build_deconv_problem: n and m must be positive");
  if (m >= n) {
    throw InputError("build_deconv_problem: need m < n, got m=" + std::to_string(m) +
                     " n=" + std::to_string(n));
  }
  if (!(kappa > 0.0)) throw InputError("build_deconv_problem: kappa must be positive");
  if (static_cast<Index>(t_points.size()) != m) {
    throw InputError("build_deconv_problem: " + std::to_string(t_points.size()) +
                     " t_points for m=" + std::to_string(m));
  }
  for (double t : t_points) {
    if (!(t >= 0.0 && t <= 1.0)) {
      throw InputError("build_deconv_problem: t_point " + std::to_string(t) +
                       " outside [0,1]");
    }
  }
  detail::require_size(truth.size(), n, "build_deconv_problem: truth");

  DeconvProblem p;
  p.n = n;
  p.m = m;
  p.kappa = kappa;
  p.t_points = std::move(t_points);
  p.s_points.resize(static_cast<std::size_t>(n));
  for (Index k = 0; k < n; ++k) {
    p.s_points[static_cast<std::size_t>(k)] = static_cast<double>(k) / static_cast<double>(n);
  }
  p.truth = std::move(truth);
  p.matrix = deconv_matrix(n, kappa, p.t_points);
  p.clean = p.matrix.apply(p.truth);
  Vector b = add_noise(p.clean, sigma, seed);
  ObservationModel<DenseMatrix> model(p.matrix, std::move(b), sigma);
  return {std::move(p), std::move(model)};
}

// ---------------------------------------------------------------------------
// Tomography

/// Parallel-beam geometry: beam index i = j * n_s + k for angle j, offset k.
struct CtGeometry {
  Index n = 0;
  Index n_theta = 0;
  Index n_s = 0;

  CtGeometry() = default;
  CtGeometry(Index side, Index angles, Index offsets)
      : n(side), n_theta(angles), n_s(offsets) {
    if (n < 1 || n_theta < 1 || n_s < 2) {
      throw InputError("CtGeometry: need n >= 1, n_theta >= 1, n_s >= 2; got " +
                       std::to_string(n) + ", " + std::to_string(n_theta) + ", " +
                       std::to_string(n_s));
    }
  }

  Index beams() const { return n_theta * n_s; }
  Index pixels() const { return n * n; }
  double theta(Index j) const {
    return -std::numbers::pi / 2.0 +
           static_cast<double>(j) * std::numbers::pi / static_cast<double>(n_theta);
  }
  double offset(Index k) const {
    return -0.5 + static_cast<double>(k) / static_cast<double>(n_s - 1);
  }
  double beam_theta(Index beam) const { return theta(beam / n_s); }
  double beam_offset(Index beam) const { return offset(beam % n_s); }
};

/// Pixel p = iy * n + ix covers [ix/n - 1/2, (ix+1)/n - 1/2] x [iy/n - 1/2, ...],
/// iy counted from the bottom edge y2 = -1/2.
inline Index pixel_index(Index n, Index ix, Index iy) { return iy * n + ix; }

/// (cos, sin) of a beam angle with round-off residues snapped to zero, so
/// theta = -pi/2 gives an exactly horizontal line.
inline std::pair<double, double> beam_normal(double theta) {
  double c = std::cos(theta), sn = std::sin(theta);
  if (std::abs(c) < 1e-15) c = 0.0;
  if (std::abs(sn) < 1e-15) sn = 0.0;
  return {c, sn};
}

/// Parameter interval of y(t) = s (cos, sin) + t (-sin, cos) inside the
/// square, by Liang-Barsky clipping. Returns false when the line misses it.
inline bool clip_to_square(double theta, double s, double& t0, double& t1) {
  const auto [c, sn] = beam_normal(theta);
  const double p0[2] = {s * c, s * sn};
  const double d[2] = {-sn, c};
  t0 = -std::numeric_limits<double>::infinity();
  t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 2; ++a) {
    if (d[a] == 0.0) {
      if (p0[a] < -0.5 || p0[a] > 0.5) return false;
      continue;
    }
    double lo = (-0.5 - p0[a]) / d[a];
    double hi = (0.5 - p0[a]) / d[a];
    if (lo > hi) std::swap(lo, hi);
    t0 = std::max(t0, lo);
    t1 = std::min(t1, hi);
  }
  return t1 > t0;
}

/// Lengths |l(s, theta) ∩ Omega_j| of one beam, sorted by pixel index.
/// Grid crossings along both axes are merged in parameter order; each segment
/// is assigned to the pixel holding its midpoint. A line lying on a grid line
/// is counted once (indices clamp to the grid).
inline std::vector<std::pair<Index, double>> beam_pixel_intersections(const CtGeometry& geom,
                                                                      Index beam) {
  if (beam < 0 || beam >= geom.beams()) {
    throw InputError("beam_pixel_intersections: beam " + std::to_string(beam) +
                     " outside [0," + std::to_string(geom.beams()) + ")");
  }
  const Index n = geom.n;
  const double theta = geom.beam_theta(beam);
  const double s = geom.beam_offset(beam);
  double t0 = 0.0, t1 = 0.0;
  if (!clip_to_square(theta, s, t0, t1)) return {};

  const auto [c, sn] = beam_normal(theta);
  const double p0[2] = {s * c, s * sn};
  const double d[2] = {-sn, c};
  const double h = 1.0 / static_cast<double>(n);

  // crossings of x = const and y = const grid lines strictly inside (t0, t1)
  std::vector<double> ts{t0};
  std::vector<double> axis_ts[2];
  for (int a = 0; a < 2; ++a) {
    if (d[a] == 0.0) continue;
    for (Index g = 0; g <= n; ++g) {
      const double t = (-0.5 + static_cast<double>(g) * h - p0[a]) / d[a];
      if (t > t0 && t < t1) axis_ts[a].push_back(t);
    }
    std::sort(axis_ts[a].begin(), axis_ts[a].end());
  }
  std::merge(axis_ts[0].begin(), axis_ts[0].end(), axis_ts[1].begin(), axis_ts[1].end(),
             std::back_inserter(ts));
  ts.push_back(t1);

  std::vector<std::pair<Index, double>> row;
  for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
    const double len = ts[i + 1] - ts[i];
    // a line through a grid vertex yields two crossings one ulp apart
    if (len <= 1e-12 * h) continue;
    const double tm = 0.5 * (ts[i] + ts[i + 1]);
    const double x = p0[0] + tm * d[0];
    const double y = p0[1] + tm * d[1];
    const Index ix = std::clamp<Index>(static_cast<Index>(std::floor((x + 0.5) * n)), 0, n - 1);
    const Index iy = std::clamp<Index>(static_cast<Index>(std::floor((y + 0.5) * n)), 0, n - 1);
    row.emplace_back(pixel_index(n, ix, iy), len);
  }
  std::sort(row.begin(), row.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::pair<Index, double>> merged;
  for (const auto& e : row) {
    if (!merged.empty() && merged.back().first == e.first) {
      merged.back().second += e.second;
    } else {
      merged.push_back(e);
    }
  }
  return merged;
}

enum class CtEntryScale {
  Paper,      ///< lengths / N
  Geometric,  ///< raw lengths
};

inline SparseMatrix build_ct_matrix(const CtGeometry& geom,
                                    CtEntryScale scale = CtEntryScale::Paper) {
  const double f =
      scale == CtEntryScale::Paper ? 1.0 / static_cast<double>(geom.pixels()) : 1.0;
  SparseMatrix a(geom.beams(), geom.pixels());
  for (Index beam = 0; beam < geom.beams(); ++beam) {
    auto row = beam_pixel_intersections(geom, beam);
    for (auto& e : row) e.second *= f;
    a.append_row(std::move(row));
  }
  return a;
}

/// Density image with pixels stored as p = iy * side + ix (iy from the bottom).
struct Phantom {
  Index side = 0;
  Vector pixels;

  Phantom() = default;
  Phantom(Index n, Vector values) : side(n), pixels(std::move(values)) {
    detail::require_size(pixels.size(), n * n, "Phantom: pixel count");
    for (Index i = 0; i < pixels.size(); ++i) {
      if (!std::isfinite(pixels[i]) || pixels[i] < 0.0) {
        throw InputError("Phantom: pixel " + std::to_string(i) +
                         " is negative or not finite");
      }
    }
  }

  double at(Index ix, Index iy) const { return pixels[pixel_index(side, ix, iy)]; }
};

/// Disc of density 0.5 (radius 0.4), two vertical bars of density 1 and a
/// small disc of density 0.8, sampled at pixel centres.
inline Phantom synthetic_phantom(Index n) {
  if (n < 1) throw InputError("synthetic_phantom: n must be positive");
  Vector v = Vector::Zero(n * n);
  for (Index iy = 0; iy < n; ++iy) {
    for (Index ix = 0; ix < n; ++ix) {
      const double x = (static_cast<double>(ix) + 0.5) / static_cast<double>(n) - 0.5;
      const double y = (static_cast<double>(iy) + 0.5) / static_cast<double>(n) - 0.5;
      double val = 0.0;
      if (x * x + y * y < 0.4 * 0.4) val = 0.5;
      if (std::abs(x + 0.1) < 0.05 && std::abs(y) < 0.25) val = 1.0;
      if (std::abs(x - 0.15) < 0.03 && std::abs(y) < 0.2) val = 1.0;
      if ((x - 0.1) * (x - 0.1) + (y + 0.25) * (y + 0.25) < 0.06 * 0.06) val = 0.8;
      v[pixel_index(n, ix, iy)] = val;
    }
  }
  return Phantom(n, std::move(v));
}

/// Data vector reshaped to n_s x n_theta (row k = offset, column j = angle).
inline Matrix sinogram_image(const CtGeometry& geom, const Vector& b) {
  detail::require_size(b.size(), geom.beams(), "sinogram_image: data");
  Matrix s(geom.n_s, geom.n_theta);
  for (Index j = 0; j < geom.n_theta; ++j) {
    for (Index k = 0; k < geom.n_s; ++k) s(k, j) = b[j * geom.n_s + k];
  }
  return s;
}

/// b = A vec(phantom) + e, e ~ N(0, sigma^2 I) from add_noise(seed).
inline ObservationModel<SparseMatrix> synthesize_sinogram(const Phantom& phantom,
                                                          const CtGeometry& geom,
                                                          const SparseMatrix& a, double sigma,
                                                          std::uint64_t seed) {
  if (phantom.side != geom.n) {
    throw DimensionError("synthesize_sinogram: phantom side " + std::to_string(phantom.side) +
                         " does not match geometry n=" + std::to_string(geom.n));
  }
  detail::require_size(a.rows(), geom.beams(), "synthesize_sinogram: matrix rows");
  return ObservationModel<SparseMatrix>(a, add_noise(a.apply(phantom.pixels), sigma, seed),
                                        sigma);
}

inline ObservationModel<SparseMatrix> synthesize_sinogram(const Phantom& phantom,
                                                          const CtGeometry& geom, double sigma,
                                                          std::uint64_t seed,
                                                          CtEntryScale scale = CtEntryScale::Paper) {
  return synthesize_sinogram(phantom, geom, build_ct_matrix(geom, scale), sigma, seed);
}

}  // namespace priorkryl
