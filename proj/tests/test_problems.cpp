#include "priorkryl/diagnostics.hpp"
#include "priorkryl/problems.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace priorkryl;

namespace {

// J1(x) = (1/2pi) int_0^{2pi} cos(tau - x sin tau) dtau; periodic trapezoid
double bessel_j1_quadrature(double x) {
  const int m = 400;
  double acc = 0.0;
  for (int i = 0; i < m; ++i) {
    const double tau = 2.0 * std::numbers::pi * i / m;
    acc += std::cos(tau - x * std::sin(tau));
  }
  return acc / m;
}

// chord of the line y . (cos, sin) = s through [-1/2, 1/2]^2, from edge hits
double analytic_chord(double theta, double s) {
  const double c = std::cos(theta), sn = std::sin(theta);
  std::vector<std::array<double, 2>> pts;
  for (double e : {-0.5, 0.5}) {
    if (std::abs(sn) > 1e-15) {
      const double y = (s - e * c) / sn;  // on x = e
      if (y >= -0.5 && y <= 0.5) pts.push_back({e, y});
    }
    if (std::abs(c) > 1e-15) {
      const double x = (s - e * sn) / c;  // on y = e
      if (x >= -0.5 && x <= 0.5) pts.push_back({x, e});
    }
  }
  double best = 0.0;
  for (const auto& p : pts)
    for (const auto& q : pts) best = std::max(best, std::hypot(p[0] - q[0], p[1] - q[1]));
  return best;
}

double row_total(const std::vector<std::pair<Index, double>>& row) {
  double t = 0.0;
  for (const auto& e : row) t += e.second;
  return t;
}

}  // namespace

TEST(AiryKernel, ValueAtZero) {
  EXPECT_DOUBLE_EQ(airy_kernel(0.0, 0.02), 0.25);
  EXPECT_DOUBLE_EQ(airy_kernel(0.0, 200.0), 0.25);
  EXPECT_NEAR(airy_kernel(1e-9, 1.0), 0.25, 1e-15);
  EXPECT_THROW(airy_kernel(0.1, 0.0), InputError);
}

TEST(AiryKernel, BesselAgainstIntegralRepresentation) {
  for (double x : {0.5, 1.0, 5.0}) {
    EXPECT_NEAR(bessel_j1(x), bessel_j1_quadrature(x), 1e-10) << x;
    EXPECT_NEAR(bessel_j1(-x), -bessel_j1_quadrature(x), 1e-10) << x;
  }
  const double x = 5.0;
  EXPECT_NEAR(airy_kernel(x / 200.0, 200.0), std::pow(bessel_j1_quadrature(x) / x, 2), 1e-12);
}

TEST(AiryKernel, SmallKappaIsNearlyFlat) {
  EXPECT_GT(airy_kernel(1.0, 0.02), 0.2499);
}

TEST(Deconv, SizeAndRatio) {
  auto [p, model] =
      build_deconv_problem(150, 6, 0.02, default_t_points(6), sigmoid_truth(150), 5e-5, 1);
  EXPECT_EQ(p.matrix.rows(), 6);
  EXPECT_EQ(p.matrix.cols(), 150);
  EXPECT_DOUBLE_EQ(static_cast<double>(p.n) / static_cast<double>(p.m), 25.0);
  EXPECT_EQ(model.b.size(), 6);
  EXPECT_DOUBLE_EQ(p.s_points[3], 3.0 / 150.0);
  const Matrix a = p.matrix.to_dense();
  EXPECT_DOUBLE_EQ(a(2, 7), airy_kernel(p.t_points[2] - 7.0 / 150.0, 0.02) / 150.0);
}

TEST(Deconv, ConstantTruth) {
  const double c = 0.7;
  auto [p, model] = build_deconv_problem(40, 5, 200.0, default_t_points(5),
                                         Vector::Constant(40, c), 1e-3, 2);
  for (Index l = 0; l < 5; ++l) {
    double acc = 0.0;
    for (Index k = 0; k < 40; ++k) acc += airy_kernel(p.t_points[l] - k / 40.0, 200.0);
    EXPECT_NEAR(p.clean[l], c * acc / 40.0, 1e-15);
  }
}

TEST(Deconv, RowSumsMatchQuadrature) {
  const Index n = 150;
  const auto t = default_t_points(6);
  const Matrix a = deconv_matrix(n, 0.02, t).to_dense();
  for (Index l = 0; l < 6; ++l) {
    const int fine = 100000;
    double q = 0.0;
    for (int i = 0; i < fine; ++i) q += airy_kernel(t[l] - (i + 0.5) / fine, 0.02);
    q /= fine;
    EXPECT_NEAR(a.row(l).sum(), q, 1e-3) << l;
  }
}

TEST(Deconv, RejectsBadInput) {
  const Vector f = sigmoid_truth(10);
  EXPECT_THROW(build_deconv_problem(10, 2, 1.0, {0.5, 1.2}, f, 1e-3, 1), InputError);
  EXPECT_THROW(build_deconv_problem(10, 2, 1.0, {-0.1, 0.5}, f, 1e-3, 1), InputError);
  EXPECT_THROW(build_deconv_problem(10, 10, 1.0, default_t_points(10), f, 1e-3, 1), InputError);
  EXPECT_THROW(build_deconv_problem(10, 2, 1.0, {0.5}, f, 1e-3, 1), InputError);
}

TEST(Sigmoid, Properties) {
  const Vector f = sigmoid_truth(150);
  EXPECT_DOUBLE_EQ(f[75], 0.5);
  EXPECT_LT(f[0], 0.01);
  EXPECT_LT(f[1], 0.01);
  for (Index j = 1; j < f.size(); ++j) EXPECT_GE(f[j], f[j - 1]);
  const Vector steep = sigmoid_truth(150, 0.5, 1000.0);
  EXPECT_GT(steep[105], 0.95);  // s = 0.7
}

TEST(Beams, AxisAlignedCentreLine) {
  // theta index 2 of 4 is 0; offset index 1 of 3 is 0
  const CtGeometry g(4, 4, 3);
  ASSERT_DOUBLE_EQ(g.theta(2), 0.0);
  ASSERT_DOUBLE_EQ(g.offset(1), 0.0);
  const auto row = beam_pixel_intersections(g, 2 * 3 + 1);
  EXPECT_NEAR(row_total(row), 1.0, 1e-12);
  for (const auto& e : row) EXPECT_NEAR(e.second, 0.25, 1e-12);
}

TEST(Beams, DiagonalChord) {
  const CtGeometry g(8, 4, 3);
  ASSERT_NEAR(g.theta(3), std::numbers::pi / 4.0, 1e-15);
  const auto row = beam_pixel_intersections(g, 3 * 3 + 1);
  EXPECT_NEAR(row_total(row), std::sqrt(2.0), 1e-10);
  EXPECT_EQ(row.size(), 8u);
  for (const auto& e : row) EXPECT_NEAR(e.second, std::sqrt(2.0) / 8.0, 1e-12);
  const auto corner = beam_pixel_intersections(g, 3 * 3 + 2);  // s = 1/2
  EXPECT_NEAR(row_total(corner), analytic_chord(std::numbers::pi / 4.0, 0.5), 1e-10);
}

TEST(Beams, OutsideSquareIsEmpty) {
  double t0 = 0.0, t1 = 0.0;
  EXPECT_FALSE(clip_to_square(std::numbers::pi / 4.0, 0.75, t0, t1));
  EXPECT_FALSE(clip_to_square(std::numbers::pi / 4.0, 1.0 / std::sqrt(2.0) + 1e-12, t0, t1));
  EXPECT_DOUBLE_EQ(analytic_chord(std::numbers::pi / 4.0, 0.75), 0.0);
}

TEST(Beams, EveryChordMatchesAnalytic) {
  for (const CtGeometry& g : {CtGeometry(64, 10, 24), CtGeometry(160, 20, 60), CtGeometry(7, 13, 5)}) {
    for (Index beam = 0; beam < g.beams(); ++beam) {
      const auto row = beam_pixel_intersections(g, beam);
      EXPECT_NEAR(row_total(row), analytic_chord(g.beam_theta(beam), g.beam_offset(beam)), 1e-10)
          << beam;
      EXPECT_LE(static_cast<Index>(row.size()), 2 * g.n);
      for (std::size_t i = 1; i < row.size(); ++i) EXPECT_LT(row[i - 1].first, row[i].first);
    }
  }
}

TEST(CtMatrix, FullSize) {
  const CtGeometry g(160, 20, 60);
  const SparseMatrix a = build_ct_matrix(g);
  EXPECT_EQ(a.rows(), 1200);
  EXPECT_EQ(a.cols(), 25600);
  EXPECT_NEAR(static_cast<double>(a.cols()) / a.rows(), 21.3, 0.05);
}

TEST(CtMatrix, EntryScale) {
  const CtGeometry g(8, 3, 4);
  const Matrix p = build_ct_matrix(g, CtEntryScale::Paper).to_dense();
  const Matrix r = build_ct_matrix(g, CtEntryScale::Geometric).to_dense();
  EXPECT_LE((p * 64.0 - r).norm(), 1e-14 * r.norm());
}

TEST(Sinogram, ZeroPhantomGivesNoise) {
  const CtGeometry g(16, 5, 8);
  const Phantom zero(16, Vector::Zero(256));
  const auto model = synthesize_sinogram(zero, g, 0.01, 42);
  EXPECT_EQ(model.b, add_noise(Vector::Zero(40), 0.01, 42));
}

TEST(Sinogram, DiscColumnsSymmetric) {
  const Index n = 40;
  const CtGeometry g(n, 20, 60);
  Vector v = Vector::Zero(n * n);
  for (Index iy = 0; iy < n; ++iy)
    for (Index ix = 0; ix < n; ++ix) {
      const double x = (ix + 0.5) / n - 0.5, y = (iy + 0.5) / n - 0.5;
      if (x * x + y * y < 0.09) v[pixel_index(n, ix, iy)] = 1.0;
    }
  const auto model = synthesize_sinogram(Phantom(n, v), g, 1e-300, 1);
  const Matrix s = sinogram_image(g, model.b);
  EXPECT_EQ(s.rows(), 60);
  EXPECT_EQ(s.cols(), 20);
  for (Index j = 0; j < 20; ++j)
    for (Index k = 0; k < 60; ++k) EXPECT_NEAR(s(k, j), s(59 - k, j), 1e-6) << j << "," << k;
}

TEST(Sinogram, DimensionMismatch) {
  EXPECT_THROW(synthesize_sinogram(synthetic_phantom(8), CtGeometry(9, 3, 4), 0.1, 1),
               DimensionError);
}

TEST(Sinogram, Deterministic) {
  const CtGeometry g(32, 10, 24);
  const auto a = synthesize_sinogram(synthetic_phantom(32), g, 0.01, 7);
  const auto b = synthesize_sinogram(synthetic_phantom(32), g, 0.01, 7);
  EXPECT_EQ(a.b, b.b);
}

TEST(Phantom, ValidatesValues) {
  EXPECT_THROW(Phantom(2, (Vector(4) << 0, 1, -0.1, 0).finished()), InputError);
  EXPECT_THROW(Phantom(2, Vector::Zero(3)), DimensionError);
  const Phantom p = synthetic_phantom(64);
  EXPECT_EQ(p.pixels.minCoeff(), 0.0);
  EXPECT_EQ(p.pixels.maxCoeff(), 1.0);
}

TEST(CtMatrix, UntouchedPixelsInNullSpace) {
  const CtGeometry g(64, 10, 24);
  const SparseMatrix a = build_ct_matrix(g);
  std::vector<bool> touched(static_cast<std::size_t>(g.pixels()), false);
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j : a.row_columns(i)) touched[static_cast<std::size_t>(j)] = true;
  Index untouched = -1;
  for (Index j = 0; j < g.pixels(); ++j)
    if (!touched[static_cast<std::size_t>(j)]) untouched = j;
  ASSERT_GE(untouched, 0);
  Vector e = Vector::Zero(g.pixels());
  e[untouched] = 1.0;
  EXPECT_EQ(a.apply(e).norm(), 0.0);
  const NullspaceProjector p = nullspace_projector(a.to_dense());
  EXPECT_NEAR(nullspace_fraction(p, e), 1.0, 1e-10);
}
