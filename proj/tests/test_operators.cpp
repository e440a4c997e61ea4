#include "priorkryl/banded.hpp"
#include "priorkryl/operators.hpp"
#include "priorkryl/priors.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace priorkryl;

namespace {

Matrix random_matrix(Index m, Index n, std::mt19937_64& gen) {
  std::normal_distribution<double> nd;
  Matrix a(m, n);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) a(i, j) = nd(gen);
  return a;
}

Vector random_vector(Index n, std::mt19937_64& gen) {
  std::normal_distribution<double> nd;
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = nd(gen);
  return v;
}

SparseMatrix sparse_from_dense(const Matrix& a) {
  SparseMatrix s(a.rows(), a.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    std::vector<std::pair<Index, double>> row;
    for (Index j = a.cols() - 1; j >= 0; --j)
      if (a(i, j) != 0.0) row.emplace_back(j, a(i, j));
    s.append_row(row);
  }
  return s;
}

}  // namespace

TEST(Apply, IdentityReturnsInput) {
  IdentityOperator id(3);
  const Vector x = (Vector(3) << 1, 2, 3).finished();
  EXPECT_EQ(id.apply(x), x);
  const Vector e = (Vector(3) << 1, 0, 0).finished();
  EXPECT_EQ(id.apply_adjoint(e), e);
}

TEST(Apply, ZeroMatrixGivesZero) {
  DenseMatrix z(Matrix::Zero(2, 4));
  const Vector y = z.apply((Vector(4) << 1, -2, 3, 4).finished());
  EXPECT_EQ(y, Vector::Zero(2));
}

TEST(Apply, MatchesNaiveLoop) {
  std::mt19937_64 gen(3);
  const Matrix a = random_matrix(3, 5, gen);
  const Vector x = random_vector(5, gen);
  DenseMatrix d(a);
  const Vector y = d.apply(x);
  for (Index i = 0; i < 3; ++i) {
    double acc = 0.0;
    for (Index j = 0; j < 5; ++j) acc += a(i, j) * x[j];
    EXPECT_NEAR(y[i], acc, 1e-14 * (1.0 + std::abs(acc)));
  }
}

TEST(Apply, DimensionMismatchNamesBothSizes) {
  DenseMatrix d(Matrix::Ones(3, 5));
  try {
    d.apply(Vector::Ones(4));
    FAIL() << "no throw";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("3x5"), std::string::npos) << msg;
    EXPECT_NE(msg.find("4"), std::string::npos) << msg;
  }
  EXPECT_THROW(d.apply_adjoint(Vector::Ones(5)), DimensionError);
}

TEST(Apply, NonFiniteEntriesRejected) {
  Matrix a = Matrix::Ones(2, 2);
  a(0, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(DenseMatrix{a}, InputError);
}

TEST(Apply, LinearityAllOperators) {
  std::mt19937_64 gen(5);
  const Matrix a = random_matrix(6, 9, gen);
  DenseMatrix d(a);
  SparseMatrix s = sparse_from_dense(a);
  const Vector x = random_vector(9, gen), y = random_vector(9, gen);
  const double c = 1.7;
  for (const Vector& lhs : {Vector(d.apply(c * x + y)), Vector(s.apply(c * x + y))}) {
    const Vector rhs = c * d.apply(x) + d.apply(y);
    EXPECT_LE((lhs - rhs).norm(), 1e-12 * rhs.norm());
  }
}

TEST(ApplyAdjoint, OnesRow) {
  DenseMatrix row(Matrix::Ones(1, 6));
  const Vector y = row.apply_adjoint((Vector(1) << 2.5).finished());
  EXPECT_EQ(y, Vector::Constant(6, 2.5));
}

TEST(ApplyAdjoint, InnerProductIdentity100Pairs) {
  std::mt19937_64 gen(7);
  const Matrix a = random_matrix(4, 7, gen);
  DenseMatrix d(a);
  SparseMatrix s = sparse_from_dense(a);
  const GaussianPrior prior(second_order_matrix(7, 0.5, 1.0));
  PriorconditionedOperator<DenseMatrix, GaussianPrior> pc(d, prior);
  for (int trial = 0; trial < 100; ++trial) {
    const Vector u = random_vector(4, gen), v = random_vector(7, gen);
    EXPECT_NEAR(u.dot(d.apply(v)), d.apply_adjoint(u).dot(v), 1e-12 * u.norm() * v.norm() * 10);
    EXPECT_NEAR(u.dot(s.apply(v)), s.apply_adjoint(u).dot(v), 1e-12 * u.norm() * v.norm() * 10);
    const double opnorm = svd(to_dense(pc)).singular_values[0];
    EXPECT_NEAR(u.dot(pc.apply(v)), pc.apply_adjoint(u).dot(v),
                1e-10 * u.norm() * v.norm() * opnorm);
  }
}

TEST(SparseMatrixTest, TripletsSumDuplicatesAndSort) {
  std::vector<Eigen::Triplet<double>> t{{0, 2, 1.0}, {0, 0, 2.0}, {0, 2, 0.5}, {2, 1, -1.0}};
  const SparseMatrix s = SparseMatrix::from_triplets(3, 3, t);
  EXPECT_EQ(s.nonzeros(), 3);
  EXPECT_DOUBLE_EQ(s.coeff(0, 2), 1.5);
  EXPECT_DOUBLE_EQ(s.coeff(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(s.coeff(1, 1), 0.0);
  EXPECT_DOUBLE_EQ(s.coeff(2, 1), -1.0);
  const auto offs = s.offsets();
  for (std::size_t i = 1; i < offs.size(); ++i) EXPECT_LE(offs[i - 1], offs[i]);
  const auto cols = s.row_columns(0);
  ASSERT_EQ(cols.size(), 2u);
  EXPECT_LT(cols[0], cols[1]);
}

TEST(SparseMatrixTest, RejectsBadRows) {
  SparseMatrix s(2, 3);
  EXPECT_THROW(s.append_row({{1, 1.0}, {1, 2.0}}), InputError);
  EXPECT_THROW(s.append_row({{3, 1.0}}), DimensionError);
  s.append_row({{0, 1.0}});
  EXPECT_THROW(s.apply(Vector::Ones(3)), DimensionError);  // incomplete
  s.append_row({});
  EXPECT_THROW(s.append_row({}), DimensionError);
  EXPECT_EQ(s.apply(Vector::Ones(3)), (Vector(2) << 1, 0).finished());
}

TEST(PriorconditionedOperatorTest, ApplyAfterBRecoversBase) {
  std::mt19937_64 gen(11);
  const Matrix a = random_matrix(5, 12, gen);
  DenseMatrix d(a);
  const GaussianPrior prior(second_order_matrix(12, 0.3, 2.0));
  PriorconditionedOperator<DenseMatrix, GaussianPrior> pc(d, prior);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector x = random_vector(12, gen);
    const Vector lhs = pc.apply(prior.apply_B(x));
    const Vector rhs = d.apply(x);
    EXPECT_LE((lhs - rhs).norm(), 1e-10 * rhs.norm());
  }
  const Matrix dense = to_dense(pc);
  const Matrix oracle = a * prior.dense_factor().inverse();
  EXPECT_LE((dense - oracle).norm(), 1e-10 * oracle.norm());
}

TEST(PriorconditionedOperatorTest, DimensionCheck) {
  DenseMatrix d(Matrix::Ones(2, 5));
  const GaussianPrior prior(second_order_matrix(4, 1.0, 1.0));
  EXPECT_THROW((PriorconditionedOperator<DenseMatrix, GaussianPrior>(d, prior)), DimensionError);
}

TEST(Svd, DiagonalValues) {
  const Matrix a = (Matrix(2, 2) << 3, 0, 0, 1).finished();
  const SvdResult s = svd(a);
  EXPECT_NEAR(s.singular_values[0], 3.0, 1e-15);
  EXPECT_NEAR(s.singular_values[1], 1.0, 1e-15);
  EXPECT_EQ(s.rank(), 2);
}

TEST(Svd, ZeroMatrix) {
  const SvdResult s = svd(Matrix::Zero(3, 4));
  EXPECT_EQ(s.singular_values, Vector::Zero(3));
  EXPECT_EQ(s.rank(), 0);
}

TEST(Svd, ReconstructionAndOrthogonality) {
  std::mt19937_64 gen(13);
  const Matrix a = random_matrix(5, 8, gen);
  const SvdResult s = svd(a);
  Matrix sigma = Matrix::Zero(5, 8);
  for (Index i = 0; i < 5; ++i) sigma(i, i) = s.singular_values[i];
  EXPECT_LE((a - s.U * sigma * s.V.transpose()).norm(), 1e-10 * a.norm());
  EXPECT_LE((s.U.transpose() * s.U - Matrix::Identity(5, 5)).norm(), 1e-10);
  EXPECT_LE((s.V.transpose() * s.V - Matrix::Identity(8, 8)).norm(), 1e-10);
  for (Index i = 1; i < 5; ++i) EXPECT_LE(s.singular_values[i], s.singular_values[i - 1]);
}

TEST(Svd, RejectsNonFinite) {
  Matrix a = Matrix::Ones(2, 2);
  a(1, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(svd(a), InputError);
}

TEST(Banded, LuSolvesMatchDense) {
  std::mt19937_64 gen(17);
  const Index n = 9;
  BandedMatrix b(n, 2, 1);
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  for (Index i = 0; i < n; ++i)
    for (Index j = b.first_col(i); j <= b.last_col(i); ++j) b.at(i, j) = i == j ? 6.0 : ud(gen);
  const BandedLU lu(b);
  const Matrix d = b.to_dense();
  const Vector y = random_vector(n, gen);
  EXPECT_LE((lu.solve(y) - d.lu().solve(y)).norm(), 1e-12 * y.norm());
  EXPECT_LE((lu.solve_transpose(y) - d.transpose().lu().solve(y)).norm(), 1e-12 * y.norm());
  EXPECT_LE((b.apply_adjoint(y) - d.transpose() * y).norm(), 1e-13 * y.norm());
}

TEST(Banded, ZeroPivotRejected) {
  BandedMatrix b(3, 0, 1);
  b.at(0, 0) = 1.0;
  b.at(2, 2) = 1.0;
  EXPECT_THROW(BandedLU{b}, NumericalError);
}

TEST(Banded, FromDenseRejectsOutOfBand) {
  Matrix a = Matrix::Identity(4, 4);
  a(0, 3) = 1.0;
  EXPECT_THROW(BandedMatrix::from_dense(a, 0, 1), InputError);
}
