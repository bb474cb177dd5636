#include "ckasens/core.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace ckasens;

TEST(CenterColumns, SubtractsColumnMeans) {
  Matrix m(2, 2);
  m << 1, 2, 3, 4;
  const auto c = center_columns(RepresentationMatrix(m));
  Matrix expected(2, 2);
  expected << -1, -1, 1, 1;
  EXPECT_TRUE(c.centered());
  EXPECT_EQ(c.data(), expected);
}

TEST(CenterColumns, IdempotentOnCenteredInput) {
  const auto once = center_columns(RepresentationMatrix(oracle::random_matrix(7, 3, 1)));
  const Matrix raw = once.data();
  const auto twice = center_columns(RepresentationMatrix(raw));
  EXPECT_LT((twice.data() - once.data()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(center_columns(once).data(), once.data());
}

TEST(CenterColumns, ConstantColumnBecomesZero) {
  const auto c = center_columns(RepresentationMatrix(Matrix::Constant(3, 1, 5.0)));
  EXPECT_EQ(c.data(), Matrix::Zero(3, 1));
}

TEST(CenterColumns, PreservesRowDifferences) {
  const Matrix x = oracle::random_matrix(6, 4, 2) * 3.0;
  const auto c = center_columns(RepresentationMatrix(x));
  for (Eigen::Index i = 0; i < 6; ++i) {
    for (Eigen::Index j = 0; j < 6; ++j) {
      EXPECT_LT(((c.data().row(i) - c.data().row(j)) - (x.row(i) - x.row(j))).cwiseAbs().maxCoeff(), 1e-14);
    }
  }
}

TEST(RepresentationMatrix, RejectsNonFiniteAndTooSmall) {
  Matrix bad = Matrix::Zero(3, 2);
  bad(1, 1) = std::numeric_limits<double>::quiet_NaN();
  try {
    RepresentationMatrix r(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidMatrix);
  }
  EXPECT_THROW(RepresentationMatrix(Matrix::Zero(1, 3)), Error);
  EXPECT_THROW(RepresentationMatrix(Matrix::Zero(3, 0)), Error);
}

TEST(RepresentationMatrix, CenteredFlagIsChecked) {
  Matrix m(2, 1);
  m << 1, 2;
  EXPECT_THROW(RepresentationMatrix::with_centered_flag(m, true), Error);
  m << -1, 1;
  EXPECT_TRUE(RepresentationMatrix::with_centered_flag(m, true).centered());
}

TEST(Gram, IdentityAndOrthogonalRows) {
  EXPECT_EQ(gram(RepresentationMatrix(Matrix::Identity(2, 2))), Matrix::Identity(2, 2));
  Matrix x(2, 2);
  x << 1, 0, 0, 2;
  Matrix expected(2, 2);
  expected << 1, 0, 0, 4;
  EXPECT_EQ(gram(RepresentationMatrix(x)), expected);
}

TEST(Gram, MatchesDotProductLoop) {
  const Matrix x = oracle::random_matrix(5, 3, 3);
  const Matrix k = gram(RepresentationMatrix(x));
  EXPECT_LT((k - oracle::gram(x)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(k, k.transpose());
}

TEST(Gram, PositiveSemidefinite) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix k = gram(RepresentationMatrix(oracle::random_matrix(9, 4, seed)));
    Eigen::SelfAdjointEigenSolver<Matrix> es(k);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-8 * k.trace());
  }
}

TEST(CovarianceSpectrum, SymmetricCross) {
  Matrix x(4, 2);
  x << 1, 0, -1, 0, 0, 1, 0, -1;
  const auto s = covariance_spectrum(center_columns(RepresentationMatrix(x)));
  ASSERT_EQ(s.eigenvalues.size(), 2u);
  EXPECT_NEAR(s.eigenvalues[0], 0.5, 1e-14);
  EXPECT_NEAR(s.eigenvalues[1], 0.5, 1e-14);
}

TEST(CovarianceSpectrum, RankOne) {
  Matrix x(5, 3);
  for (int i = 0; i < 5; ++i) x.row(i) = (i - 2.0) * Eigen::RowVector3d(1, 2, -1);
  const auto s = covariance_spectrum(center_columns(RepresentationMatrix(x)));
  EXPECT_GT(s.eigenvalues[0], 0.0);
  EXPECT_EQ(s.eigenvalues[1], 0.0);
  EXPECT_EQ(s.eigenvalues[2], 0.0);
}

TEST(CovarianceSpectrum, MatchesExplicitCovariance) {
  const Matrix x = oracle::random_matrix(6, 4, 4);
  const auto s = covariance_spectrum(center_columns(RepresentationMatrix(x)));
  const auto expected = oracle::covariance_eigenvalues(x);
  ASSERT_EQ(s.eigenvalues.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(s.eigenvalues[i], expected[i], 1e-12);
}

TEST(CovarianceSpectrum, WideMatrixUsesGramSide) {
  const Matrix x = oracle::random_matrix(5, 12, 5);
  const auto s = covariance_spectrum(center_columns(RepresentationMatrix(x)));
  const auto expected = oracle::covariance_eigenvalues(x);
  ASSERT_EQ(s.eigenvalues.size(), 5u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(s.eigenvalues[i], expected[i], 1e-12);
  EXPECT_EQ(s.eigenvalues[4], 0.0);  // centering removes one dimension
}

TEST(CovarianceSpectrum, TotalVarianceIsMeanSquaredNorm) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto x = center_columns(RepresentationMatrix(oracle::random_matrix(8 + seed, 3 + seed % 4, seed)));
    const auto s = covariance_spectrum(x);
    EXPECT_LT(oracle::rel_diff(s.total_variance, x.mean_sq_norm()), 1e-8);
    EXPECT_TRUE(std::is_sorted(s.eigenvalues.rbegin(), s.eigenvalues.rend()));
  }
}

TEST(CovarianceSpectrum, RequiresCenteredInput) {
  try {
    covariance_spectrum(RepresentationMatrix(oracle::random_matrix(4, 2, 1)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotCentered);
  }
}

TEST(SampleUnitDirection, OneDimensionalIsSign) {
  SeededRng rng(3);
  for (int i = 0; i < 20; ++i) {
    const Vector v = sample_unit_direction(rng, 1);
    EXPECT_EQ(std::abs(v[0]), 1.0);
  }
}

TEST(SampleUnitDirection, UnitNormAndDeterministic) {
  SeededRng a(42, 7);
  SeededRng b(42, 7);
  for (int i = 0; i < 20; ++i) {
    const Vector u = sample_unit_direction(a, 13);
    EXPECT_NEAR(u.norm(), 1.0, 1e-12);
    EXPECT_EQ(u, sample_unit_direction(b, 13));
  }
}

TEST(SeededRng, StreamsDiffer) {
  SeededRng a(1, 0);
  SeededRng b(1, 1);
  EXPECT_NE(a.normal(), b.normal());
  SeededRng base(5, 2);
  auto d1 = base.derive(3);
  auto d2 = base.derive(3);
  EXPECT_EQ(d1.normal(), d2.normal());
}
