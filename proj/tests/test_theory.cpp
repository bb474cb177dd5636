#include "ckasens/synthetic.hpp"
#include "ckasens/theory.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace ckasens;
using testsupport::code_of;

namespace {

SubsetMask random_mask(std::size_t n, std::uint64_t seed) {
  SeededRng rng(seed, 3);
  SubsetMask m(n, false);
  for (std::size_t i = 0; i < n; ++i) m.set(i, rng.uniform(0.0, 1.0) < 0.3);
  if (!m.proper()) m.set(0, !m[0]);
  return m;
}

}  // namespace

TEST(Gamma, Values) {
  EXPECT_DOUBLE_EQ(ckasens::gamma(0.5), 1.0);
  EXPECT_DOUBLE_EQ(ckasens::gamma(0.25), 1.0 / 3.0);
  EXPECT_EQ(code_of([] { ckasens::gamma(0.0); }), ErrorCode::InvalidRho);
  EXPECT_EQ(code_of([] { ckasens::gamma(1.0); }), ErrorCode::InvalidRho);
}

TEST(ParticipationRatio, IsotropicAndRankOne) {
  EXPECT_DOUBLE_EQ(participation_ratio({{2.0, 2.0, 2.0, 2.0}, 8.0}), 4.0);
  EXPECT_DOUBLE_EQ(participation_ratio({{3.0, 0.0, 0.0}, 3.0}), 1.0);
  EXPECT_EQ(code_of([] { participation_ratio({{0.0, 0.0}, 0.0}); }), ErrorCode::DegenerateData);
}

TEST(ParticipationRatio, WithinOneAndDimension) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto x = gaussian_cloud(30, 8, seed);
    const double pr = participation_ratio(covariance_spectrum(x));
    EXPECT_GE(pr, 1.0 - 1e-12);
    EXPECT_LE(pr, 8.0 + 1e-12);
  }
}

TEST(PredictLimit, HandComputedExample) {
  // Rows (1,0), (-1,0), (0,2), (0,-2); S = first row.
  Matrix m(4, 2);
  m << 1, 0, -1, 0, 0, 2, 0, -2;
  const auto x = center_columns(RepresentationMatrix(m));
  const auto p = predict_limit(x, SubsetMask::first_k(4, 1));
  EXPECT_DOUBLE_EQ(p.rho, 0.25);
  EXPECT_DOUBLE_EQ(p.mean_s_sq_norm, 1.0);
  EXPECT_DOUBLE_EQ(p.mean_sq_norm, 2.5);
  // eigenvalues 2 and 0.5: PR = 6.25 / 4.25
  EXPECT_NEAR(p.pr, 6.25 / 4.25, 1e-12);
  EXPECT_NEAR(p.predicted_cka_limit, (1.0 / 3.0) * (1.0 / 2.5) * std::sqrt(6.25 / 4.25), 1e-12);
}

TEST(PredictLimit, ComplementSymmetry) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto x = gaussian_cloud(120, 10, seed);
    const auto s = random_mask(120, seed);
    const double a = predict_limit(x, s).predicted_cka_limit;
    const double b = predict_limit(x, s.complement()).predicted_cka_limit;
    EXPECT_LT(oracle::rel_diff(a, b), 1e-9);
  }
}

TEST(PredictLimit, MatchesEmpiricalCkaAtLargeDistance) {
  const auto x = gaussian_cloud(200, 5, 4);
  const auto s = random_mask(200, 4);
  SeededRng rng(4, 1);
  const Vector v = sample_unit_direction(rng, 5);
  Matrix moved = x.data();
  for (Eigen::Index i = 0; i < 200; ++i) {
    if (!s[static_cast<std::size_t>(i)]) moved.row(i) += 1e7 * v.transpose();
  }
  const double empirical = oracle::linear_cka(x.data(), moved);
  EXPECT_NEAR(empirical, predict_limit(x, s).predicted_cka_limit, 1e-4);
}

TEST(PredictLimit, Preconditions) {
  const auto x = gaussian_cloud(10, 3, 1);
  EXPECT_EQ(code_of([&] { predict_limit(x, SubsetMask(10, false)); }), ErrorCode::InvalidSubset);
  EXPECT_EQ(code_of([&] { predict_limit(x, SubsetMask(10, true)); }), ErrorCode::InvalidSubset);
  EXPECT_EQ(code_of([&] { predict_limit(x, SubsetMask::first_k(9, 2)); }), ErrorCode::InvalidSubset);
  Matrix shifted = x.data();
  shifted.array() += 1.0;
  EXPECT_EQ(code_of([&] { predict_limit(RepresentationMatrix(shifted), SubsetMask::first_k(10, 2)); }),
            ErrorCode::NotCentered);
}

TEST(PredictLimitOutlier, SingletonRho) {
  const auto x = gaussian_cloud(50, 4, 2);
  const auto p = predict_limit_outlier(x, 7);
  EXPECT_DOUBLE_EQ(p.rho, 1.0 / 50.0);
  EXPECT_DOUBLE_EQ(p.mean_s_sq_norm, x.data().row(7).squaredNorm());
  EXPECT_NEAR(p.predicted_cka_limit,
              predict_limit(x, SubsetMask::all_but(50, 7)).predicted_cka_limit, 1e-12);
  EXPECT_EQ(code_of([&] { predict_limit_outlier(x, 50); }), ErrorCode::InvalidSubset);
  EXPECT_EQ(code_of([&] { predict_limit_outlier(gaussian_cloud(2, 2, 1), 0); }), ErrorCode::InvalidSubset);
}
