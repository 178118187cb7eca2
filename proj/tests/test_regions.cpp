#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "icph/chi2.hpp"
#include "icph/estimation.hpp"
#include "icph/regions.hpp"
#include "test_util.hpp"

namespace {

using icph::ConfidenceRegion;
using icph::FitOptions;
using icph::Model;
using icph::ParamMask;
using icph::Rng;
using icph::Variance;

ConfidenceRegion point_region(std::initializer_list<double> center,
                              const Eigen::MatrixXd& shape) {
  ConfidenceRegion region;
  Eigen::VectorXd c(static_cast<int>(center.size()));
  int i = 0;
  for (double v : center) c(i++) = v;
  region.centers.push_back(c);
  region.shapes.push_back(shape);
  region.dim = static_cast<int>(center.size());
  return region;
}

TEST(MaskedIndices, RolesSelectExpectedCoordinates) {
  icph::RegressionParams theta;
  theta.constraint = Variance::LowerBound;
  theta.betas.resize(2, 2);  // slope + constant column, two states
  theta.betas.setZero();
  theta.variances.resize(2);
  theta.variances.setOnes();

  ParamMask all;
  EXPECT_EQ(icph::masked_theta_indices(theta, true, all),
            (std::vector<int>{0, 1, 2, 3, 4, 5}));

  ParamMask beta_only{false, true, false};
  EXPECT_EQ(icph::masked_theta_indices(theta, true, beta_only),
            (std::vector<int>{0, 2}));

  ParamMask sigma_only{false, false, true};
  EXPECT_EQ(icph::masked_theta_indices(theta, true, sigma_only),
            (std::vector<int>{4, 5}));

  // Without a constant column every coefficient is a "beta".
  EXPECT_EQ(icph::masked_theta_indices(theta, false, beta_only),
            (std::vector<int>{0, 1, 2, 3}));
}

// Single state, intercept-only model: the masked region is the classic
// normal-theory interval theta_hat +/- sqrt(q_chi2(1)(1 - alpha) / J).
TEST(RegionFromFit, SingleStateIntervalClosedForm) {
  Rng rng(3);
  const int m = 400;
  Eigen::VectorXd y(m);
  Eigen::MatrixXd design(m, 1);
  design.setOnes();
  for (int t = 0; t < m; ++t) y(t) = 0.7 + 0.5 * rng.normal();

  FitOptions opt;
  opt.num_states = 1;
  opt.constraint = Variance::Equal;
  const auto fit = icph::fit_nlm(y, design, opt);
  const ParamMask intercept_only{true, false, false};
  const auto region = icph::region_from_fit(fit, true, intercept_only);
  ASSERT_EQ(region.dim, 1);
  ASSERT_EQ(region.centers.size(), 1u);

  const double alpha = 0.05;
  const double radius =
      std::sqrt(icph::chi2_quantile(1.0 - alpha, 1) / region.shapes[0](0, 0));
  Eigen::VectorXd inside(1), outside(1);
  inside << region.centers[0](0) + 0.999 * radius;
  outside << region.centers[0](0) + 1.001 * radius;
  EXPECT_TRUE(region.contains(inside, alpha));
  EXPECT_FALSE(region.contains(outside, alpha));

  // The information for the mean of a Gaussian sample is m / sigma^2.
  EXPECT_NEAR(region.shapes[0](0, 0) / (m / fit.theta.variances(0)), 1.0, 1e-2);
}

TEST(RegionFromFit, TwoStateOrbitHasSwappedCenters) {
  Rng rng(5);
  icph::RegressionParams truth;
  truth.constraint = Variance::Equal;
  truth.betas.resize(2, 2);
  truth.betas << 1.0, -1.0, 0.3, -0.3;
  truth.variances.resize(1);
  truth.variances << 0.25;
  const auto gamma = testutil::random_gamma(rng, Model::IID, 2);
  const auto sample = testutil::sample_srm(rng, 400, truth, gamma, true);

  FitOptions opt;
  opt.num_states = 2;
  opt.constraint = Variance::Equal;
  const auto fit = icph::fit_nlm(sample.y, sample.x, opt);
  const auto region = icph::region_from_fit(fit, true);
  ASSERT_EQ(region.centers.size(), 2u);

  // Swap applied to the identity center reproduces the second center: the
  // two coefficient blocks exchange, the shared variance coordinate stays.
  Eigen::VectorXd swapped(5);
  swapped << region.centers[0].segment(2, 2), region.centers[0].head(2),
      region.centers[0](4);
  EXPECT_LT((region.centers[1] - swapped).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(RegionFromFit, NestedAcrossLevels) {
  Rng rng(7);
  icph::RegressionParams truth;
  truth.constraint = Variance::Equal;
  truth.betas.resize(2, 2);
  truth.betas << 1.2, -0.8, 0.0, 0.5;
  truth.variances.resize(1);
  truth.variances << 0.3;
  const auto gamma = testutil::random_gamma(rng, Model::IID, 2);
  const auto sample = testutil::sample_srm(rng, 500, truth, gamma, true);

  FitOptions opt;
  opt.num_states = 2;
  const auto fit = icph::fit_nlm(sample.y, sample.x, opt);
  const auto region = icph::region_from_fit(fit, true);

  // Boundary points of the alpha2-level region lie inside the alpha1 < alpha2
  // region.
  const double alpha1 = 0.01, alpha2 = 0.10;
  const double r2 = icph::chi2_quantile(1.0 - alpha2, region.dim);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(region.shapes[0]);
  const Eigen::MatrixXd half_inverse =
      es.eigenvectors() *
      es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
      es.eigenvectors().transpose();
  for (int rep = 0; rep < 50; ++rep) {
    Eigen::VectorXd u(region.dim);
    for (int i = 0; i < region.dim; ++i) u(i) = rng.normal();
    u.normalize();
    const Eigen::VectorXd boundary =
        region.centers[0] + std::sqrt(r2) * (half_inverse * u);
    EXPECT_TRUE(region.contains(boundary, alpha1));
    EXPECT_LE(region.mahalanobis(boundary), r2 + 1e-9);
  }
}

TEST(RegionFromFit, DegenerateFitRejected) {
  icph::FitResult fit;
  fit.degenerate = true;
  EXPECT_THROW(icph::region_from_fit(fit, true), icph::SingularInformation);
}

TEST(MinMax, CommonCenterGivesZero) {
  Eigen::MatrixXd a(2, 2), b(2, 2);
  a << 2, 0.3, 0.3, 1;
  b << 1, -0.2, -0.2, 3;
  const auto r1 = point_region({0.4, -0.2}, a);
  const auto r2 = point_region({0.4, -0.2}, b);
  const auto res = icph::min_max_mahalanobis({r1, r2});
  EXPECT_NEAR(res.value, 0.0, 1e-10);
}

TEST(MinMax, OneDimensionalClosedForm) {
  Eigen::MatrixXd unit(1, 1);
  unit << 1.0;
  const auto r1 = point_region({0.0}, unit);
  const auto r2 = point_region({1.0}, unit);
  const auto res = icph::min_max_mahalanobis({r1, r2});
  EXPECT_NEAR(res.value, 0.25, 1e-6);
  EXPECT_NEAR(res.minimizer(0), 0.5, 1e-3);
}

TEST(MinMax, MatchesGridOracleOnRandomInstances) {
  Rng rng(11);
  for (int rep = 0; rep < 8; ++rep) {
    const auto inst = testutil::random_minimax_instance(rng);
    ConfidenceRegion r1 = point_region({inst.centers[0](0), inst.centers[0](1)},
                                       inst.shapes[0]);
    ConfidenceRegion r2 = point_region({inst.centers[1](0), inst.centers[1](1)},
                                       inst.shapes[1]);
    const auto res = icph::min_max_mahalanobis({r1, r2});
    const double oracle = testutil::grid_minimax_oracle(inst.centers, inst.shapes);
    EXPECT_NEAR(res.value, oracle, 1e-4) << "instance " << rep;
  }
}

TEST(MinMax, SymmetricInArguments) {
  Rng rng(13);
  const auto inst = testutil::random_minimax_instance(rng);
  ConfidenceRegion r1 = point_region({inst.centers[0](0), inst.centers[0](1)},
                                     inst.shapes[0]);
  ConfidenceRegion r2 = point_region({inst.centers[1](0), inst.centers[1](1)},
                                     inst.shapes[1]);
  const auto ab = icph::min_max_mahalanobis({r1, r2});
  const auto ba = icph::min_max_mahalanobis({r2, r1});
  EXPECT_NEAR(ab.value, ba.value, 1e-7);
}

TEST(MinMax, ComplexityGuard) {
  // 5 states would give 120 permutations; with 4 environments that exceeds
  // the assignment cap.
  ConfidenceRegion big;
  big.dim = 1;
  Eigen::MatrixXd unit(1, 1);
  unit << 1.0;
  for (int k = 0; k < 120; ++k) {
    big.centers.push_back(Eigen::VectorXd::Constant(1, k * 0.01));
    big.shapes.push_back(unit);
  }
  std::vector<ConfidenceRegion> regions{big, big, big, big};
  EXPECT_THROW(icph::min_max_mahalanobis(regions), icph::ComplexityLimit);
}

}  // namespace
