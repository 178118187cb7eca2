#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "icph/optim.hpp"

namespace {

TEST(FdGradient, MatchesAnalyticQuadratic) {
  Eigen::MatrixXd a(3, 3);
  a << 4, 1, 0, 1, 3, -1, 0, -1, 2;
  const auto f = [&](const Eigen::VectorXd& x) { return 0.5 * x.dot(a * x); };
  Eigen::VectorXd x(3);
  x << 1.0, -2.0, 0.5;
  const Eigen::VectorXd g = icph::fd_gradient(f, x);
  EXPECT_LT((g - a * x).lpNorm<Eigen::Infinity>(), 1e-7);
}

TEST(FdGradient, RichardsonHalfStepConsistency) {
  // Central differences have O(h^2) error; halving the step must shrink the
  // discrepancy to the analytic gradient by roughly 4x.
  const auto f = [](const Eigen::VectorXd& x) {
    return std::sin(x(0)) * std::exp(0.3 * x(1)) + std::cos(x(0) * x(1));
  };
  Eigen::VectorXd x(2);
  x << 0.7, -0.4;
  Eigen::VectorXd exact(2);
  exact(0) = std::cos(x(0)) * std::exp(0.3 * x(1)) -
             std::sin(x(0) * x(1)) * x(1);
  exact(1) = 0.3 * std::sin(x(0)) * std::exp(0.3 * x(1)) -
             std::sin(x(0) * x(1)) * x(0);

  const double err_full = (icph::fd_gradient(f, x, 8.0) - exact).norm();
  const double err_half = (icph::fd_gradient(f, x, 4.0) - exact).norm();
  EXPECT_LT(err_half, err_full / 2.5);
}

TEST(FdHessian, MatchesAnalyticQuadratic) {
  Eigen::MatrixXd a(2, 2);
  a << 5, 2, 2, 3;
  const auto f = [&](const Eigen::VectorXd& x) { return 0.5 * x.dot(a * x); };
  Eigen::VectorXd x(2);
  x << 0.3, -1.1;
  const Eigen::MatrixXd h = icph::fd_hessian(f, x);
  EXPECT_LT((h - a).lpNorm<Eigen::Infinity>(), 1e-4);
  EXPECT_EQ((h - h.transpose()).lpNorm<Eigen::Infinity>(), 0.0);
}

TEST(Bfgs, SolvesQuadratic) {
  Eigen::MatrixXd a(4, 4);
  a << 10, 1, 0, 0, 1, 8, 1, 0, 0, 1, 5, 1, 0, 0, 1, 2;
  Eigen::VectorXd b(4);
  b << 1, -3, 2, 0.5;
  const auto f = [&](const Eigen::VectorXd& x) {
    return 0.5 * x.dot(a * x) - b.dot(x);
  };
  const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(4);
  const auto res = icph::minimize_bfgs(f, x0);
  EXPECT_TRUE(res.converged);
  EXPECT_LT((a * res.x - b).lpNorm<Eigen::Infinity>(), 1e-4);
}

TEST(Bfgs, SolvesRosenbrock) {
  const auto f = [](const Eigen::VectorXd& x) {
    const double a = 1.0 - x(0);
    const double b = x(1) - x(0) * x(0);
    return a * a + 100.0 * b * b;
  };
  Eigen::VectorXd x0(2);
  x0 << -1.2, 1.0;
  icph::OptimOptions opts;
  opts.max_iterations = 500;
  const auto res = icph::minimize_bfgs(f, x0, opts);
  EXPECT_NEAR(res.x(0), 1.0, 1e-3);
  EXPECT_NEAR(res.x(1), 1.0, 1e-3);
}

TEST(Bfgs, RejectsNonFiniteStart) {
  const auto f = [](const Eigen::VectorXd& x) {
    return std::log(x(0));  // NaN for negative arguments
  };
  Eigen::VectorXd x0(1);
  x0 << -1.0;
  EXPECT_THROW(icph::minimize_bfgs(f, x0), icph::NonFiniteObjective);
}

TEST(Bfgs, TreatsExceptionsAsRejectedSteps) {
  // Objective throws outside the unit ball; minimum at interior point.
  const auto f = [](const Eigen::VectorXd& x) -> double {
    if (x.norm() > 1.0) throw icph::NonFiniteLikelihood("outside");
    return (x.array() - 0.5).square().sum();
  };
  Eigen::VectorXd x0(2);
  x0 << 0.0, 0.0;
  const auto res = icph::minimize_bfgs(f, x0);
  EXPECT_LT((res.x.array() - 0.5).abs().maxCoeff(), 1e-4);
}

}  // namespace
