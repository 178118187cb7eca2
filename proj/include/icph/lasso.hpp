#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "icph/errors.hpp"

namespace icph {

/// First-activation order of the predictors along the l1 regularization
/// path: coordinate descent over a geometric lambda grid from lambda_max
/// (all coefficients zero) downward, on internally centered and scaled data.
/// Predictors that never activate are appended by descending absolute
/// correlation; constant columns come last.
inline std::vector<int> lasso_activation_order(const Eigen::VectorXd& y,
                                               const Eigen::MatrixXd& x) {
  const int n = static_cast<int>(y.size());
  const int d = static_cast<int>(x.cols());
  if (n < 2 || x.rows() != n) throw DegenerateData("lasso: need at least two rows");

  Eigen::VectorXd ys = y.array() - y.mean();
  Eigen::MatrixXd xs(n, d);
  std::vector<bool> constant(d, false);
  int usable = 0;
  for (int j = 0; j < d; ++j) {
    const Eigen::VectorXd centered = x.col(j).array() - x.col(j).mean();
    const double sd = std::sqrt(centered.squaredNorm() / n);
    if (sd < 1e-12) {
      constant[j] = true;
      xs.col(j).setZero();
    } else {
      xs.col(j) = centered / sd;
      ++usable;
    }
  }
  if (usable == 0) throw DegenerateData("lasso: all predictor columns are constant");

  const Eigen::VectorXd correlation = xs.transpose() * ys / n;
  const double lambda_max = correlation.cwiseAbs().maxCoeff();
  std::vector<int> order;
  std::vector<bool> recorded(d, false);

  if (lambda_max > 0.0) {
    const int grid = 100;
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd resid = ys;
    for (int g = 1; g < grid; ++g) {
      const double lambda =
          lambda_max * std::pow(1e-3, static_cast<double>(g) / (grid - 1));
      for (int sweep = 0; sweep < 1000; ++sweep) {
        double max_change = 0.0;
        for (int j = 0; j < d; ++j) {
          if (constant[j]) continue;
          const double rho = beta(j) + xs.col(j).dot(resid) / n;
          const double updated =
              std::copysign(std::max(std::fabs(rho) - lambda, 0.0), rho);
          if (updated != beta(j)) {
            resid -= xs.col(j) * (updated - beta(j));
            max_change = std::max(max_change, std::fabs(updated - beta(j)));
            beta(j) = updated;
          }
        }
        if (max_change < 1e-7) break;
      }
      // Record activations at this grid point, largest coefficient first.
      std::vector<int> fresh;
      for (int j = 0; j < d; ++j) {
        if (!recorded[j] && !constant[j] && std::fabs(beta(j)) > 1e-12) {
          fresh.push_back(j);
        }
      }
      std::stable_sort(fresh.begin(), fresh.end(), [&](int a, int b) {
        return std::fabs(beta(a)) > std::fabs(beta(b));
      });
      for (int j : fresh) {
        recorded[j] = true;
        order.push_back(j);
      }
    }
  }

  std::vector<int> rest;
  for (int j = 0; j < d; ++j) {
    if (!recorded[j] && !constant[j]) rest.push_back(j);
  }
  std::stable_sort(rest.begin(), rest.end(), [&](int a, int b) {
    return std::fabs(correlation(a)) > std::fabs(correlation(b));
  });
  for (int j : rest) order.push_back(j);
  for (int j = 0; j < d; ++j) {
    if (constant[j]) order.push_back(j);
  }
  return order;
}

/// The first k predictors along the Lasso selection path.
inline std::vector<int> lasso_screen(const Eigen::VectorXd& y,
                                     const Eigen::MatrixXd& x, int k) {
  if (k < 1) throw InvalidOptions("lasso_screen: k must be >= 1");
  std::vector<int> order = lasso_activation_order(y, x);
  if (static_cast<int>(order.size()) > k) order.resize(k);
  return order;
}

}  // namespace icph
