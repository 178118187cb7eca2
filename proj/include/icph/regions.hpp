#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "icph/chi2.hpp"
#include "icph/errors.hpp"
#include "icph/estimation.hpp"
#include "icph/optim.hpp"
#include "icph/srm.hpp"

namespace icph {

inline constexpr int kMaxPermutationAssignments = 13824;  // (4!)^3

struct ComplexityLimit : Error {
  using Error::Error;
};

/// Which roles of the regression parameter vector enter a test. "intercept"
/// refers to the coefficient of the appended constant column, "beta" to all
/// other coefficients, "sigma" to the error variances.
struct ParamMask {
  bool intercept = true;
  bool beta = true;
  bool sigma = true;
};

/// Indices into theta (in packing order) selected by the mask.
/// `constant_column` says whether the last design column is the constant.
inline std::vector<int> masked_theta_indices(const RegressionParams& theta,
                                             bool constant_column,
                                             const ParamMask& mask) {
  const int p = theta.num_predictors();
  const int l = theta.num_states();
  std::vector<int> out;
  for (int j = 0; j < l; ++j) {
    for (int i = 0; i < p; ++i) {
      const bool is_intercept = constant_column && i == p - 1;
      if ((is_intercept && mask.intercept) || (!is_intercept && mask.beta)) {
        out.push_back(j * p + i);
      }
    }
  }
  if (mask.sigma) {
    for (int j = 0; j < static_cast<int>(theta.variances.size()); ++j) {
      out.push_back(p * l + j);
    }
  }
  return out;
}

/// Coordinate source map of a label permutation on theta: entry a of the
/// permuted vector equals entry source[a] of the original.
inline std::vector<int> theta_permutation_sources(const RegressionParams& theta,
                                                  const std::vector<int>& pi) {
  const int p = theta.num_predictors();
  const int l = theta.num_states();
  std::vector<int> inverse(l);
  for (int j = 0; j < l; ++j) inverse[pi[j]] = j;
  std::vector<int> src(theta.dim());
  for (int s = 0; s < l; ++s) {
    for (int i = 0; i < p; ++i) src[s * p + i] = inverse[s] * p + i;
  }
  if (theta.constraint == Variance::Equal) {
    src[p * l] = p * l;
  } else {
    for (int s = 0; s < l; ++s) src[p * l + s] = p * l + inverse[s];
  }
  return src;
}

/// Permutation-adjusted ellipsoidal confidence region for the tested
/// coordinates of theta: one center per label permutation with the
/// correspondingly permuted shape matrix. A point lies in the alpha-level
/// region when its minimal Mahalanobis distance over the orbit is at most
/// the chi-square(dim) quantile at 1 - alpha.
struct ConfidenceRegion {
  std::vector<Eigen::VectorXd> centers;  // l! centers, identity first
  std::vector<Eigen::MatrixXd> shapes;   // information of the tested coords
  int dim = 0;

  double mahalanobis(const Eigen::VectorXd& point) const {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < centers.size(); ++k) {
      const Eigen::VectorXd d = point - centers[k];
      best = std::min(best, d.dot(shapes[k] * d));
    }
    return best;
  }

  bool contains(const Eigen::VectorXd& point, double alpha) const {
    return mahalanobis(point) <= chi2_quantile(1.0 - alpha, dim);
  }
};

/// Builds the permutation-adjusted region from a fit. Coordinates outside
/// the mask (and the transition parameters) are marginalized through the
/// Schur complement of the inverse information.
inline ConfidenceRegion region_from_fit(const FitResult& fit, bool constant_column,
                                        const ParamMask& mask = {}) {
  if (fit.degenerate) {
    throw SingularInformation("region_from_fit: degenerate fit");
  }
  const std::vector<int> masked =
      masked_theta_indices(fit.theta, constant_column, mask);
  if (masked.empty()) {
    throw InvalidOptions("region_from_fit: empty test-parameter mask");
  }
  const int d = static_cast<int>(fit.phi.size());
  const Eigen::MatrixXd covariance =
      fit.fisher.ldlt().solve(Eigen::MatrixXd::Identity(d, d));
  const Eigen::VectorXd theta_hat = pack_theta(fit.theta);

  ConfidenceRegion region;
  region.dim = static_cast<int>(masked.size());
  for (const auto& pi : all_permutations(fit.theta.num_states())) {
    const std::vector<int> src = theta_permutation_sources(fit.theta, pi);
    Eigen::VectorXd center(region.dim);
    Eigen::MatrixXd cov(region.dim, region.dim);
    for (int a = 0; a < region.dim; ++a) {
      center(a) = theta_hat(src[masked[a]]);
      for (int b = 0; b < region.dim; ++b) {
        cov(a, b) = covariance(src[masked[a]], src[masked[b]]);
      }
    }
    cov = 0.5 * (cov + cov.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    const double max_ev = es.eigenvalues().maxCoeff();
    const double min_ev = es.eigenvalues().minCoeff();
    if (!(min_ev > 0.0) || min_ev < 1e-12 * max_ev) {
      throw SingularInformation(
          "region_from_fit: information singular on the tested coordinates");
    }
    region.centers.push_back(center);
    region.shapes.push_back(es.eigenvectors() *
                            es.eigenvalues().cwiseInverse().asDiagonal() *
                            es.eigenvectors().transpose());
  }
  return region;
}

struct MinMaxResult {
  double value = 0.0;               // minimized maximal Mahalanobis distance
  std::vector<int> assignment;      // chosen center index per environment
  Eigen::VectorXd minimizer;
};

namespace detail {

/// min over theta of max_e (theta - c_e)' A_e (theta - c_e) for one fixed
/// assignment of centers/shapes: log-sum-exp smoothing with temperature
/// continuation, then a short subgradient polish.
inline std::pair<double, Eigen::VectorXd> minimax_quadratics(
    const std::vector<Eigen::VectorXd>& centers,
    const std::vector<Eigen::MatrixXd>& shapes) {
  const int e_count = static_cast<int>(centers.size());
  const int dim = static_cast<int>(centers[0].size());

  const auto max_value = [&](const Eigen::VectorXd& point) {
    double worst = -std::numeric_limits<double>::infinity();
    for (int e = 0; e < e_count; ++e) {
      const Eigen::VectorXd d = point - centers[e];
      worst = std::max(worst, d.dot(shapes[e] * d));
    }
    return worst;
  };

  // Information-weighted centroid as the starting point.
  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
  for (int e = 0; e < e_count; ++e) {
    total += shapes[e];
    rhs += shapes[e] * centers[e];
  }
  Eigen::VectorXd point = total.ldlt().solve(rhs);
  double best = max_value(point);
  Eigen::VectorXd best_point = point;
  if (best <= 1e-14) return {0.0, best_point};

  OptimOptions opt;
  opt.max_iterations = 200;
  opt.rel_tol = 1e-12;
  opt.grad_tol = 1e-9;

  double tau = std::max(best, 1.0);
  for (int round = 0; round < 10; ++round) {
    const double t = tau;
    const Objective smoothed = [&](const Eigen::VectorXd& z) {
      double peak = -std::numeric_limits<double>::infinity();
      Eigen::VectorXd q(e_count);
      for (int e = 0; e < e_count; ++e) {
        const Eigen::VectorXd d = z - centers[e];
        q(e) = d.dot(shapes[e] * d);
        peak = std::max(peak, q(e));
      }
      double sum = 0.0;
      for (int e = 0; e < e_count; ++e) sum += std::exp((q(e) - peak) / t);
      return peak + t * std::log(sum);
    };
    point = minimize_bfgs(smoothed, point, opt).x;
    const double value = max_value(point);
    if (value < best) {
      best = value;
      best_point = point;
    }
    tau *= 0.1;
    if (tau < 1e-8) break;
  }

  // Subgradient polish on the exact max.
  point = best_point;
  double step = 0.05 * std::sqrt(std::max(best, 1e-12));
  for (int it = 1; it <= 120; ++it) {
    int active = 0;
    double worst = -std::numeric_limits<double>::infinity();
    for (int e = 0; e < e_count; ++e) {
      const Eigen::VectorXd d = point - centers[e];
      const double q = d.dot(shapes[e] * d);
      if (q > worst) {
        worst = q;
        active = e;
      }
    }
    const Eigen::VectorXd grad = 2.0 * shapes[active] * (point - centers[active]);
    const double norm = grad.norm();
    if (norm < 1e-14) break;
    point -= (step / (1.0 + 0.1 * it)) / norm * grad;
    const double value = max_value(point);
    if (value < best) {
      best = value;
      best_point = point;
    }
  }
  return {best, best_point};
}

}  // namespace detail

/// Joint-overlap geometry: over all permutation assignments (the first
/// environment pinned to the identity by the global label symmetry),
/// minimizes over theta the maximum Mahalanobis distance to the environment
/// regions. The result is zero exactly when all centers can be made to
/// coincide.
inline MinMaxResult min_max_mahalanobis(const std::vector<ConfidenceRegion>& regions) {
  if (regions.size() < 2) {
    throw InvalidOptions("min_max_mahalanobis: need at least two environments");
  }
  const int dim = regions[0].dim;
  long combos = 1;
  for (std::size_t e = 0; e < regions.size(); ++e) {
    if (regions[e].dim != dim) {
      throw DimensionMismatch("min_max_mahalanobis: inconsistent dimensions");
    }
    if (e > 0) combos *= static_cast<long>(regions[e].centers.size());
    if (combos > kMaxPermutationAssignments) {
      throw ComplexityLimit("min_max_mahalanobis: permutation assignment search too large");
    }
  }

  MinMaxResult result;
  result.value = std::numeric_limits<double>::infinity();
  std::vector<int> assignment(regions.size(), 0);
  std::vector<Eigen::VectorXd> centers(regions.size());
  std::vector<Eigen::MatrixXd> shapes(regions.size());
  centers[0] = regions[0].centers[0];
  shapes[0] = regions[0].shapes[0];

  for (long combo = 0; combo < combos; ++combo) {
    long rem = combo;
    for (std::size_t e = 1; e < regions.size(); ++e) {
      const long size = static_cast<long>(regions[e].centers.size());
      assignment[e] = static_cast<int>(rem % size);
      rem /= size;
      centers[e] = regions[e].centers[assignment[e]];
      shapes[e] = regions[e].shapes[assignment[e]];
    }
    const auto [value, point] = detail::minimax_quadratics(centers, shapes);
    if (value < result.value) {
      result.value = value;
      result.assignment = assignment;
      result.minimizer = point;
    }
  }
  return result;
}

}  // namespace icph
