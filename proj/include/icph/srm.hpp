#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "icph/errors.hpp"
#include "icph/types.hpp"

namespace icph {

namespace detail {

inline void check_srm_dims(const Eigen::VectorXd& y, const Eigen::MatrixXd& design,
                           const RegressionParams& theta,
                           const TransitionParams& gamma) {
  if (design.rows() != y.size()) {
    throw DimensionMismatch("srm: design rows != response length");
  }
  if (design.cols() != theta.num_predictors()) {
    throw DimensionMismatch("srm: design has " + std::to_string(design.cols()) +
                            " columns, parameters expect " +
                            std::to_string(theta.num_predictors()));
  }
  if (theta.num_states() != gamma.num_states) {
    throw DimensionMismatch("srm: state counts of theta and gamma disagree");
  }
  gamma.validate();
}

/// Log Gaussian emission matrix: entry (t, j) = log N(y_t | x_t beta_j, s2_j).
inline Eigen::MatrixXd log_emissions(const Eigen::VectorXd& y,
                                     const Eigen::MatrixXd& design,
                                     const RegressionParams& theta) {
  const int m = static_cast<int>(y.size());
  const int l = theta.num_states();
  Eigen::MatrixXd resid = (-(design * theta.betas)).colwise() + y;  // m x l
  Eigen::MatrixXd loge(m, l);
  constexpr double log2pi = 1.8378770664093454836;
  for (int j = 0; j < l; ++j) {
    const double s2 = theta.variance(j);
    const double norm = -0.5 * (log2pi + std::log(s2));
    loge.col(j) = norm - resid.col(j).array().square() / (2.0 * s2);
  }
  return loge;
}

}  // namespace detail

/// Stationary distribution lambda of the induced transition matrix, the row
/// vector with lambda * Gamma = lambda. Requires an irreducible and aperiodic
/// chain, checked through strict positivity of Gamma^(l^2).
inline Eigen::VectorXd stationary_distribution(const TransitionParams& gamma) {
  const Eigen::MatrixXd g = gamma.matrix();
  const int l = gamma.num_states;
  if (l == 1) return Eigen::VectorXd::Ones(1);

  if (gamma.flavor == Model::IID) {
    // Constant columns: every row already is the stationary law, and the
    // chain is primitive exactly when all entries are positive.
    Eigen::VectorXd lambda = g.row(0).transpose();
    if ((lambda.array() <= 0.0).any()) {
      throw ReducibleChain("stationary_distribution: non-positive IID weights");
    }
    return lambda;
  }

  Eigen::MatrixXd power = g;
  for (int k = 1; k < l * l; ++k) power = power * g;
  if ((power.array() <= 0.0).any()) {
    throw ReducibleChain("stationary_distribution: transition matrix is not primitive");
  }

  // Solve lambda (Gamma - I) = 0 with the normalization sum(lambda) = 1 by
  // replacing one equation of the transposed system.
  Eigen::MatrixXd a = g.transpose() - Eigen::MatrixXd::Identity(l, l);
  a.row(l - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(l);
  b(l - 1) = 1.0;
  Eigen::VectorXd lambda = a.fullPivLu().solve(b);
  if ((lambda.array() <= 0.0).any()) {
    throw ReducibleChain("stationary_distribution: non-positive solution");
  }
  return lambda;
}

namespace detail {

/// Forward recursion without constraint validation; used both by the public
/// loglik and by finite-difference machinery whose evaluation points may sit
/// slightly outside the constraint set.
inline double loglik_core(const Eigen::VectorXd& y, const Eigen::MatrixXd& design,
                          const RegressionParams& theta,
                          const TransitionParams& gamma) {
  check_srm_dims(y, design, theta, gamma);
  for (int j = 0; j < static_cast<int>(theta.variances.size()); ++j) {
    if (!(theta.variances(j) > 0.0)) {
      throw NonFiniteLikelihood("loglik: non-positive error variance");
    }
  }
  const int m = static_cast<int>(y.size());
  const int l = theta.num_states();

  const Eigen::MatrixXd loge = log_emissions(y, design, theta);
  const Eigen::MatrixXd g = gamma.matrix();
  Eigen::VectorXd pred = stationary_distribution(gamma);  // P(H_t | past)

  double ll = 0.0;
  Eigen::VectorXd weighted(l);
  for (int t = 0; t < m; ++t) {
    const double peak = loge.row(t).maxCoeff();
    if (!std::isfinite(peak)) {
      throw NonFiniteLikelihood("loglik: all emission densities vanished at t=" +
                                std::to_string(t));
    }
    for (int j = 0; j < l; ++j) {
      weighted(j) = pred(j) * std::exp(loge(t, j) - peak);
    }
    const double step = weighted.sum();
    if (!(step > 0.0) || !std::isfinite(step)) {
      throw NonFiniteLikelihood("loglik: zero forward mass at t=" + std::to_string(t));
    }
    ll += std::log(step) + peak;
    if (t + 1 < m) pred = g.transpose() * (weighted / step);
  }
  return ll;
}

}  // namespace detail

/// Log-likelihood of one environment's sample under the switching regression
/// model, up to the additive constant log p(x) which is dropped everywhere.
///
/// Implemented as the forward recursion with per-step renormalization and an
/// accumulated log scale, stable for m up to at least 1e4.
inline double loglik(const Eigen::VectorXd& y, const Eigen::MatrixXd& design,
                     const RegressionParams& theta, const TransitionParams& gamma) {
  theta.validate();
  return detail::loglik_core(y, design, theta, gamma);
}

/// Convenience overload for a single-environment Dataset.
inline double loglik(const Dataset& data, const RegressionParams& theta,
                     const TransitionParams& gamma, bool intercept = false) {
  std::vector<int> all(data.num_predictors());
  std::iota(all.begin(), all.end(), 0);
  return loglik(data.y, design_matrix(data.x, all, intercept), theta, gamma);
}

/// Posterior state probabilities P(H_t = j | all data), one row per
/// observation, by the scaled forward-backward recursion. Under the IID
/// flavor this reduces to pointwise Bayes weights.
inline Eigen::MatrixXd posterior_state_probs(const Eigen::VectorXd& y,
                                             const Eigen::MatrixXd& design,
                                             const RegressionParams& theta,
                                             const TransitionParams& gamma) {
  detail::check_srm_dims(y, design, theta, gamma);
  theta.validate();
  const int m = static_cast<int>(y.size());
  const int l = theta.num_states();

  const Eigen::MatrixXd loge = detail::log_emissions(y, design, theta);
  const Eigen::MatrixXd g = gamma.matrix();

  Eigen::MatrixXd emis(m, l);      // exp(loge - rowwise peak)
  Eigen::VectorXd scale(m);        // per-step normalizers of the forward pass
  Eigen::MatrixXd forward(m, l);   // filtered probabilities
  Eigen::VectorXd pred = stationary_distribution(gamma);
  for (int t = 0; t < m; ++t) {
    const double peak = loge.row(t).maxCoeff();
    if (!std::isfinite(peak)) {
      throw NonFiniteLikelihood("posterior_state_probs: emissions vanished at t=" +
                                std::to_string(t));
    }
    emis.row(t) = (loge.row(t).array() - peak).exp();
    Eigen::VectorXd w = pred.cwiseProduct(emis.row(t).transpose());
    const double step = w.sum();
    if (!(step > 0.0) || !std::isfinite(step)) {
      throw NonFiniteLikelihood("posterior_state_probs: zero forward mass at t=" +
                                std::to_string(t));
    }
    scale(t) = step;
    forward.row(t) = (w / step).transpose();
    if (t + 1 < m) pred = g.transpose() * forward.row(t).transpose();
  }

  Eigen::MatrixXd post(m, l);
  Eigen::VectorXd back = Eigen::VectorXd::Ones(l);
  post.row(m - 1) = forward.row(m - 1);
  for (int t = m - 2; t >= 0; --t) {
    back = g * emis.row(t + 1).transpose().cwiseProduct(back) / scale(t + 1);
    Eigen::VectorXd p = forward.row(t).transpose().cwiseProduct(back);
    post.row(t) = (p / p.sum()).transpose();
  }
  return post;
}

inline Eigen::MatrixXd posterior_state_probs(const Dataset& data,
                                             const RegressionParams& theta,
                                             const TransitionParams& gamma,
                                             bool intercept = false) {
  std::vector<int> all(data.num_predictors());
  std::iota(all.begin(), all.end(), 0);
  return posterior_state_probs(data.y, design_matrix(data.x, all, intercept), theta,
                               gamma);
}

// --- label permutations ---
//
// pi maps old state j to new state pi[j] (0-based). The induced parameter
// maps move column j of the regression matrix to column pi[j] and conjugate
// the transition matrix; the shared variance of the Equal constraint is
// untouched.

inline RegressionParams permute_params(const RegressionParams& theta,
                                       const std::vector<int>& pi) {
  const int l = theta.num_states();
  if (static_cast<int>(pi.size()) != l) {
    throw DimensionMismatch("permute_params: permutation length != num_states");
  }
  RegressionParams out = theta;
  for (int j = 0; j < l; ++j) {
    out.betas.col(pi[j]) = theta.betas.col(j);
    if (theta.constraint == Variance::LowerBound) {
      out.variances(pi[j]) = theta.variances(j);
    }
  }
  return out;
}

inline TransitionParams permute_transition(const TransitionParams& gamma,
                                           const std::vector<int>& pi) {
  const int l = gamma.num_states;
  if (static_cast<int>(pi.size()) != l) {
    throw DimensionMismatch("permute_transition: permutation length != num_states");
  }
  const Eigen::MatrixXd g = gamma.matrix();
  Eigen::MatrixXd conj(l, l);
  for (int i = 0; i < l; ++i) {
    for (int j = 0; j < l; ++j) conj(pi[i], pi[j]) = g(i, j);
  }
  return TransitionParams::from_matrix(gamma.flavor, conj);
}

/// Permutation applied to the packed vector phi = (theta, gamma).
inline Eigen::VectorXd permute_phi(const Eigen::VectorXd& phi,
                                   const std::vector<int>& pi,
                                   const RegressionParams& theta_like,
                                   const TransitionParams& gamma_like) {
  auto [theta, gamma] = unpack_phi(phi, theta_like, gamma_like);
  return pack_phi(permute_params(theta, pi), permute_transition(gamma, pi));
}

/// All permutations of {0, ..., l-1} in lexicographic order; the identity is
/// always first.
inline std::vector<std::vector<int>> all_permutations(int l) {
  std::vector<int> pi(l);
  std::iota(pi.begin(), pi.end(), 0);
  std::vector<std::vector<int>> out;
  do {
    out.push_back(pi);
  } while (std::next_permutation(pi.begin(), pi.end()));
  return out;
}

}  // namespace icph
