#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include "icph/errors.hpp"
#include "icph/optim.hpp"
#include "icph/rng.hpp"
#include "icph/srm.hpp"
#include "icph/types.hpp"

namespace icph {

struct FitOptions {
  Method method = Method::NLM;
  Model model = Model::IID;
  Variance constraint = Variance::Equal;
  double lower_bound = kDefaultLowerBound;
  int num_states = 2;
  bool intercept = true;
  int num_restarts = 5;
  int max_iterations = 500;
  double tolerance = 1e-8;  // relative log-likelihood change
  std::uint64_t seed = 0;

  void validate() const {
    if (num_states < 1) throw InvalidOptions("FitOptions: num_states must be >= 1");
    if (num_restarts < 1) throw InvalidOptions("FitOptions: num_restarts must be >= 1");
    if (!(tolerance > 0.0)) throw InvalidOptions("FitOptions: tolerance must be > 0");
    if (!(lower_bound > 0.0)) throw InvalidOptions("FitOptions: lower bound must be > 0");
    if (method == Method::EM && model != Model::IID) {
      throw InvalidOptions("FitOptions: the EM method is implemented for the IID model only");
    }
  }
};

struct FitResult {
  RegressionParams theta;
  TransitionParams gamma;
  Eigen::VectorXd phi;  // pack_phi(theta, gamma)
  double loglik_value = -std::numeric_limits<double>::infinity();
  Eigen::MatrixXd fisher;  // observed information at phi, in natural coordinates
  bool converged = false;
  bool degenerate = false;  // information near-singular or not computable
  int restart_index = -1;
  int iterations = 0;
  std::vector<double> loglik_trace;  // per-iteration values of the winning EM run
};

// --- unconstrained fitting coordinates ---
//
// Variances enter through sigma^2 = c + exp(s) (lower bound) or the shared
// sigma^2 = exp(s) (equal variances); transition rows map to the simplex by
// the additive-log-ratio transform. Coefficients are unconstrained as-is.

inline Eigen::VectorXd probs_to_alr(const Eigen::VectorXd& p) {
  const int l = static_cast<int>(p.size());
  Eigen::VectorXd z(l - 1);
  const double ref = std::log(std::max(p(l - 1), 1e-300));
  for (int j = 0; j + 1 < l; ++j) z(j) = std::log(std::max(p(j), 1e-300)) - ref;
  return z;
}

inline Eigen::VectorXd alr_to_probs(const Eigen::VectorXd& z) {
  const int l = static_cast<int>(z.size()) + 1;
  const double peak = l > 1 ? std::max(z.maxCoeff(), 0.0) : 0.0;
  Eigen::VectorXd p(l);
  double denom = std::exp(-peak);
  for (int j = 0; j + 1 < l; ++j) {
    p(j) = std::exp(z(j) - peak);
    denom += p(j);
  }
  p(l - 1) = std::exp(-peak);
  return p / denom;
}

inline Eigen::VectorXd to_unconstrained(const RegressionParams& theta,
                                        const TransitionParams& gamma) {
  Eigen::VectorXd z(phi_dim(theta, gamma));
  int at = 0;
  for (int j = 0; j < theta.num_states(); ++j) {
    z.segment(at, theta.num_predictors()) = theta.betas.col(j);
    at += theta.num_predictors();
  }
  for (int j = 0; j < static_cast<int>(theta.variances.size()); ++j) {
    const double floor = theta.constraint == Variance::LowerBound ? theta.lower_bound : 0.0;
    z(at++) = std::log(std::max(theta.variances(j) - floor, 1e-12));
  }
  const int l = gamma.num_states;
  if (l > 1) {
    const Eigen::MatrixXd g = gamma.matrix();
    const int rows = gamma.flavor == Model::IID ? 1 : l;
    for (int i = 0; i < rows; ++i) {
      z.segment(at, l - 1) = probs_to_alr(g.row(i).transpose());
      at += l - 1;
    }
  }
  return z;
}

inline std::pair<RegressionParams, TransitionParams> from_unconstrained(
    const Eigen::VectorXd& z, const RegressionParams& theta_like,
    const TransitionParams& gamma_like) {
  if (z.size() != phi_dim(theta_like, gamma_like)) {
    throw DimensionMismatch("from_unconstrained: vector length mismatch");
  }
  RegressionParams theta = theta_like;
  TransitionParams gamma = gamma_like;
  int at = 0;
  for (int j = 0; j < theta.num_states(); ++j) {
    theta.betas.col(j) = z.segment(at, theta.num_predictors());
    at += theta.num_predictors();
  }
  for (int j = 0; j < static_cast<int>(theta.variances.size()); ++j) {
    const double floor = theta.constraint == Variance::LowerBound ? theta.lower_bound : 0.0;
    theta.variances(j) = floor + std::exp(z(at++));
  }
  const int l = gamma.num_states;
  if (l > 1) {
    const int rows = gamma.flavor == Model::IID ? 1 : l;
    Eigen::MatrixXd g(l, l);
    for (int i = 0; i < rows; ++i) {
      g.row(i) = alr_to_probs(z.segment(at, l - 1)).transpose();
      at += l - 1;
    }
    if (gamma.flavor == Model::IID) {
      for (int i = 1; i < l; ++i) g.row(i) = g.row(0);
    }
    gamma = TransitionParams::from_matrix(gamma.flavor, g);
  }
  return {theta, gamma};
}

namespace detail {

/// One perturbed starting point: quantile-bin the residuals of a noise-
/// perturbed pooled OLS fit into num_states groups, fit each group by OLS,
/// clamp variances to the constraint, gamma uniform. The perturbation acts
/// on the pooled coefficients (scaled by tilt) and pointwise on the
/// residuals; growing tilts across restarts let the binning separate
/// components that differ in slope rather than offset.
inline std::pair<RegressionParams, TransitionParams> make_start(
    const Eigen::VectorXd& y, const Eigen::MatrixXd& design,
    const FitOptions& options, std::uint64_t stream, double tilt) {
  const int m = static_cast<int>(y.size());
  const int p = static_cast<int>(design.cols());
  const int l = options.num_states;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < p) {
    throw DegenerateData("init_starts: pooled design matrix is rank-deficient");
  }
  const Eigen::VectorXd beta_pool = qr.solve(y);
  const Eigen::VectorXd resid = y - design * beta_pool;
  const double resid_sd =
      std::max(std::sqrt(resid.squaredNorm() / std::max(1, m - p)), 1e-8);

  Rng rng(derive_seed(options.seed, stream));
  Eigen::VectorXd tilted = beta_pool;
  for (int i = 0; i < p; ++i) {
    const double colscale =
        std::max(std::sqrt(design.col(i).squaredNorm() / m), 1e-8);
    tilted(i) += tilt * resid_sd * rng.normal() / colscale;
  }
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  Eigen::VectorXd keys = y - design * tilted;
  for (int t = 0; t < m; ++t) keys(t) += 0.5 * resid_sd * rng.normal();
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return keys(a) < keys(b); });

  RegressionParams theta;
  theta.constraint = options.constraint;
  theta.lower_bound = options.lower_bound;
  theta.betas.resize(p, l);
  theta.variances.resize(options.constraint == Variance::Equal ? 1 : l);

  double pooled_ssr = 0.0;
  int at = 0;
  for (int j = 0; j < l; ++j) {
    const int size = m / l + (j < m % l ? 1 : 0);
    Eigen::MatrixXd gx(size, p);
    Eigen::VectorXd gy(size);
    for (int i = 0; i < size; ++i) {
      gx.row(i) = design.row(order[at + i]);
      gy(i) = y(order[at + i]);
    }
    at += size;

    Eigen::VectorXd beta_j;
    bool ok = size >= p;
    if (ok) {
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> gqr(gx);
      ok = gqr.rank() == p;
      if (ok) beta_j = gqr.solve(gy);
    }
    if (!ok) {
      beta_j = beta_pool;
      for (int i = 0; i < p; ++i) {
        beta_j(i) += 0.25 * resid_sd * rng.normal();
      }
    }
    theta.betas.col(j) = beta_j;
    const double ssr = (gy - gx * beta_j).squaredNorm();
    pooled_ssr += ssr;
    if (options.constraint == Variance::LowerBound) {
      const double var = size > 0 ? ssr / size : resid_sd * resid_sd;
      theta.variances(j) =
          std::max(var, options.lower_bound + std::max(options.lower_bound, 1e-8));
    }
  }
  if (options.constraint == Variance::Equal) {
    theta.variances(0) = std::max(pooled_ssr / m, 1e-10);
  }

  TransitionParams gamma;
  gamma.flavor = options.model;
  gamma.num_states = l;
  gamma.gamma = Eigen::VectorXd::Constant(TransitionParams::expected_dim(options.model, l),
                                          1.0 / l);
  return {theta, gamma};
}

}  // namespace detail

/// Deterministic list of starting values, one per restart. A single-state
/// model needs (and gets) only the pooled OLS start.
inline std::vector<std::pair<RegressionParams, TransitionParams>> init_starts(
    const Eigen::VectorXd& y, const Eigen::MatrixXd& design,
    const FitOptions& options) {
  options.validate();
  if (y.size() == 0) throw InsufficientData("init_starts: empty data");
  const int count = options.num_states == 1 ? 1 : options.num_restarts;
  std::vector<std::pair<RegressionParams, TransitionParams>> starts;
  starts.reserve(count);
  for (int k = 0; k < count; ++k) {
    starts.push_back(detail::make_start(y, design, options, 1000 + k, 1.0 * k));
  }
  return starts;
}

namespace detail {

struct EmRun {
  RegressionParams theta;
  TransitionParams gamma;
  double loglik = -std::numeric_limits<double>::infinity();
  std::vector<double> trace;
  bool converged = false;
  bool failed = false;  // variance bound violated or component collapsed
  int iterations = 0;
};

/// One EM run for the IID model. The E-step computes pointwise posterior
/// weights, the M-step solves per-state weighted least squares; the mixing
/// weights update to the mean posteriors.
inline EmRun em_single(const Eigen::VectorXd& y, const Eigen::MatrixXd& design,
                       RegressionParams theta, TransitionParams gamma,
                       const FitOptions& options) {
  const int m = static_cast<int>(y.size());
  const int l = theta.num_states();
  EmRun run;

  Eigen::VectorXd lambda = stationary_distribution(gamma);
  Eigen::MatrixXd weights(m, l);
  double prev = -std::numeric_limits<double>::infinity();

  for (int it = 0; it < options.max_iterations; ++it) {
    run.iterations = it + 1;

    // E-step and current log-likelihood.
    const Eigen::MatrixXd loge = detail::log_emissions(y, design, theta);
    double ll = 0.0;
    for (int t = 0; t < m; ++t) {
      const double peak = loge.row(t).maxCoeff();
      if (!std::isfinite(peak)) {
        run.failed = true;
        return run;
      }
      double step = 0.0;
      for (int j = 0; j < l; ++j) {
        weights(t, j) = lambda(j) * std::exp(loge(t, j) - peak);
        step += weights(t, j);
      }
      if (!(step > 0.0)) {
        run.failed = true;
        return run;
      }
      weights.row(t) /= step;
      ll += std::log(step) + peak;
    }
    run.trace.push_back(ll);
    run.loglik = ll;
    if (it > 0 && ll - prev < options.tolerance * (std::fabs(prev) + 1e-12)) {
      run.converged = true;
      break;
    }
    prev = ll;

    // M-step.
    double pooled_ssr = 0.0;
    for (int j = 0; j < l; ++j) {
      const Eigen::VectorXd w = weights.col(j);
      const double wsum = w.sum();
      if (wsum < 1e-10) {  // collapsed component
        run.failed = true;
        return run;
      }
      const Eigen::MatrixXd xw = design.array().colwise() * w.array();
      Eigen::MatrixXd gram = xw.transpose() * design;
      const Eigen::VectorXd beta_j = gram.ldlt().solve(xw.transpose() * y);
      if (!beta_j.allFinite()) {
        run.failed = true;
        return run;
      }
      theta.betas.col(j) = beta_j;
      const Eigen::VectorXd resid = y - design * beta_j;
      const double wssr = (w.array() * resid.array().square()).sum();
      pooled_ssr += wssr;
      if (options.constraint == Variance::LowerBound) {
        const double var = wssr / wsum;
        if (var < options.lower_bound) {  // restart trigger
          run.failed = true;
          return run;
        }
        theta.variances(j) = var;
      }
      lambda(j) = wsum / m;
    }
    if (options.constraint == Variance::Equal) {
      const double var = pooled_ssr / m;
      if (!(var > 0.0)) {
        run.failed = true;
        return run;
      }
      theta.variances(0) = var;
    }
    if (lambda.minCoeff() < 1e-8) {
      run.failed = true;
      return run;
    }
    Eigen::MatrixXd g(l, l);
    for (int j = 0; j < l; ++j) g.col(j).setConstant(lambda(j));
    gamma = TransitionParams::from_matrix(Model::IID, g);
  }

  if (!run.converged) {
    // The loop ended on the iteration cap with one more M-step applied than
    // evaluated; refresh the likelihood so value and parameters agree.
    try {
      run.loglik = loglik_core(y, design, theta, gamma);
      run.trace.push_back(run.loglik);
    } catch (const Error&) {
      run.failed = true;
    }
  }
  run.theta = theta;
  run.gamma = gamma;
  return run;
}

/// Observed information at the fit, flagged degenerate instead of thrown.
inline void attach_fisher(const Eigen::VectorXd& y, const Eigen::MatrixXd& design,
                          FitResult& result) {
  const auto objective = [&](const Eigen::VectorXd& phi) {
    auto [theta, gamma] = unpack_phi(phi, result.theta, result.gamma);
    return loglik_core(y, design, theta, gamma);
  };
  const int d = static_cast<int>(result.phi.size());
  try {
    result.fisher = -fd_hessian(objective, result.phi);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(result.fisher);
    const double max_ev = es.eigenvalues().maxCoeff();
    const double min_ev = es.eigenvalues().minCoeff();
    result.degenerate = !(max_ev > 0.0) || min_ev < 1e-10 * max_ev;
  } catch (const Error&) {
    result.fisher = Eigen::MatrixXd::Zero(d, d);
    result.degenerate = true;
  }
}

}  // namespace detail

/// Constrained ML fit by the EM algorithm (IID model only). A run whose
/// variance update deceeds the lower bound is restarted from a fresh
/// perturbed start; the best restart by log-likelihood wins, ties broken by
/// the lower restart index.
inline FitResult fit_em(const Eigen::VectorXd& y, const Eigen::MatrixXd& design,
                        const FitOptions& options) {
  options.validate();
  if (options.model != Model::IID) {
    throw InvalidOptions("fit_em: EM is implemented for the IID model only");
  }
  const auto starts = init_starts(y, design, options);

  FitResult best;
  for (int k = 0; k < static_cast<int>(starts.size()); ++k) {
    auto [theta0, gamma0] = starts[k];
    detail::EmRun run;
    for (int attempt = 0; attempt <= 3; ++attempt) {
      run = detail::em_single(y, design, theta0, gamma0, options);
      if (!run.failed) break;
      std::tie(theta0, gamma0) = detail::make_start(
          y, design, options, 9000 + 101 * k + attempt, 1.0 * ((k + attempt) % 4));
    }
    if (run.failed || !std::isfinite(run.loglik)) continue;
    if (run.loglik > best.loglik_value) {
      best.theta = run.theta;
      best.gamma = run.gamma;
      best.loglik_value = run.loglik;
      best.converged = run.converged;
      best.restart_index = k;
      best.iterations = run.iterations;
      best.loglik_trace = run.trace;
    }
  }
  if (best.restart_index < 0) {
    throw AllRestartsFailed("fit_em: every restart violated constraints or diverged");
  }
  best.phi = pack_phi(best.theta, best.gamma);
  detail::attach_fisher(y, design, best);
  return best;
}

/// Constrained ML fit by quasi-Newton maximization over the unconstrained
/// reparametrization (both IID and HMM models).
inline FitResult fit_nlm(const Eigen::VectorXd& y, const Eigen::MatrixXd& design,
                         const FitOptions& options) {
  options.validate();
  const auto starts = init_starts(y, design, options);
  const auto& [theta_like, gamma_like] = starts.front();

  const Objective objective = [&](const Eigen::VectorXd& z) {
    auto [theta, gamma] = from_unconstrained(z, theta_like, gamma_like);
    return -detail::loglik_core(y, design, theta, gamma);
  };

  OptimOptions opt;
  opt.max_iterations = options.max_iterations;
  opt.rel_tol = options.tolerance;

  FitResult best;
  for (int k = 0; k < static_cast<int>(starts.size()); ++k) {
    Eigen::VectorXd z0 = to_unconstrained(starts[k].first, starts[k].second);
    OptimResult res;
    try {
      res = minimize_bfgs(objective, z0, opt);
    } catch (const Error&) {
      continue;
    }
    const double ll = -res.value;
    if (!std::isfinite(ll)) continue;
    if (ll > best.loglik_value) {
      auto [theta, gamma] = from_unconstrained(res.x, theta_like, gamma_like);
      best.theta = theta;
      best.gamma = gamma;
      best.loglik_value = ll;
      best.converged = res.converged;
      best.restart_index = k;
      best.iterations = res.iterations;
      best.loglik_trace.clear();
    }
  }
  if (best.restart_index < 0) {
    throw AllRestartsFailed("fit_nlm: every restart failed");
  }
  best.phi = pack_phi(best.theta, best.gamma);
  detail::attach_fisher(y, design, best);
  return best;
}

inline FitResult fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& design,
                     const FitOptions& options) {
  return options.method == Method::EM ? fit_em(y, design, options)
                                      : fit_nlm(y, design, options);
}

/// Fit on a predictor subset of a dataset. The empty subset is fit as a pure
/// mixture (constant column only), independent of the intercept flag.
inline FitResult fit(const Dataset& data, const std::vector<int>& subset,
                     const FitOptions& options) {
  return fit(data.y, design_matrix(data.x, subset, options.intercept), options);
}

/// Observed Fisher information (negative Hessian of loglik in the natural
/// coordinates), symmetrized. Throws SingularInformation for non-identified
/// fits instead of silently returning a near-singular matrix.
inline Eigen::MatrixXd observed_fisher(const Eigen::VectorXd& y,
                                       const Eigen::MatrixXd& design,
                                       const RegressionParams& theta,
                                       const TransitionParams& gamma) {
  FitResult probe;
  probe.theta = theta;
  probe.gamma = gamma;
  probe.phi = pack_phi(theta, gamma);
  detail::attach_fisher(y, design, probe);
  if (probe.degenerate) {
    throw SingularInformation("observed_fisher: information matrix is near-singular");
  }
  return probe.fisher;
}

}  // namespace icph
