#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "icph/errors.hpp"
#include "icph/rng.hpp"
#include "icph/srm.hpp"
#include "icph/types.hpp"

namespace icph {

/// Synthetic data generators. CoverageScm is the single-environment
/// two-state model used for confidence-region coverage studies; ThreeEnvScm
/// is the three-environment system with interventions on X2 and X3 whose
/// only h-invariant set is {X1, X2}; the remaining generators are its
/// robustness and extension variants.
enum class Generator {
  CoverageScm,
  ThreeEnvScm,
  HeterogeneousVariances,
  UniformNoise,
  LaplaceNoise,
  HAffectsX1Mean,
  HAffectsX1Var,
  ContinuousH,
  NonBinary,
  ExtraPredictors,
  YIntervention,
};

inline std::string to_string(Generator g) {
  switch (g) {
    case Generator::CoverageScm: return "coverage_scm";
    case Generator::ThreeEnvScm: return "three_env_scm";
    case Generator::HeterogeneousVariances: return "heterogeneous_variances";
    case Generator::UniformNoise: return "uniform_noise";
    case Generator::LaplaceNoise: return "laplace_noise";
    case Generator::HAffectsX1Mean: return "h_affects_x1_mean";
    case Generator::HAffectsX1Var: return "h_affects_x1_var";
    case Generator::ContinuousH: return "continuous_h";
    case Generator::NonBinary: return "nonbinary";
    case Generator::ExtraPredictors: return "extra_predictors";
    case Generator::YIntervention: return "y_intervention";
  }
  return "unknown";
}

inline Generator generator_from_string(const std::string& name) {
  for (Generator g : {Generator::CoverageScm, Generator::ThreeEnvScm,
                      Generator::HeterogeneousVariances, Generator::UniformNoise,
                      Generator::LaplaceNoise, Generator::HAffectsX1Mean,
                      Generator::HAffectsX1Var, Generator::ContinuousH,
                      Generator::NonBinary, Generator::ExtraPredictors,
                      Generator::YIntervention}) {
    if (to_string(g) == name) return g;
  }
  throw InvalidSpec("unknown generator: " + name);
}

struct ScmSpec {
  Generator generator = Generator::ThreeEnvScm;
  int n = 500;
  std::uint64_t seed = 0;
  std::uint64_t param_seed = 0;  // 0: draw parameters from `seed` as well;
                                 // nonzero: fix the parameter draw separately
                                 // so fresh datasets share one model
  double delta_beta = 1.5;      // between-state gap of the Y-coefficients
  int num_states = 2;           // > 2 only for NonBinary
  int extra_predictors = 0;     // ExtraPredictors count m
  double y_intervention = 0.0;  // Delta of the direct Y-intervention
  int state_block_size = 1;     // CoverageScm: consecutive draws sharing a state

  void validate() const {
    if (n < 1) throw InvalidSpec("ScmSpec: n must be >= 1");
    if (num_states < 2) throw InvalidSpec("ScmSpec: need at least two states");
    if (state_block_size < 1) throw InvalidSpec("ScmSpec: block size must be >= 1");
    if (generator == Generator::ExtraPredictors && extra_predictors < 1) {
      throw InvalidSpec("ScmSpec: extra_predictors must be >= 1");
    }
  }
};

struct SimTruth {
  std::vector<int> s_star;      // 0-based ground-truth predictor set
  std::vector<int> latent;      // latent states (0-based); empty if continuous
  Eigen::VectorXd latent_cont;  // continuous hidden variable, when applicable
  // The induced conditional model of Y | (X, H), for coverage / GMEP use.
  RegressionParams theta;       // packing: per state [slope..., intercept]
  Eigen::VectorXd lambda;       // stationary mixing weights (first environment)
  double mu_x = 0.0;            // CoverageScm predictor law
  double sigma_x = 1.0;
  std::map<std::string, double> params;  // drawn structural parameters
};

struct Simulation {
  Dataset data;
  SimTruth truth;
};

namespace detail {

inline double draw_mu(Rng& rng) { return rng.uniform(-0.2, 0.2); }
inline double draw_var(Rng& rng) { return rng.uniform(0.1, 0.3); }
inline double draw_beta(Rng& rng) {
  const double magnitude = rng.uniform(0.5, 1.5);
  return rng.bernoulli(0.5) ? magnitude : -magnitude;
}

/// Change points with minimum environment size max(20, n/10).
inline std::pair<int, int> draw_change_points(Rng& rng, int n) {
  const int floor = std::max(20, n / 10);
  if (3 * floor > n) throw InvalidSpec("three_env_scm: n too small for three environments");
  for (int attempt = 0; attempt < 10000; ++attempt) {
    int t1 = 1 + static_cast<int>(rng.uniform_int(n - 1));
    int t2 = 1 + static_cast<int>(rng.uniform_int(n - 1));
    if (t1 == t2) continue;
    if (t1 > t2) std::swap(t1, t2);
    if (t1 >= floor && t2 - t1 >= floor && n - t2 >= floor) return {t1, t2};
  }
  // Deterministic fallback: equal thirds.
  return {n / 3, 2 * n / 3};
}

inline Eigen::VectorXd draw_mixing(Rng& rng, int l) {
  Eigen::VectorXd lambda(l);
  if (l == 2) {
    lambda(0) = rng.uniform(0.3, 0.7);
    lambda(1) = 1.0 - lambda(0);
  } else {
    for (int j = 0; j < l; ++j) lambda(j) = rng.uniform(0.1, 1.0 / (l + 1));
    lambda /= lambda.sum();
  }
  return lambda;
}

}  // namespace detail

/// Seed-deterministic draw from the requested SCM. Structural parameters
/// come from their own stream so a fixed param_seed pins the model while
/// `seed` varies the sample.
inline Simulation simulate(const ScmSpec& spec) {
  spec.validate();
  Rng prng(derive_seed(spec.param_seed != 0 ? spec.param_seed : spec.seed, 0x7a7a));
  Rng rng(derive_seed(spec.seed, 0x5c3a));
  Simulation sim;

  if (spec.generator == Generator::CoverageScm) {
    const int l = 2;
    const double mu_x = prng.uniform(-1.0, 1.0);
    const double mu_y = prng.uniform(-1.0, 1.0);
    const double beta1 = prng.uniform(-1.0, 1.0);
    const double beta2 = prng.uniform(-1.0, 1.0);
    const double sigma_x = prng.uniform(0.1, 1.0);
    const double sigma_y = prng.uniform(0.1, 0.5);
    const double lambda1 = prng.uniform(0.3, 0.7);

    sim.truth.s_star = {0};
    sim.truth.mu_x = mu_x;
    sim.truth.sigma_x = sigma_x;
    sim.truth.lambda.resize(2);
    sim.truth.lambda << lambda1, 1.0 - lambda1;
    sim.truth.theta.constraint = Variance::Equal;
    sim.truth.theta.betas.resize(2, l);
    sim.truth.theta.betas << beta1, beta2, mu_y, mu_y;
    sim.truth.theta.variances.resize(1);
    sim.truth.theta.variances << sigma_y * sigma_y;
    sim.truth.params = {{"mu_x", mu_x},   {"mu_y", mu_y},       {"beta1", beta1},
                        {"beta2", beta2}, {"sigma_x", sigma_x}, {"sigma_y", sigma_y},
                        {"lambda1", lambda1}};

    sim.data.y.resize(spec.n);
    sim.data.x.resize(spec.n, 1);
    sim.data.env.assign(spec.n, 1);
    sim.truth.latent.resize(spec.n);
    int state = 0;
    for (int t = 0; t < spec.n; ++t) {
      if (t % spec.state_block_size == 0) {
        state = rng.bernoulli(lambda1) ? 0 : 1;
      }
      sim.truth.latent[t] = state;
      const double x = mu_x + sigma_x * rng.normal();
      const double beta = state == 0 ? beta1 : beta2;
      sim.data.x(t, 0) = x;
      sim.data.y(t) = mu_y + beta * x + sigma_y * rng.normal();
    }
    return sim;
  }

  // All remaining generators derive from the three-environment system.
  const Generator kind = spec.generator;
  const int l = kind == Generator::NonBinary ? spec.num_states : 2;
  const int n = spec.n;

  // Structural parameters.
  const double mu1 = detail::draw_mu(prng);
  const double mu2 = detail::draw_mu(prng);
  const double mu3 = detail::draw_mu(prng);
  const double var1 = detail::draw_var(prng);
  const double var2 = detail::draw_var(prng);
  const double var3 = detail::draw_var(prng);
  const double beta21 = detail::draw_beta(prng);
  const double beta3y = detail::draw_beta(prng);

  Eigen::VectorXd mu_y(l), beta1_states(l), beta2_states(l), sigma_y(l);
  const double beta11 = detail::draw_beta(prng);
  const double beta21y = detail::draw_beta(prng);
  const double var_y_shared = detail::draw_var(prng);
  for (int j = 0; j < l; ++j) {
    mu_y(j) = detail::draw_mu(prng);
    beta1_states(j) = beta11 + j * std::copysign(spec.delta_beta, beta11);
    beta2_states(j) = beta21y + j * std::copysign(spec.delta_beta, beta21y);
    sigma_y(j) = std::sqrt(kind == Generator::HeterogeneousVariances
                               ? detail::draw_var(prng)
                               : var_y_shared);
  }

  // State-dependent X1 for the direct-effect variants.
  Eigen::VectorXd mu1_states = Eigen::VectorXd::Constant(l, mu1);
  Eigen::VectorXd sd1_states = Eigen::VectorXd::Constant(l, std::sqrt(var1));
  if (kind == Generator::HAffectsX1Mean) {
    for (int j = 0; j < l; ++j) mu1_states(j) = prng.uniform(-1.0, 1.0);
  }
  if (kind == Generator::HAffectsX1Var) {
    for (int j = 0; j < l; ++j) sd1_states(j) = std::sqrt(prng.uniform(0.1, 1.0));
  }

  const Eigen::VectorXd lambda_e1 = detail::draw_mixing(prng, l);
  const Eigen::VectorXd lambda_e2 = detail::draw_mixing(prng, l);
  const Eigen::VectorXd lambda_e3 = detail::draw_mixing(prng, l);
  const double x2_shift_mean = prng.uniform(1.0, 1.5);
  const double x2_shift_var = prng.uniform(1.0, 1.5);
  const double x3_mean = prng.uniform(-1.0, -0.5);

  const int num_z = kind == Generator::ExtraPredictors ? spec.extra_predictors : 0;
  Eigen::VectorXd z_alpha(num_z);
  for (int j = 0; j < num_z; ++j) z_alpha(j) = prng.uniform(-1.0, 1.0);

  // Change points are realization-specific, not model parameters.
  const auto [t1, t2] = detail::draw_change_points(rng, n);

  sim.data.y.resize(n);
  sim.data.x.resize(n, 3 + num_z);
  sim.data.env.resize(n);
  sim.truth.s_star = {0, 1};
  if (kind == Generator::ContinuousH) {
    sim.truth.latent_cont.resize(n);
  } else {
    sim.truth.latent.resize(n);
  }

  for (int t = 0; t < n; ++t) {
    const int env = t < t1 ? 1 : (t < t2 ? 2 : 3);
    sim.data.env[t] = env;
    const Eigen::VectorXd& lambda =
        env == 1 ? lambda_e1 : (env == 2 ? lambda_e2 : lambda_e3);

    int h = 0;
    double h_cont = 0.0;
    if (kind == Generator::ContinuousH) {
      h_cont = rng.normal();  // distribution fixed across environments
      sim.truth.latent_cont(t) = h_cont;
    } else {
      h = rng.categorical(lambda);
      sim.truth.latent[t] = h;
    }

    const double x1 = mu1_states(h) + sd1_states(h) * rng.normal();
    double x2;
    if (env == 2) {
      x2 = beta21 * x1 + x2_shift_mean + std::sqrt(x2_shift_var) * rng.normal();
    } else {
      x2 = beta21 * x1 + mu2 + std::sqrt(var2) * rng.normal();
    }

    double noise_y;
    if (kind == Generator::UniformNoise) {
      noise_y = rng.uniform(-std::sqrt(3.0), std::sqrt(3.0));  // unit variance
    } else if (kind == Generator::LaplaceNoise) {
      noise_y = rng.laplace(1.0 / std::sqrt(2.0));  // unit variance
    } else {
      noise_y = rng.normal();
    }

    double y;
    if (kind == Generator::ContinuousH) {
      y = (mu_y(0) + beta1_states(0) * x1 + beta2_states(0) * x2) * h_cont +
          sigma_y(0) * noise_y;
    } else {
      double b1 = beta1_states(h);
      double b2 = beta2_states(h);
      if (kind == Generator::YIntervention && h == 0) {
        const double delta = env == 2 ? spec.y_intervention
                                      : (env == 3 ? -spec.y_intervention : 0.0);
        b1 += delta;
        b2 += delta;
      }
      y = mu_y(h) + b1 * x1 + b2 * x2 + sigma_y(h) * noise_y;
    }

    double x3;
    if (env == 3) {
      x3 = x3_mean + std::sqrt(var3) * rng.normal();
    } else {
      x3 = beta3y * y + mu3 + std::sqrt(var3) * rng.normal();
    }

    sim.data.x(t, 0) = x1;
    sim.data.x(t, 1) = x2;
    sim.data.x(t, 2) = x3;
    for (int j = 0; j < num_z; ++j) {
      sim.data.x(t, 3 + j) = z_alpha(j) * x3 + rng.normal();
    }
    sim.data.y(t) = y;
  }

  sim.truth.params = {{"mu1", mu1},     {"mu2", mu2},   {"mu3", mu3},
                      {"var1", var1},   {"var2", var2}, {"var3", var3},
                      {"beta21", beta21}, {"beta3y", beta3y},
                      {"t1", static_cast<double>(t1)},
                      {"t2", static_cast<double>(t2)},
                      {"lambda1_e1", lambda_e1(0)}};

  // Conditional model of Y | (X1, X2, H) in environment 1, for diagnostics.
  sim.truth.lambda = lambda_e1;
  sim.truth.theta.constraint = kind == Generator::HeterogeneousVariances
                                   ? Variance::LowerBound
                                   : Variance::Equal;
  sim.truth.theta.betas.resize(3, l);
  for (int j = 0; j < l; ++j) {
    sim.truth.theta.betas(0, j) = beta1_states(j);
    sim.truth.theta.betas(1, j) = beta2_states(j);
    sim.truth.theta.betas(2, j) = mu_y(j);
  }
  if (sim.truth.theta.constraint == Variance::Equal) {
    sim.truth.theta.variances.resize(1);
    sim.truth.theta.variances(0) = sigma_y(0) * sigma_y(0);
  } else {
    sim.truth.theta.variances = sigma_y.array().square();
  }
  return sim;
}

// --- GMEP: geometric mean of expected posterior probabilities ---

struct GmepModel {
  RegressionParams theta;  // p = 2 with [slope, intercept] columns
  Eigen::VectorXd lambda;
  double mu_x = 0.0;
  double sigma_x = 1.0;
};

inline GmepModel gmep_model_from_truth(const SimTruth& truth) {
  GmepModel model;
  model.theta = truth.theta;
  model.lambda = truth.lambda;
  model.mu_x = truth.mu_x;
  model.sigma_x = truth.sigma_x;
  return model;
}

struct GmepResult {
  double value = 0.0;
  double error = 0.0;  // quadrature tolerance or Monte-Carlo standard error
  bool monte_carlo = false;
};

namespace detail {

inline double adaptive_simpson(const std::function<double(double)>& f, double a,
                               double b, double fa, double fm, double fb,
                               double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  // The noise floor keeps the recursion from chasing round-off (or, in
  // nested use, the inner integral's own tolerance).
  if (std::fabs(delta) <= 15.0 * tol ||
      std::fabs(delta) <= 1e-10 * (std::fabs(left) + std::fabs(right) + 1.0)) {
    return left + right + delta / 15.0;
  }
  if (depth <= 0) throw IntegrationFailure("adaptive Simpson: depth exhausted");
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

/// Adaptive Simpson over [a, b], pre-split into panels so an integrand whose
/// mass sits away from the midpoint cannot fool the first error estimate.
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol) {
  constexpr int panels = 8;
  double total = 0.0;
  for (int k = 0; k < panels; ++k) {
    const double lo = a + (b - a) * k / panels;
    const double hi = a + (b - a) * (k + 1) / panels;
    const double flo = f(lo);
    const double fhi = f(hi);
    const double fmid = f(0.5 * (lo + hi));
    const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
    total += adaptive_simpson(f, lo, hi, flo, fmid, fhi, whole, tol / panels, 36);
  }
  return total;
}

inline double gmep_posterior(const GmepModel& model, int j, double x, double y) {
  const int l = static_cast<int>(model.lambda.size());
  double peak = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd logw(l);
  for (int k = 0; k < l; ++k) {
    const double mean = model.theta.betas(0, k) * x + model.theta.betas(1, k);
    const double var = model.theta.variance(k);
    logw(k) = std::log(model.lambda(k)) -
              0.5 * (std::log(var) + (y - mean) * (y - mean) / var);
    peak = std::max(peak, logw(k));
  }
  double denom = 0.0;
  for (int k = 0; k < l; ++k) denom += std::exp(logw(k) - peak);
  return std::exp(logw(j) - peak) / denom;
}

}  // namespace detail

/// GMEP of a one-predictor switching regression with Gaussian X, by nested
/// adaptive quadrature (absolute accuracy ~1e-3). Models with more than one
/// free predictor fall back to Monte-Carlo with a reported standard error.
inline GmepResult gmep(const GmepModel& model, std::uint64_t mc_seed = 1,
                       int mc_samples = 100000) {
  const int l = static_cast<int>(model.lambda.size());
  if (l < 2) throw InvalidSpec("gmep: need at least two states");
  if (model.theta.num_states() != l) {
    throw DimensionMismatch("gmep: lambda and theta disagree on state count");
  }

  GmepResult result;
  if (model.theta.num_predictors() == 2) {
    // Standardized coordinates: x = mu_x + sigma_x u, y = mean_j(x) + sd_j v.
    constexpr double span = 8.5;
    constexpr double inv_sqrt2pi = 0.3989422804014327;
    const double outer_tol = 2e-4;
    const double inner_tol = 1e-8;  // far below outer_tol, so the inner
                                    // error is invisible to the outer rule
    double product = 1.0;
    for (int j = 0; j < l; ++j) {
      const double sd_j = std::sqrt(model.theta.variance(j));
      const auto outer = [&](double u) {
        const double x = model.mu_x + model.sigma_x * u;
        const double mean_j =
            model.theta.betas(0, j) * x + model.theta.betas(1, j);
        const auto inner = [&](double v) {
          const double y = mean_j + sd_j * v;
          return detail::gmep_posterior(model, j, x, y) * inv_sqrt2pi *
                 std::exp(-0.5 * v * v);
        };
        return detail::integrate(inner, -span, span, inner_tol) * inv_sqrt2pi *
               std::exp(-0.5 * u * u);
      };
      const double factor = detail::integrate(outer, -span, span, outer_tol);
      product *= std::min(1.0, std::max(factor, 0.0));
    }
    result.value = std::pow(product, 1.0 / l);
    result.error = 1e-3;
    return result;
  }

  // Monte-Carlo fallback for higher-dimensional predictor laws.
  const int p = model.theta.num_predictors();
  Rng rng(mc_seed);
  double log_product = 0.0;
  double rel_var = 0.0;
  for (int j = 0; j < l; ++j) {
    double sum = 0.0, sumsq = 0.0;
    for (int s = 0; s < mc_samples; ++s) {
      Eigen::VectorXd x(p);
      for (int i = 0; i + 1 < p; ++i) x(i) = model.mu_x + model.sigma_x * rng.normal();
      x(p - 1) = 1.0;
      const double mean = x.dot(model.theta.betas.col(j));
      const double y = mean + std::sqrt(model.theta.variance(j)) * rng.normal();
      double peak = -std::numeric_limits<double>::infinity();
      Eigen::VectorXd logw(l);
      for (int k = 0; k < l; ++k) {
        const double mk = x.dot(model.theta.betas.col(k));
        const double vk = model.theta.variance(k);
        logw(k) = std::log(model.lambda(k)) -
                  0.5 * (std::log(vk) + (y - mk) * (y - mk) / vk);
        peak = std::max(peak, logw(k));
      }
      double denom = 0.0;
      for (int k = 0; k < l; ++k) denom += std::exp(logw(k) - peak);
      const double post = std::exp(logw(j) - peak) / denom;
      sum += post;
      sumsq += post * post;
    }
    const double mean = sum / mc_samples;
    const double var = std::max(sumsq / mc_samples - mean * mean, 0.0);
    log_product += std::log(std::max(mean, 1e-12));
    rel_var += var / (mc_samples * mean * mean);
  }
  result.value = std::exp(log_product / l);
  result.error = result.value * std::sqrt(rel_var) / l;
  result.monte_carlo = true;
  return result;
}

// --- posterior decoding ---

/// Per-point (or per-group) latent-state assignment by maximal (summed)
/// posterior probability; ties break toward the lower label.
inline std::vector<int> reconstruct_states(const Eigen::MatrixXd& posteriors,
                                           const std::vector<int>& grouping = {}) {
  const int m = static_cast<int>(posteriors.rows());
  const int l = static_cast<int>(posteriors.cols());
  std::vector<int> labels(m, 0);
  if (grouping.empty()) {
    for (int t = 0; t < m; ++t) {
      int arg = 0;
      for (int j = 1; j < l; ++j) {
        if (posteriors(t, j) > posteriors(t, arg)) arg = j;
      }
      labels[t] = arg;
    }
    return labels;
  }
  if (static_cast<int>(grouping.size()) != m) {
    throw DimensionMismatch("reconstruct_states: grouping length mismatch");
  }
  int num_groups = 0;
  for (int g : grouping) num_groups = std::max(num_groups, g + 1);
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(num_groups, l);
  for (int t = 0; t < m; ++t) sums.row(grouping[t]) += posteriors.row(t);
  std::vector<int> group_label(num_groups, 0);
  for (int g = 0; g < num_groups; ++g) {
    int arg = 0;
    for (int j = 1; j < l; ++j) {
      if (sums(g, j) > sums(g, arg)) arg = j;
    }
    group_label[g] = arg;
  }
  for (int t = 0; t < m; ++t) labels[t] = group_label[grouping[t]];
  return labels;
}

}  // namespace icph
