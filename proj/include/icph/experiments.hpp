#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "icph/chi2.hpp"
#include "icph/discovery.hpp"
#include "icph/errors.hpp"
#include "icph/parallel.hpp"
#include "icph/regions.hpp"
#include "icph/scm.hpp"

namespace icph {

/// Wide-format tabular report; cells are pre-formatted so that emission to
/// CSV or JSON is byte-stable.
struct Report {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

inline std::string format_int(long v) { return std::to_string(v); }

/// FNV-1a over the canonical config string.
inline std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

/// 1-based display form of a predictor subset, e.g. "{1,2}".
inline std::string subset_label(const std::vector<int>& subset) {
  std::string out = "{";
  for (std::size_t i = 0; i < subset.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(subset[i] + 1);
  }
  return out + "}";
}

/// GMEP estimated from an emitted sample and its latent path: the average
/// posterior of the true state within each state's draws. Used for report
/// columns where the predictor law is multivariate.
inline double gmep_from_sample(const Simulation& sim) {
  if (sim.truth.latent.empty()) return std::numeric_limits<double>::quiet_NaN();
  const int l = sim.truth.theta.num_states();
  const int n = sim.data.num_rows();
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(l);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(l);
  for (int t = 0; t < n; ++t) {
    const int h = sim.truth.latent[t];
    double peak = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd logw(l);
    for (int k = 0; k < l; ++k) {
      double mean = sim.truth.theta.betas(sim.truth.theta.num_predictors() - 1, k);
      for (int i = 0; i + 1 < sim.truth.theta.num_predictors(); ++i) {
        mean += sim.truth.theta.betas(i, k) * sim.data.x(t, i);
      }
      const double var = sim.truth.theta.variance(k);
      const double r = sim.data.y(t) - mean;
      logw(k) = std::log(std::max(sim.truth.lambda(k), 1e-300)) -
                0.5 * (std::log(var) + r * r / var);
      peak = std::max(peak, logw(k));
    }
    double denom = 0.0;
    for (int k = 0; k < l; ++k) denom += std::exp(logw(k) - peak);
    sums(h) += std::exp(logw(h) - peak) / denom;
    counts(h) += 1.0;
  }
  double logprod = 0.0;
  for (int k = 0; k < l; ++k) {
    if (counts(k) == 0.0) return std::numeric_limits<double>::quiet_NaN();
    logprod += std::log(std::max(sums(k) / counts(k), 1e-300));
  }
  return std::exp(logprod / l);
}

}  // namespace detail

struct ExperimentConfig {
  std::string kind = "level";  // coverage_vs_gmep | level | power | robustness
                               // | nonbinary | many_predictors | h_violation
  int reps = 100;
  std::vector<int> sample_sizes = {100, 300, 500};
  std::vector<double> delta_betas = {0.5, 1.5};
  std::vector<int> state_counts = {2, 3};            // nonbinary true degrees
  std::vector<int> degree_set = {2, 3, 4, 5};        // nonbinary test degrees
  std::vector<int> extra_predictor_counts = {100};   // many_predictors
  std::vector<double> interventions = {0.0, 0.25, 0.5};  // h_violation deltas
  int screening_k = 5;      // many_predictors
  int param_draws = 10;     // coverage: parameter settings per band
  double gmep_low = 0.0;    // coverage: admissible GMEP band
  double gmep_high = 1.0;
  DiscoveryOptions discovery;  // base options; per-cell fields are overridden
  std::uint64_t seed = 0;
  int threads = 1;

  std::string canonical() const {
    std::string s = kind + "|reps=" + std::to_string(reps) + "|n=";
    for (int n : sample_sizes) s += std::to_string(n) + ",";
    s += "|db=";
    for (double d : delta_betas) s += detail::format_double(d) + ",";
    s += "|l=";
    for (int l : state_counts) s += std::to_string(l) + ",";
    s += "|K=";
    for (int k : degree_set) s += std::to_string(k) + ",";
    s += "|m=";
    for (int m : extra_predictor_counts) s += std::to_string(m) + ",";
    s += "|iv=";
    for (double v : interventions) s += detail::format_double(v) + ",";
    s += "|sk=" + std::to_string(screening_k);
    s += "|pd=" + std::to_string(param_draws);
    s += "|band=" + detail::format_double(gmep_low) + ":" +
         detail::format_double(gmep_high);
    s += "|alpha=" + detail::format_double(discovery.alpha);
    s += "|constraint=" + to_string(discovery.fit.constraint);
    s += "|model=" + to_string(discovery.fit.model);
    s += "|method=" + to_string(discovery.fit.method);
    s += "|seed=" + std::to_string(seed);
    return s;
  }
};

namespace detail {

struct ThreeEnvCell {
  Generator generator = Generator::ThreeEnvScm;
  int n = 500;
  double delta_beta = 1.5;
  int l_true = 2;
  std::vector<int> degrees;  // empty: single test at the configured degree
  int extra_predictors = 0;
  double intervention = 0.0;
  int screening_k = 0;
  std::string label;
};

struct ThreeEnvOutcome {
  int reps = 0;
  int false_discoveries = 0;   // S_hat not subset of S_star
  int shat_exact = 0;          // S_hat == S_star
  int reject_sstar = 0;        // p_{S*} <= alpha (when S* was tested)
  int sstar_tested = 0;
  int degenerate = 0;          // any degenerate subset test in the rep
  int screening_covered = 0;   // S* inside the screened set
  Eigen::Vector3d reject_x = Eigen::Vector3d::Zero();  // X1..X3 in S_hat
  std::map<std::string, int> shat_histogram;
  double gmep_sum = 0.0;
  int gmep_count = 0;
  double runtime_seconds = 0.0;
};

inline ThreeEnvOutcome run_three_env_cell(const ExperimentConfig& config,
                                          const ThreeEnvCell& cell,
                                          std::uint64_t cell_stream) {
  const auto started = std::chrono::steady_clock::now();
  ThreeEnvOutcome outcome;
  outcome.reps = config.reps;

  struct RepRecord {
    int fdr = 0, exact = 0, reject_sstar = 0, sstar_tested = 0, degenerate = 0;
    int covered = 0;
    int in_shat[3] = {0, 0, 0};
    std::string shat;
    double gmep = std::numeric_limits<double>::quiet_NaN();
  };
  std::vector<RepRecord> records(config.reps);

  parallel_for(0, config.reps, config.threads, [&](int rep) {
    RepRecord& record = records[rep];
    ScmSpec spec;
    spec.generator = cell.generator;
    spec.n = cell.n;
    spec.delta_beta = cell.delta_beta;
    spec.num_states = cell.l_true;
    spec.extra_predictors = cell.extra_predictors;
    spec.y_intervention = cell.intervention;
    spec.seed = derive_seed(config.seed, cell_stream * 1000003ULL + rep);
    const Simulation sim = simulate(spec);

    DiscoveryOptions options = config.discovery;
    options.threads = 1;
    options.alpha = config.discovery.alpha;
    options.degrees = cell.degrees;
    options.screening_k = cell.screening_k;
    options.fit.seed = derive_seed(config.seed, cell_stream * 999983ULL + rep);
    const DiscoveryResult result = discover(sim.data, options);

    record.fdr = std::includes(sim.truth.s_star.begin(), sim.truth.s_star.end(),
                               result.s_hat.begin(), result.s_hat.end())
                     ? 0
                     : 1;
    std::vector<int> sorted_star = sim.truth.s_star;
    std::sort(sorted_star.begin(), sorted_star.end());
    record.exact = result.s_hat == sorted_star ? 1 : 0;
    for (int j : result.s_hat) {
      if (j < 3) record.in_shat[j] = 1;
    }
    record.shat = subset_label(result.s_hat);
    for (const SubsetResult& sr : result.set_pvalues) {
      record.degenerate |= sr.degenerate ? 1 : 0;
      if (sr.subset == sorted_star) {
        record.sstar_tested = 1;
        record.reject_sstar = sr.p_value <= options.alpha ? 1 : 0;
      }
    }
    record.covered = std::includes(result.screened.begin(), result.screened.end(),
                                   sorted_star.begin(), sorted_star.end())
                         ? 1
                         : 0;
    if (rep < 10) record.gmep = gmep_from_sample(sim);
  });

  for (const auto& record : records) {
    outcome.false_discoveries += record.fdr;
    outcome.shat_exact += record.exact;
    outcome.reject_sstar += record.reject_sstar;
    outcome.sstar_tested += record.sstar_tested;
    outcome.degenerate += record.degenerate;
    outcome.screening_covered += record.covered;
    for (int j = 0; j < 3; ++j) outcome.reject_x(j) += record.in_shat[j];
    ++outcome.shat_histogram[record.shat];
    if (std::isfinite(record.gmep)) {
      outcome.gmep_sum += record.gmep;
      ++outcome.gmep_count;
    }
  }
  outcome.reject_x /= config.reps;
  outcome.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
          .count();
  return outcome;
}

inline std::string histogram_string(const std::map<std::string, int>& hist) {
  std::vector<std::pair<std::string, int>> items(hist.begin(), hist.end());
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::string out;
  for (const auto& [label, count] : items) {
    if (!out.empty()) out += ";";
    out += label + ":" + std::to_string(count);
  }
  return out;
}

inline std::string modal_shat(const std::map<std::string, int>& hist) {
  std::string best;
  int count = -1;
  for (const auto& [label, c] : hist) {
    if (c > count) {
      count = c;
      best = label;
    }
  }
  return best;
}

}  // namespace detail

// --- coverage experiment (adjusted confidence regions vs GMEP) ---

struct CoverageCellResult {
  std::uint64_t param_seed = 0;
  double gmep = 0.0;
  int n = 0;
  int reps = 0;
  int covered = 0;
  int degenerate = 0;
  double mean_pvalue = 0.0;
};

/// Coverage of 95% permutation-adjusted regions for one drawn parameter
/// setting of the single-predictor two-state model, across `reps` fresh
/// datasets of each requested size.
inline CoverageCellResult coverage_cell(std::uint64_t param_seed, int n, int reps,
                                        const FitOptions& fit_base, double alpha,
                                        std::uint64_t seed, int threads) {
  CoverageCellResult cell;
  cell.param_seed = param_seed;
  cell.n = n;
  cell.reps = reps;

  ScmSpec probe;
  probe.generator = Generator::CoverageScm;
  probe.n = 2;
  probe.seed = param_seed;
  probe.param_seed = param_seed;
  const Simulation model = simulate(probe);
  cell.gmep = gmep(gmep_model_from_truth(model.truth)).value;
  const Eigen::VectorXd theta0 = pack_theta(model.truth.theta);

  std::vector<int> covered(reps, 0), degenerate(reps, 0);
  std::vector<double> pvalues(reps, 0.0);
  parallel_for(0, reps, threads, [&](int rep) {
    ScmSpec spec = probe;
    spec.n = n;
    spec.seed = derive_seed(seed, 0xabcdef + rep);
    const Simulation sim = simulate(spec);
    FitOptions options = fit_base;
    options.num_states = 2;
    options.intercept = true;
    options.seed = derive_seed(seed, 0x123457 + rep);
    try {
      const Eigen::MatrixXd design = design_matrix(sim.data.x, {0}, true);
      const FitResult fit = icph::fit(sim.data.y, design, options);
      const ConfidenceRegion region = region_from_fit(fit, true);
      const double m0 = region.mahalanobis(theta0);
      pvalues[rep] = 1.0 - chi2_cdf(m0, region.dim);
      covered[rep] = m0 <= chi2_quantile(1.0 - alpha, region.dim) ? 1 : 0;
    } catch (const Error&) {
      degenerate[rep] = 1;  // counts as non-coverage
    }
  });
  for (int rep = 0; rep < reps; ++rep) {
    cell.covered += covered[rep];
    cell.degenerate += degenerate[rep];
    cell.mean_pvalue += pvalues[rep];
  }
  cell.mean_pvalue /= reps;
  return cell;
}

/// Parameter settings of the coverage model whose GMEP lies in [low, high]:
/// seeds are probed in a deterministic sequence until `count` models match.
inline std::vector<std::uint64_t> find_coverage_models(std::uint64_t seed, int count,
                                                       double low, double high,
                                                       int max_probes = 4000) {
  std::vector<std::uint64_t> out;
  for (int probe = 0; probe < max_probes && static_cast<int>(out.size()) < count;
       ++probe) {
    const std::uint64_t param_seed = derive_seed(seed, 0x9e3779b9ULL + probe);
    ScmSpec spec;
    spec.generator = Generator::CoverageScm;
    spec.n = 2;
    spec.seed = param_seed;
    spec.param_seed = param_seed;
    const Simulation sim = simulate(spec);
    const double g = gmep(gmep_model_from_truth(sim.truth)).value;
    if (g >= low && g <= high) out.push_back(param_seed);
  }
  if (static_cast<int>(out.size()) < count) {
    throw InvalidSpec("find_coverage_models: GMEP band too narrow for the prior");
  }
  return out;
}

/// Monte-Carlo experiment harness. Returns one row per grid cell with
/// rejection rates, false-discovery counts, S_hat composition histograms,
/// seeds, a config hash and runtimes.
inline Report run_experiment(const ExperimentConfig& config) {
  const std::uint64_t hash = detail::fnv1a(config.canonical());
  Report report;

  if (config.kind == "coverage_vs_gmep") {
    report.columns = {"kind",     "param_seed", "gmep",      "n",
                      "reps",     "coverage",   "mean_pvalue", "degenerate",
                      "seed",     "config_hash", "runtime_s"};
    const auto params = find_coverage_models(config.seed, config.param_draws,
                                             config.gmep_low, config.gmep_high);
    for (std::size_t i = 0; i < params.size(); ++i) {
      for (int n : config.sample_sizes) {
        const auto started = std::chrono::steady_clock::now();
        const CoverageCellResult cell =
            coverage_cell(params[i], n, config.reps, config.discovery.fit,
                          config.discovery.alpha,
                          derive_seed(config.seed, 7700 + 131 * i + n),
                          config.threads);
        const double runtime =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                .count();
        report.rows.push_back(
            {config.kind, std::to_string(cell.param_seed),
             detail::format_double(cell.gmep), detail::format_int(n),
             detail::format_int(config.reps),
             detail::format_double(static_cast<double>(cell.covered) / config.reps),
             detail::format_double(cell.mean_pvalue),
             detail::format_int(cell.degenerate), std::to_string(config.seed),
             std::to_string(hash), detail::format_double(runtime)});
      }
    }
    return report;
  }

  // The three-environment family.
  std::vector<detail::ThreeEnvCell> cells;
  if (config.kind == "level" || config.kind == "power") {
    for (int n : config.sample_sizes) {
      for (double db : config.delta_betas) {
        detail::ThreeEnvCell cell;
        cell.generator = Generator::ThreeEnvScm;
        cell.n = n;
        cell.delta_beta = db;
        cell.label = "n=" + std::to_string(n) + ",db=" + detail::format_double(db);
        cells.push_back(cell);
      }
    }
  } else if (config.kind == "robustness") {
    for (Generator g : {Generator::HeterogeneousVariances, Generator::UniformNoise,
                        Generator::LaplaceNoise, Generator::HAffectsX1Mean,
                        Generator::HAffectsX1Var, Generator::ContinuousH}) {
      for (int n : config.sample_sizes) {
        detail::ThreeEnvCell cell;
        cell.generator = g;
        cell.n = n;
        cell.delta_beta = config.delta_betas.back();
        cell.label = to_string(g) + ",n=" + std::to_string(n);
        cells.push_back(cell);
      }
    }
  } else if (config.kind == "nonbinary") {
    for (int l : config.state_counts) {
      detail::ThreeEnvCell cell;
      cell.generator = Generator::NonBinary;
      cell.n = config.sample_sizes.back();
      cell.delta_beta = config.delta_betas.back();
      cell.l_true = l;
      cell.degrees = config.degree_set;
      cell.label = "l=" + std::to_string(l) + ",K={2..}";
      cells.push_back(cell);
    }
  } else if (config.kind == "many_predictors") {
    for (int extra : config.extra_predictor_counts) {
      detail::ThreeEnvCell cell;
      cell.generator = Generator::ExtraPredictors;
      cell.n = config.sample_sizes.back();
      cell.delta_beta = config.delta_betas.back();
      cell.extra_predictors = extra;
      cell.screening_k = config.screening_k;
      cell.label = "extra=" + std::to_string(extra);
      cells.push_back(cell);
    }
  } else if (config.kind == "h_violation") {
    for (double delta : config.interventions) {
      detail::ThreeEnvCell cell;
      cell.generator = Generator::YIntervention;
      cell.n = config.sample_sizes.back();
      cell.delta_beta = config.delta_betas.back();
      cell.intervention = delta;
      cell.label = "delta=" + detail::format_double(delta);
      cells.push_back(cell);
    }
  } else {
    throw InvalidSpec("run_experiment: unknown kind '" + config.kind + "'");
  }

  report.columns = {"kind",          "cell",        "generator",
                    "n",             "delta_beta",  "l_true",
                    "reps",          "fdr",         "shat_exact_rate",
                    "reject_x1",     "reject_x2",   "reject_x3",
                    "reject_sstar",  "sstar_tested", "screening_cover",
                    "degenerate",    "mean_gmep",   "modal_shat",
                    "shat_histogram", "seed",       "config_hash",
                    "runtime_s"};
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& cell = cells[i];
    const auto outcome = detail::run_three_env_cell(config, cell, 31 + i);
    report.rows.push_back(
        {config.kind, cell.label, to_string(cell.generator),
         detail::format_int(cell.n), detail::format_double(cell.delta_beta),
         detail::format_int(cell.l_true), detail::format_int(outcome.reps),
         detail::format_double(static_cast<double>(outcome.false_discoveries) /
                               outcome.reps),
         detail::format_double(static_cast<double>(outcome.shat_exact) /
                               outcome.reps),
         detail::format_double(outcome.reject_x(0)),
         detail::format_double(outcome.reject_x(1)),
         detail::format_double(outcome.reject_x(2)),
         detail::format_double(outcome.sstar_tested > 0
                                   ? static_cast<double>(outcome.reject_sstar) /
                                         outcome.sstar_tested
                                   : std::numeric_limits<double>::quiet_NaN()),
         detail::format_int(outcome.sstar_tested),
         detail::format_double(static_cast<double>(outcome.screening_covered) /
                               outcome.reps),
         detail::format_int(outcome.degenerate),
         detail::format_double(outcome.gmep_count > 0
                                   ? outcome.gmep_sum / outcome.gmep_count
                                   : std::numeric_limits<double>::quiet_NaN()),
         detail::modal_shat(outcome.shat_histogram),
         detail::histogram_string(outcome.shat_histogram),
         std::to_string(config.seed), std::to_string(hash),
         detail::format_double(outcome.runtime_seconds)});
  }
  return report;
}

}  // namespace icph
