// Acceptance suite: one integration check per criterion, each printing a
// single PASS/FAIL line with the measured quantities. Exit code equals the
// number of failed criteria.
//
// Usage: icph_acceptance [--criterion N]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "icph/icph.hpp"
#include "test_util.hpp"

namespace {

using icph::Rng;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double binomial_bound(double nominal, int reps) {
  return nominal + 2.0 * std::sqrt(nominal * (1.0 - nominal) / reps);
}

int column(const icph::Report& report, const std::string& name) {
  for (std::size_t i = 0; i < report.columns.size(); ++i) {
    if (report.columns[i] == name) return static_cast<int>(i);
  }
  throw std::runtime_error("report column missing: " + name);
}

double cell_value(const icph::Report& report, int row, const std::string& name) {
  return std::stod(report.rows[row][column(report, name)]);
}

icph::DiscoveryOptions default_discovery(std::uint64_t seed) {
  icph::DiscoveryOptions options;
  options.fit.method = icph::Method::NLM;
  options.fit.model = icph::Model::IID;
  options.fit.constraint = icph::Variance::Equal;
  options.fit.num_states = 2;
  options.fit.seed = seed;
  options.alpha = 0.05;
  return options;
}

// 1. Forward-recursion likelihood equals brute-force path enumeration on 200
//    random small instances, relative error 1e-8.
Outcome criterion1() {
  Rng rng(20260810);
  double worst = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const int l = 2 + static_cast<int>(rng.uniform_int(2));
    const int m = 3 + static_cast<int>(rng.uniform_int(6));
    const int p = 1 + static_cast<int>(rng.uniform_int(2));
    const icph::Model flavor = rng.bernoulli(0.5) ? icph::Model::IID : icph::Model::HMM;
    const icph::Variance constraint =
        rng.bernoulli(0.5) ? icph::Variance::LowerBound : icph::Variance::Equal;
    const auto theta = testutil::random_theta(rng, p, l, constraint);
    const auto gamma = testutil::random_gamma(rng, flavor, l);
    const auto sample = testutil::sample_srm(rng, m, theta, gamma);
    const double fast = icph::loglik(sample.y, sample.x, theta, gamma);
    const double slow = testutil::bruteforce_loglik(sample.y, sample.x, theta, gamma);
    worst = std::max(worst,
                     std::fabs(fast - slow) / std::max(1.0, std::fabs(slow)));
  }
  Outcome out;
  out.pass = worst <= 1e-8;
  std::ostringstream detail;
  detail << "max relative deviation from the 200-instance enumeration oracle = "
         << worst << " (need <= 1e-8)";
  out.detail = detail.str();
  return out;
}

// 2. EM ascent on every run and EM/NLM agreement within 1e-4 over 100 seeded
//    two-state IID datasets of size 300. Datasets are drawn from the
//    two-state prior restricted to identifiable models (GMEP >= 0.6): on
//    lower-GMEP draws the likelihood carries competitive local maxima and no
//    local optimizer pair is expected to agree.
Outcome criterion2() {
  int ascent_violations = 0;
  double worst_gap = 0.0;
  int qualifying = 0;
  for (int candidate = 0; qualifying < 100 && candidate < 400; ++candidate) {
    icph::ScmSpec spec;
    spec.generator = icph::Generator::CoverageScm;
    spec.n = 300;
    spec.seed = 31000 + candidate;
    const icph::Simulation sim = icph::simulate(spec);
    if (icph::gmep(icph::gmep_model_from_truth(sim.truth)).value < 0.6) continue;
    ++qualifying;
    const Eigen::MatrixXd design = icph::design_matrix(sim.data.x, {0}, true);
    icph::FitOptions options;
    options.model = icph::Model::IID;
    options.constraint = icph::Variance::Equal;
    options.num_states = 2;
    options.seed = 31000 + candidate;
    options.tolerance = 1e-10;
    options.max_iterations = 5000;

    options.method = icph::Method::EM;
    const icph::FitResult em = icph::fit_em(sim.data.y, design, options);
    for (std::size_t i = 1; i < em.loglik_trace.size(); ++i) {
      if (em.loglik_trace[i] < em.loglik_trace[i - 1] - 1e-9) ++ascent_violations;
    }
    options.method = icph::Method::NLM;
    const icph::FitResult nlm = icph::fit_nlm(sim.data.y, design, options);
    worst_gap = std::max(worst_gap, std::fabs(em.loglik_value - nlm.loglik_value));
  }
  Outcome out;
  out.pass = qualifying == 100 && ascent_violations == 0 && worst_gap <= 1e-4;
  std::ostringstream detail;
  detail << "ascent violations = " << ascent_violations
         << " (need 0), max |loglik_EM - loglik_NLM| = " << worst_gap
         << " (need <= 1e-4) over " << qualifying << " seeds";
  out.detail = detail.str();
  return out;
}

// 3. Coverage of 95% adjusted regions: in [0.90, 0.99] for GMEP >= 0.70 at
//    m = 500 (300 pooled reps), and below 0.90 for GMEP ~ 0.5 at m = 100.
Outcome criterion3() {
  icph::FitOptions fit;
  fit.method = icph::Method::NLM;
  fit.model = icph::Model::IID;
  fit.constraint = icph::Variance::Equal;

  const auto high = icph::find_coverage_models(4201, 3, 0.70, 1.0);
  int high_covered = 0, high_reps = 0;
  for (std::size_t i = 0; i < high.size(); ++i) {
    const auto cell = icph::coverage_cell(high[i], 500, 100, fit, 0.05,
                                          icph::derive_seed(4201, 17 + i), 1);
    high_covered += cell.covered;
    high_reps += cell.reps;
  }
  const double high_rate = static_cast<double>(high_covered) / high_reps;

  const auto low = icph::find_coverage_models(4301, 3, 0.47, 0.53);
  int low_covered = 0, low_reps = 0;
  for (std::size_t i = 0; i < low.size(); ++i) {
    const auto cell = icph::coverage_cell(low[i], 100, 100, fit, 0.05,
                                          icph::derive_seed(4301, 57 + i), 1);
    low_covered += cell.covered;
    low_reps += cell.reps;
  }
  const double low_rate = static_cast<double>(low_covered) / low_reps;

  Outcome out;
  out.pass = high_rate >= 0.90 && high_rate <= 0.99 && low_rate < 0.90;
  std::ostringstream detail;
  detail << "coverage(GMEP>=0.70, m=500) = " << high_rate << " over " << high_reps
         << " reps (need in [0.90, 0.99]); coverage(GMEP~0.5, m=100) = "
         << low_rate << " (need < 0.90)";
  out.detail = detail.str();
  return out;
}

// 4. ICPH false-discovery control across the level grid, with the key
//    contrast that the S*-test itself over-rejects somewhere.
Outcome criterion4() {
  icph::ExperimentConfig config;
  config.kind = "level";
  config.reps = 100;
  config.sample_sizes = {100, 300, 500};
  config.delta_betas = {0.5, 1.5};
  config.seed = 44000;
  config.discovery = default_discovery(44000);

  const icph::Report report = icph::run_experiment(config);
  const double bound = binomial_bound(0.05, config.reps);
  bool all_controlled = true;
  double worst_fdr = 0.0, max_reject_sstar = 0.0;
  for (std::size_t r = 0; r < report.rows.size(); ++r) {
    const double fdr = cell_value(report, r, "fdr");
    worst_fdr = std::max(worst_fdr, fdr);
    all_controlled &= fdr <= bound;
    max_reject_sstar = std::max(max_reject_sstar,
                                cell_value(report, r, "reject_sstar"));
  }
  Outcome out;
  out.pass = all_controlled && max_reject_sstar > 0.05;
  std::ostringstream detail;
  detail << "max cell FDR = " << worst_fdr << " (need <= " << bound
         << " in all 6 cells); max P(reject H_{0,S*}) = " << max_reject_sstar
         << " (contrast: exceeds 0.05 somewhere)";
  out.detail = detail.str();
  return out;
}

// 5. Power at n = 500, delta-beta = 1.5 under equal variances: modal output
//    {1,2} and X3 rejection within level.
Outcome criterion5() {
  icph::ExperimentConfig config;
  config.kind = "power";
  config.reps = 100;
  config.sample_sizes = {500};
  config.delta_betas = {1.5};
  config.seed = 45000;
  config.discovery = default_discovery(45000);

  const icph::Report report = icph::run_experiment(config);
  const std::string modal = report.rows[0][column(report, "modal_shat")];
  const double reject_x3 = cell_value(report, 0, "reject_x3");
  const double bound = binomial_bound(0.05, config.reps);

  Outcome out;
  out.pass = modal == "{1,2}" && reject_x3 <= bound;
  std::ostringstream detail;
  detail << "modal S_hat = " << modal << " (need {1,2}), X3 rejection rate = "
         << reject_x3 << " (need <= " << bound << ")";
  out.detail = detail.str();
  return out;
}

// 6. Robustness variants keep false-discovery control; the continuous-H
//    variant stays uninformative-but-safe.
Outcome criterion6() {
  icph::ExperimentConfig config;
  config.kind = "robustness";
  config.reps = 100;
  config.sample_sizes = {500};
  config.delta_betas = {1.5};
  config.seed = 46000;
  config.discovery = default_discovery(46000);

  const icph::Report report = icph::run_experiment(config);
  const double bound = binomial_bound(0.05, config.reps);
  bool all_controlled = true;
  double worst_fdr = 0.0;
  double continuous_max_reject = 0.0;
  for (std::size_t r = 0; r < report.rows.size(); ++r) {
    const double fdr = cell_value(report, r, "fdr");
    worst_fdr = std::max(worst_fdr, fdr);
    all_controlled &= fdr <= bound;
    if (report.rows[r][column(report, "generator")] == "continuous_h") {
      continuous_max_reject = std::max(
          {cell_value(report, r, "reject_x1"), cell_value(report, r, "reject_x2"),
           cell_value(report, r, "reject_x3")});
    }
  }
  Outcome out;
  out.pass = all_controlled && continuous_max_reject <= 0.1;
  std::ostringstream detail;
  detail << "max variant FDR = " << worst_fdr << " (need <= " << bound
         << " in all 6 variants); continuous-H max predictor rejection = "
         << continuous_max_reject << " (need <= 0.1)";
  out.detail = detail.str();
  return out;
}

// 7. Unknown number of states: the max-over-degrees test keeps FDR control
//    for l_true in {2, 3} and retains power at l_true = 2.
Outcome criterion7() {
  icph::ExperimentConfig config;
  config.kind = "nonbinary";
  config.reps = 100;
  config.sample_sizes = {500};
  config.delta_betas = {1.5};
  config.state_counts = {2, 3};
  config.degree_set = {2, 3, 4, 5};
  config.seed = 47000;
  config.discovery = default_discovery(47000);

  const icph::Report report = icph::run_experiment(config);
  const double bound = binomial_bound(0.05, config.reps);
  bool all_controlled = true;
  double worst_fdr = 0.0;
  double power_x1 = 0.0, power_x2 = 0.0;
  for (std::size_t r = 0; r < report.rows.size(); ++r) {
    const double fdr = cell_value(report, r, "fdr");
    worst_fdr = std::max(worst_fdr, fdr);
    all_controlled &= fdr <= bound;
    if (report.rows[r][column(report, "l_true")] == "2") {
      power_x1 = cell_value(report, r, "reject_x1");
      power_x2 = cell_value(report, r, "reject_x2");
    }
  }
  Outcome out;
  out.pass = all_controlled && power_x1 >= 0.5 && power_x2 >= 0.5;
  std::ostringstream detail;
  detail << "max FDR = " << worst_fdr << " (need <= " << bound
         << "); power at l_true=2: X1 = " << power_x1 << ", X2 = " << power_x2
         << " (need >= 0.5 each)";
  out.detail = detail.str();
  return out;
}

// 8. Lasso screening with 100 extra predictors: the screened-estimator
//    guarantee (level 1 - 2 alpha) and screening coverage of S*.
Outcome criterion8() {
  icph::ExperimentConfig config;
  config.kind = "many_predictors";
  config.reps = 50;
  config.sample_sizes = {300};
  config.delta_betas = {1.5};
  config.extra_predictor_counts = {100};
  config.screening_k = 5;
  config.seed = 48000;
  config.discovery = default_discovery(48000);

  const icph::Report report = icph::run_experiment(config);
  const double fdr = cell_value(report, 0, "fdr");
  const double cover = cell_value(report, 0, "screening_cover");
  const double bound = binomial_bound(0.10, config.reps);

  Outcome out;
  out.pass = fdr <= bound && cover >= 0.90;
  std::ostringstream detail;
  detail << "FDR = " << fdr << " (need <= " << bound
         << ", the 1-2alpha guarantee); P(S* in screened set) = " << cover
         << " (need >= 0.90) over 50 reps";
  out.detail = detail.str();
  return out;
}

// 9. The minimax-Mahalanobis solver matches a dense-grid oracle (step 1e-3)
//    within 1e-4 on 100 random two-region 2-D instances.
Outcome criterion9() {
  Rng rng(49000);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const auto inst = testutil::random_minimax_instance(rng);
    icph::ConfidenceRegion r1, r2;
    r1.dim = r2.dim = 2;
    r1.centers.push_back(inst.centers[0]);
    r1.shapes.push_back(inst.shapes[0]);
    r2.centers.push_back(inst.centers[1]);
    r2.shapes.push_back(inst.shapes[1]);
    const auto result = icph::min_max_mahalanobis({r1, r2});
    const double oracle = testutil::grid_minimax_oracle(inst.centers, inst.shapes);
    worst = std::max(worst, std::fabs(result.value - oracle));
  }
  Outcome out;
  out.pass = worst <= 1e-4;
  std::ostringstream detail;
  detail << "max |solver - grid oracle| = " << worst
         << " over 100 instances (need <= 1e-4)";
  out.detail = detail.str();
  return out;
}

// 10. Grouped latent-state reconstruction at moderate GMEP: blocks of 12
//     sharing a state, accuracy >= 0.95 at n = 2000.
Outcome criterion10() {
  const auto models = icph::find_coverage_models(50100, 3, 0.68, 0.72);
  icph::FitOptions options;
  options.method = icph::Method::NLM;
  options.constraint = icph::Variance::Equal;
  options.num_states = 2;

  int agree = 0, total = 0;
  double gmep_sum = 0.0;
  for (std::size_t i = 0; i < models.size(); ++i) {
    icph::ScmSpec spec;
    spec.generator = icph::Generator::CoverageScm;
    spec.n = 2000;
    spec.state_block_size = 12;
    spec.param_seed = models[i];
    spec.seed = icph::derive_seed(50100, 900 + i);
    const icph::Simulation sim = icph::simulate(spec);
    gmep_sum += icph::gmep(icph::gmep_model_from_truth(sim.truth)).value;

    options.seed = icph::derive_seed(50100, 901 + i);
    const Eigen::MatrixXd design = icph::design_matrix(sim.data.x, {0}, true);
    const icph::FitResult fit = icph::fit_nlm(sim.data.y, design, options);
    const Eigen::MatrixXd post =
        icph::posterior_state_probs(sim.data.y, design, fit.theta, fit.gamma);
    std::vector<int> groups(spec.n);
    for (int t = 0; t < spec.n; ++t) groups[t] = t / 12;
    const std::vector<int> labels = icph::reconstruct_states(post, groups);
    int hit = 0;
    for (int t = 0; t < spec.n; ++t) {
      hit += labels[t] == sim.truth.latent[t] ? 1 : 0;
    }
    agree += std::max(hit, spec.n - hit);
    total += spec.n;
  }
  const double accuracy = static_cast<double>(agree) / total;
  Outcome out;
  out.pass = accuracy >= 0.95;
  std::ostringstream detail;
  detail << "grouped decoding accuracy = " << accuracy << " at mean GMEP "
         << gmep_sum / models.size() << ", n = 2000, blocks of 12 (need >= 0.95)";
  out.detail = detail.str();
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0) only = std::atoi(argv[i + 1]);
  }
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4},
      {5, criterion5}, {6, criterion6}, {7, criterion7}, {8, criterion8},
      {9, criterion9}, {10, criterion10}};

  int failures = 0;
  for (const auto& [index, run] : criteria) {
    if (only != 0 && index != only) continue;
    const auto started = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = run();
    } catch (const std::exception& e) {
      outcome.pass = false;
      outcome.detail = std::string("exception: ") + e.what();
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
            .count();
    std::printf("%s criterion %d: %s [%.1fs]\n", outcome.pass ? "PASS" : "FAIL",
                index, outcome.detail.c_str(), seconds);
    std::fflush(stdout);
    if (!outcome.pass) ++failures;
  }
  return failures;
}
