// Command-line front end for switching-regression fitting, the equality
// test, ICPH causal discovery, simulation and posterior decoding.
//
// Exit codes: 0 success, 1 usage/configuration error, 2 data error,
// 3 numerical failure.

#include <CLI11.hpp>
#include <algorithm>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "icph/icph.hpp"

namespace {

using nlohmann::json;

struct CliOptions {
  std::string input;
  std::string output;
  std::string truth_output;
  std::string format = "json";
  std::string delimiter = ",";
  std::string response = "Y";
  std::string environment = "env";
  std::vector<std::string> predictors;
  std::string model = "IID";
  std::string method = "NLM";
  std::string constraint = "equality";
  std::string states = "2";
  std::string test_parameters = "intercept,beta,sigma";
  std::string subset;  // test-equality: 1-based predictor indices
  bool intercept = true;
  double alpha = 0.05;
  double lower_bound = icph::kDefaultLowerBound;
  int restarts = 5;
  int max_iterations = 500;
  double tolerance = 1e-8;
  std::uint64_t seed = 0;
  int threads = icph::default_threads();
  int screening_k = 0;
  long subset_cap = 1L << 12;
  int group_size = 0;  // decode
  // simulate
  std::string generator = "three_env_scm";
  int n = 500;
  double delta_beta = 1.5;
  int extra_predictors = 0;
  double y_intervention = 0.0;
  int block_size = 1;
  std::uint64_t param_seed = 0;
  // experiment
  std::string kind = "level";
  int reps = 100;
  std::vector<int> grid_n = {100, 300, 500};
  std::vector<double> grid_delta = {0.5, 1.5};
  std::vector<int> grid_states = {2, 3};
  std::vector<int> extra_counts = {100};
  std::vector<double> interventions = {0.0, 0.25, 0.5};
  int param_draws = 10;
  double gmep_low = 0.0;
  double gmep_high = 1.0;
};

std::vector<int> parse_int_list(const std::string& text, const std::string& what) {
  std::vector<int> out;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ',')) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw icph::InvalidOptions("cannot parse " + what + " entry '" + item + "'");
    }
  }
  if (out.empty()) throw icph::InvalidOptions(what + " must be non-empty");
  return out;
}

icph::FitOptions fit_options(const CliOptions& cli) {
  icph::FitOptions fit;
  if (cli.method != "EM" && cli.method != "NLM") {
    throw icph::InvalidOptions("--method must be EM or NLM");
  }
  fit.method = cli.method == "EM" ? icph::Method::EM : icph::Method::NLM;
  if (cli.model != "IID" && cli.model != "HMM") {
    throw icph::InvalidOptions("--model must be IID or HMM");
  }
  fit.model = cli.model == "HMM" ? icph::Model::HMM : icph::Model::IID;
  if (cli.constraint == "lower-bound") {
    fit.constraint = icph::Variance::LowerBound;
  } else if (cli.constraint == "equality") {
    fit.constraint = icph::Variance::Equal;
  } else {
    throw icph::InvalidOptions("--variance-constraint must be lower-bound or equality");
  }
  fit.lower_bound = cli.lower_bound;
  fit.intercept = cli.intercept;
  fit.num_restarts = cli.restarts;
  fit.max_iterations = cli.max_iterations;
  fit.tolerance = cli.tolerance;
  fit.seed = cli.seed;
  fit.num_states = parse_int_list(cli.states, "--number-of-states").front();
  return fit;
}

icph::ParamMask mask_options(const CliOptions& cli) {
  icph::ParamMask mask{false, false, false};
  std::stringstream stream(cli.test_parameters);
  std::string item;
  while (std::getline(stream, item, ',')) {
    if (item == "intercept") {
      mask.intercept = true;
    } else if (item == "beta") {
      mask.beta = true;
    } else if (item == "sigma") {
      mask.sigma = true;
    } else {
      throw icph::InvalidOptions(
          "--test-parameters entries must be within {intercept,beta,sigma}, got '" +
          item + "'");
    }
  }
  if (!mask.intercept && !mask.beta && !mask.sigma) {
    throw icph::InvalidOptions("--test-parameters selects nothing");
  }
  return mask;
}

char delimiter_of(const CliOptions& cli) {
  if (cli.delimiter.size() != 1) {
    throw icph::InvalidOptions("--delimiter must be a single character");
  }
  return cli.delimiter[0];
}

void emit(const CliOptions& cli, const json& payload) {
  const std::string text = payload.dump(2) + "\n";
  if (cli.output.empty() || cli.output == "-") {
    std::cout << text;
  } else {
    std::ofstream out(cli.output);
    if (!out) throw icph::ParseError("cannot open '" + cli.output + "' for writing");
    out << text;
  }
}

void emit_csv(const CliOptions& cli, const std::vector<std::string>& columns,
              const std::vector<std::vector<std::string>>& rows) {
  if (cli.output.empty() || cli.output == "-") {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      std::cout << (i ? "," : "") << columns[i];
    }
    std::cout << "\n";
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        std::cout << (i ? "," : "") << row[i];
      }
      std::cout << "\n";
    }
  } else {
    icph::write_report_csv(cli.output, columns, rows, ',');
  }
}

json json_vector(const Eigen::VectorXd& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json json_matrix(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(row);
  }
  return out;
}

json options_json(const CliOptions& cli, const icph::FitOptions& fit) {
  return json{{"model", icph::to_string(fit.model)},
              {"method", icph::to_string(fit.method)},
              {"variance_constraint", icph::to_string(fit.constraint)},
              {"lower_bound", fit.lower_bound},
              {"number_of_states", cli.states},
              {"intercept", fit.intercept},
              {"alpha", cli.alpha},
              {"test_parameters", cli.test_parameters},
              {"restarts", fit.num_restarts},
              {"tolerance", fit.tolerance},
              {"seed", fit.seed}};
}

icph::IngestResult load(const CliOptions& cli, bool need_environment) {
  if (cli.input.empty()) throw icph::InvalidOptions("missing input file");
  icph::ColumnRoles roles;
  roles.response = cli.response;
  roles.predictors = cli.predictors;
  // The environment column, when present, never acts as a default predictor.
  // Commands that do not split by environment tolerate its absence and treat
  // all rows as one environment.
  const auto header = icph::read_header(cli.input, delimiter_of(cli));
  const bool has_env_column =
      std::find(header.begin(), header.end(), cli.environment) != header.end();
  if (need_environment || has_env_column) roles.environment = cli.environment;
  auto ingest = icph::ingest_csv(cli.input, roles, delimiter_of(cli));
  if (!need_environment) {
    ingest.data.env.assign(ingest.data.num_rows(), 1);
    ingest.original_env_labels = {1};
  }
  return ingest;
}

std::vector<int> all_predictors(const icph::Dataset& data) {
  std::vector<int> subset(data.num_predictors());
  std::iota(subset.begin(), subset.end(), 0);
  return subset;
}

int cmd_fit(const CliOptions& cli) {
  const auto ingest = load(cli, false);
  const icph::FitOptions fit = fit_options(cli);
  const Eigen::MatrixXd design =
      icph::design_matrix(ingest.data.x, all_predictors(ingest.data), fit.intercept);
  const icph::FitResult result = icph::fit(ingest.data.y, design, fit);

  if (cli.format == "csv") {
    char buf[40];
    std::vector<std::vector<std::string>> rows;
    const auto num = [&](double v) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      return std::string(buf);
    };
    rows.push_back({"loglik", num(result.loglik_value)});
    rows.push_back({"converged", result.converged ? "1" : "0"});
    rows.push_back({"degenerate", result.degenerate ? "1" : "0"});
    for (int j = 0; j < result.theta.num_states(); ++j) {
      for (int i = 0; i < result.theta.num_predictors(); ++i) {
        rows.push_back({"beta_" + std::to_string(j + 1) + "_" + std::to_string(i + 1),
                        num(result.theta.betas(i, j))});
      }
    }
    for (int j = 0; j < static_cast<int>(result.theta.variances.size()); ++j) {
      rows.push_back({"sigma2_" + std::to_string(j + 1), num(result.theta.variances(j))});
    }
    emit_csv(cli, {"key", "value"}, rows);
    return 0;
  }

  json betas = json::array();
  for (int j = 0; j < result.theta.num_states(); ++j) {
    betas.push_back(json_vector(result.theta.betas.col(j)));
  }
  emit(cli, json{{"subcommand", "fit"},
                 {"options", options_json(cli, fit)},
                 {"predictors", ingest.predictor_names},
                 {"loglik", result.loglik_value},
                 {"converged", result.converged},
                 {"degenerate", result.degenerate},
                 {"restart_index", result.restart_index},
                 {"iterations", result.iterations},
                 {"betas", betas},
                 {"variances", json_vector(result.theta.variances)},
                 {"gamma", json_vector(result.gamma.gamma)},
                 {"transition_matrix", json_matrix(result.gamma.matrix())},
                 {"stationary", json_vector(icph::stationary_distribution(result.gamma))},
                 {"fisher", json_matrix(result.fisher)}});
  return 0;
}

int cmd_test_equality(const CliOptions& cli) {
  const auto ingest = load(cli, true);
  const icph::FitOptions fit = fit_options(cli);
  const icph::ParamMask mask = mask_options(cli);

  std::vector<int> subset;
  if (cli.subset.empty()) {
    subset = all_predictors(ingest.data);
  } else {
    for (int j : parse_int_list(cli.subset, "--subset")) {
      if (j < 1 || j > ingest.data.num_predictors()) {
        throw icph::InvalidOptions("--subset index out of range: " + std::to_string(j));
      }
      subset.push_back(j - 1);
    }
  }

  const std::vector<int> degrees = parse_int_list(cli.states, "--number-of-states");
  json payload{{"subcommand", "test-equality"},
               {"options", options_json(cli, fit)},
               {"subset", json::array()}};
  for (int j : subset) payload["subset"].push_back(j + 1);

  if (degrees.size() > 1) {
    const auto multi =
        icph::test_equality_multi_degree(ingest.data, subset, fit, degrees, mask);
    payload["p_value"] = multi.p_value;
    payload["degrees"] = json::array();
    for (const auto& [degree, res] : multi.per_degree) {
      payload["degrees"].push_back(json{{"degree", degree},
                                        {"p_value", res.p_value},
                                        {"m_star", res.m_star},
                                        {"dim", res.dim},
                                        {"degenerate", res.degenerate},
                                        {"floored", res.floored}});
    }
  } else {
    icph::FitOptions single = fit;
    single.num_states = degrees.front();
    const auto res = icph::test_equality_sr(ingest.data, subset, single, mask);
    payload["p_value"] = res.p_value;
    payload["m_star"] = res.m_star;
    payload["dim"] = res.dim;
    payload["degenerate"] = res.degenerate;
    payload["floored"] = res.floored;
    payload["env_status"] = res.env_status;
  }
  emit(cli, payload);
  return 0;
}

int cmd_discover(const CliOptions& cli) {
  const auto ingest = load(cli, true);
  icph::DiscoveryOptions options;
  options.fit = fit_options(cli);
  options.alpha = cli.alpha;
  options.test_parameters = mask_options(cli);
  options.screening_k = cli.screening_k;
  options.subset_cap = cli.subset_cap;
  options.threads = cli.threads;
  const std::vector<int> degrees = parse_int_list(cli.states, "--number-of-states");
  if (degrees.size() > 1) options.degrees = degrees;

  const icph::DiscoveryResult result = icph::discover(ingest.data, options);

  if (cli.format == "csv") {
    char buf[40];
    std::vector<std::vector<std::string>> rows;
    for (const auto& record : result.set_pvalues) {
      std::string label;
      for (std::size_t i = 0; i < record.subset.size(); ++i) {
        label += (i ? " " : "") + std::to_string(record.subset[i] + 1);
      }
      std::snprintf(buf, sizeof(buf), "%.17g", record.p_value);
      rows.push_back(
          {label, buf, record.degenerate ? "1" : "0", record.floored ? "1" : "0"});
    }
    emit_csv(cli, {"subset", "p_value", "degenerate", "floored"}, rows);
    return 0;
  }

  json sets = json::array();
  for (const auto& record : result.set_pvalues) {
    json subset = json::array();
    for (int j : record.subset) subset.push_back(j + 1);
    json entry{{"subset", subset},
               {"p_value", record.p_value},
               {"degenerate", record.degenerate},
               {"floored", record.floored}};
    if (!record.degree_pvalues.empty()) {
      json per = json::object();
      for (const auto& [degree, p] : record.degree_pvalues) {
        per[std::to_string(degree)] = p;
      }
      entry["degree_pvalues"] = per;
    }
    sets.push_back(entry);
  }
  json predictors = json::array();
  for (int j = 0; j < ingest.data.num_predictors(); ++j) {
    predictors.push_back(json{{"predictor", j + 1},
                              {"name", ingest.predictor_names[j]},
                              {"p_value", result.predictor_pvalues(j)}});
  }
  json screened = json::array();
  for (int j : result.screened) screened.push_back(j + 1);
  json s_hat = json::array();
  for (int j : result.s_hat) s_hat.push_back(j + 1);

  emit(cli, json{{"subcommand", "discover"},
                 {"options", options_json(cli, options.fit)},
                 {"alpha", result.alpha},
                 {"screening_k", cli.screening_k},
                 {"screening_on", result.screening_on},
                 {"guarantee_level", result.guarantee_level},
                 {"screened", screened},
                 {"any_accepted", result.any_accepted},
                 {"s_hat", s_hat},
                 {"set_pvalues", sets},
                 {"predictor_pvalues", predictors}});
  return 0;
}

int cmd_simulate(const CliOptions& cli) {
  icph::ScmSpec spec;
  spec.generator = icph::generator_from_string(cli.generator);
  spec.n = cli.n;
  spec.seed = cli.seed;
  spec.param_seed = cli.param_seed;
  spec.delta_beta = cli.delta_beta;
  spec.num_states = parse_int_list(cli.states, "--number-of-states").front();
  spec.extra_predictors = cli.extra_predictors;
  spec.y_intervention = cli.y_intervention;
  spec.state_block_size = cli.block_size;
  const icph::Simulation sim = icph::simulate(spec);

  if (cli.output.empty()) throw icph::InvalidOptions("simulate requires --output");
  std::vector<std::string> names;
  for (int j = 0; j < sim.data.num_predictors(); ++j) {
    names.push_back("X" + std::to_string(j + 1));
  }
  icph::write_dataset_csv(cli.output, sim.data, names, delimiter_of(cli));

  if (!cli.truth_output.empty()) {
    json truth{{"generator", icph::to_string(spec.generator)},
               {"n", spec.n},
               {"seed", spec.seed},
               {"s_star", json::array()},
               {"latent", sim.truth.latent},
               {"params", sim.truth.params}};
    for (int j : sim.truth.s_star) truth["s_star"].push_back(j + 1);
    std::ofstream out(cli.truth_output);
    if (!out) throw icph::ParseError("cannot open '" + cli.truth_output + "'");
    out << truth.dump(2) << "\n";
  }
  return 0;
}

int cmd_decode(const CliOptions& cli) {
  const auto ingest = load(cli, false);
  const icph::FitOptions fit = fit_options(cli);
  const Eigen::MatrixXd design =
      icph::design_matrix(ingest.data.x, all_predictors(ingest.data), fit.intercept);
  const icph::FitResult result = icph::fit(ingest.data.y, design, fit);
  const Eigen::MatrixXd post =
      icph::posterior_state_probs(ingest.data.y, design, result.theta, result.gamma);

  std::vector<int> grouping;
  if (cli.group_size > 0) {
    grouping.resize(ingest.data.num_rows());
    for (int t = 0; t < ingest.data.num_rows(); ++t) grouping[t] = t / cli.group_size;
  }
  const std::vector<int> states = icph::reconstruct_states(post, grouping);

  if (cli.format == "csv") {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t t = 0; t < states.size(); ++t) {
      rows.push_back({std::to_string(t + 1), std::to_string(states[t] + 1)});
    }
    emit_csv(cli, {"index", "state"}, rows);
    return 0;
  }
  json labels = json::array();
  for (int s : states) labels.push_back(s + 1);
  emit(cli, json{{"subcommand", "decode"},
                 {"options", options_json(cli, fit)},
                 {"group_size", cli.group_size},
                 {"loglik", result.loglik_value},
                 {"states", labels}});
  return 0;
}

int cmd_experiment(const CliOptions& cli) {
  icph::ExperimentConfig config;
  config.kind = cli.kind;
  config.reps = cli.reps;
  config.sample_sizes = cli.grid_n;
  config.delta_betas = cli.grid_delta;
  config.state_counts = cli.grid_states;
  config.extra_predictor_counts = cli.extra_counts;
  config.interventions = cli.interventions;
  config.screening_k = cli.screening_k > 0 ? cli.screening_k : 5;
  config.param_draws = cli.param_draws;
  config.gmep_low = cli.gmep_low;
  config.gmep_high = cli.gmep_high;
  config.seed = cli.seed;
  config.threads = cli.threads;
  config.discovery.fit = fit_options(cli);
  config.discovery.alpha = cli.alpha;
  config.discovery.test_parameters = mask_options(cli);

  const icph::Report report = icph::run_experiment(config);
  if (cli.format == "csv") {
    emit_csv(cli, report.columns, report.rows);
    return 0;
  }
  json rows = json::array();
  for (const auto& row : report.rows) {
    json entry = json::object();
    for (std::size_t c = 0; c < report.columns.size(); ++c) {
      entry[report.columns[c]] = row[c];
    }
    rows.push_back(entry);
  }
  emit(cli, json{{"subcommand", "experiment"}, {"kind", cli.kind}, {"rows", rows}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CliOptions cli;
  CLI::App app{"Switching regression models, equality testing and causal discovery "
               "with discrete latent regimes"};
  app.set_config("--config", "", "Flat key=value configuration file");
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  const auto add_common = [&](CLI::App* cmd, bool with_fit) {
    cmd->add_option("--output", cli.output, "Output path (default: stdout)");
    cmd->add_option("--format", cli.format, "Output format: json or csv")
        ->check(CLI::IsMember({"json", "csv"}));
    cmd->add_option("--seed", cli.seed, "Random seed")->envname("ICPH_SEED");
    cmd->add_option("--threads", cli.threads, "Worker pool size");
    if (with_fit) {
      cmd->add_option("--model", cli.model, "Latent dependence model: IID or HMM");
      cmd->add_option("--method", cli.method, "Optimizer: EM or NLM");
      cmd->add_option("--variance-constraint", cli.constraint,
                      "lower-bound or equality");
      cmd->add_option("--lower-bound", cli.lower_bound,
                      "Constant c of the variance lower bound");
      cmd->add_option("--number-of-states", cli.states,
                      "State count; a comma list tests all those degrees");
      cmd->add_flag("--intercept,!--no-intercept", cli.intercept,
                    "Include an intercept (constant predictor column)");
      cmd->add_option("--test-parameters", cli.test_parameters,
                      "Tested coordinates, subset of intercept,beta,sigma");
      cmd->add_option("--alpha", cli.alpha, "Test level");
      cmd->add_option("--restarts", cli.restarts, "Number of restarts");
      cmd->add_option("--max-iterations", cli.max_iterations, "Iteration cap");
      cmd->add_option("--tolerance", cli.tolerance,
                      "Relative log-likelihood convergence tolerance");
    }
  };
  const auto add_data = [&](CLI::App* cmd) {
    cmd->add_option("input", cli.input, "Delimited input file")->required();
    cmd->add_option("--delimiter", cli.delimiter, "Field delimiter");
    cmd->add_option("--response", cli.response, "Response column name");
    cmd->add_option("--environment", cli.environment, "Environment column name");
    cmd->add_option("--predictors", cli.predictors,
                    "Predictor column names (default: all remaining)")
        ->delimiter(',');
  };

  CLI::App* fit_cmd = app.add_subcommand("fit", "Fit one switching regression model");
  add_data(fit_cmd);
  add_common(fit_cmd, true);

  CLI::App* test_cmd = app.add_subcommand(
      "test-equality",
      "Test equality of switching regression models across environments");
  add_data(test_cmd);
  add_common(test_cmd, true);
  test_cmd->add_option("--subset", cli.subset,
                       "1-based predictor indices to test (default: all)");

  CLI::App* discover_cmd =
      app.add_subcommand("discover", "ICPH causal discovery over predictor subsets");
  add_data(discover_cmd);
  add_common(discover_cmd, true);
  discover_cmd->add_option("--screening-k", cli.screening_k,
                           "Lasso screening: keep the first k predictors (0 = off)");
  discover_cmd->add_option("--subset-cap", cli.subset_cap,
                           "Maximum number of subsets to scan");

  CLI::App* sim_cmd = app.add_subcommand("simulate", "Draw a synthetic dataset");
  add_common(sim_cmd, false);
  sim_cmd->add_option("--generator", cli.generator, "SCM generator id");
  sim_cmd->add_option("--n", cli.n, "Sample size");
  sim_cmd->add_option("--delta-beta", cli.delta_beta, "Between-state coefficient gap");
  sim_cmd->add_option("--number-of-states", cli.states, "Latent state count");
  sim_cmd->add_option("--extra-predictors", cli.extra_predictors,
                      "Extra noise predictors (extra_predictors generator)");
  sim_cmd->add_option("--y-intervention", cli.y_intervention,
                      "Direct Y-intervention strength");
  sim_cmd->add_option("--block-size", cli.block_size,
                      "Consecutive draws sharing a latent state (coverage_scm)");
  sim_cmd->add_option("--param-seed", cli.param_seed,
                      "Separate seed fixing the structural parameters");
  sim_cmd->add_option("--delimiter", cli.delimiter, "Field delimiter");
  sim_cmd->add_option("--truth-output", cli.truth_output,
                      "Write ground truth (S*, latent path, parameters) as JSON");

  CLI::App* decode_cmd =
      app.add_subcommand("decode", "Fit and reconstruct latent states");
  add_data(decode_cmd);
  add_common(decode_cmd, true);
  decode_cmd->add_option(
      "--group-size", cli.group_size,
      "Decode groups of this many consecutive points (0 = pointwise)");

  CLI::App* exp_cmd =
      app.add_subcommand("experiment", "Run a Monte-Carlo experiment grid");
  add_common(exp_cmd, true);
  exp_cmd->add_option("--kind", cli.kind,
                      "coverage_vs_gmep | level | power | robustness | nonbinary | "
                      "many_predictors | h_violation");
  exp_cmd->add_option("--reps", cli.reps, "Repetitions per cell");
  exp_cmd->add_option("--grid-n", cli.grid_n, "Sample sizes")->delimiter(',');
  exp_cmd->add_option("--grid-delta-beta", cli.grid_delta, "Delta-beta grid")
      ->delimiter(',');
  exp_cmd->add_option("--grid-states", cli.grid_states, "True state counts")
      ->delimiter(',');
  exp_cmd->add_option("--grid-extra", cli.extra_counts, "Extra predictor counts")
      ->delimiter(',');
  exp_cmd->add_option("--grid-intervention", cli.interventions,
                      "Y-intervention strengths")
      ->delimiter(',');
  exp_cmd->add_option("--screening-k", cli.screening_k, "Screening size");
  exp_cmd->add_option("--param-draws", cli.param_draws,
                      "Coverage experiment: parameter settings");
  exp_cmd->add_option("--gmep-low", cli.gmep_low, "Coverage: GMEP band lower edge");
  exp_cmd->add_option("--gmep-high", cli.gmep_high, "Coverage: GMEP band upper edge");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (app.got_subcommand(fit_cmd)) return cmd_fit(cli);
    if (app.got_subcommand(test_cmd)) return cmd_test_equality(cli);
    if (app.got_subcommand(discover_cmd)) return cmd_discover(cli);
    if (app.got_subcommand(sim_cmd)) return cmd_simulate(cli);
    if (app.got_subcommand(decode_cmd)) return cmd_decode(cli);
    if (app.got_subcommand(exp_cmd)) return cmd_experiment(cli);
    std::cerr << "error: usage: no subcommand given\n";
    return 1;
  } catch (const icph::InvalidOptions& e) {
    std::cerr << "error: options: " << e.what() << "\n";
    return 1;
  } catch (const icph::InvalidSpec& e) {
    std::cerr << "error: options: " << e.what() << "\n";
    return 1;
  } catch (const icph::SubsetBlowup& e) {
    std::cerr << "error: options: " << e.what() << "\n";
    return 1;
  } catch (const icph::ComplexityLimit& e) {
    std::cerr << "error: options: " << e.what() << "\n";
    return 1;
  } catch (const icph::ParseError& e) {
    std::cerr << "error: data: " << e.what() << "\n";
    return 2;
  } catch (const icph::MissingColumn& e) {
    std::cerr << "error: data: " << e.what() << "\n";
    return 2;
  } catch (const icph::NonNumericValue& e) {
    std::cerr << "error: data: " << e.what() << "\n";
    return 2;
  } catch (const icph::EmptyEnvironment& e) {
    std::cerr << "error: data: " << e.what() << "\n";
    return 2;
  } catch (const icph::InsufficientData& e) {
    std::cerr << "error: data: " << e.what() << "\n";
    return 2;
  } catch (const icph::DegenerateData& e) {
    std::cerr << "error: data: " << e.what() << "\n";
    return 2;
  } catch (const icph::DimensionMismatch& e) {
    std::cerr << "error: data: " << e.what() << "\n";
    return 2;
  } catch (const icph::Error& e) {
    std::cerr << "error: numerical: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 3;
  }
}
