#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

#include "icph/csv.hpp"
#include "icph/scm.hpp"

namespace {

using nlohmann::json;

struct CliRun {
  int exit_code = -1;
  std::string out;
};

CliRun run_cli(const std::string& args) {
  const std::string command =
      std::string(ICPH_CLI_PATH) + " " + args + " 2>/tmp/icph_cli_stderr.txt";
  std::array<char, 4096> buffer;
  CliRun run;
  FILE* pipe = popen(command.c_str(), "r");
  EXPECT_NE(pipe, nullptr);
  while (fgets(buffer.data(), buffer.size(), pipe) != nullptr) {
    run.out += buffer.data();
  }
  const int status = pclose(pipe);
  run.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return run;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

// --- minimal JSON-schema checker (type / required / properties / items /
// enum / $ref / oneOf), enough to validate the shipped schema file ---

const json* resolve_ref(const json& schema, const std::string& ref) {
  const json* node = &schema;
  std::stringstream stream(ref.substr(2));  // strip "#/"
  std::string key;
  while (std::getline(stream, key, '/')) node = &node->at(key);
  return node;
}

bool validates(const json& root, const json& schema, const json& instance) {
  if (schema.contains("$ref")) {
    return validates(root, *resolve_ref(root, schema["$ref"]), instance);
  }
  if (schema.contains("oneOf")) {
    int matches = 0;
    for (const auto& sub : schema["oneOf"]) {
      if (validates(root, sub, instance)) ++matches;
    }
    return matches >= 1;
  }
  if (schema.contains("enum")) {
    bool any = false;
    for (const auto& v : schema["enum"]) any |= v == instance;
    if (!any) return false;
  }
  if (schema.contains("type")) {
    const std::string type = schema["type"];
    if (type == "object" && !instance.is_object()) return false;
    if (type == "array" && !instance.is_array()) return false;
    if (type == "string" && !instance.is_string()) return false;
    if (type == "boolean" && !instance.is_boolean()) return false;
    if (type == "number" && !instance.is_number()) return false;
    if (type == "integer" && !instance.is_number_integer()) return false;
  }
  if (schema.contains("required")) {
    for (const auto& key : schema["required"]) {
      if (!instance.contains(key.get<std::string>())) return false;
    }
  }
  if (schema.contains("properties") && instance.is_object()) {
    for (const auto& [key, sub] : schema["properties"].items()) {
      if (instance.contains(key) && !validates(root, sub, instance[key])) {
        return false;
      }
    }
  }
  if (schema.contains("items") && instance.is_array()) {
    for (const auto& element : instance) {
      if (!validates(root, schema["items"], element)) return false;
    }
  }
  return true;
}

json load_schema() { return json::parse(read_file(ICPH_SCHEMA_PATH)); }

bool all_numbers_finite(const json& node) {
  if (node.is_number_float() && !std::isfinite(node.get<double>())) return false;
  if (node.is_object() || node.is_array()) {
    for (const auto& child : node) {
      if (!all_numbers_finite(child)) return false;
    }
  }
  return true;
}

TEST(Ingest, EnvironmentRelabeling) {
  write_file("/tmp/icph_relabel.csv", "Y,X1,env\n1.0,0.5,2\n2.0,0.25,2\n3.0,0.1,5\n");
  icph::ColumnRoles roles{"Y", "env", {}};
  const auto ingest = icph::ingest_csv("/tmp/icph_relabel.csv", roles);
  EXPECT_EQ(ingest.data.env, (std::vector<int>{1, 1, 2}));
  EXPECT_EQ(ingest.original_env_labels, (std::vector<int>{2, 5}));
  EXPECT_EQ(ingest.predictor_names, (std::vector<std::string>{"X1"}));
}

TEST(Ingest, NonNumericCellNamesRowAndColumn) {
  write_file("/tmp/icph_nan.csv", "Y,X1,env\n1.0,0.5,1\n2.0,nan,1\n3.0,0.1,2\n");
  icph::ColumnRoles roles{"Y", "env", {}};
  try {
    icph::ingest_csv("/tmp/icph_nan.csv", roles);
    FAIL() << "expected NonNumericValue";
  } catch (const icph::NonNumericValue& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("line 3"), std::string::npos) << what;
    EXPECT_NE(what.find("X1"), std::string::npos) << what;
  }
}

TEST(Ingest, MissingColumnAndBadShape) {
  write_file("/tmp/icph_miss.csv", "Y,X1,env\n1.0,0.5,1\n");
  icph::ColumnRoles bad{"Y", "environment", {}};
  EXPECT_THROW(icph::ingest_csv("/tmp/icph_miss.csv", bad), icph::MissingColumn);

  write_file("/tmp/icph_ragged.csv", "Y,X1,env\n1.0,0.5\n");
  icph::ColumnRoles roles{"Y", "env", {}};
  EXPECT_THROW(icph::ingest_csv("/tmp/icph_ragged.csv", roles), icph::ParseError);
}

TEST(Ingest, RoundTripIsExact) {
  icph::ScmSpec spec;
  spec.generator = icph::Generator::ThreeEnvScm;
  spec.n = 200;
  spec.seed = 31;
  const auto sim = icph::simulate(spec);
  icph::write_dataset_csv("/tmp/icph_roundtrip.csv", sim.data, {"X1", "X2", "X3"});
  icph::ColumnRoles roles{"Y", "env", {}};
  const auto ingest = icph::ingest_csv("/tmp/icph_roundtrip.csv", roles);
  EXPECT_TRUE(ingest.data.y == sim.data.y);
  EXPECT_TRUE(ingest.data.x == sim.data.x);
  EXPECT_EQ(ingest.data.env, sim.data.env);
}

TEST(Cli, UnknownFlagFailsWithUsage) {
  const auto run = run_cli("discover --definitely-not-a-flag");
  EXPECT_EQ(run.exit_code, 1);
  const std::string err = read_file("/tmp/icph_cli_stderr.txt");
  EXPECT_NE(err.find("Usage"), std::string::npos) << err;
}

TEST(Cli, MissingColumnGivesDataExitCode) {
  write_file("/tmp/icph_cli_data.csv", "Y,X1,env\n1.0,0.5,1\n2.0,0.25,2\n");
  const auto run =
      run_cli("discover /tmp/icph_cli_data.csv --response NOPE --seed 1");
  EXPECT_EQ(run.exit_code, 2);
}

TEST(Cli, NumericalFailureGivesExitCodeThree) {
  // Exactly linear data under the EM lower-bound constraint: every restart
  // collapses its variance, a numerical failure.
  std::string csv = "Y,X1,env\n";
  for (int t = 0; t < 40; ++t) {
    const double x = 0.1 * t;
    csv += std::to_string(2.0 * x - 1.0) + "," + std::to_string(x) + ",1\n";
  }
  write_file("/tmp/icph_perfect.csv", csv);
  const auto run = run_cli(
      "fit /tmp/icph_perfect.csv --method EM --variance-constraint lower-bound "
      "--seed 3");
  EXPECT_EQ(run.exit_code, 3);
  const std::string err = read_file("/tmp/icph_cli_stderr.txt");
  EXPECT_NE(err.find("numerical"), std::string::npos) << err;
}

TEST(Cli, SimulateIsByteDeterministic) {
  const std::string args =
      "simulate --generator three_env_scm --n 150 --seed 9 --output ";
  ASSERT_EQ(run_cli(args + "/tmp/icph_sim_a.csv").exit_code, 0);
  ASSERT_EQ(run_cli(args + "/tmp/icph_sim_b.csv").exit_code, 0);
  EXPECT_EQ(read_file("/tmp/icph_sim_a.csv"), read_file("/tmp/icph_sim_b.csv"));
}

TEST(Cli, DiscoverSchemaInvariantsAndDeterminism) {
  ASSERT_EQ(run_cli("simulate --generator three_env_scm --n 300 --seed 11 "
                    "--output /tmp/icph_cli_sim.csv")
                .exit_code,
            0);
  const std::string invocation =
      "discover /tmp/icph_cli_sim.csv --seed 11 --alpha 0.05 --output ";
  ASSERT_EQ(run_cli(invocation + "/tmp/icph_disc_a.json").exit_code, 0);
  ASSERT_EQ(run_cli(invocation + "/tmp/icph_disc_b.json").exit_code, 0);
  EXPECT_EQ(read_file("/tmp/icph_disc_a.json"), read_file("/tmp/icph_disc_b.json"));

  const json payload = json::parse(read_file("/tmp/icph_disc_a.json"));
  const json schema = load_schema();
  EXPECT_TRUE(validates(schema, schema, payload));
  EXPECT_TRUE(validates(schema, schema["$defs"]["discover"], payload));
  EXPECT_TRUE(all_numbers_finite(payload));

  // s_hat must equal the intersection of accepted sets recomputed from the
  // emitted p-values.
  std::vector<int> intersection;
  bool any = false;
  for (const auto& record : payload["set_pvalues"]) {
    if (record["p_value"].get<double>() <= payload["alpha"].get<double>()) continue;
    std::vector<int> subset = record["subset"].get<std::vector<int>>();
    if (!any) {
      intersection = subset;
      any = true;
    } else {
      std::vector<int> kept;
      std::set_intersection(intersection.begin(), intersection.end(),
                            subset.begin(), subset.end(), std::back_inserter(kept));
      intersection = kept;
    }
  }
  EXPECT_EQ(payload["s_hat"].get<std::vector<int>>(), intersection);
}

TEST(Cli, MultiDegreeStatesRoutesToMaxTest) {
  ASSERT_EQ(run_cli("simulate --generator three_env_scm --n 250 --seed 13 "
                    "--output /tmp/icph_cli_md.csv")
                .exit_code,
            0);
  const auto run = run_cli(
      "test-equality /tmp/icph_cli_md.csv --subset 1,2 --number-of-states 2,3 "
      "--seed 13 --output -");
  ASSERT_EQ(run.exit_code, 0);
  const json payload = json::parse(run.out);
  ASSERT_TRUE(payload.contains("degrees"));
  EXPECT_EQ(payload["degrees"].size(), 2u);
  double max_p = 0.0;
  for (const auto& entry : payload["degrees"]) {
    max_p = std::max(max_p, entry["p_value"].get<double>());
  }
  EXPECT_EQ(payload["p_value"].get<double>(), max_p);
  const json schema = load_schema();
  EXPECT_TRUE(validates(schema, schema["$defs"]["test_equality"], payload));
}

TEST(Cli, FitAndDecodeProduceValidJson) {
  ASSERT_EQ(run_cli("simulate --generator coverage_scm --n 250 --seed 17 "
                    "--output /tmp/icph_cli_fit.csv")
                .exit_code,
            0);
  const auto fit = run_cli(
      "fit /tmp/icph_cli_fit.csv --predictors X1 --seed 17 --output -");
  ASSERT_EQ(fit.exit_code, 0);
  const json fit_payload = json::parse(fit.out);
  const json schema = load_schema();
  EXPECT_TRUE(validates(schema, schema["$defs"]["fit"], fit_payload));
  EXPECT_TRUE(all_numbers_finite(fit_payload));

  const auto decode = run_cli(
      "decode /tmp/icph_cli_fit.csv --predictors X1 --group-size 4 --seed 17 "
      "--output -");
  ASSERT_EQ(decode.exit_code, 0);
  const json decode_payload = json::parse(decode.out);
  EXPECT_TRUE(validates(schema, schema["$defs"]["decode"], decode_payload));
  EXPECT_EQ(decode_payload["states"].size(), 250u);
}

TEST(Cli, EnvSeedFallback) {
  ASSERT_EQ(run_cli("simulate --generator coverage_scm --n 80 --seed 23 "
                    "--output /tmp/icph_env_a.csv")
                .exit_code,
            0);
  const std::string command = std::string("ICPH_SEED=23 ") + ICPH_CLI_PATH +
                              " simulate --generator coverage_scm --n 80 "
                              "--output /tmp/icph_env_b.csv 2>/dev/null";
  ASSERT_EQ(WEXITSTATUS(std::system(command.c_str())), 0);
  EXPECT_EQ(read_file("/tmp/icph_env_a.csv"), read_file("/tmp/icph_env_b.csv"));
}

TEST(Cli, ConfigFilePrecedence) {
  // Subcommand options live in the subcommand's section of the flat
  // key=value file; flags override file values.
  write_file("/tmp/icph_cli_conf.ini",
             "[simulate]\nn=60\nseed=41\ngenerator=coverage_scm\n");
  const std::string base = "--config /tmp/icph_cli_conf.ini simulate --output ";
  ASSERT_EQ(run_cli(base + "/tmp/icph_conf_a.csv").exit_code, 0);
  const auto lines = read_file("/tmp/icph_conf_a.csv");
  EXPECT_EQ(std::count(lines.begin(), lines.end(), '\n'), 61);  // header + 60 rows

  ASSERT_EQ(run_cli(base + "/tmp/icph_conf_b.csv --n 30").exit_code, 0);
  const auto fewer = read_file("/tmp/icph_conf_b.csv");
  EXPECT_EQ(std::count(fewer.begin(), fewer.end(), '\n'), 31);
}

}  // namespace
