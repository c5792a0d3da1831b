#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>

#include "fldp/error.hpp"
#include "fldp/experiment.hpp"

using namespace fldp;
using nlohmann::json;

namespace {

json blob_config() {
  return json::parse(R"({
    "seed": 31,
    "dataset": {"synthetic": {"kind": "blobs", "n_per_cluster": 60,
                              "centers": [[0,0],[6,0],[0,6],[6,6]],
                              "spread_sd": 1.0}},
    "split": {"train_fraction": 0.8, "holdout_rows": 0},
    "n_clients": 3,
    "partition": {"iid": {"percent": 100}},
    "model": {"logreg": {"step": 0.1, "epochs": 5}},
    "aggregator": {"fedavg": {"weighting": "uniform"}},
    "rounds": 2
  })");
}

json regression_dp_config() {
  return json::parse(R"({
    "seed": 77,
    "dataset": {"synthetic": {"kind": "regression", "n": 400,
                              "coefficients": [2.0, 1.0], "noise_sd": 0.3}},
    "split": {"train_fraction": 0.8, "holdout_rows": 40},
    "n_clients": 2,
    "partition": {"iid": {"percent": 100}},
    "model": {"linreg": {}},
    "aggregator": {"fedavg": {"weighting": "uniform"}},
    "rounds": 1,
    "dp": {"mechanism": "laplace", "epsilon": 0.5,
           "sensitivity": {"sampled": {"n": 50, "gamma": 0.05,
                                        "record_count": 20}}},
    "budget": {"filter": "basic", "eps_g": 2.0, "delta_g": 0.0,
               "charge": "per_round"},
    "repeat_until_halt": true
  })");
}

json strip_wall_time(json report) {
  report.erase("wall_time");
  return report;
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("config validation points at the offending field") {
  json cfg = blob_config();
  cfg["dp"] = {{"mechanism", "gaussian"},
               {"epsilon", 0.5},
               {"sensitivity", {{"fixed", {{"value", 0.01}}}}}};
  try {
    ExperimentConfig::from_json(cfg);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field_path == "dp.delta");
  }
}

TEST_CASE("config rejects unknown and inconsistent fields") {
  json cfg = blob_config();
  cfg["typo_field"] = 1;
  CHECK_THROWS_AS(ExperimentConfig::from_json(cfg), ConfigError);

  cfg = blob_config();
  cfg["budget"] = {{"filter", "basic"}, {"eps_g", 1.0}};
  try {
    ExperimentConfig::from_json(cfg);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field_path == "budget");  // budget without dp
  }

  cfg = blob_config();
  cfg["aggregator"] = {{"cluster", {{"k", 3}}}};
  try {
    ExperimentConfig::from_json(cfg);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field_path.rfind("aggregator.cluster", 0) == 0);
  }

  cfg = blob_config();
  cfg["dp"] = {{"mechanism", "laplace"},
               {"epsilon", 0.5},
               {"delta", 1e-5},
               {"sensitivity", {{"fixed", {{"value", 0.01}}}}}};
  try {
    ExperimentConfig::from_json(cfg);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field_path == "dp.delta");
  }

  cfg = blob_config();
  cfg["repeat_until_halt"] = true;
  CHECK_THROWS_AS(ExperimentConfig::from_json(cfg), ConfigError);
}

TEST_CASE("config echo expands defaults") {
  json cfg = blob_config();
  cfg.erase("split");
  cfg.erase("rounds");
  const ExperimentConfig parsed = ExperimentConfig::from_json(cfg);
  const auto echo = parsed.echo();
  CHECK(echo["split"]["train_fraction"] == 0.8);
  CHECK(echo["rounds"] == 1);
  CHECK(echo["dp"].is_null());
  CHECK(echo["repeat_until_halt"] == false);
}

TEST_CASE("experiment report validates against the printed schema") {
  const ExperimentConfig cfg = ExperimentConfig::from_json(blob_config());
  const ExperimentResult result = run_experiment(cfg);
  CHECK_NOTHROW(check_report_against_schema(result.report));

  const ExperimentConfig dp_cfg =
      ExperimentConfig::from_json(regression_dp_config());
  const ExperimentResult dp_result = run_experiment(dp_cfg);
  CHECK_NOTHROW(check_report_against_schema(dp_result.report));
}

TEST_CASE("schema violations are caught by the checker") {
  const ExperimentConfig cfg = ExperimentConfig::from_json(blob_config());
  json report = run_experiment(cfg).report;
  report.erase("halted");
  CHECK_THROWS_AS(check_report_against_schema(report), Error);
  report = run_experiment(cfg).report;
  report["unexpected"] = 1;
  CHECK_THROWS_AS(check_report_against_schema(report), Error);
}

TEST_CASE("schema document carries the contract fields") {
  const auto schema = report_schema();
  CHECK(schema.contains("schema_version"));
  for (const char* field : {"config_echo", "per_round", "runs",
                            "privacy_ledger", "halted", "wall_time"}) {
    CHECK(schema["fields"].contains(field));
  }
}

TEST_CASE("same config and seed produce byte-identical reports") {
  const ExperimentConfig cfg =
      ExperimentConfig::from_json(regression_dp_config());
  const json a = strip_wall_time(run_experiment(cfg).report);
  const json b = strip_wall_time(run_experiment(cfg).report);
  CHECK(a.dump() == b.dump());
}

TEST_CASE("ledger totals in the report match basic composition") {
  const ExperimentConfig cfg =
      ExperimentConfig::from_json(regression_dp_config());
  const json report = run_experiment(cfg).report;
  double eps = 0.0, delta = 0.0;
  for (const auto& entry : report["privacy_ledger"]["entries"]) {
    if (!entry["spent"].get<bool>()) continue;
    eps += entry["epsilon"].get<double>();
    delta += entry["delta"].get<double>();
  }
  CHECK(report["privacy_ledger"]["total_epsilon"].get<double>() ==
        doctest::Approx(eps).epsilon(1e-12));
  CHECK(report["privacy_ledger"]["total_delta"].get<double>() ==
        doctest::Approx(delta).epsilon(1e-12));
  // Budget 2.0 at 0.5 per run: exactly 4 completed runs.
  CHECK(report["completed_runs"] == 4);
  CHECK(report["halted"] == true);
}

TEST_CASE("client rows never appear in the report") {
  // Plant an unmistakable sentinel in the dataset and scan the serialized
  // report for it: the orchestrator boundary must only emit aggregates.
  const auto dir = std::filesystem::temp_directory_path();
  const auto csv_path = dir / "fldp_sentinel.csv";
  {
    std::ofstream out(csv_path);
    out << "a,y\n";
    for (int i = 0; i < 40; ++i) {
      out << (i % 2 == 0 ? "777.125" : "3.5") << "," << (i % 3) * 1.0 << "\n";
    }
  }
  json cfg = blob_config();
  cfg["dataset"] = {{"csv", {{"path", csv_path.string()},
                             {"label_column", "y"}}}};
  cfg["n_clients"] = 2;
  cfg["model"] = {{"logreg", {{"step", 0.1}, {"epochs", 2}}}};
  const ExperimentResult result =
      run_experiment(ExperimentConfig::from_json(cfg));
  const std::string dumped = result.report.dump();
  CHECK(dumped.find("777.125") == std::string::npos);
  std::filesystem::remove(csv_path);
}

TEST_CASE("gaussian access runs end to end") {
  json cfg = regression_dp_config();
  cfg["dp"] = {{"mechanism", "gaussian"},
               {"epsilon", 0.5},
               {"delta", 1e-5},
               {"sensitivity", {{"fixed", {{"value", 0.01}}}}}};
  cfg.erase("budget");
  cfg["repeat_until_halt"] = false;
  const ExperimentResult result =
      run_experiment(ExperimentConfig::from_json(cfg));
  CHECK(result.report["halted"] == false);
  const auto& ledger = result.report["privacy_ledger"];
  CHECK(ledger["entries"].size() == 1);  // one per-round charge recorded
  CHECK(ledger["total_delta"].get<double>() == doctest::Approx(1e-5));
}

#ifdef FLDP_CLI_PATH
TEST_CASE("cli binary exit codes and error objects") {
  const auto dir = std::filesystem::temp_directory_path();
  const auto cfg_path = dir / "fldp_cli_cfg.json";
  const auto out_path = dir / "fldp_cli_out.json";
  auto run_cli = [&](const std::string& args) {
    const std::string cmd = std::string(FLDP_CLI_PATH) + " " + args + " > " +
                            (dir / "fldp_cli_stdout.txt").string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
  };

  {  // invalid config: gaussian without delta -> exit 2
    json cfg = blob_config();
    cfg["dp"] = {{"mechanism", "gaussian"},
                 {"epsilon", 0.5},
                 {"sensitivity", {{"fixed", {{"value", 0.01}}}}}};
    std::ofstream(cfg_path) << cfg.dump();
    CHECK(run_cli("run " + cfg_path.string() + " --out " + out_path.string()) ==
          2);
    std::ifstream captured(dir / "fldp_cli_stdout.txt");
    json err;
    captured >> err;
    CHECK(err["error"]["exit_code"] == 2);
    CHECK(err["error"]["field"] == "dp.delta");
  }

  {  // missing csv -> exit 3
    json cfg = blob_config();
    cfg["dataset"] = {{"csv", {{"path", "/nonexistent/data.csv"},
                               {"label_column", "y"}}}};
    std::ofstream(cfg_path) << cfg.dump();
    CHECK(run_cli("run " + cfg_path.string() + " --out " + out_path.string()) ==
          3);
  }

  {  // happy path -> exit 0, report written and schema-valid
    std::ofstream(cfg_path) << blob_config().dump();
    CHECK(run_cli("run " + cfg_path.string() + " --out " + out_path.string()) ==
          0);
    std::ifstream in(out_path);
    json report;
    in >> report;
    CHECK_NOTHROW(check_report_against_schema(report));
  }

  CHECK(run_cli("schema") == 0);
  std::filesystem::remove(cfg_path);
  std::filesystem::remove(out_path);
}
#endif

TEST_SUITE_END();
