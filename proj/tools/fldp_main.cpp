// Experiment runner: `fldp run <config.json> --out <report.json> [--seed N]`
// executes one configured federated-learning experiment and writes the
// structured report; `fldp schema` prints the report schema.
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 runtime
// error. On failure a machine-readable error object is printed to stdout.

#include <CLI11.hpp>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>

#include "fldp/error.hpp"
#include "fldp/experiment.hpp"

namespace {

int fail(int code, const std::string& kind, const std::string& message,
         const std::string& field = "") {
  nlohmann::ordered_json err;
  err["error"]["exit_code"] = code;
  err["error"]["kind"] = kind;
  err["error"]["message"] = message;
  if (!field.empty()) err["error"]["field"] = field;
  std::cout << err.dump(2) << std::endl;
  return code;
}

int run_command(const std::string& config_path, const std::string& out_path,
                std::optional<std::uint64_t> seed_override) {
  nlohmann::json config_json;
  {
    std::ifstream in(config_path);
    if (!in) {
      return fail(2, "config", "cannot open config file: " + config_path);
    }
    try {
      in >> config_json;
    } catch (const nlohmann::json::exception& e) {
      return fail(2, "config", std::string("config is not valid JSON: ") + e.what());
    }
  }

  try {
    fldp::ExperimentConfig config =
        fldp::ExperimentConfig::from_json(config_json);
    if (seed_override.has_value()) config.seed = *seed_override;

    fldp::ExperimentResult result = fldp::run_experiment(config);

    std::ofstream out(out_path);
    if (!out) {
      return fail(4, "runtime", "cannot write report to " + out_path);
    }
    out << result.report.dump(2) << "\n";
    return 0;
  } catch (const fldp::ConfigError& e) {
    return fail(2, "config", e.what(), e.field_path);
  } catch (const fldp::DataError& e) {
    return fail(3, "data", e.what());
  } catch (const std::exception& e) {
    return fail(4, "runtime", e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated learning simulator with differential privacy"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  std::uint64_t seed = 0;
  bool seed_set = false;

  CLI::App* run = app.add_subcommand("run", "Run an experiment config");
  run->add_option("config", config_path, "Experiment config (JSON)")
      ->required();
  run->add_option("--out", out_path, "Report output path")->required();
  run->add_option("--seed", seed, "Override the config seed")
      ->each([&](const std::string&) { seed_set = true; });

  CLI::App* schema =
      app.add_subcommand("schema", "Print the versioned report schema");

  CLI11_PARSE(app, argc, argv);

  if (schema->parsed()) {
    std::cout << fldp::report_schema().dump(2) << std::endl;
    return 0;
  }
  return run_command(config_path, out_path,
                     seed_set ? std::optional<std::uint64_t>(seed)
                              : std::nullopt);
}
