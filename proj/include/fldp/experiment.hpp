#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fldp/dataset.hpp"
#include "fldp/orchestrator.hpp"

namespace fldp {

/// Fully validated experiment description. Parsing rejects unknown keys and
/// cross-field inconsistencies with the offending field path in the error.
struct ExperimentConfig {
  std::uint64_t seed = 1234;

  // dataset
  struct CsvSource {
    std::string path;
    std::string label_column;
  };
  struct SyntheticSource {
    std::string kind;  // "regression" | "blobs" | "housing"
    Eigen::Index n = 0;                        // regression, housing
    std::vector<double> coefficients;          // regression
    double noise_sd = 0.0;                     // regression
    Eigen::Index n_per_cluster = 0;            // blobs
    std::vector<std::vector<double>> centers;  // blobs
    double spread_sd = 0.0;                    // blobs
  };
  std::optional<CsvSource> csv;
  std::optional<SyntheticSource> synthetic;

  SplitSpec split_spec;
  int n_clients = 1;

  struct Partition {
    std::string kind = "iid";  // "iid" | "label_skew"
    double percent = 100.0;
    int labels_per_client = 1;
  } partition;

  struct ModelSpec {
    std::string kind;  // "linreg" | "logreg" | "kmeans"
    double step = 0.1;
    int epochs = 5;
    int k = 0;
  } model;

  struct AggregatorSpec {
    std::string kind = "fedavg";  // "fedavg" | "cluster" | "coop"
    std::string weighting = "uniform";  // fedavg: "uniform" | "by_samples"
    int k = 0;                          // cluster
    std::string schedule_path;          // coop
  } aggregator;

  long rounds = 1;

  struct DpSpec {
    std::string mechanism;  // "laplace" | "gaussian"
    double epsilon = 0.0;
    std::optional<double> delta;
    bool sampled = false;
    double fixed_value = 0.0;    // fixed sensitivity
    long sample_n = 0;           // sampled sensitivity
    double gamma = 0.05;
    Eigen::Index record_count = 0;  // 0 = default (pool size / 4)
  };
  std::optional<DpSpec> dp;

  struct BudgetSpec {
    std::string filter = "basic";  // "basic" | "advanced"
    double eps_g = 0.0;
    double delta_g = 0.0;
    std::string charge = "per_round";  // "per_round" | "per_read"
  };
  std::optional<BudgetSpec> budget;

  bool repeat_until_halt = false;

  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::ordered_json echo() const;
};

struct ExperimentResult {
  nlohmann::ordered_json report;
  bool halted = false;
  long completed_runs = 0;
};

/// Executes the configured experiment end to end: data, partition, optional
/// sensitivity sampling, rounds (repeated whole experiments when
/// repeat_until_halt is set, until the budget filter HALTs), and assembles
/// the structured report.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// The versioned report schema: field names and types of every report the
/// runner emits.
nlohmann::ordered_json report_schema();

/// Structural validation of a report against the schema; throws Error with
/// the failing path on mismatch.
void check_report_against_schema(const nlohmann::json& report);

}  // namespace fldp
