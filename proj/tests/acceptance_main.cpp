// Acceptance suite: one check per release criterion, each printed as a
// single pass/fail line. Exit code is the number of failed criteria.

#include <Eigen/Dense>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <json.hpp>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "fldp/accountant.hpp"
#include "fldp/dataset.hpp"
#include "fldp/experiment.hpp"
#include "fldp/mechanisms.hpp"
#include "fldp/models.hpp"
#include "fldp/orchestrator.hpp"
#include "fldp/rng.hpp"
#include "fldp/sensitivity.hpp"

using namespace fldp;
using nlohmann::json;

namespace {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool condition, const std::string& message) {
  if (!condition) throw Failure(message);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.5f", v);
  return buf;
}

// Shared housing CSV so every criterion exercises the ingestion path the
// experiment configs use.
const std::string& housing_csv_path() {
  static const std::string path = [] {
    const auto p =
        std::filesystem::temp_directory_path() / "fldp_acceptance_housing.csv";
    write_csv(p, synthesize_housing(20640, 99), "median_house_value");
    return p.string();
  }();
  return path;
}

json housing_base_config(std::uint64_t seed) {
  json cfg;
  cfg["seed"] = seed;
  cfg["dataset"] = {{"csv", {{"path", housing_csv_path()},
                             {"label_column", "median_house_value"}}}};
  cfg["split"] = {{"train_fraction", 0.8}, {"holdout_rows", 2000}};
  cfg["n_clients"] = 5;
  cfg["partition"] = {{"iid", {{"percent", 100.0}}}};
  cfg["model"] = {{"linreg", json::object()}};
  cfg["aggregator"] = {{"fedavg", {{"weighting", "uniform"}}}};
  cfg["rounds"] = 1;
  return cfg;
}

json housing_dp_config(std::uint64_t seed, double epsilon) {
  json cfg = housing_base_config(seed);
  cfg["dp"] = {{"mechanism", "laplace"},
               {"epsilon", epsilon},
               {"sensitivity", {{"sampled", {{"n", 4000},
                                             {"gamma", 0.05},
                                             {"record_count", 2000}}}}}};
  cfg["budget"] = {{"filter", "basic"},
                   {"eps_g", 4.0},
                   {"delta_g", 0.0},
                   {"charge", "per_round"}};
  cfg["repeat_until_halt"] = true;
  return cfg;
}

double report_avg_r2(const json& report) {
  return report["averaged_metrics"]["r2"].get<double>();
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

void criterion_1_federated_matches_centralized(std::string& note) {
  const LabeledDataset housing =
      load_csv(housing_csv_path(), "median_house_value");
  for (std::uint64_t seed : {11ULL, 12ULL, 13ULL}) {
    const SplitResult parts = split(housing, SplitSpec{0.8, 2000}, seed);
    LinearRegression central(2);
    central.train(parts.train);
    const Metrics central_m = central.evaluate(parts.test);

    const FederatedPartition partition =
        partition_iid(parts.train, 5, 100.0, seed + 50);
    std::vector<ClientNode> clients;
    for (int i = 0; i < 5; ++i) {
      const SplitResult local =
          split(partition.shards[static_cast<std::size_t>(i)],
                SplitSpec{0.8, 0}, seed + 100 + static_cast<std::uint64_t>(i));
      ClientNode node;
      node.id = i;
      node.train_set = local.train;
      node.eval_set = local.test;
      node.test_set = local.test;
      node.model = std::make_unique<LinearRegression>(2);
      clients.push_back(std::move(node));
    }
    Rng mech(seed);
    const AggregateFn fedavg = [](const std::vector<ParamVector>& p,
                                  const std::vector<Eigen::Index>&) {
      return fed_avg(p, ClientWeights::uniform(static_cast<int>(p.size())));
    };
    const auto reports = run_rounds(clients, fedavg, ParamAccess::plain(), 1,
                                    parts.test, mech);
    const Metrics& fed_m = *reports.back().global;

    require(std::abs(fed_m.rmse - central_m.rmse) <= 0.002,
            "fed/central rmse gap " + fmt(std::abs(fed_m.rmse - central_m.rmse)));
    for (double rmse : {fed_m.rmse, central_m.rmse}) {
      require(rmse >= 0.80 && rmse <= 0.84, "rmse out of window: " + fmt(rmse));
    }
    for (double r2 : {*fed_m.r2, *central_m.r2}) {
      require(r2 >= 0.47 && r2 <= 0.53, "r2 out of window: " + fmt(r2));
    }
    if (seed == 11ULL) {
      note = "rmse fed " + fmt(fed_m.rmse) + " central " + fmt(central_m.rmse) +
             ", r2 " + fmt(*fed_m.r2);
    }
  }
  // The config-driven path must land in the same window.
  const ExperimentResult via_cli = run_experiment(
      ExperimentConfig::from_json(housing_base_config(2024)));
  const double cli_rmse =
      via_cli.report["per_round"][0]["global"]["rmse"].get<double>();
  require(cli_rmse >= 0.80 && cli_rmse <= 0.84,
          "config-driven rmse out of window: " + fmt(cli_rmse));
}

void criterion_2_dp_degradation_ordering(std::string& note) {
  const std::uint64_t seed = 2024;
  const ExperimentResult np = run_experiment(
      ExperimentConfig::from_json(housing_base_config(seed)));
  const double r2_np = report_avg_r2(np.report);

  std::map<double, double> r2;
  for (double eps : {0.2, 0.5, 0.8}) {
    const ExperimentResult res = run_experiment(
        ExperimentConfig::from_json(housing_dp_config(seed, eps)));
    r2[eps] = report_avg_r2(res.report);
  }
  note = "r2: eps0.2 " + fmt(r2[0.2]) + ", eps0.5 " + fmt(r2[0.5]) +
         ", eps0.8 " + fmt(r2[0.8]) + ", np " + fmt(r2_np);
  require(r2[0.2] < r2[0.5], "ordering broken at 0.2 vs 0.5: " + note);
  require(r2[0.5] < r2[0.8], "ordering broken at 0.5 vs 0.8: " + note);
  require(r2[0.8] < r2_np, "ordering broken at 0.8 vs non-private: " + note);
  require(r2[0.5] >= 0.40 && r2[0.5] <= 0.51,
          "r2(eps=0.5) outside [0.40, 0.51]: " + fmt(r2[0.5]));
}

void criterion_3_budget_run_counts(std::string& note) {
  // Run counts depend only on the filter arithmetic; a small synthetic
  // dataset keeps the repeated runs fast.
  const std::array<std::pair<double, long>, 3> cases = {
      std::pair{0.2, 20L}, std::pair{0.5, 8L}, std::pair{0.8, 5L}};
  for (const auto& [eps, expected] : cases) {
    json cfg;
    cfg["seed"] = 5;
    cfg["dataset"] = {{"synthetic", {{"kind", "regression"},
                                     {"n", 600},
                                     {"coefficients", {2.0, 1.0}},
                                     {"noise_sd", 0.3}}}};
    cfg["split"] = {{"train_fraction", 0.8}, {"holdout_rows", 0}};
    cfg["n_clients"] = 3;
    cfg["partition"] = {{"iid", {{"percent", 100.0}}}};
    cfg["model"] = {{"linreg", json::object()}};
    cfg["aggregator"] = {{"fedavg", {{"weighting", "uniform"}}}};
    cfg["rounds"] = 1;
    cfg["dp"] = {{"mechanism", "laplace"},
                 {"epsilon", eps},
                 {"sensitivity", {{"fixed", {{"value", 0.008294}}}}}};
    cfg["budget"] = {{"filter", "basic"},
                     {"eps_g", 4.0},
                     {"delta_g", 0.0},
                     {"charge", "per_round"}};
    cfg["repeat_until_halt"] = true;
    const ExperimentResult res =
        run_experiment(ExperimentConfig::from_json(cfg));
    const long completed = res.report["completed_runs"].get<long>();
    require(completed == expected,
            "eps " + fmt(eps) + ": " + std::to_string(completed) +
                " completed runs, expected " + std::to_string(expected));
  }
  note = "20 / 8 / 5 runs at eps 0.2 / 0.5 / 0.8";
}

void criterion_4_randomized_response_exact(std::string& note) {
  int ones_truth1 = 0, ones_truth0 = 0;
  for (bool first : {false, true}) {
    for (bool second : {false, true}) {
      ones_truth1 += randomized_response_outcome(first, second, 1);
      ones_truth0 += randomized_response_outcome(first, second, 0);
    }
  }
  require(ones_truth1 == 3 && ones_truth0 == 1,
          "coin enumeration gave " + std::to_string(ones_truth1) + "/" +
              std::to_string(ones_truth0));
  Rng rng(1);
  const DpCost cost = randomized_response(0, rng).cost;
  require(cost.epsilon == std::log(3.0) && cost.delta == 0.0,
          "cost is not (ln 3, 0)");
  note = "likelihood ratio exactly 3, cost (ln 3, 0)";
}

void criterion_5_mechanism_statistics(std::string& note) {
  const int n = 100000;
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(1);

  Rng lap_rng(501);
  const double b = 1.0 / 0.5;  // sensitivity 1, epsilon 0.5
  double sum = 0, sum_sq = 0;
  for (int i = 0; i < n; ++i) {
    const double x =
        laplace_mechanism(zero, SensitivityNorm{NormKind::kL1, 1.0}, 0.5,
                          lap_rng)
            .values[0];
    sum += x;
    sum_sq += x * x;
  }
  const double lap_var = sum_sq / n - (sum / n) * (sum / n);
  require(std::abs(lap_var - 2 * b * b) <= 0.05 * 2 * b * b,
          "laplace variance " + fmt(lap_var) + " vs 2b^2 = " + fmt(2 * b * b));

  Rng gauss_rng(502);
  const double sigma = gaussian_sigma(1.0, 0.5, 1e-5);
  sum = 0;
  sum_sq = 0;
  for (int i = 0; i < n; ++i) {
    const double x =
        gaussian_mechanism(zero, SensitivityNorm{NormKind::kL2, 1.0}, 0.5, 1e-5,
                           gauss_rng)
            .values[0];
    sum += x;
    sum_sq += x * x;
  }
  const double sd = std::sqrt(sum_sq / n - (sum / n) * (sum / n));
  require(std::abs(sd - sigma) <= 0.05 * sigma,
          "gaussian sd " + fmt(sd) + " vs sigma " + fmt(sigma));
  note = "laplace var " + fmt(lap_var) + " (target " + fmt(2 * b * b) +
         "), gaussian sd " + fmt(sd) + " (target " + fmt(sigma) + ")";
}

void criterion_6_empirical_dp_ratio(std::string& note) {
  const double epsilon = 0.5;
  const double bound = std::exp(epsilon) * 1.15;
  const SensitivityNorm sens{NormKind::kL1, 1.0};
  const std::array<int, 5> base = {1, 1, 0, 1, 0};
  const int trials = 1000000;

  auto histogram = [&](const std::array<int, 5>& db, std::uint64_t seed) {
    int count = 0;
    for (int bit : db) count += bit;
    Eigen::VectorXd v(1);
    v << static_cast<double>(count);
    Rng rng(seed);
    std::map<long, int> hist;
    for (int t = 0; t < trials; ++t) {
      hist[std::lround(laplace_mechanism(v, sens, epsilon, rng).values[0])]++;
    }
    return hist;
  };

  const auto base_hist = histogram(base, 600);
  double worst = 1.0;
  int buckets = 0;
  for (std::size_t flip = 0; flip < base.size(); ++flip) {
    std::array<int, 5> neighbour = base;
    neighbour[flip] ^= 1;
    const auto nb_hist = histogram(neighbour, 610 + flip);
    for (const auto& [bucket, count] : base_hist) {
      const auto it = nb_hist.find(bucket);
      if (it == nb_hist.end()) continue;
      if (count < 500 || it->second < 500) continue;
      const double ratio =
          std::max(static_cast<double>(count) / it->second,
                   static_cast<double>(it->second) / count);
      worst = std::max(worst, ratio);
      ++buckets;
      require(ratio <= bound, "bucket " + std::to_string(bucket) + " ratio " +
                                  fmt(ratio) + " > " + fmt(bound));
    }
  }
  require(buckets > 0, "no well-populated buckets to compare");
  note = "worst ratio " + fmt(worst) + " <= " + fmt(bound) + " over " +
         std::to_string(buckets) + " bucket pairs";
}

void criterion_7_composition_oracles(std::string& note) {
  Rng rng(700);
  for (int i = 0; i < 50; ++i) {
    const double eps = 0.01 + rng.uniform01();
    const double delta = rng.uniform01() * 1e-4;
    const long k = 1 + static_cast<long>(rng.index(1000));
    const double delta_prime = 1e-8 + rng.uniform01() * 1e-3;

    const DpCost adv = advanced_composition(eps, delta, k, delta_prime);
    const long double kd = static_cast<long double>(k);
    const long double direct_eps =
        static_cast<long double>(eps) *
            std::sqrt(2.0L * kd * std::log(1.0L / delta_prime)) +
        kd * eps * std::expm1(static_cast<long double>(eps));
    const long double direct_delta = kd * delta + delta_prime;
    require(std::abs(adv.epsilon - static_cast<double>(direct_eps)) <=
                1e-12 * std::abs(static_cast<double>(direct_eps)),
            "advanced composition mismatch at case " + std::to_string(i));
    require(std::abs(adv.delta - static_cast<double>(direct_delta)) <=
                1e-12 * std::abs(static_cast<double>(direct_delta)),
            "advanced composition delta mismatch at case " + std::to_string(i));

    const long n = 1 + static_cast<long>(rng.index(10000));
    const long m = static_cast<long>(rng.index(static_cast<std::uint64_t>(n)));
    const DpCost sub = subsample_amplify(DpCost{eps, delta}, m, n);
    const long double ratio = static_cast<long double>(m) / n;
    const long double direct_sub_eps =
        std::log(1.0L + ratio * std::expm1(static_cast<long double>(eps)));
    require(std::abs(sub.epsilon - static_cast<double>(direct_sub_eps)) <=
                1e-12 * std::max(1e-300, std::abs(static_cast<double>(direct_sub_eps))),
            "subsampling mismatch at case " + std::to_string(i));

    const DpCost same = subsample_amplify(DpCost{eps, delta}, n, n);
    require(same.epsilon == eps && same.delta == delta,
            "subsampling identity at m = n is not exact");
  }
  note = "50 randomized cases within 1e-12 relative error";
}

void criterion_8_advanced_filter_halt_step(std::string& note) {
  const double eps_g = 4.0, delta_g = 1e-3, eps = 0.5;
  // Independent K evaluation per step.
  const double h = eps_g * eps_g / (28.04 * std::log(1.0 / delta_g));
  int oracle_step = 0;
  for (int k = 1; k <= 1000 && oracle_step == 0; ++k) {
    const double sq = k * eps * eps;
    const double k_value =
        std::sqrt((sq + h) * (2.0 + std::log(sq / h + 1.0)) *
                  std::log(2.0 / delta_g)) +
        k * eps * (std::exp(eps) - 1.0) / 2.0;
    if (k_value > eps_g) oracle_step = k;
  }
  FilterState filter(FilterKind::kAdvanced, eps_g, delta_g);
  int halt_step = 0;
  for (int k = 1; k <= 1000 && halt_step == 0; ++k) {
    if (filter.step(DpCost{eps, 0.0}) == FilterDecision::kHalt) halt_step = k;
  }
  require(halt_step == oracle_step,
          "filter HALTed at step " + std::to_string(halt_step) +
              ", oracle says " + std::to_string(oracle_step));
  note = "HALT at step " + std::to_string(halt_step) +
         " where K first exceeds eps_g";
}

void criterion_9_classification_desk_scale(std::string& note) {
  const std::uint64_t seed = 900;
  std::vector<Eigen::VectorXd> centers(4, Eigen::VectorXd(2));
  centers[0] << 0, 0;
  centers[1] << 4, 0;
  centers[2] << 0, 4;
  centers[3] << 4, 4;
  const LabeledDataset blobs = synthesize_blobs(300, centers, 1.25, seed);
  const SplitResult parts = split(blobs, SplitSpec{0.8, 0}, seed);
  const int rounds = 10, epochs = 5;
  const double step = 0.1;

  LogisticRegression central(2, 4, step, epochs);
  for (int r = 0; r < rounds; ++r) central.train(parts.train);
  const double acc_central = central.evaluate(parts.test).accuracy;

  const AggregateFn fedavg = [](const std::vector<ParamVector>& p,
                                const std::vector<Eigen::Index>&) {
    return fed_avg(p, ClientWeights::uniform(static_cast<int>(p.size())));
  };
  auto federated_accuracy = [&](const FederatedPartition& partition) {
    std::vector<ClientNode> clients;
    for (int i = 0; i < 5; ++i) {
      ClientNode node;
      node.id = i;
      node.train_set = partition.shards[static_cast<std::size_t>(i)];
      node.eval_set = parts.test;
      node.test_set = parts.test;
      node.model = std::make_unique<LogisticRegression>(2, 4, step, epochs);
      clients.push_back(std::move(node));
    }
    Rng mech(seed);
    const auto reports = run_rounds(clients, fedavg, ParamAccess::plain(),
                                    rounds, parts.test, mech);
    return reports.back().global->accuracy;
  };

  const double acc_iid =
      federated_accuracy(partition_iid(parts.train, 5, 100.0, seed + 1));
  const double acc_skew =
      federated_accuracy(partition_label_skew(parts.train, 5, 2, seed + 2));

  note = "accuracy central " + fmt(acc_central) + ", iid " + fmt(acc_iid) +
         ", label-skew " + fmt(acc_skew);
  require(std::abs(acc_iid - acc_central) <= 0.02,
          "iid accuracy not within 2 points of centralized: " + note);
  require(acc_skew >= 0.8 * acc_central,
          "label-skew accuracy below 0.8 of centralized: " + note);
  require(acc_iid >= acc_skew, "iid below label-skew: " + note);
}

void criterion_10_sensitivity_sampler(std::string& note) {
  const SamplingDistribution toy{synthesize_regression(
      50, 1, Eigen::Vector2d(1.0, 0.0), 0.1, 1)};
  const DatasetQuery constant = [](const LabeledDataset&) {
    return Eigen::VectorXd::Constant(3, 4.2);
  };
  const SensitivityEstimate zero =
      sample_sensitivity(constant, toy, 100, 0.05, NormKind::kL1, 10, 2);
  require(zero.max_sensitivity == 0.0 && zero.mean_sensitivity == 0.0,
          "constant query must give exactly (0, 0)");

  const LabeledDataset housing =
      load_csv(housing_csv_path(), "median_house_value");
  const SplitResult parts = split(housing, SplitSpec{0.8, 2000}, 1);
  const DatasetQuery linreg_params = [](const LabeledDataset& ds) {
    LinearRegression model(2);
    model.train(ds);
    return model.get_params().values;
  };
  const SensitivityEstimate est =
      sample_sensitivity(linreg_params, SamplingDistribution{parts.holdout},
                         4000, 0.05, NormKind::kL1, 2000, 10);
  // One order of magnitude around the published 8.3e-3.
  require(est.max_sensitivity >= 8.3e-4 && est.max_sensitivity <= 8.3e-2,
          "max sensitivity " + fmt(est.max_sensitivity) +
              " outside [8.3e-4, 8.3e-2]");
  char buf[96];
  std::snprintf(buf, sizeof buf, "max %.6f mean %.6f", est.max_sensitivity,
                est.mean_sensitivity);
  note = buf;
}

void criterion_11_determinism(std::string& note) {
  const json cfg_json = housing_dp_config(4242, 0.5);
  const ExperimentConfig cfg = ExperimentConfig::from_json(cfg_json);
  json a = run_experiment(cfg).report;
  json b = run_experiment(cfg).report;
  a.erase("wall_time");
  b.erase("wall_time");
  require(a.dump() == b.dump(),
          "two runs of the same config+seed differ beyond wall_time");
  note = "byte-identical reports (wall_time excluded)";
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double time_limit_s;  // 0 = no stated limit
    std::function<void(std::string&)> fn;
  };
  const std::vector<Criterion> criteria = {
      {1, "federated ~= centralized regression", 5.0,
       criterion_1_federated_matches_centralized},
      {2, "dp degradation ordering", 120.0, criterion_2_dp_degradation_ordering},
      {3, "budget run counts 20/8/5", 0.0, criterion_3_budget_run_counts},
      {4, "randomized response ratio exactly 3", 0.0,
       criterion_4_randomized_response_exact},
      {5, "mechanism statistics at 1e5 draws", 2.0,
       criterion_5_mechanism_statistics},
      {6, "empirical dp ratio on counting query", 30.0,
       criterion_6_empirical_dp_ratio},
      {7, "composition formula oracles", 0.0, criterion_7_composition_oracles},
      {8, "advanced filter halt step", 0.0,
       criterion_8_advanced_filter_halt_step},
      {9, "desk-scale classification", 30.0,
       criterion_9_classification_desk_scale},
      {10, "sensitivity sampler", 0.0, criterion_10_sensitivity_sampler},
      {11, "report determinism", 0.0, criterion_11_determinism},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    const auto start = std::chrono::steady_clock::now();
    std::string note;
    std::string error;
    try {
      criterion.fn(note);
    } catch (const std::exception& e) {
      error = e.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    if (error.empty() && criterion.time_limit_s > 0 &&
        elapsed > criterion.time_limit_s) {
      error = "exceeded time limit of " + fmt(criterion.time_limit_s) + "s";
    }
    const bool pass = error.empty();
    if (!pass) ++failures;
    std::printf("[%s] criterion %2d: %s (%.2fs)%s%s\n", pass ? "PASS" : "FAIL",
                criterion.id, criterion.name, elapsed,
                note.empty() && error.empty() ? "" : " -- ",
                pass ? note.c_str() : error.c_str());
  }
  std::printf("%d/%zu criteria passed\n",
              static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures;
}
