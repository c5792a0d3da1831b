#include "fldp/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <set>

#include "fldp/error.hpp"
#include "fldp/rng.hpp"
#include "fldp/sensitivity.hpp"

namespace fldp {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// Seed-stream tags; one per independent source of randomness.
enum StreamTag : std::uint64_t {
  kDataStream = 1,
  kSplitStream = 2,
  kPartitionStream = 3,
  kSensitivityStream = 4,
  kMechanismStream = 5,
  kClientSplitStream = 6,
};

// --------------------------------------------------------------------------
// Config parsing
// --------------------------------------------------------------------------

void expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
}

void reject_unknown_keys(const json& j, const std::string& path,
                         const std::set<std::string>& allowed) {
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) {
      throw ConfigError(path.empty() ? key : path + "." + key,
                        "unknown field");
    }
  }
}

template <typename T>
T get_field(const json& j, const std::string& path, const std::string& key) {
  if (!j.contains(key)) throw ConfigError(path + key, "missing required field");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path + key, "wrong type");
  }
}

template <typename T>
T get_field_or(const json& j, const std::string& path, const std::string& key,
               T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path + key, "wrong type");
  }
}

ExperimentConfig::SyntheticSource parse_synthetic(const json& j) {
  const std::string path = "dataset.synthetic.";
  ExperimentConfig::SyntheticSource s;
  s.kind = get_field<std::string>(j, path, "kind");
  if (s.kind == "regression") {
    reject_unknown_keys(j, "dataset.synthetic",
                        {"kind", "n", "coefficients", "noise_sd"});
    s.n = get_field<Eigen::Index>(j, path, "n");
    s.coefficients = get_field<std::vector<double>>(j, path, "coefficients");
    s.noise_sd = get_field_or<double>(j, path, "noise_sd", 0.0);
    if (s.n < 1) throw ConfigError(path + "n", "must be >= 1");
    if (s.coefficients.size() < 2) {
      throw ConfigError(path + "coefficients",
                        "need at least [slope, intercept]");
    }
    if (s.noise_sd < 0) throw ConfigError(path + "noise_sd", "must be >= 0");
  } else if (s.kind == "blobs") {
    reject_unknown_keys(j, "dataset.synthetic",
                        {"kind", "n_per_cluster", "centers", "spread_sd"});
    s.n_per_cluster = get_field<Eigen::Index>(j, path, "n_per_cluster");
    s.centers =
        get_field<std::vector<std::vector<double>>>(j, path, "centers");
    s.spread_sd = get_field_or<double>(j, path, "spread_sd", 0.0);
    if (s.n_per_cluster < 1) {
      throw ConfigError(path + "n_per_cluster", "must be >= 1");
    }
    if (s.centers.empty()) throw ConfigError(path + "centers", "must be nonempty");
    for (const auto& c : s.centers) {
      if (c.size() != s.centers.front().size()) {
        throw ConfigError(path + "centers", "centers have mixed dimensions");
      }
    }
    if (s.spread_sd < 0) throw ConfigError(path + "spread_sd", "must be >= 0");
  } else if (s.kind == "housing") {
    reject_unknown_keys(j, "dataset.synthetic", {"kind", "n"});
    s.n = get_field_or<Eigen::Index>(j, path, "n", 20640);
    if (s.n < 2) throw ConfigError(path + "n", "must be >= 2");
  } else {
    throw ConfigError(path + "kind",
                      "expected \"regression\", \"blobs\" or \"housing\"");
  }
  return s;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  expect_object(j, "config");
  reject_unknown_keys(j, "",
                      {"seed", "dataset", "split", "n_clients", "partition",
                       "model", "aggregator", "rounds", "dp", "budget",
                       "repeat_until_halt"});
  ExperimentConfig c;
  c.seed = get_field_or<std::uint64_t>(j, "", "seed", 1234);

  // dataset
  if (!j.contains("dataset")) throw ConfigError("dataset", "missing required field");
  const json& ds = j.at("dataset");
  expect_object(ds, "dataset");
  reject_unknown_keys(ds, "dataset", {"csv", "synthetic"});
  if (ds.contains("csv") == ds.contains("synthetic")) {
    throw ConfigError("dataset", "exactly one of csv or synthetic required");
  }
  if (ds.contains("csv")) {
    const json& csv = ds.at("csv");
    expect_object(csv, "dataset.csv");
    reject_unknown_keys(csv, "dataset.csv", {"path", "label_column"});
    c.csv = CsvSource{get_field<std::string>(csv, "dataset.csv.", "path"),
                      get_field<std::string>(csv, "dataset.csv.", "label_column")};
  } else {
    expect_object(ds.at("synthetic"), "dataset.synthetic");
    c.synthetic = parse_synthetic(ds.at("synthetic"));
  }

  // split
  if (j.contains("split")) {
    const json& sp = j.at("split");
    expect_object(sp, "split");
    reject_unknown_keys(sp, "split", {"train_fraction", "holdout_rows"});
    c.split_spec.train_fraction =
        get_field_or<double>(sp, "split.", "train_fraction", 0.8);
    c.split_spec.holdout_rows =
        get_field_or<Eigen::Index>(sp, "split.", "holdout_rows", 0);
  }
  if (c.split_spec.train_fraction <= 0 || c.split_spec.train_fraction >= 1) {
    throw ConfigError("split.train_fraction", "must be strictly in (0,1)");
  }
  if (c.split_spec.holdout_rows < 0) {
    throw ConfigError("split.holdout_rows", "must be >= 0");
  }

  c.n_clients = get_field<int>(j, "", "n_clients");
  if (c.n_clients < 1) throw ConfigError("n_clients", "must be >= 1");

  // partition
  if (j.contains("partition")) {
    const json& p = j.at("partition");
    expect_object(p, "partition");
    reject_unknown_keys(p, "partition", {"iid", "label_skew"});
    if (p.contains("iid") == p.contains("label_skew")) {
      throw ConfigError("partition", "exactly one of iid or label_skew required");
    }
    if (p.contains("iid")) {
      const json& iid = p.at("iid");
      expect_object(iid, "partition.iid");
      reject_unknown_keys(iid, "partition.iid", {"percent"});
      c.partition.kind = "iid";
      c.partition.percent =
          get_field_or<double>(iid, "partition.iid.", "percent", 100.0);
      if (c.partition.percent <= 0 || c.partition.percent > 100) {
        throw ConfigError("partition.iid.percent", "must be in (0,100]");
      }
    } else {
      const json& skew = p.at("label_skew");
      expect_object(skew, "partition.label_skew");
      reject_unknown_keys(skew, "partition.label_skew", {"labels_per_client"});
      c.partition.kind = "label_skew";
      c.partition.labels_per_client = get_field<int>(
          skew, "partition.label_skew.", "labels_per_client");
      if (c.partition.labels_per_client < 1) {
        throw ConfigError("partition.label_skew.labels_per_client",
                          "must be >= 1");
      }
    }
  }

  // model
  if (!j.contains("model")) throw ConfigError("model", "missing required field");
  const json& m = j.at("model");
  expect_object(m, "model");
  reject_unknown_keys(m, "model", {"linreg", "logreg", "kmeans"});
  if (m.size() != 1) {
    throw ConfigError("model", "exactly one of linreg, logreg, kmeans required");
  }
  if (m.contains("linreg")) {
    expect_object(m.at("linreg"), "model.linreg");
    reject_unknown_keys(m.at("linreg"), "model.linreg", {});
    c.model.kind = "linreg";
  } else if (m.contains("logreg")) {
    const json& lr = m.at("logreg");
    expect_object(lr, "model.logreg");
    reject_unknown_keys(lr, "model.logreg", {"step", "epochs"});
    c.model.kind = "logreg";
    c.model.step = get_field_or<double>(lr, "model.logreg.", "step", 0.1);
    c.model.epochs = get_field_or<int>(lr, "model.logreg.", "epochs", 5);
    if (c.model.step <= 0) throw ConfigError("model.logreg.step", "must be > 0");
    if (c.model.epochs < 1) {
      throw ConfigError("model.logreg.epochs", "must be >= 1");
    }
  } else {
    const json& km = m.at("kmeans");
    expect_object(km, "model.kmeans");
    reject_unknown_keys(km, "model.kmeans", {"k"});
    c.model.kind = "kmeans";
    c.model.k = get_field<int>(km, "model.kmeans.", "k");
    if (c.model.k < 1) throw ConfigError("model.kmeans.k", "must be >= 1");
  }

  // aggregator
  if (j.contains("aggregator")) {
    const json& a = j.at("aggregator");
    expect_object(a, "aggregator");
    reject_unknown_keys(a, "aggregator", {"fedavg", "cluster", "coop"});
    if (a.size() != 1) {
      throw ConfigError("aggregator",
                        "exactly one of fedavg, cluster, coop required");
    }
    if (a.contains("fedavg")) {
      const json& f = a.at("fedavg");
      expect_object(f, "aggregator.fedavg");
      reject_unknown_keys(f, "aggregator.fedavg", {"weighting"});
      c.aggregator.kind = "fedavg";
      c.aggregator.weighting = get_field_or<std::string>(
          f, "aggregator.fedavg.", "weighting", "uniform");
      if (c.aggregator.weighting != "uniform" &&
          c.aggregator.weighting != "by_samples") {
        throw ConfigError("aggregator.fedavg.weighting",
                          "expected \"uniform\" or \"by_samples\"");
      }
    } else if (a.contains("cluster")) {
      const json& cl = a.at("cluster");
      expect_object(cl, "aggregator.cluster");
      reject_unknown_keys(cl, "aggregator.cluster", {"k"});
      c.aggregator.kind = "cluster";
      c.aggregator.k = get_field<int>(cl, "aggregator.cluster.", "k");
    } else {
      const json& co = a.at("coop");
      expect_object(co, "aggregator.coop");
      reject_unknown_keys(co, "aggregator.coop", {"schedule"});
      c.aggregator.kind = "coop";
      c.aggregator.schedule_path =
          get_field<std::string>(co, "aggregator.coop.", "schedule");
    }
  }
  if (c.aggregator.kind == "cluster") {
    if (c.model.kind != "kmeans") {
      throw ConfigError("aggregator.cluster", "requires the kmeans model");
    }
    if (c.aggregator.k != c.model.k) {
      throw ConfigError("aggregator.cluster.k",
                        "must equal model.kmeans.k");
    }
  }

  c.rounds = get_field_or<long>(j, "", "rounds", 1);
  if (c.rounds < 0) throw ConfigError("rounds", "must be >= 0");

  // dp
  if (j.contains("dp")) {
    const json& dp = j.at("dp");
    expect_object(dp, "dp");
    reject_unknown_keys(dp, "dp", {"mechanism", "epsilon", "delta", "sensitivity"});
    DpSpec d;
    d.mechanism = get_field<std::string>(dp, "dp.", "mechanism");
    if (d.mechanism != "laplace" && d.mechanism != "gaussian") {
      throw ConfigError("dp.mechanism", "expected \"laplace\" or \"gaussian\"");
    }
    d.epsilon = get_field<double>(dp, "dp.", "epsilon");
    if (d.epsilon <= 0) throw ConfigError("dp.epsilon", "must be > 0");
    if (dp.contains("delta")) {
      d.delta = get_field<double>(dp, "dp.", "delta");
    }
    if (d.mechanism == "gaussian") {
      if (!d.delta.has_value()) {
        throw ConfigError("dp.delta", "required by the gaussian mechanism");
      }
      if (*d.delta <= 0 || *d.delta >= 1) {
        throw ConfigError("dp.delta", "must be in (0,1)");
      }
      if (d.epsilon >= 1) {
        throw ConfigError("dp.epsilon",
                          "gaussian mechanism requires epsilon in (0,1)");
      }
    } else if (d.delta.has_value()) {
      throw ConfigError("dp.delta", "not used by the laplace mechanism");
    }
    if (!dp.contains("sensitivity")) {
      throw ConfigError("dp.sensitivity", "missing required field");
    }
    const json& sens = dp.at("sensitivity");
    expect_object(sens, "dp.sensitivity");
    reject_unknown_keys(sens, "dp.sensitivity", {"fixed", "sampled"});
    if (sens.contains("fixed") == sens.contains("sampled")) {
      throw ConfigError("dp.sensitivity",
                        "exactly one of fixed or sampled required");
    }
    if (sens.contains("fixed")) {
      const json& f = sens.at("fixed");
      expect_object(f, "dp.sensitivity.fixed");
      reject_unknown_keys(f, "dp.sensitivity.fixed", {"value"});
      d.sampled = false;
      d.fixed_value = get_field<double>(f, "dp.sensitivity.fixed.", "value");
      if (d.fixed_value < 0) {
        throw ConfigError("dp.sensitivity.fixed.value", "must be >= 0");
      }
    } else {
      const json& s = sens.at("sampled");
      expect_object(s, "dp.sensitivity.sampled");
      reject_unknown_keys(s, "dp.sensitivity.sampled",
                          {"n", "gamma", "record_count"});
      d.sampled = true;
      d.sample_n = get_field<long>(s, "dp.sensitivity.sampled.", "n");
      d.gamma = get_field_or<double>(s, "dp.sensitivity.sampled.", "gamma", 0.05);
      d.record_count = get_field_or<Eigen::Index>(
          s, "dp.sensitivity.sampled.", "record_count", 0);
      if (d.sample_n < 1) {
        throw ConfigError("dp.sensitivity.sampled.n", "must be >= 1");
      }
      if (d.gamma <= 0 || d.gamma >= 1) {
        throw ConfigError("dp.sensitivity.sampled.gamma", "must be in (0,1)");
      }
      if (d.record_count < 0) {
        throw ConfigError("dp.sensitivity.sampled.record_count",
                          "must be >= 0 (0 selects the pool-quartile default)");
      }
      if (c.split_spec.holdout_rows < 2) {
        throw ConfigError("split.holdout_rows",
                          "sampled sensitivity needs a holdout pool (>= 2 rows)");
      }
    }
    c.dp = d;
  }

  // budget
  if (j.contains("budget")) {
    if (!c.dp.has_value()) {
      throw ConfigError("budget", "requires a dp mechanism");
    }
    const json& b = j.at("budget");
    expect_object(b, "budget");
    reject_unknown_keys(b, "budget", {"filter", "eps_g", "delta_g", "charge"});
    BudgetSpec spec;
    spec.filter = get_field<std::string>(b, "budget.", "filter");
    if (spec.filter != "basic" && spec.filter != "advanced") {
      throw ConfigError("budget.filter", "expected \"basic\" or \"advanced\"");
    }
    spec.eps_g = get_field<double>(b, "budget.", "eps_g");
    if (spec.eps_g <= 0) throw ConfigError("budget.eps_g", "must be > 0");
    spec.delta_g = get_field_or<double>(b, "budget.", "delta_g", 0.0);
    if (spec.filter == "basic" && spec.delta_g < 0) {
      throw ConfigError("budget.delta_g", "must be >= 0");
    }
    if (spec.filter == "advanced" &&
        (spec.delta_g <= 0 || spec.delta_g >= 1.0 / std::exp(1.0))) {
      throw ConfigError("budget.delta_g",
                        "advanced filter requires delta_g in (0, 1/e)");
    }
    spec.charge = get_field_or<std::string>(b, "budget.", "charge", "per_round");
    if (spec.charge != "per_round" && spec.charge != "per_read") {
      throw ConfigError("budget.charge",
                        "expected \"per_round\" or \"per_read\"");
    }
    c.budget = spec;
  }

  c.repeat_until_halt = get_field_or<bool>(j, "", "repeat_until_halt", false);
  if (c.repeat_until_halt && !c.budget.has_value()) {
    throw ConfigError("repeat_until_halt", "requires a budget filter");
  }
  return c;
}

ordered_json ExperimentConfig::echo() const {
  ordered_json e;
  e["seed"] = seed;
  if (csv.has_value()) {
    e["dataset"] = {{"csv", {{"path", csv->path},
                             {"label_column", csv->label_column}}}};
  } else {
    ordered_json s;
    s["kind"] = synthetic->kind;
    if (synthetic->kind == "regression") {
      s["n"] = synthetic->n;
      s["coefficients"] = synthetic->coefficients;
      s["noise_sd"] = synthetic->noise_sd;
    } else if (synthetic->kind == "blobs") {
      s["n_per_cluster"] = synthetic->n_per_cluster;
      s["centers"] = synthetic->centers;
      s["spread_sd"] = synthetic->spread_sd;
    } else {
      s["n"] = synthetic->n;
    }
    e["dataset"] = {{"synthetic", s}};
  }
  e["split"] = {{"train_fraction", split_spec.train_fraction},
                {"holdout_rows", split_spec.holdout_rows}};
  e["n_clients"] = n_clients;
  if (partition.kind == "iid") {
    e["partition"] = {{"iid", {{"percent", partition.percent}}}};
  } else {
    e["partition"] = {
        {"label_skew", {{"labels_per_client", partition.labels_per_client}}}};
  }
  if (model.kind == "linreg") {
    e["model"] = {{"linreg", ordered_json::object()}};
  } else if (model.kind == "logreg") {
    e["model"] = {{"logreg", {{"step", model.step}, {"epochs", model.epochs}}}};
  } else {
    e["model"] = {{"kmeans", {{"k", model.k}}}};
  }
  if (aggregator.kind == "fedavg") {
    e["aggregator"] = {{"fedavg", {{"weighting", aggregator.weighting}}}};
  } else if (aggregator.kind == "cluster") {
    e["aggregator"] = {{"cluster", {{"k", aggregator.k}}}};
  } else {
    e["aggregator"] = {{"coop", {{"schedule", aggregator.schedule_path}}}};
  }
  e["rounds"] = rounds;
  if (dp.has_value()) {
    ordered_json d;
    d["mechanism"] = dp->mechanism;
    d["epsilon"] = dp->epsilon;
    if (dp->delta.has_value()) d["delta"] = *dp->delta;
    if (dp->sampled) {
      d["sensitivity"] = {{"sampled", {{"n", dp->sample_n},
                                       {"gamma", dp->gamma},
                                       {"record_count", dp->record_count}}}};
    } else {
      d["sensitivity"] = {{"fixed", {{"value", dp->fixed_value}}}};
    }
    e["dp"] = d;
  } else {
    e["dp"] = nullptr;
  }
  if (budget.has_value()) {
    e["budget"] = {{"filter", budget->filter},
                   {"eps_g", budget->eps_g},
                   {"delta_g", budget->delta_g},
                   {"charge", budget->charge}};
  } else {
    e["budget"] = nullptr;
  }
  e["repeat_until_halt"] = repeat_until_halt;
  return e;
}

// --------------------------------------------------------------------------
// Experiment execution
// --------------------------------------------------------------------------

namespace {

LabeledDataset make_dataset(const ExperimentConfig& c) {
  if (c.csv.has_value()) {
    return load_csv(c.csv->path, c.csv->label_column);
  }
  const auto& s = *c.synthetic;
  const std::uint64_t seed = derive_seed(c.seed, kDataStream);
  if (s.kind == "regression") {
    Eigen::VectorXd coef(static_cast<Eigen::Index>(s.coefficients.size()));
    for (std::size_t i = 0; i < s.coefficients.size(); ++i) {
      coef[static_cast<Eigen::Index>(i)] = s.coefficients[i];
    }
    return synthesize_regression(
        s.n, static_cast<Eigen::Index>(s.coefficients.size()) - 1, coef,
        s.noise_sd, seed);
  }
  if (s.kind == "blobs") {
    std::vector<Eigen::VectorXd> centers;
    for (const auto& c0 : s.centers) {
      Eigen::VectorXd v(static_cast<Eigen::Index>(c0.size()));
      for (std::size_t i = 0; i < c0.size(); ++i) {
        v[static_cast<Eigen::Index>(i)] = c0[i];
      }
      centers.push_back(std::move(v));
    }
    return synthesize_blobs(s.n_per_cluster, centers, s.spread_sd, seed);
  }
  return synthesize_housing(s.n, seed);
}

std::unique_ptr<Model> make_model(const ExperimentConfig& c,
                                  Eigen::Index n_features, int n_classes,
                                  std::uint64_t model_seed) {
  if (c.model.kind == "linreg") {
    return std::make_unique<LinearRegression>(n_features);
  }
  if (c.model.kind == "logreg") {
    return std::make_unique<LogisticRegression>(n_features, n_classes,
                                                c.model.step, c.model.epochs);
  }
  return std::make_unique<KMeans>(c.model.k, n_features, model_seed);
}

AggregateFn make_aggregator(const ExperimentConfig& c) {
  if (c.aggregator.kind == "fedavg") {
    const bool by_samples = c.aggregator.weighting == "by_samples";
    return [by_samples](const std::vector<ParamVector>& params,
                        const std::vector<Eigen::Index>& sizes) {
      const ClientWeights w =
          by_samples ? ClientWeights::by_samples(sizes)
                     : ClientWeights::uniform(static_cast<int>(params.size()));
      return fed_avg(params, w);
    };
  }
  const int k = c.aggregator.k;
  const std::uint64_t seed = derive_seed(c.seed, kMechanismStream, 999);
  return [k, seed](const std::vector<ParamVector>& params,
                   const std::vector<Eigen::Index>&) {
    return cluster_aggregate(params, k, seed);
  };
}

struct CoopSchedule {
  long initial_global_age = 0;
  std::vector<CoopSubmission> submissions;
};

CoopSchedule load_coop_schedule(const std::string& path, int n_clients) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("aggregator.coop.schedule",
                      "cannot open schedule file: " + path);
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("aggregator.coop.schedule",
                      std::string("schedule is not valid JSON: ") + e.what());
  }
  CoopSchedule s;
  s.initial_global_age = j.value("initial_global_age", 0L);
  if (!j.contains("submissions") || !j.at("submissions").is_array() ||
      j.at("submissions").empty()) {
    throw ConfigError("aggregator.coop.schedule",
                      "schedule needs a nonempty submissions array");
  }
  for (const auto& row : j.at("submissions")) {
    if (!row.is_array() || row.size() != 2) {
      throw ConfigError("aggregator.coop.schedule",
                        "each submission must be [client_id, age]");
    }
    CoopSubmission sub{row.at(0).get<int>(), row.at(1).get<long>()};
    if (sub.client_id < 0 || sub.client_id >= n_clients) {
      throw ConfigError("aggregator.coop.schedule",
                        "client id " + std::to_string(sub.client_id) +
                            " out of range");
    }
    if (sub.age_at_submit < 0) {
      throw ConfigError("aggregator.coop.schedule", "ages must be >= 0");
    }
    s.submissions.push_back(sub);
  }
  return s;
}

ordered_json metrics_to_json(const Metrics& m) {
  ordered_json j;
  j["n_samples"] = m.n_samples;
  switch (m.kind) {
    case MetricsKind::kRegression:
      j["kind"] = "regression";
      j["rmse"] = m.rmse;
      if (m.r2.has_value()) {
        j["r2"] = *m.r2;
      } else {
        j["r2"] = nullptr;
        j["r2_note"] = m.r2_note;
      }
      j["sum_sq_err"] = m.sum_sq_err;
      j["label_sum"] = m.label_sum;
      j["label_sum_sq"] = m.label_sum_sq;
      break;
    case MetricsKind::kClassification: {
      j["kind"] = "classification";
      j["accuracy"] = m.accuracy;
      j["loss"] = m.loss;
      std::vector<std::vector<int>> conf;
      for (Eigen::Index r = 0; r < m.confusion.rows(); ++r) {
        std::vector<int> row;
        for (Eigen::Index cc = 0; cc < m.confusion.cols(); ++cc) {
          row.push_back(m.confusion(r, cc));
        }
        conf.push_back(std::move(row));
      }
      j["confusion"] = conf;
      break;
    }
    case MetricsKind::kClustering:
      j["kind"] = "clustering";
      j["within_sse"] = m.within_sse;
      break;
  }
  return j;
}

ordered_json round_to_json(const RoundReport& r) {
  ordered_json j;
  j["round"] = r.round;
  ordered_json per_client = ordered_json::array();
  for (const auto& m : r.per_client) per_client.push_back(metrics_to_json(m));
  j["per_client"] = std::move(per_client);
  j["global"] = r.global.has_value() ? metrics_to_json(*r.global)
                                     : ordered_json(nullptr);
  j["ledger_total_epsilon"] = r.ledger_total.epsilon;
  j["ledger_total_delta"] = r.ledger_total.delta;
  j["ledger_entries"] = r.ledger_entries;
  j["halted"] = r.halted;
  return j;
}

ordered_json ledger_to_json(const PrivacySpend& spend) {
  ordered_json entries = ordered_json::array();
  for (const auto& e : spend.entries()) {
    entries.push_back(ordered_json{{"epsilon", e.cost.epsilon},
                                   {"delta", e.cost.delta},
                                   {"label", e.label},
                                   {"round", e.round},
                                   {"spent", e.spent}});
  }
  const DpCost total = spend.total();
  ordered_json j;
  j["entries"] = std::move(entries);
  j["total_epsilon"] = total.epsilon;
  j["total_delta"] = total.delta;
  return j;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();

  const LabeledDataset full = make_dataset(config);
  full.validate("experiment dataset");

  const SplitResult parts =
      split(full, config.split_spec, derive_seed(config.seed, kSplitStream));

  const int n_classes =
      config.model.kind == "logreg" ? full.class_count() : 0;
  const Eigen::Index n_features = full.cols();

  FederatedPartition partition;
  if (config.partition.kind == "iid") {
    partition = partition_iid(parts.train, config.n_clients,
                              config.partition.percent,
                              derive_seed(config.seed, kPartitionStream));
  } else {
    partition = partition_label_skew(
        parts.train, config.n_clients, config.partition.labels_per_client,
        derive_seed(config.seed, kPartitionStream));
  }

  // Each shard is split locally so clients evaluate on rows they never
  // trained on; the global test set from the top-level split is the
  // simulation-level evaluation set.
  std::vector<ClientNode> clients;
  for (int i = 0; i < config.n_clients; ++i) {
    const SplitResult local = split(
        partition.shards[static_cast<std::size_t>(i)],
        SplitSpec{config.split_spec.train_fraction, 0},
        derive_seed(config.seed, kClientSplitStream, static_cast<std::uint64_t>(i)));
    ClientNode node;
    node.id = i;
    node.train_set = local.train;
    node.eval_set = local.test;
    node.test_set = local.test;
    node.rng_seed = derive_seed(config.seed, static_cast<std::uint64_t>(i));
    clients.push_back(std::move(node));
  }

  // Sensitivity: fixed from config or sampled from the holdout pool.
  ordered_json sensitivity_json = nullptr;
  double sensitivity_value = 0.0;
  if (config.dp.has_value()) {
    const auto& dp = *config.dp;
    if (dp.sampled) {
      const NormKind norm =
          dp.mechanism == "laplace" ? NormKind::kL1 : NormKind::kL2;
      Eigen::Index record_count =
          dp.record_count > 0 ? dp.record_count : parts.holdout.rows() / 4;
      record_count = std::max<Eigen::Index>(record_count, 2);
      const auto query = [&](const LabeledDataset& ds) {
        std::unique_ptr<Model> m = make_model(config, n_features, n_classes,
                                              derive_seed(config.seed, 777));
        m->train(ds);
        return m->get_params().values;
      };
      const SensitivityEstimate est = sample_sensitivity(
          query, SamplingDistribution{parts.holdout}, dp.sample_n, dp.gamma,
          norm, record_count, derive_seed(config.seed, kSensitivityStream));
      sensitivity_value = est.max_sensitivity;
      sensitivity_json = ordered_json{
          {"max", est.max_sensitivity},
          {"mean", est.mean_sensitivity},
          {"n_samples", est.n_samples},
          {"gamma", est.gamma},
          {"norm", est.norm_kind == NormKind::kL1 ? "l1" : "l2"},
          {"record_count", record_count}};
    } else {
      sensitivity_value = dp.fixed_value;
      sensitivity_json = ordered_json{{"fixed", dp.fixed_value}};
    }
  }

  // Access policy and (optional) budget filter; the filter persists across
  // repeated runs so the whole experiment sequence shares one budget.
  std::unique_ptr<FilterState> filter;
  PrivacySpend bare_ledger;
  ParamAccess access = ParamAccess::plain();
  if (config.dp.has_value()) {
    if (config.dp->mechanism == "laplace") {
      access = ParamAccess::laplace(sensitivity_value, config.dp->epsilon);
    } else {
      access = ParamAccess::gaussian(sensitivity_value, config.dp->epsilon,
                                     *config.dp->delta);
    }
    if (config.budget.has_value()) {
      filter = std::make_unique<FilterState>(
          config.budget->filter == "basic" ? FilterKind::kBasic
                                           : FilterKind::kAdvanced,
          config.budget->eps_g, config.budget->delta_g);
      access.filter = filter.get();
      access.charge = config.budget->charge == "per_round"
                          ? ChargePolicy::kPerRound
                          : ChargePolicy::kPerRead;
    } else {
      access.ledger = &bare_ledger;
    }
  }

  const AggregateFn aggregate = make_aggregator(config);
  CoopSchedule coop_schedule;
  if (config.aggregator.kind == "coop") {
    coop_schedule =
        load_coop_schedule(config.aggregator.schedule_path, config.n_clients);
  }

  // Runs. repeat_until_halt replays the whole experiment (fresh models and
  // fresh noise, same data split) until the budget filter HALTs; the
  // averages cover completed runs only.
  ordered_json runs_json = ordered_json::array();
  std::vector<Metrics> completed_finals;
  bool halted = false;
  const long max_runs = config.repeat_until_halt ? 100000 : 1;
  for (long run_index = 0; run_index < max_runs; ++run_index) {
    for (auto& node : clients) {
      node.model = make_model(config, n_features, n_classes, node.rng_seed);
    }
    Rng mech_rng(derive_seed(config.seed, kMechanismStream,
                             static_cast<std::uint64_t>(run_index)));
    std::vector<RoundReport> rounds;
    if (config.aggregator.kind == "coop") {
      rounds = run_coop(clients, access, coop_schedule.submissions,
                        coop_schedule.initial_global_age, parts.test, mech_rng);
    } else {
      rounds = run_rounds(clients, aggregate, access, config.rounds,
                          parts.test, mech_rng);
    }
    const bool run_halted = !rounds.empty() && rounds.back().halted;
    ordered_json run_json;
    run_json["run"] = run_index;
    run_json["completed"] = !run_halted;
    ordered_json rounds_json = ordered_json::array();
    for (const auto& r : rounds) rounds_json.push_back(round_to_json(r));
    run_json["per_round"] = std::move(rounds_json);
    runs_json.push_back(std::move(run_json));

    if (run_halted) {
      halted = true;
      break;
    }
    if (!rounds.empty() && rounds.back().global.has_value()) {
      completed_finals.push_back(*rounds.back().global);
    }
    if (!config.repeat_until_halt) break;
    if (run_index + 1 == max_runs) {
      throw Error("repeat_until_halt: budget filter did not HALT within " +
                  std::to_string(max_runs) + " runs");
    }
  }

  // Arithmetic mean of the completed runs' final global metrics.
  ordered_json averaged = nullptr;
  if (!completed_finals.empty()) {
    const auto n = static_cast<double>(completed_finals.size());
    const Metrics& first = completed_finals.front();
    averaged = ordered_json::object();
    if (first.kind == MetricsKind::kRegression) {
      double rmse = 0.0, r2 = 0.0;
      bool r2_defined = true;
      for (const auto& m : completed_finals) {
        rmse += m.rmse;
        if (m.r2.has_value()) {
          r2 += *m.r2;
        } else {
          r2_defined = false;
        }
      }
      averaged["kind"] = "regression";
      averaged["rmse"] = rmse / n;
      averaged["r2"] = r2_defined ? ordered_json(r2 / n) : ordered_json(nullptr);
    } else if (first.kind == MetricsKind::kClassification) {
      double acc = 0.0, loss = 0.0;
      for (const auto& m : completed_finals) {
        acc += m.accuracy;
        loss += m.loss;
      }
      averaged["kind"] = "classification";
      averaged["accuracy"] = acc / n;
      averaged["loss"] = loss / n;
    } else {
      double sse = 0.0;
      for (const auto& m : completed_finals) sse += m.within_sse;
      averaged["kind"] = "clustering";
      averaged["within_sse"] = sse / n;
    }
  }

  const auto t1 = std::chrono::steady_clock::now();

  ordered_json report;
  report["schema_version"] = "1.0";
  report["config_echo"] = config.echo();
  report["runs"] = std::move(runs_json);
  report["per_round"] = report["runs"].empty()
                            ? ordered_json::array()
                            : report["runs"][0]["per_round"];
  report["averaged_metrics"] = std::move(averaged);
  report["completed_runs"] = static_cast<long>(completed_finals.size());
  report["privacy_ledger"] =
      filter ? ledger_to_json(filter->spend()) : ledger_to_json(bare_ledger);
  report["sensitivity"] = std::move(sensitivity_json);
  report["halted"] = halted;
  report["wall_time"] =
      std::chrono::duration<double>(t1 - t0).count();

  ExperimentResult result;
  result.report = std::move(report);
  result.halted = halted;
  result.completed_runs = static_cast<long>(completed_finals.size());
  return result;
}

// --------------------------------------------------------------------------
// Report schema
// --------------------------------------------------------------------------

ordered_json report_schema() {
  ordered_json schema;
  schema["schema_version"] = "1.0";
  schema["fields"] = ordered_json{
      {"schema_version", "string"},
      {"config_echo", "object"},
      {"runs", "array<$run>"},
      {"per_round", "array<$round_report>"},
      {"averaged_metrics", "object|null"},
      {"completed_runs", "integer"},
      {"privacy_ledger", "$ledger"},
      {"sensitivity", "object|null"},
      {"halted", "boolean"},
      {"wall_time", "number"},
  };
  schema["types"] = ordered_json{
      {"$run",
       ordered_json{{"run", "integer"},
                    {"completed", "boolean"},
                    {"per_round", "array<$round_report>"}}},
      {"$round_report",
       ordered_json{{"round", "integer"},
                    {"per_client", "array<$metrics>"},
                    {"global", "$metrics|null"},
                    {"ledger_total_epsilon", "number"},
                    {"ledger_total_delta", "number"},
                    {"ledger_entries", "integer"},
                    {"halted", "boolean"}}},
      {"$metrics",
       ordered_json{{"kind", "string"},
                    {"n_samples", "integer"},
                    {"rmse?", "number"},
                    {"r2?", "number|null"},
                    {"r2_note?", "string"},
                    {"sum_sq_err?", "number"},
                    {"label_sum?", "number"},
                    {"label_sum_sq?", "number"},
                    {"accuracy?", "number"},
                    {"loss?", "number"},
                    {"confusion?", "array<array<integer>>"},
                    {"within_sse?", "number"}}},
      {"$ledger",
       ordered_json{{"entries", "array<$ledger_entry>"},
                    {"total_epsilon", "number"},
                    {"total_delta", "number"}}},
      {"$ledger_entry",
       ordered_json{{"epsilon", "number"},
                    {"delta", "number"},
                    {"label", "string"},
                    {"round", "integer"},
                    {"spent", "boolean"}}},
  };
  return schema;
}

namespace {

void check_value(const json& value, const std::string& type,
                 const json& types, const std::string& path);

void check_object_type(const json& value, const json& spec, const json& types,
                       const std::string& path) {
  if (!value.is_object()) {
    throw Error("schema: " + path + " expected object");
  }
  std::set<std::string> known;
  for (const auto& [raw_key, type] : spec.items()) {
    const bool optional = raw_key.ends_with("?");
    const std::string key =
        optional ? raw_key.substr(0, raw_key.size() - 1) : raw_key;
    known.insert(key);
    if (!value.contains(key)) {
      if (optional) continue;
      throw Error("schema: " + path + "." + key + " missing");
    }
    check_value(value.at(key), type.get<std::string>(), types,
                path + "." + key);
  }
  for (const auto& [key, _] : value.items()) {
    if (!known.count(key)) {
      throw Error("schema: " + path + "." + key + " is not in the schema");
    }
  }
}

void check_value(const json& value, const std::string& type,
                 const json& types, const std::string& path) {
  if (type.ends_with("|null")) {
    if (value.is_null()) return;
    check_value(value, type.substr(0, type.size() - 5), types, path);
    return;
  }
  if (type.starts_with("array<")) {
    if (!value.is_array()) throw Error("schema: " + path + " expected array");
    const std::string inner = type.substr(6, type.size() - 7);
    for (std::size_t i = 0; i < value.size(); ++i) {
      check_value(value[i], inner, types, path + "[" + std::to_string(i) + "]");
    }
    return;
  }
  if (type.starts_with("$")) {
    if (!types.contains(type)) {
      throw Error("schema: unknown type reference " + type);
    }
    check_object_type(value, types.at(type), types, path);
    return;
  }
  if (type == "string" && value.is_string()) return;
  if (type == "number" && value.is_number()) return;
  if (type == "integer" && value.is_number_integer()) return;
  if (type == "boolean" && value.is_boolean()) return;
  if (type == "object" && value.is_object()) return;
  throw Error("schema: " + path + " expected " + type);
}

}  // namespace

void check_report_against_schema(const json& report) {
  const ordered_json schema = report_schema();
  if (!report.is_object()) throw Error("schema: report must be an object");
  const json fields = schema.at("fields");
  const json types = schema.at("types");
  std::set<std::string> known;
  for (const auto& [key, type] : fields.items()) {
    known.insert(key);
    if (!report.contains(key)) throw Error("schema: report." + key + " missing");
    check_value(report.at(key), type.get<std::string>(), types, key);
  }
  for (const auto& [key, _] : report.items()) {
    if (!known.count(key)) {
      throw Error("schema: report." + key + " is not in the schema");
    }
  }
}

}  // namespace fldp
