#include "fldp/orchestrator.hpp"

#include <cmath>
#include <string>

#include "fldp/error.hpp"
#include "fldp/mechanisms.hpp"

namespace fldp {

namespace {

const char* mode_label(ParamAccess::Mode mode) {
  switch (mode) {
    case ParamAccess::Mode::kLaplace: return "laplace";
    case ParamAccess::Mode::kGaussian: return "gaussian";
    default: return "plain";
  }
}

/// Reads one client's parameters through the access mechanism. Budget
/// charging is handled by the caller; this only perturbs.
ParamVector noised_read(const Model& model, const ParamAccess& access,
                        Rng& rng) {
  ParamVector p = model.get_params();
  switch (access.mode) {
    case ParamAccess::Mode::kPlain:
      return p;
    case ParamAccess::Mode::kLaplace: {
      VecResult r = laplace_mechanism(p.values, access.sensitivity,
                                      access.epsilon, rng);
      p.values = std::move(r.values);
      return p;
    }
    case ParamAccess::Mode::kGaussian: {
      VecResult r = gaussian_mechanism(p.values, access.sensitivity,
                                       access.epsilon, access.delta, rng);
      p.values = std::move(r.values);
      return p;
    }
  }
  return p;
}

/// Steps the filter (or appends to the bare ledger) for one charge.
/// Returns false when the filter HALTed and the reads must not happen.
bool charge(const ParamAccess& access, const std::string& label, long round) {
  if (access.mode == ParamAccess::Mode::kPlain) return true;
  if (access.filter != nullptr) {
    return access.filter->step(access.cost(), label, round) ==
           FilterDecision::kCont;
  }
  if (access.ledger != nullptr) {
    access.ledger->append(access.cost(), label, round);
  }
  return true;
}

DpCost ledger_total(const ParamAccess& access) {
  if (access.filter != nullptr) return access.filter->spend().total();
  if (access.ledger != nullptr) return access.ledger->total();
  return DpCost{};
}

long ledger_entries(const ParamAccess& access) {
  if (access.filter != nullptr)
    return static_cast<long>(access.filter->spend().size());
  if (access.ledger != nullptr) return static_cast<long>(access.ledger->size());
  return 0;
}

Metrics combine_client_metrics(const std::vector<Metrics>& per_client) {
  Metrics g;
  g.kind = per_client.front().kind;
  for (const auto& m : per_client) g.n_samples += m.n_samples;
  switch (g.kind) {
    case MetricsKind::kRegression: {
      double ss_err = 0.0, lsum = 0.0, lsq = 0.0;
      for (const auto& m : per_client) {
        ss_err += m.sum_sq_err;
        lsum += m.label_sum;
        lsq += m.label_sum_sq;
      }
      g.sum_sq_err = ss_err;
      g.label_sum = lsum;
      g.label_sum_sq = lsq;
      g.rmse = std::sqrt(ss_err / static_cast<double>(g.n_samples));
      const double ss_tot =
          lsq - lsum * lsum / static_cast<double>(g.n_samples);
      if (ss_tot == 0.0) {
        g.r2_note = "r2 undefined: labels are constant (SS_tot == 0)";
      } else {
        g.r2 = 1.0 - ss_err / ss_tot;
      }
      break;
    }
    case MetricsKind::kClassification: {
      // Global accuracy is recomputed from the summed confusion matrices,
      // never by averaging per-client accuracies.
      g.confusion = per_client.front().confusion;
      for (std::size_t i = 1; i < per_client.size(); ++i) {
        g.confusion += per_client[i].confusion;
      }
      g.accuracy = static_cast<double>(g.confusion.diagonal().sum()) /
                   static_cast<double>(g.confusion.sum());
      double loss = 0.0;
      for (const auto& m : per_client) {
        loss += m.loss * static_cast<double>(m.n_samples);
      }
      g.loss = loss / static_cast<double>(g.n_samples);
      break;
    }
    case MetricsKind::kClustering: {
      for (const auto& m : per_client) g.within_sse += m.within_sse;
      break;
    }
  }
  return g;
}

RoundReport abandoned_round(long round, const ParamAccess& access) {
  RoundReport r;
  r.round = round;
  r.halted = true;
  r.ledger_total = ledger_total(access);
  r.ledger_entries = ledger_entries(access);
  return r;
}

}  // namespace

FederatedEvaluation evaluate_federated(
    const std::vector<ClientNode>& clients, const ParamVector& global_params,
    const std::optional<LabeledDataset>& global_test) {
  if (clients.empty()) throw InvalidArgument("evaluate_federated: no clients");
  FederatedEvaluation eval;
  for (const auto& client : clients) {
    std::unique_ptr<Model> probe = client.model->clone();
    probe->set_params(global_params);
    eval.per_client.push_back(probe->evaluate(client.test_set));
  }
  if (global_test.has_value()) {
    std::unique_ptr<Model> probe = clients.front().model->clone();
    probe->set_params(global_params);
    eval.global = probe->evaluate(*global_test);
  } else {
    eval.global = combine_client_metrics(eval.per_client);
  }
  return eval;
}

std::vector<RoundReport> run_rounds(
    std::vector<ClientNode>& clients, const AggregateFn& aggregate,
    const ParamAccess& access, long n_rounds,
    const std::optional<LabeledDataset>& global_test, Rng& mech_rng) {
  if (clients.empty()) throw InvalidArgument("run_rounds: no clients");
  std::vector<RoundReport> reports;
  std::vector<Eigen::Index> shard_sizes;
  for (const auto& c : clients) shard_sizes.push_back(c.train_set.rows());

  for (long round = 0; round < n_rounds; ++round) {
    // Local training. Clients are independent here; execution order does not
    // affect the result because no shared state is touched.
    for (auto& client : clients) {
      client.model->train(client.train_set);
    }

    // Parameter reads, charged before any mechanism runs.
    if (access.charge == ChargePolicy::kPerRound) {
      if (!charge(access, mode_label(access.mode), round)) {
        reports.push_back(abandoned_round(round, access));
        return reports;
      }
    }
    std::vector<ParamVector> params;
    params.reserve(clients.size());
    bool halted = false;
    for (auto& client : clients) {
      if (access.charge == ChargePolicy::kPerRead) {
        if (!charge(access,
                    std::string(mode_label(access.mode)) + ":client" +
                        std::to_string(client.id),
                    round)) {
          halted = true;
          break;
        }
      }
      params.push_back(noised_read(*client.model, access, mech_rng));
    }
    if (halted) {
      reports.push_back(abandoned_round(round, access));
      return reports;
    }

    const ParamVector global = aggregate(params, shard_sizes);
    for (auto& client : clients) {
      client.model->set_params(global);
    }

    FederatedEvaluation eval = evaluate_federated(clients, global, global_test);
    RoundReport report;
    report.round = round;
    report.per_client = std::move(eval.per_client);
    report.global = std::move(eval.global);
    report.ledger_total = ledger_total(access);
    report.ledger_entries = ledger_entries(access);
    reports.push_back(std::move(report));
  }
  return reports;
}

std::vector<RoundReport> run_coop(
    std::vector<ClientNode>& clients, const ParamAccess& access,
    const std::vector<CoopSubmission>& schedule, long initial_global_age,
    const std::optional<LabeledDataset>& global_test, Rng& mech_rng) {
  if (clients.empty()) throw InvalidArgument("run_coop: no clients");
  if (schedule.empty()) throw InvalidArgument("run_coop: empty schedule");

  std::vector<RoundReport> reports;
  ParamVector global;
  long global_age = initial_global_age;
  bool have_global = false;

  for (std::size_t s = 0; s < schedule.size(); ++s) {
    const CoopSubmission& sub = schedule[s];
    if (sub.client_id < 0 ||
        sub.client_id >= static_cast<int>(clients.size())) {
      throw InvalidArgument("run_coop: unknown client id " +
                            std::to_string(sub.client_id));
    }
    ClientNode& client = clients[static_cast<std::size_t>(sub.client_id)];
    client.model->train(client.train_set);

    if (!charge(access,
                std::string(mode_label(access.mode)) + ":client" +
                    std::to_string(sub.client_id),
                static_cast<long>(s))) {
      reports.push_back(abandoned_round(static_cast<long>(s), access));
      return reports;
    }
    ParamVector incoming = noised_read(*client.model, access, mech_rng);

    if (!have_global) {
      // The first submission is the first aggregation: it defines the
      // global model regardless of its age.
      global = std::move(incoming);
      global_age = initial_global_age + 1;
      have_global = true;
    } else {
      CoopResult merged =
          coop_merge(global, global_age, incoming, sub.age_at_submit);
      global = std::move(merged.merged);
      global_age = merged.new_global_age;
    }
    client.model->set_params(global);

    std::unique_ptr<Model> probe = client.model->clone();
    RoundReport report;
    report.round = static_cast<long>(s);
    report.per_client.push_back(probe->evaluate(client.test_set));
    if (global_test.has_value()) {
      report.global = probe->evaluate(*global_test);
    }
    report.ledger_total = ledger_total(access);
    report.ledger_entries = ledger_entries(access);
    reports.push_back(std::move(report));
  }
  return reports;
}

}  // namespace fldp
