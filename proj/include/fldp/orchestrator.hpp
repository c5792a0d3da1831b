#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "fldp/accountant.hpp"
#include "fldp/aggregate.hpp"
#include "fldp/dataset.hpp"
#include "fldp/models.hpp"

namespace fldp {

/// A simulated data-owner node. Its datasets never cross the orchestrator
/// boundary; only parameter vectors and metrics do.
struct ClientNode {
  int id = 0;
  LabeledDataset train_set;
  LabeledDataset eval_set;
  LabeledDataset test_set;
  std::unique_ptr<Model> model;
  std::uint64_t rng_seed = 0;  // derive_seed(master_seed, id)
};

enum class ChargePolicy { kPerRead, kPerRound };

/// How the server reads a client's parameters: in the clear, or through a
/// noise mechanism whose cost is charged to an attached filter or ledger.
/// Reads within one round query disjoint client datasets, so kPerRound
/// charges them as a single homogeneous cost; kPerRead charges each read.
struct ParamAccess {
  enum class Mode { kPlain, kLaplace, kGaussian };
  Mode mode = Mode::kPlain;
  SensitivityNorm sensitivity;
  double epsilon = 0.0;
  double delta = 0.0;
  FilterState* filter = nullptr;   // optional; not owned
  PrivacySpend* ledger = nullptr;  // optional stand-alone ledger; not owned
  ChargePolicy charge = ChargePolicy::kPerRound;

  static ParamAccess plain() { return ParamAccess{}; }
  static ParamAccess laplace(double sensitivity_l1, double epsilon) {
    ParamAccess a;
    a.mode = Mode::kLaplace;
    a.sensitivity = SensitivityNorm{NormKind::kL1, sensitivity_l1};
    a.epsilon = epsilon;
    return a;
  }
  static ParamAccess gaussian(double sensitivity_l2, double epsilon,
                              double delta) {
    ParamAccess a;
    a.mode = Mode::kGaussian;
    a.sensitivity = SensitivityNorm{NormKind::kL2, sensitivity_l2};
    a.epsilon = epsilon;
    a.delta = delta;
    return a;
  }
  DpCost cost() const { return DpCost{epsilon, delta}; }
};

/// Fuses the clients' parameter vectors; shard sizes are provided for
/// sample-count weighting.
using AggregateFn = std::function<ParamVector(
    const std::vector<ParamVector>&, const std::vector<Eigen::Index>&)>;

struct RoundReport {
  long round = 0;
  std::vector<Metrics> per_client;   // one per participating client
  std::optional<Metrics> global;
  DpCost ledger_total;               // spent total at the end of the round
  long ledger_entries = 0;
  bool halted = false;               // true on the abandoned round
};

struct FederatedEvaluation {
  std::vector<Metrics> per_client;
  Metrics global;
};

/// One evaluation pass: every client evaluates `global_params` on its local
/// test set; the global metrics come from `global_test` when provided, else
/// from combining the per-client absolute metrics (summed confusion matrices
/// for classification, pooled squared errors and label sums for regression).
FederatedEvaluation evaluate_federated(
    const std::vector<ClientNode>& clients, const ParamVector& global_params,
    const std::optional<LabeledDataset>& global_test);

/// Synchronous rounds of learning: local training, parameter reads through
/// `access`, aggregation, redistribution, evaluation. If the attached filter
/// HALTs, the in-progress round is abandoned, a final report with
/// halted=true is appended, and the loop stops.
std::vector<RoundReport> run_rounds(
    std::vector<ClientNode>& clients, const AggregateFn& aggregate,
    const ParamAccess& access, long n_rounds,
    const std::optional<LabeledDataset>& global_test, Rng& mech_rng);

/// One scheduled asynchronous submission: the client trains, its parameters
/// are read through `access` and merged into the global model with the
/// age-difference weighting, and the client receives the merged model back.
struct CoopSubmission {
  int client_id = 0;
  long age_at_submit = 0;
};

std::vector<RoundReport> run_coop(
    std::vector<ClientNode>& clients, const ParamAccess& access,
    const std::vector<CoopSubmission>& schedule, long initial_global_age,
    const std::optional<LabeledDataset>& global_test, Rng& mech_rng);

}  // namespace fldp
