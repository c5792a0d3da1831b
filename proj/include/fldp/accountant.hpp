#pragma once

#include <span>
#include <string>
#include <vector>

#include "fldp/mechanisms.hpp"

namespace fldp {

/// One recorded mechanism invocation. `spent` is false only for the charge
/// that triggered a filter HALT: it is recorded for reporting, but the
/// mechanism it priced must not be executed.
struct SpendEntry {
  DpCost cost;
  std::string label;
  long round = 0;
  bool spent = true;
};

/// Append-only (epsilon, delta) ledger. Entries are immutable once recorded.
class PrivacySpend {
 public:
  void append(DpCost cost, std::string label, long round, bool spent = true) {
    entries_.push_back(SpendEntry{cost, std::move(label), round, spent});
  }
  std::span<const SpendEntry> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  /// Basic composition over the spent entries.
  DpCost total() const {
    DpCost t;
    for (const auto& e : entries_) {
      if (!e.spent) continue;
      t.epsilon += e.cost.epsilon;
      t.delta += e.cost.delta;
    }
    return t;
  }

 private:
  std::vector<SpendEntry> entries_;
};

/// Log-density ratio of Lap(fx, b) versus Lap(fy, b) at `output`:
/// (|output - fy| - |output - fx|) / b.
double privacy_loss_laplace(double output, double fx, double fy, double b);

/// (sum eps_i, sum delta_i); empty input composes to (0, 0).
DpCost basic_composition(std::span<const DpCost> costs);

/// k-fold composition of one homogeneous (epsilon, delta) mechanism:
/// eps' = eps sqrt(2k ln(1/delta')) + k eps (e^eps - 1), delta'' = k delta +
/// delta'.
DpCost advanced_composition(double epsilon, double delta, long k,
                            double delta_prime);

/// Amplification by subsampling m of n records without replacement:
/// eps' = ln(1 + (m/n)(e^eps - 1)), delta' = (m/n) delta.
DpCost subsample_amplify(DpCost cost, long m, long n);

enum class FilterKind { kBasic, kAdvanced };
enum class FilterDecision { kCont, kHalt };

/// Online HALT/CONT budget (eps_g, delta_g) over adaptively chosen costs.
///
/// Basic:    HALT iff sum delta_i > delta_g or sum eps_i > eps_g.
/// Advanced: HALT iff sum delta_i > delta_g / 2 or K > eps_g, with
///   K = sqrt((sum eps_i^2 + H)(2 + ln(sum eps_i^2 / H + 1)) ln(2/delta_g))
///       + sum_j eps_j (e^{eps_j} - 1) / 2,   H = eps_g^2 / (28.04 ln(1/delta_g)).
///
/// Budget exactly met is CONT; HALT fires only on strict excess. Once
/// HALTed the filter stays HALTed and further steps throw FilterHalted.
class FilterState {
 public:
  FilterState(FilterKind kind, double eps_g, double delta_g);

  /// Records the cost and evaluates the composition over the full spend.
  /// The cost that flips the filter to HALT is recorded as unspent.
  FilterDecision step(DpCost cost, std::string label = "", long round = 0);

  bool halted() const { return halted_; }
  FilterKind kind() const { return kind_; }
  double eps_g() const { return eps_g_; }
  double delta_g() const { return delta_g_; }
  const PrivacySpend& spend() const { return spend_; }

 private:
  FilterKind kind_;
  double eps_g_;
  double delta_g_;
  bool halted_ = false;
  double eps_sum_ = 0.0;
  double delta_sum_ = 0.0;
  double eps_sq_sum_ = 0.0;
  double drift_sum_ = 0.0;  // sum eps_j (e^{eps_j} - 1) / 2
  PrivacySpend spend_;
};

}  // namespace fldp
