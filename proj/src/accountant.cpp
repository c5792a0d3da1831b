#include "fldp/accountant.hpp"

#include <cmath>

#include "fldp/error.hpp"

namespace fldp {

double privacy_loss_laplace(double output, double fx, double fy, double b) {
  if (b <= 0.0) {
    throw InvalidArgument("privacy_loss_laplace: scale b must be > 0");
  }
  return (std::abs(output - fy) - std::abs(output - fx)) / b;
}

DpCost basic_composition(std::span<const DpCost> costs) {
  DpCost total;
  for (const auto& c : costs) {
    total.epsilon += c.epsilon;
    total.delta += c.delta;
  }
  return total;
}

DpCost advanced_composition(double epsilon, double delta, long k,
                            double delta_prime) {
  if (epsilon < 0.0 || delta < 0.0) {
    throw InvalidArgument("advanced_composition: epsilon and delta must be >= 0");
  }
  if (k < 1) {
    throw InvalidArgument("advanced_composition: k must be >= 1");
  }
  if (delta_prime <= 0.0) {
    throw InvalidArgument("advanced_composition: delta_prime must be > 0");
  }
  const double kd = static_cast<double>(k);
  const double eps_prime =
      epsilon * std::sqrt(2.0 * kd * std::log(1.0 / delta_prime)) +
      kd * epsilon * (std::exp(epsilon) - 1.0);
  return DpCost{eps_prime, kd * delta + delta_prime};
}

DpCost subsample_amplify(DpCost cost, long m, long n) {
  if (n < 1) throw InvalidArgument("subsample_amplify: n must be >= 1");
  if (m < 0 || m > n) {
    throw InvalidArgument("subsample_amplify: need 0 <= m <= n");
  }
  if (m == n) return cost;  // ln(1 + (e^eps - 1)) = eps, kept exact
  const double ratio = static_cast<double>(m) / static_cast<double>(n);
  return DpCost{std::log(1.0 + ratio * (std::expm1(cost.epsilon))),
                ratio * cost.delta};
}

FilterState::FilterState(FilterKind kind, double eps_g, double delta_g)
    : kind_(kind), eps_g_(eps_g), delta_g_(delta_g) {
  if (eps_g <= 0.0) {
    throw InvalidArgument("privacy filter: eps_g must be > 0");
  }
  if (kind == FilterKind::kBasic) {
    if (delta_g < 0.0) {
      throw InvalidArgument("basic filter: delta_g must be >= 0");
    }
  } else {
    // The advanced filter is only valid for delta_g in (0, 1/e).
    if (delta_g <= 0.0 || delta_g >= 1.0 / std::exp(1.0)) {
      throw InvalidArgument("advanced filter: delta_g must be in (0, 1/e)");
    }
  }
}

FilterDecision FilterState::step(DpCost cost, std::string label, long round) {
  if (halted_) {
    throw FilterHalted("privacy filter: stepping a HALTed filter");
  }
  if (cost.epsilon < 0.0 || cost.delta < 0.0) {
    throw InvalidArgument("privacy filter: negative cost");
  }
  eps_sum_ += cost.epsilon;
  delta_sum_ += cost.delta;
  eps_sq_sum_ += cost.epsilon * cost.epsilon;
  drift_sum_ += cost.epsilon * (std::exp(cost.epsilon) - 1.0) / 2.0;

  // Strict-excess comparisons, with enough slack that a budget which is an
  // exact multiple of the step cost in real arithmetic (e.g. twenty steps of
  // 0.2 against 4) still counts as met, not exceeded, despite accumulated
  // representation error.
  const auto exceeds = [](double sum, double budget) {
    return sum > budget + 1e-9 * std::max(1.0, std::abs(budget));
  };
  bool halt = false;
  if (kind_ == FilterKind::kBasic) {
    halt = exceeds(delta_sum_, delta_g_) || exceeds(eps_sum_, eps_g_);
  } else {
    const double h = eps_g_ * eps_g_ / (28.04 * std::log(1.0 / delta_g_));
    const double k_value =
        std::sqrt((eps_sq_sum_ + h) * (2.0 + std::log(eps_sq_sum_ / h + 1.0)) *
                  std::log(2.0 / delta_g_)) +
        drift_sum_;
    halt = exceeds(delta_sum_, delta_g_ / 2.0) || exceeds(k_value, eps_g_);
  }
  spend_.append(cost, std::move(label), round, /*spent=*/!halt);
  if (halt) halted_ = true;
  return halt ? FilterDecision::kHalt : FilterDecision::kCont;
}

}  // namespace fldp
