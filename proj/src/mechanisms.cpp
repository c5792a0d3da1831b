#include "fldp/mechanisms.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fldp/error.hpp"

namespace fldp {

namespace {

constexpr double kLn3 = 1.0986122886681098;

void require_norm(const SensitivityNorm& s, NormKind expected,
                  const char* mechanism) {
  if (s.kind != expected) {
    throw InvalidArgument(std::string(mechanism) + ": sensitivity norm kind "
                          "mismatch (Laplace needs L1, Gaussian needs L2)");
  }
  if (s.value < 0.0) {
    throw InvalidArgument(std::string(mechanism) + ": sensitivity must be >= 0");
  }
}

}  // namespace

int randomized_response_outcome(bool first_heads, bool second_heads,
                                int truth) {
  if (!first_heads) return truth;
  return second_heads ? 1 : 0;
}

BitResult randomized_response(int truth, Rng& rng) {
  if (truth != 0 && truth != 1) {
    throw InvalidArgument("randomized_response: truth must be 0 or 1");
  }
  const bool first = rng.coin();
  const bool second = rng.coin();
  return BitResult{randomized_response_outcome(first, second, truth),
                   DpCost{kLn3, 0.0}};
}

VecResult laplace_mechanism(const Eigen::VectorXd& v,
                            const SensitivityNorm& sensitivity, double epsilon,
                            Rng& rng) {
  require_norm(sensitivity, NormKind::kL1, "laplace_mechanism");
  if (epsilon <= 0.0) {
    throw InvalidArgument("laplace_mechanism: epsilon must be > 0");
  }
  VecResult out{v, DpCost{epsilon, 0.0}};
  if (sensitivity.value == 0.0) return out;
  const double b = sensitivity.value / epsilon;
  for (Eigen::Index i = 0; i < out.values.size(); ++i) {
    out.values[i] += rng.laplace(b);
  }
  return out;
}

std::vector<double> exponential_weights(std::span<const double> utilities,
                                        double delta_u, double epsilon) {
  if (utilities.empty()) {
    throw InvalidArgument("exponential_mechanism: empty range");
  }
  if (delta_u <= 0.0 || epsilon <= 0.0) {
    throw InvalidArgument(
        "exponential_mechanism: delta_u and epsilon must be > 0");
  }
  const double scale = epsilon / (2.0 * delta_u);
  const double shift = *std::max_element(utilities.begin(), utilities.end());
  std::vector<double> w(utilities.size());
  double total = 0.0;
  for (std::size_t i = 0; i < utilities.size(); ++i) {
    w[i] = std::exp(scale * (utilities[i] - shift));
    total += w[i];
  }
  for (double& x : w) x /= total;
  return w;
}

PickResult exponential_mechanism(std::span<const double> utilities,
                                 double delta_u, double epsilon, Rng& rng) {
  const std::vector<double> probs =
      exponential_weights(utilities, delta_u, epsilon);
  const double u = rng.uniform01();
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return PickResult{i, DpCost{epsilon, 0.0}};
  }
  return PickResult{probs.size() - 1, DpCost{epsilon, 0.0}};
}

double gaussian_sigma(double sensitivity_l2, double epsilon, double delta) {
  if (epsilon <= 0.0 || epsilon >= 1.0) {
    throw InvalidArgument("gaussian mechanism: epsilon must be in (0,1)");
  }
  if (delta <= 0.0 || delta >= 1.0) {
    throw InvalidArgument("gaussian mechanism: delta must be in (0,1)");
  }
  if (sensitivity_l2 < 0.0) {
    throw InvalidArgument("gaussian mechanism: sensitivity must be >= 0");
  }
  return std::sqrt(2.0 * std::log(1.25 / delta)) * sensitivity_l2 / epsilon;
}

VecResult gaussian_mechanism(const Eigen::VectorXd& v,
                             const SensitivityNorm& sensitivity, double epsilon,
                             double delta, Rng& rng) {
  require_norm(sensitivity, NormKind::kL2, "gaussian_mechanism");
  const double sigma = gaussian_sigma(sensitivity.value, epsilon, delta);
  VecResult out{v, DpCost{epsilon, delta}};
  if (sigma == 0.0) return out;
  for (Eigen::Index i = 0; i < out.values.size(); ++i) {
    out.values[i] += sigma * rng.normal01();
  }
  return out;
}

}  // namespace fldp
