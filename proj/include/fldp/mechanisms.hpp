#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <vector>

#include "fldp/rng.hpp"

namespace fldp {

enum class NormKind { kL1, kL2 };

/// A query's sensitivity: the largest change of its output, in the given
/// norm, when one database record changes. L1 calibrates Laplace noise,
/// L2 calibrates Gaussian noise.
struct SensitivityNorm {
  NormKind kind = NormKind::kL1;
  double value = 0.0;
};

/// Privacy price of one mechanism invocation. delta == 0 means pure
/// epsilon-DP. A cost is produced exactly once per invocation and is never
/// revised by downstream processing of the mechanism's output.
struct DpCost {
  double epsilon = 0.0;
  double delta = 0.0;
};

struct BitResult {
  int value = 0;
  DpCost cost;
};

struct VecResult {
  Eigen::VectorXd values;
  DpCost cost;
};

struct PickResult {
  std::size_t index = 0;
  DpCost cost;
};

/// The two-coin response rule: first coin tails -> answer truthfully; first
/// coin heads -> answer with the second coin (heads = 1). Pure function so
/// tests can enumerate all four coin outcomes.
int randomized_response_outcome(bool first_heads, bool second_heads, int truth);

/// Fair-coin randomized response over a single bit. Cost (ln 3, 0).
BitResult randomized_response(int truth, Rng& rng);

/// Adds IID Laplace(sensitivity/epsilon) noise to each component; requires
/// an L1 sensitivity. Zero sensitivity returns the input unchanged (no draws
/// consumed) but the epsilon cost is still charged. Cost (epsilon, 0).
VecResult laplace_mechanism(const Eigen::VectorXd& v,
                            const SensitivityNorm& sensitivity, double epsilon,
                            Rng& rng);

/// Probability of each range element under the exponential mechanism,
/// proportional to exp(epsilon * utility / (2 delta_u)), computed with
/// max-shifted log weights.
std::vector<double> exponential_weights(std::span<const double> utilities,
                                        double delta_u, double epsilon);

/// Draws one index from the exponential-mechanism distribution over the
/// utilities. Cost (epsilon, 0): reported for the weight parameterisation
/// exp(epsilon * u / (2 delta_u)).
PickResult exponential_mechanism(std::span<const double> utilities,
                                 double delta_u, double epsilon, Rng& rng);

/// Minimal noise scale sigma = sqrt(2 ln(1.25/delta)) * sensitivity_l2 /
/// epsilon satisfying the Gaussian mechanism's variance requirement.
/// Requires epsilon strictly in (0,1) and delta in (0,1).
double gaussian_sigma(double sensitivity_l2, double epsilon, double delta);

/// Adds IID N(0, sigma^2) noise with sigma from gaussian_sigma; requires an
/// L2 sensitivity. Cost (epsilon, delta).
VecResult gaussian_mechanism(const Eigen::VectorXd& v,
                             const SensitivityNorm& sensitivity, double epsilon,
                             double delta, Rng& rng);

}  // namespace fldp
