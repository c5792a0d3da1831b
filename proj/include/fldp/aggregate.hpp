#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "fldp/models.hpp"

namespace fldp {

/// Convex client weights: each w_i >= 0, sum w_i = 1.
struct ClientWeights {
  Eigen::VectorXd weights;

  static ClientWeights uniform(int n_clients);
  static ClientWeights by_samples(const std::vector<Eigen::Index>& counts);
  void validate() const;
};

/// Componentwise weighted average of client parameter vectors.
ParamVector fed_avg(const std::vector<ParamVector>& params,
                    const ClientWeights& weights);

/// Pools every client's k centroids and runs Lloyd k-means over the pooled
/// points, initialised from the first client's centroids. The resulting k
/// centroids are sorted lexicographically so the output is order-stable.
ParamVector cluster_aggregate(const std::vector<ParamVector>& centroid_sets,
                              int k, std::uint64_t seed);

struct CoopResult {
  ParamVector merged;
  long new_global_age;
};

/// Age-weighted asynchronous merge: alpha = 1 / (1 + max(0, global_age -
/// incoming_age)), merged = (1-alpha) * global + alpha * incoming. The alpha
/// form is a fixed choice of this library (monotone in staleness, plain
/// replacement at age gap zero) and can be swapped out behind this interface.
CoopResult coop_merge(const ParamVector& global, long global_age,
                      const ParamVector& incoming, long incoming_age);

}  // namespace fldp
