#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>

#include "fldp/dataset.hpp"
#include "fldp/mechanisms.hpp"

namespace fldp {

/// Row source for sensitivity sampling: uniform with replacement over a pool.
struct SamplingDistribution {
  LabeledDataset pool;
};

struct SensitivityEstimate {
  double max_sensitivity = 0.0;
  double mean_sensitivity = 0.0;
  long n_samples = 0;
  double gamma = 0.0;      // confidence metadata, carried but not acted on
  NormKind norm_kind = NormKind::kL1;
};

using DatasetQuery = std::function<Eigen::VectorXd(const LabeledDataset&)>;

/// Empirical sensitivity of `query` over neighbouring datasets: n times,
/// draw a base dataset of record_count rows from the pool, replace one
/// uniformly chosen row with a fresh draw, and measure ||query(base) -
/// query(neighbour)|| in the requested norm. Returns the max and mean of the
/// n norms. Each iteration consumes its own index-derived substream of
/// `seed`, so results are independent of evaluation order and the running
/// max is non-decreasing in n for a fixed seed.
SensitivityEstimate sample_sensitivity(const DatasetQuery& query,
                                       const SamplingDistribution& dist,
                                       long n, double gamma, NormKind norm,
                                       Eigen::Index record_count,
                                       std::uint64_t seed);

}  // namespace fldp
