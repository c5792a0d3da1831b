#include "fldp/sensitivity.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "fldp/error.hpp"
#include "fldp/rng.hpp"

namespace fldp {

SensitivityEstimate sample_sensitivity(const DatasetQuery& query,
                                       const SamplingDistribution& dist,
                                       long n, double gamma, NormKind norm,
                                       Eigen::Index record_count,
                                       std::uint64_t seed) {
  const Eigen::Index pool_rows = dist.pool.rows();
  if (pool_rows == 0) {
    throw InvalidArgument("sample_sensitivity: empty pool");
  }
  if (n < 1) {
    throw InvalidArgument("sample_sensitivity: n must be >= 1");
  }
  if (gamma <= 0.0 || gamma >= 1.0) {
    throw InvalidArgument("sample_sensitivity: gamma must be in (0,1)");
  }
  if (record_count < 2 || record_count > pool_rows) {
    throw InvalidArgument("sample_sensitivity: record_count must be in [2, " +
                          std::to_string(pool_rows) + "]");
  }

  double max_norm = 0.0;
  double sum_norm = 0.0;
  std::vector<Eigen::Index> base(static_cast<std::size_t>(record_count));
  for (long i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    for (Eigen::Index r = 0; r < record_count; ++r) {
      base[static_cast<std::size_t>(r)] = static_cast<Eigen::Index>(
          rng.index(static_cast<std::uint64_t>(pool_rows)));
    }
    const auto replaced =
        static_cast<std::size_t>(rng.index(static_cast<std::uint64_t>(record_count)));
    std::vector<Eigen::Index> neighbour = base;
    neighbour[replaced] = static_cast<Eigen::Index>(
        rng.index(static_cast<std::uint64_t>(pool_rows)));

    Eigen::VectorXd diff;
    try {
      diff = query(dist.pool.take(base)) - query(dist.pool.take(neighbour));
    } catch (const std::exception& e) {
      throw Error("sample_sensitivity: query failed on sample " +
                  std::to_string(i) + ": " + e.what());
    }
    const double value =
        norm == NormKind::kL1 ? diff.lpNorm<1>() : diff.norm();
    max_norm = std::max(max_norm, value);
    sum_norm += value;
  }

  SensitivityEstimate est;
  est.max_sensitivity = max_norm;
  est.mean_sensitivity = sum_norm / static_cast<double>(n);
  est.n_samples = n;
  est.gamma = gamma;
  est.norm_kind = norm;
  return est;
}

}  // namespace fldp
