#include "fldp/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fldp/error.hpp"

namespace fldp {

ClientWeights ClientWeights::uniform(int n_clients) {
  if (n_clients < 1) throw InvalidArgument("weights: need >= 1 client");
  return ClientWeights{Eigen::VectorXd::Constant(n_clients, 1.0 / n_clients)};
}

ClientWeights ClientWeights::by_samples(
    const std::vector<Eigen::Index>& counts) {
  if (counts.empty()) throw InvalidArgument("weights: need >= 1 client");
  Eigen::VectorXd w(static_cast<Eigen::Index>(counts.size()));
  double total = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] < 0) throw InvalidArgument("weights: negative sample count");
    w[static_cast<Eigen::Index>(i)] = static_cast<double>(counts[i]);
    total += static_cast<double>(counts[i]);
  }
  if (total <= 0.0) throw InvalidArgument("weights: zero total sample count");
  return ClientWeights{w / total};
}

void ClientWeights::validate() const {
  if (weights.size() == 0) throw InvalidArgument("weights: empty");
  if ((weights.array() < 0.0).any()) {
    throw InvalidArgument("weights: negative entry");
  }
  if (std::abs(weights.sum() - 1.0) > 1e-9) {
    throw InvalidArgument("weights: sum " + std::to_string(weights.sum()) +
                          " != 1");
  }
}

ParamVector fed_avg(const std::vector<ParamVector>& params,
                    const ClientWeights& weights) {
  if (params.empty()) throw InvalidArgument("fed_avg: no client parameters");
  weights.validate();
  if (weights.weights.size() != static_cast<Eigen::Index>(params.size())) {
    throw ShapeError("fed_avg: " + std::to_string(params.size()) +
                     " parameter vectors but " +
                     std::to_string(weights.weights.size()) + " weights");
  }
  for (const auto& p : params) {
    if (!p.compatible_with(params.front())) {
      throw ShapeError("fed_avg: mixed shape tags \"" + params.front().shape_tag +
                       "\" vs \"" + p.shape_tag + "\"");
    }
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(params.front().values.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    out += weights.weights[static_cast<Eigen::Index>(i)] * params[i].values;
  }
  return ParamVector{out, params.front().shape_tag};
}

ParamVector cluster_aggregate(const std::vector<ParamVector>& centroid_sets,
                              int k, std::uint64_t /*seed*/) {
  if (centroid_sets.empty()) {
    throw InvalidArgument("cluster_aggregate: no client centroids");
  }
  const std::string& tag = centroid_sets.front().shape_tag;
  for (const auto& p : centroid_sets) {
    if (!p.compatible_with(centroid_sets.front())) {
      throw ShapeError("cluster_aggregate: mixed shape tags");
    }
  }
  if (centroid_sets.front().values.size() % k != 0) {
    throw ShapeError("cluster_aggregate: parameter length not divisible by k");
  }
  const Eigen::Index dim = centroid_sets.front().values.size() / k;

  const auto n_clients = static_cast<Eigen::Index>(centroid_sets.size());
  Eigen::MatrixXd pooled(n_clients * k, dim);
  Eigen::Index row = 0;
  for (const auto& p : centroid_sets) {
    for (int c = 0; c < k; ++c) {
      pooled.row(row++) = p.values.segment(static_cast<Eigen::Index>(c) * dim, dim);
    }
  }
  Eigen::MatrixXd init(k, dim);
  for (int c = 0; c < k; ++c) {
    init.row(c) =
        centroid_sets.front().values.segment(static_cast<Eigen::Index>(c) * dim, dim);
  }
  Eigen::MatrixXd merged = lloyd(pooled, init).centroids;

  // Lexicographic sort for an order-stable result.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) order[static_cast<std::size_t>(c)] = c;
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index j = 0; j < dim; ++j) {
      if (merged(a, j) != merged(b, j)) return merged(a, j) < merged(b, j);
    }
    return false;
  });
  Eigen::VectorXd flat(static_cast<Eigen::Index>(k) * dim);
  for (int c = 0; c < k; ++c) {
    flat.segment(static_cast<Eigen::Index>(c) * dim, dim) =
        merged.row(order[static_cast<std::size_t>(c)]);
  }
  return ParamVector{flat, tag};
}

CoopResult coop_merge(const ParamVector& global, long global_age,
                      const ParamVector& incoming, long incoming_age) {
  if (!global.compatible_with(incoming)) {
    throw ShapeError("coop_merge: incompatible shapes \"" + global.shape_tag +
                     "\" vs \"" + incoming.shape_tag + "\"");
  }
  if (global_age < 0 || incoming_age < 0) {
    throw InvalidArgument("coop_merge: ages must be >= 0");
  }
  const long gap = std::max(0L, global_age - incoming_age);
  const double alpha = 1.0 / (1.0 + static_cast<double>(gap));
  ParamVector merged{(1.0 - alpha) * global.values + alpha * incoming.values,
                     global.shape_tag};
  return CoopResult{std::move(merged), global_age + 1};
}

}  // namespace fldp
