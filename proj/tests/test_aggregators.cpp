#include <doctest.h>

#include <Eigen/Dense>

#include "fldp/aggregate.hpp"
#include "fldp/error.hpp"

using namespace fldp;

namespace {

ParamVector pv(std::initializer_list<double> values,
               const std::string& tag = "linreg:d=1") {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return ParamVector{v, tag};
}

}  // namespace

TEST_SUITE_BEGIN("aggregators");

TEST_CASE("fed_avg of identical inputs is the input") {
  const ParamVector theta = pv({1.5, -2.0});
  const ParamVector out =
      fed_avg({theta, theta, theta}, ClientWeights::uniform(3));
  CHECK(out.values == theta.values);
  CHECK(out.shape_tag == theta.shape_tag);
}

TEST_CASE("fed_avg uniform average") {
  const ParamVector out =
      fed_avg({pv({1, 2}), pv({3, 4})}, ClientWeights::uniform(2));
  CHECK(out.values[0] == doctest::Approx(2.0));
  CHECK(out.values[1] == doctest::Approx(3.0));
}

TEST_CASE("fed_avg weighted average") {
  ClientWeights w{Eigen::Vector3d(0.5, 0.25, 0.25)};
  const ParamVector out =
      fed_avg({pv({1, 0}), pv({0, 1}), pv({2, 2})}, w);
  CHECK(out.values[0] == doctest::Approx(1.0));
  CHECK(out.values[1] == doctest::Approx(0.75));
}

TEST_CASE("fed_avg linearity and convexity") {
  const std::vector<ParamVector> params = {pv({1, -3}), pv({5, 2}), pv({-2, 7})};
  ClientWeights w{Eigen::Vector3d(0.2, 0.5, 0.3)};
  const ParamVector base = fed_avg(params, w);

  std::vector<ParamVector> scaled = params;
  for (auto& p : scaled) p.values *= 2.5;
  const ParamVector out = fed_avg(scaled, w);
  CHECK(out.values.isApprox(2.5 * base.values, 1e-12));

  for (Eigen::Index i = 0; i < base.values.size(); ++i) {
    double lo = params[0].values[i], hi = params[0].values[i];
    for (const auto& p : params) {
      lo = std::min(lo, p.values[i]);
      hi = std::max(hi, p.values[i]);
    }
    CHECK(base.values[i] >= lo - 1e-12);
    CHECK(base.values[i] <= hi + 1e-12);
  }
}

TEST_CASE("fed_avg validation errors") {
  CHECK_THROWS_AS(fed_avg({}, ClientWeights::uniform(1)), InvalidArgument);
  CHECK_THROWS_AS(
      fed_avg({pv({1, 2}), pv({1, 2, 3}, "linreg:d=2")},
              ClientWeights::uniform(2)),
      ShapeError);
  ClientWeights bad{Eigen::Vector2d(0.7, 0.7)};  // sums to 1.4
  CHECK_THROWS_AS(fed_avg({pv({1, 2}), pv({3, 4})}, bad), InvalidArgument);
  ClientWeights negative{Eigen::Vector2d(-0.5, 1.5)};
  CHECK_THROWS_AS(fed_avg({pv({1, 2}), pv({3, 4})}, negative), InvalidArgument);
}

TEST_CASE("by_samples weighting") {
  const ClientWeights w = ClientWeights::by_samples({30, 10});
  CHECK(w.weights[0] == doctest::Approx(0.75));
  CHECK(w.weights[1] == doctest::Approx(0.25));
  w.validate();
}

TEST_CASE("cluster_aggregate: identical centroid sets are a fixed point") {
  const ParamVector c = pv({0.0, 10.0}, "kmeans:k=2,d=1");
  const ParamVector out = cluster_aggregate({c, c, c}, 2, 1);
  CHECK(out.values[0] == doctest::Approx(0.0));
  CHECK(out.values[1] == doctest::Approx(10.0));
}

TEST_CASE("cluster_aggregate merges nearby client centroids") {
  // Pooled points {0, 10, 0.2, 9.8}; Lloyd with k=2 lands on {0.1, 9.9}.
  const ParamVector a = pv({0.0, 10.0}, "kmeans:k=2,d=1");
  const ParamVector b = pv({0.2, 9.8}, "kmeans:k=2,d=1");
  const ParamVector out = cluster_aggregate({a, b}, 2, 1);
  CHECK(out.values[0] == doctest::Approx(0.1));
  CHECK(out.values[1] == doctest::Approx(9.9));
}

TEST_CASE("cluster_aggregate with a single client returns its centroids") {
  const ParamVector a = pv({3.0, -1.0}, "kmeans:k=2,d=1");
  const ParamVector out = cluster_aggregate({a}, 2, 1);
  // Sorted lexicographically.
  CHECK(out.values[0] == doctest::Approx(-1.0));
  CHECK(out.values[1] == doctest::Approx(3.0));
}

TEST_CASE("cluster_aggregate SSE beats any single client's initialisation") {
  const ParamVector a = pv({0.0, 10.0}, "kmeans:k=2,d=1");
  const ParamVector b = pv({4.0, 6.0}, "kmeans:k=2,d=1");
  Eigen::MatrixXd pooled(4, 1);
  pooled << 0.0, 10.0, 4.0, 6.0;
  const ParamVector merged = cluster_aggregate({a, b}, 2, 1);
  Eigen::MatrixXd merged_c(2, 1);
  merged_c << merged.values[0], merged.values[1];
  auto pooled_sse = [&](const Eigen::MatrixXd& cents) {
    double sse = 0.0;
    for (Eigen::Index i = 0; i < pooled.rows(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index c = 0; c < cents.rows(); ++c) {
        best = std::min(best, (pooled.row(i) - cents.row(c)).squaredNorm());
      }
      sse += best;
    }
    return sse;
  };
  Eigen::MatrixXd init_a(2, 1), init_b(2, 1);
  init_a << 0.0, 10.0;
  init_b << 4.0, 6.0;
  CHECK(pooled_sse(merged_c) <= pooled_sse(init_a) + 1e-12);
  CHECK(pooled_sse(merged_c) <= pooled_sse(init_b) + 1e-12);
}

TEST_CASE("cluster_aggregate shape errors") {
  const ParamVector a = pv({0.0, 10.0}, "kmeans:k=2,d=1");
  const ParamVector b = pv({0.0, 10.0, 3.0}, "kmeans:k=3,d=1");
  CHECK_THROWS_AS(cluster_aggregate({a, b}, 2, 1), ShapeError);
}

TEST_CASE("coop_merge at equal ages replaces the global model") {
  const auto [merged, age] = coop_merge(pv({0, 0}), 2, pv({4, 8}), 2);
  CHECK(merged.values[0] == doctest::Approx(4.0));
  CHECK(merged.values[1] == doctest::Approx(8.0));
  CHECK(age == 3);
}

TEST_CASE("coop_merge weights a stale update down") {
  // Age gap 3 -> alpha = 0.25.
  const auto [merged, age] = coop_merge(pv({0, 0}), 3, pv({4, 8}), 0);
  CHECK(merged.values[0] == doctest::Approx(1.0));
  CHECK(merged.values[1] == doctest::Approx(2.0));
  CHECK(age == 4);
}

TEST_CASE("coop_merge of identical parameters is identity") {
  const ParamVector theta = pv({1.0, -2.0});
  for (long gap : {0L, 1L, 5L}) {
    const auto [merged, age] = coop_merge(theta, gap, theta, 0);
    CHECK(merged.values.isApprox(theta.values, 1e-15));
  }
}

TEST_CASE("coop_merge stays in the convex hull componentwise") {
  const ParamVector g = pv({-1.0, 5.0});
  const ParamVector in = pv({3.0, 1.0});
  for (long gap : {0L, 1L, 2L, 7L}) {
    const auto [merged, _] = coop_merge(g, gap, in, 0);
    for (Eigen::Index i = 0; i < 2; ++i) {
      CHECK(merged.values[i] >= std::min(g.values[i], in.values[i]) - 1e-12);
      CHECK(merged.values[i] <= std::max(g.values[i], in.values[i]) + 1e-12);
    }
  }
}

TEST_CASE("coop_merge errors") {
  CHECK_THROWS_AS(coop_merge(pv({1}), -1, pv({1}), 0), InvalidArgument);
  CHECK_THROWS_AS(coop_merge(pv({1, 2}), 0, pv({1, 2, 3}, "linreg:d=2"), 0),
                  ShapeError);
}

TEST_SUITE_END();
