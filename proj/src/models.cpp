#include "fldp/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "fldp/error.hpp"
#include "fldp/rng.hpp"

namespace fldp {

namespace {

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd a(x.rows(), x.cols() + 1);
  a.leftCols(x.cols()) = x;
  a.col(x.cols()).setOnes();
  return a;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// Nearest centroid by Euclidean distance, lowest index on ties.
Eigen::Index nearest_centroid(const Eigen::MatrixXd& centroids,
                              const Eigen::RowVectorXd& point) {
  Eigen::Index best = 0;
  double best_d = (centroids.row(0) - point).squaredNorm();
  for (Eigen::Index c = 1; c < centroids.rows(); ++c) {
    const double d = (centroids.row(c) - point).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

}  // namespace

Metrics regression_metrics(const Eigen::VectorXd& predicted,
                           const Eigen::VectorXd& actual) {
  Metrics m;
  m.kind = MetricsKind::kRegression;
  m.n_samples = actual.size();
  m.sum_sq_err = (predicted - actual).squaredNorm();
  m.rmse = std::sqrt(m.sum_sq_err / static_cast<double>(actual.size()));
  m.label_sum = actual.sum();
  m.label_sum_sq = actual.squaredNorm();
  const double mean = actual.mean();
  const double ss_tot = (actual.array() - mean).square().sum();
  if (ss_tot == 0.0) {
    m.r2_note = "r2 undefined: labels are constant (SS_tot == 0)";
  } else {
    m.r2 = 1.0 - m.sum_sq_err / ss_tot;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Linear regression
// ---------------------------------------------------------------------------

LinearRegression::LinearRegression(Eigen::Index n_features)
    : n_features_(n_features), params_(Eigen::VectorXd::Zero(n_features + 1)) {}

void LinearRegression::train(const LabeledDataset& ds) {
  if (ds.rows() == 0) throw DataError("linreg train: empty dataset");
  if (ds.cols() != n_features_) {
    throw ShapeError("linreg train: dataset has " + std::to_string(ds.cols()) +
                     " features, model expects " + std::to_string(n_features_));
  }
  const Eigen::MatrixXd a = with_intercept(ds.features);
  Eigen::MatrixXd gram = a.transpose() * a;
  const Eigen::VectorXd rhs = a.transpose() * ds.labels;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  const bool singular = lo <= 0.0 || hi / lo > 1e12;
  if (singular) {
    gram.diagonal().array() += 1e-8;
  }
  params_ = gram.ldlt().solve(rhs);
}

ParamVector LinearRegression::get_params() const {
  return ParamVector{params_, "linreg:d=" + std::to_string(n_features_)};
}

void LinearRegression::set_params(const ParamVector& p) {
  if (p.shape_tag != "linreg:d=" + std::to_string(n_features_) ||
      p.values.size() != n_features_ + 1) {
    throw ShapeError("linreg set_params: incompatible shape tag \"" +
                     p.shape_tag + "\"");
  }
  params_ = p.values;
}

Eigen::VectorXd LinearRegression::predict(
    const Eigen::MatrixXd& features) const {
  if (features.cols() != n_features_) {
    throw ShapeError("linreg predict: feature dimension mismatch");
  }
  return features * params_.head(n_features_) +
         Eigen::VectorXd::Constant(features.rows(), params_[n_features_]);
}

Metrics LinearRegression::evaluate(const LabeledDataset& ds) const {
  if (ds.rows() == 0) throw DataError("linreg evaluate: empty dataset");
  return regression_metrics(predict(ds.features), ds.labels);
}

std::unique_ptr<Model> LinearRegression::clone() const {
  return std::make_unique<LinearRegression>(*this);
}

// ---------------------------------------------------------------------------
// Logistic regression
// ---------------------------------------------------------------------------

LogisticRegression::LogisticRegression(Eigen::Index n_features, int n_classes,
                                       double step, int epochs)
    : n_features_(n_features),
      n_classes_(n_classes),
      step_(step),
      epochs_(epochs),
      weights_(Eigen::MatrixXd::Zero(n_classes, n_features + 1)) {
  if (n_classes < 2) {
    throw InvalidArgument("logreg: need at least 2 classes");
  }
  if (step <= 0 || epochs < 1) {
    throw InvalidArgument("logreg: step must be > 0 and epochs >= 1");
  }
}

void LogisticRegression::train(const LabeledDataset& ds) {
  if (ds.rows() == 0) throw DataError("logreg train: empty dataset");
  if (ds.cols() != n_features_) {
    throw ShapeError("logreg train: feature dimension mismatch");
  }
  const Eigen::MatrixXd a = with_intercept(ds.features);
  const double n = static_cast<double>(ds.rows());
  for (int epoch = 0; epoch < epochs_; ++epoch) {
    for (int c = 0; c < n_classes_; ++c) {
      Eigen::VectorXd z = a * weights_.row(c).transpose();
      Eigen::VectorXd p = z.unaryExpr([](double v) { return sigmoid(v); });
      Eigen::VectorXd target(ds.rows());
      for (Eigen::Index i = 0; i < ds.rows(); ++i) {
        target[i] = ds.labels[i] == static_cast<double>(c) ? 1.0 : 0.0;
      }
      weights_.row(c) -= (step_ / n) * ((p - target).transpose() * a);
    }
  }
}

ParamVector LogisticRegression::get_params() const {
  Eigen::VectorXd flat(weights_.size());
  Eigen::Index pos = 0;
  for (int c = 0; c < n_classes_; ++c) {
    flat.segment(pos, n_features_ + 1) = weights_.row(c);
    pos += n_features_ + 1;
  }
  return ParamVector{flat, "logreg:d=" + std::to_string(n_features_) +
                               ",k=" + std::to_string(n_classes_)};
}

void LogisticRegression::set_params(const ParamVector& p) {
  const std::string tag = "logreg:d=" + std::to_string(n_features_) +
                          ",k=" + std::to_string(n_classes_);
  if (p.shape_tag != tag ||
      p.values.size() != static_cast<Eigen::Index>(n_classes_) * (n_features_ + 1)) {
    throw ShapeError("logreg set_params: incompatible shape tag \"" +
                     p.shape_tag + "\"");
  }
  Eigen::Index pos = 0;
  for (int c = 0; c < n_classes_; ++c) {
    weights_.row(c) = p.values.segment(pos, n_features_ + 1);
    pos += n_features_ + 1;
  }
}

Eigen::MatrixXd LogisticRegression::predict_proba(
    const Eigen::MatrixXd& features) const {
  if (features.cols() != n_features_) {
    throw ShapeError("logreg predict: feature dimension mismatch");
  }
  const Eigen::MatrixXd a = with_intercept(features);
  Eigen::MatrixXd scores = a * weights_.transpose();
  return scores.unaryExpr([](double v) { return sigmoid(v); });
}

Eigen::VectorXd LogisticRegression::predict(
    const Eigen::MatrixXd& features) const {
  const Eigen::MatrixXd proba = predict_proba(features);
  Eigen::VectorXd out(features.rows());
  for (Eigen::Index i = 0; i < proba.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < proba.cols(); ++c) {
      if (proba(i, c) > proba(i, best)) best = c;
    }
    out[i] = static_cast<double>(best);
  }
  return out;
}

double LogisticRegression::mean_loss(const LabeledDataset& ds) const {
  const Eigen::MatrixXd proba = predict_proba(ds.features);
  double total = 0.0;
  for (Eigen::Index i = 0; i < ds.rows(); ++i) {
    const double row_sum = proba.row(i).sum();
    const auto cls = static_cast<Eigen::Index>(ds.labels[i]);
    const double p = std::clamp(proba(i, cls) / row_sum, 1e-12, 1.0);
    total -= std::log(p);
  }
  return total / static_cast<double>(ds.rows());
}

double LogisticRegression::stable_step_bound(const LabeledDataset& ds) {
  const Eigen::MatrixXd a = with_intercept(ds.features);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a.transpose() * a);
  const double lipschitz =
      es.eigenvalues().maxCoeff() / static_cast<double>(ds.rows());
  return 4.0 / lipschitz;
}

Metrics LogisticRegression::evaluate(const LabeledDataset& ds) const {
  if (ds.rows() == 0) throw DataError("logreg evaluate: empty dataset");
  Metrics m;
  m.kind = MetricsKind::kClassification;
  m.n_samples = ds.rows();
  m.confusion = Eigen::MatrixXi::Zero(n_classes_, n_classes_);
  const Eigen::VectorXd pred = predict(ds.features);
  for (Eigen::Index i = 0; i < ds.rows(); ++i) {
    const auto t = static_cast<Eigen::Index>(ds.labels[i]);
    const auto p = static_cast<Eigen::Index>(pred[i]);
    if (t < 0 || t >= n_classes_) {
      throw DataError("logreg evaluate: label " + std::to_string(ds.labels[i]) +
                      " outside [0," + std::to_string(n_classes_) + ")");
    }
    m.confusion(t, p) += 1;
  }
  m.accuracy = static_cast<double>(m.confusion.diagonal().sum()) /
               static_cast<double>(ds.rows());
  m.loss = mean_loss(ds);
  return m;
}

std::unique_ptr<Model> LogisticRegression::clone() const {
  return std::make_unique<LogisticRegression>(*this);
}

// ---------------------------------------------------------------------------
// k-means
// ---------------------------------------------------------------------------

LloydResult lloyd(const Eigen::MatrixXd& points, const Eigen::MatrixXd& init,
                  int max_iterations, double tol) {
  const Eigen::Index k = init.rows();
  const Eigen::Index n = points.rows();
  if (n < k) {
    throw DataError("lloyd: fewer points than clusters");
  }
  Eigen::MatrixXd centroids = init;
  std::vector<Eigen::Index> assign(static_cast<std::size_t>(n), 0);
  LloydResult result;
  for (int iter = 0; iter < max_iterations; ++iter) {
    result.iterations = iter + 1;
    for (Eigen::Index i = 0; i < n; ++i) {
      assign[static_cast<std::size_t>(i)] =
          nearest_centroid(centroids, points.row(i));
    }
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assign[static_cast<std::size_t>(i)]) += points.row(i);
      counts[assign[static_cast<std::size_t>(i)]] += 1.0;
    }
    // Repair empty clusters with the point farthest from its centroid.
    for (Eigen::Index c = 0; c < k; ++c) {
      if (counts[c] > 0.0) continue;
      Eigen::Index far = 0;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto cur = assign[static_cast<std::size_t>(i)];
        if (counts[cur] <= 1.0) continue;  // would empty another cluster
        const double d = (points.row(i) - centroids.row(cur)).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      const auto old = assign[static_cast<std::size_t>(far)];
      sums.row(old) -= points.row(far);
      counts[old] -= 1.0;
      assign[static_cast<std::size_t>(far)] = c;
      sums.row(c) += points.row(far);
      counts[c] += 1.0;
    }
    Eigen::MatrixXd updated(k, points.cols());
    for (Eigen::Index c = 0; c < k; ++c) {
      updated.row(c) = sums.row(c) / counts[c];
    }
    double shift = 0.0;
    for (Eigen::Index c = 0; c < k; ++c) {
      shift = std::max(shift, (updated.row(c) - centroids.row(c)).norm());
    }
    centroids = updated;
    if (shift < tol) break;
  }
  result.centroids = centroids;
  result.sse = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    result.sse +=
        (points.row(i) - centroids.row(nearest_centroid(centroids, points.row(i))))
            .squaredNorm();
  }
  return result;
}

KMeans::KMeans(int k, Eigen::Index dim, std::uint64_t seed)
    : k_(k), dim_(dim), seed_(seed),
      centroids_(Eigen::MatrixXd::Zero(k, dim)) {
  if (k < 1) throw InvalidArgument("kmeans: k must be >= 1");
}

void KMeans::train(const LabeledDataset& ds) {
  if (ds.rows() == 0) throw DataError("kmeans train: empty dataset");
  if (ds.cols() != dim_) {
    throw ShapeError("kmeans train: feature dimension mismatch");
  }
  if (!initialised_) {
    if (ds.rows() < k_) {
      throw DataError("kmeans train: fewer rows than clusters");
    }
    // Seeded draw of k distinct rows as the initial centroids.
    Rng rng(seed_);
    std::set<Eigen::Index> chosen;
    while (static_cast<int>(chosen.size()) < k_) {
      chosen.insert(static_cast<Eigen::Index>(rng.index(
          static_cast<std::uint64_t>(ds.rows()))));
    }
    Eigen::Index r = 0;
    for (const Eigen::Index row : chosen) {
      centroids_.row(r++) = ds.features.row(row);
    }
    initialised_ = true;
  }
  centroids_ = lloyd(ds.features, centroids_).centroids;
}

ParamVector KMeans::get_params() const {
  Eigen::VectorXd flat(centroids_.size());
  Eigen::Index pos = 0;
  for (Eigen::Index c = 0; c < centroids_.rows(); ++c) {
    flat.segment(pos, dim_) = centroids_.row(c);
    pos += dim_;
  }
  return ParamVector{flat, "kmeans:k=" + std::to_string(k_) +
                               ",d=" + std::to_string(dim_)};
}

void KMeans::set_params(const ParamVector& p) {
  const std::string tag =
      "kmeans:k=" + std::to_string(k_) + ",d=" + std::to_string(dim_);
  if (p.shape_tag != tag || p.values.size() != static_cast<Eigen::Index>(k_) * dim_) {
    throw ShapeError("kmeans set_params: incompatible shape tag \"" +
                     p.shape_tag + "\"");
  }
  Eigen::Index pos = 0;
  for (int c = 0; c < k_; ++c) {
    centroids_.row(c) = p.values.segment(pos, dim_);
    pos += dim_;
  }
  initialised_ = true;
}

Eigen::VectorXd KMeans::predict(const Eigen::MatrixXd& features) const {
  if (features.cols() != dim_) {
    throw ShapeError("kmeans predict: feature dimension mismatch");
  }
  Eigen::VectorXd out(features.rows());
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    out[i] = static_cast<double>(nearest_centroid(centroids_, features.row(i)));
  }
  return out;
}

Metrics KMeans::evaluate(const LabeledDataset& ds) const {
  if (ds.rows() == 0) throw DataError("kmeans evaluate: empty dataset");
  Metrics m;
  m.kind = MetricsKind::kClustering;
  m.n_samples = ds.rows();
  m.within_sse = 0.0;
  for (Eigen::Index i = 0; i < ds.rows(); ++i) {
    const Eigen::Index c = nearest_centroid(centroids_, ds.features.row(i));
    m.within_sse += (ds.features.row(i) - centroids_.row(c)).squaredNorm();
  }
  return m;
}

std::unique_ptr<Model> KMeans::clone() const {
  return std::make_unique<KMeans>(*this);
}

}  // namespace fldp
