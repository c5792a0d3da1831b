#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "fldp/dataset.hpp"

namespace fldp {

/// Flat parameter vector plus a tag describing the structure it encodes.
/// Two vectors can be aggregated iff their tags are equal.
struct ParamVector {
  Eigen::VectorXd values;
  std::string shape_tag;

  bool compatible_with(const ParamVector& other) const {
    return shape_tag == other.shape_tag &&
           values.size() == other.values.size();
  }
};

enum class MetricsKind { kRegression, kClassification, kClustering };

/// Absolute per-evaluation metrics. Regression carries the sufficient
/// statistics (squared-error and label sums) so that shard-level metrics can
/// be pooled into exact global metrics; classification carries the raw
/// confusion matrix for the same reason.
struct Metrics {
  MetricsKind kind = MetricsKind::kRegression;
  Eigen::Index n_samples = 0;

  // regression
  double rmse = 0.0;
  std::optional<double> r2;
  std::string r2_note;       // set when r2 is undefined (constant labels)
  double sum_sq_err = 0.0;
  double label_sum = 0.0;
  double label_sum_sq = 0.0;

  // classification
  double accuracy = 0.0;
  double loss = 0.0;
  Eigen::MatrixXi confusion;  // rows = true class, cols = predicted

  // clustering
  double within_sse = 0.0;
};

Metrics regression_metrics(const Eigen::VectorXd& predicted,
                           const Eigen::VectorXd& actual);

class Model {
 public:
  virtual ~Model() = default;
  virtual void train(const LabeledDataset& ds) = 0;
  virtual ParamVector get_params() const = 0;
  virtual void set_params(const ParamVector& p) = 0;
  /// Regression: predicted value. Classification/clustering: class or
  /// cluster index (ties resolved to the lowest index).
  virtual Eigen::VectorXd predict(const Eigen::MatrixXd& features) const = 0;
  virtual Metrics evaluate(const LabeledDataset& ds) const = 0;
  virtual std::unique_ptr<Model> clone() const = 0;
};

/// Ordinary least squares via the normal equations. Parameter layout is
/// [w_1 .. w_d, intercept]. Falls back to a ridge term (lambda = 1e-8) when
/// the Gram matrix condition estimate exceeds 1e12.
class LinearRegression : public Model {
 public:
  explicit LinearRegression(Eigen::Index n_features);
  void train(const LabeledDataset& ds) override;
  ParamVector get_params() const override;
  void set_params(const ParamVector& p) override;
  Eigen::VectorXd predict(const Eigen::MatrixXd& features) const override;
  Metrics evaluate(const LabeledDataset& ds) const override;
  std::unique_ptr<Model> clone() const override;

 private:
  Eigen::Index n_features_;
  Eigen::VectorXd params_;  // d weights + intercept
};

/// One-vs-rest logistic regression trained by full-batch gradient descent
/// (one step per epoch, fixed step size, zero initialisation). Parameter
/// layout is class-major: [class 0: w_1..w_d, b; class 1: ...].
class LogisticRegression : public Model {
 public:
  LogisticRegression(Eigen::Index n_features, int n_classes,
                     double step = 0.1, int epochs = 5);
  void train(const LabeledDataset& ds) override;
  ParamVector get_params() const override;
  void set_params(const ParamVector& p) override;
  Eigen::VectorXd predict(const Eigen::MatrixXd& features) const override;
  Metrics evaluate(const LabeledDataset& ds) const override;
  std::unique_ptr<Model> clone() const override;

  /// Per-class sigmoid scores, one row per sample.
  Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& features) const;
  /// Mean cross-entropy of the normalised class scores.
  double mean_loss(const LabeledDataset& ds) const;
  /// Largest stable step size 4/L with L the spectral-norm-based Lipschitz
  /// estimate lambda_max(X^T X)/n of the per-class gradient.
  static double stable_step_bound(const LabeledDataset& ds);

 private:
  Eigen::Index n_features_;
  int n_classes_;
  double step_;
  int epochs_;
  Eigen::MatrixXd weights_;  // n_classes x (d+1)
};

struct LloydResult {
  Eigen::MatrixXd centroids;
  double sse = 0.0;
  int iterations = 0;
};

/// Lloyd iterations from a given initialisation. Assignment ties go to the
/// lowest centroid index; an emptied cluster is repaired by moving the point
/// farthest from its assigned centroid. Stops when the largest centroid
/// shift drops below tol.
LloydResult lloyd(const Eigen::MatrixXd& points, const Eigen::MatrixXd& init,
                  int max_iterations = 300, double tol = 1e-9);

/// Lloyd k-means. First train() picks k distinct data points as seeds using
/// the model seed; subsequent train() calls refine the current centroids.
class KMeans : public Model {
 public:
  KMeans(int k, Eigen::Index dim, std::uint64_t seed);
  void train(const LabeledDataset& ds) override;
  ParamVector get_params() const override;
  void set_params(const ParamVector& p) override;
  Eigen::VectorXd predict(const Eigen::MatrixXd& features) const override;
  Metrics evaluate(const LabeledDataset& ds) const override;
  std::unique_ptr<Model> clone() const override;

  const Eigen::MatrixXd& centroids() const { return centroids_; }

 private:
  int k_;
  Eigen::Index dim_;
  std::uint64_t seed_;
  bool initialised_ = false;
  Eigen::MatrixXd centroids_;  // k x dim
};

}  // namespace fldp
