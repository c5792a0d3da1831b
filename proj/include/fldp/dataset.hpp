#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fldp {

/// Feature matrix (rows = samples) plus a label per row. Labels are stored
/// as doubles; classification code treats them as nonnegative class indices.
struct LabeledDataset {
  Eigen::MatrixXd features;
  Eigen::VectorXd labels;
  std::vector<std::string> feature_names;  // may be empty

  Eigen::Index rows() const { return features.rows(); }
  Eigen::Index cols() const { return features.cols(); }

  /// Number of distinct classes assuming labels are indices 0..K-1.
  int class_count() const;

  /// Copies the given rows into a new dataset.
  LabeledDataset take(const std::vector<Eigen::Index>& row_indices) const;

  /// Enforces the type invariants: matching row counts, finite entries.
  void validate(const std::string& context) const;
};

struct SplitSpec {
  double train_fraction = 0.8;       // strictly in (0,1)
  Eigen::Index holdout_rows = 0;     // reserved before splitting
};

struct SplitResult {
  LabeledDataset train;
  LabeledDataset test;
  LabeledDataset holdout;
};

enum class PartitionKind { kIid, kLabelSkew };

/// Disjoint per-client shards of a source dataset.
struct FederatedPartition {
  std::vector<LabeledDataset> shards;
  PartitionKind kind = PartitionKind::kIid;
  std::vector<std::vector<Eigen::Index>> source_row_indices;  // one per shard
};

/// Parses a comma-delimited file with a mandatory header row. The named
/// label column becomes the label vector; the rest become features.
LabeledDataset load_csv(const std::filesystem::path& path,
                        const std::string& label_column);

void write_csv(const std::filesystem::path& path, const LabeledDataset& ds,
               const std::string& label_name);

/// labels = features * coefficients[0..d-1] + coefficients[d] + N(0, noise_sd^2),
/// features standard normal. Deterministic for a fixed seed.
LabeledDataset synthesize_regression(Eigen::Index n, Eigen::Index n_features,
                                     const Eigen::VectorXd& coefficients,
                                     double noise_sd, std::uint64_t seed);

/// Gaussian scatter around each center; label = cluster index.
LabeledDataset synthesize_blobs(Eigen::Index n_per_cluster,
                                const std::vector<Eigen::VectorXd>& centers,
                                double spread_sd, std::uint64_t seed);

/// Two-feature housing-style regression dataset: a skewed income-like
/// feature, an integer age-like feature, and a price-like target whose
/// linear fit leaves RMSE ~0.815 and R^2 ~0.50. Serves as a deterministic
/// stand-in for the public California Housing table when the original file
/// is not available.
LabeledDataset synthesize_housing(Eigen::Index n, std::uint64_t seed);

/// Seeded shuffle, carve holdout_rows from the end, split the rest by
/// train_fraction. The three parts are disjoint and exhaustive.
SplitResult split(const LabeledDataset& ds, const SplitSpec& spec,
                  std::uint64_t seed);

/// Seeded shuffle, keep `percent` of the rows, deal round-robin.
/// Shard sizes differ by at most one.
FederatedPartition partition_iid(const LabeledDataset& ds, int n_clients,
                                 double percent, std::uint64_t seed);

/// Each client receives rows of at most labels_per_client distinct classes;
/// class-to-client assignment is seeded and every class lands on >= 1 client.
FederatedPartition partition_label_skew(const LabeledDataset& ds,
                                        int n_clients, int labels_per_client,
                                        std::uint64_t seed);

}  // namespace fldp
