#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

namespace labelnoise {

/// Ground-truth corruption annotations carried by synthetic datasets.
struct CorruptionTruth {
  /// Injected perturbation per label; 0 for clean labels.
  Eigen::VectorXd epsilon;
  std::vector<bool> corrupted;

  Eigen::Index corrupted_count() const;
};

/// Inputs X (N x d) and labels. Labels are stored twice: as read/generated
/// (`raw_labels`) and centered to zero mean (`y`), with `y_center` the
/// subtracted offset. Construction is the only way to set labels so the two
/// views never drift apart.
class Dataset {
public:
  Dataset() = default;

  /// Throws EmptyDatasetError for N = 0 and InvalidInputError for shape
  /// mismatches or non-finite values.
  Dataset(Eigen::MatrixXd X, Eigen::VectorXd raw_labels,
          std::optional<CorruptionTruth> truth = std::nullopt);

  Eigen::Index size() const { return X_.rows(); }
  Eigen::Index dim() const { return X_.cols(); }

  const Eigen::MatrixXd& X() const { return X_; }
  const Eigen::VectorXd& y() const { return y_; }
  const Eigen::VectorXd& raw_labels() const { return raw_; }
  double y_center() const { return y_center_; }
  const std::optional<CorruptionTruth>& truth() const { return truth_; }

  /// Map a prediction in centered units back to raw label units.
  double uncenter(double centered) const { return centered + y_center_; }

  /// Rows selected by `rows`, recentered on the subset's own labels.
  Dataset subset(const std::vector<Eigen::Index>& rows) const;

private:
  Eigen::MatrixXd X_;
  Eigen::VectorXd raw_;
  Eigen::VectorXd y_;
  double y_center_ = 0.0;
  std::optional<CorruptionTruth> truth_;
};

} // namespace labelnoise
