#include "labelnoise/dataset.hpp"

#include <string>

#include "labelnoise/errors.hpp"

namespace labelnoise {

Eigen::Index CorruptionTruth::corrupted_count() const {
  Eigen::Index count = 0;
  for (bool c : corrupted) {
    count += c ? 1 : 0;
  }
  return count;
}

Dataset::Dataset(Eigen::MatrixXd X, Eigen::VectorXd raw_labels,
                 std::optional<CorruptionTruth> truth)
    : X_(std::move(X)), raw_(std::move(raw_labels)), truth_(std::move(truth)) {
  if (X_.rows() == 0) {
    throw EmptyDatasetError();
  }
  if (raw_.size() != X_.rows()) {
    throw InvalidInputError("label count " + std::to_string(raw_.size()) +
                            " does not match input count " + std::to_string(X_.rows()));
  }
  if (!X_.allFinite() || !raw_.allFinite()) {
    throw InvalidInputError("dataset contains non-finite values");
  }
  if (truth_) {
    if (truth_->epsilon.size() != raw_.size() ||
        static_cast<Eigen::Index>(truth_->corrupted.size()) != raw_.size()) {
      throw InvalidInputError("truth annotations do not match label count");
    }
  }
  y_center_ = raw_.mean();
  y_ = raw_.array() - y_center_;
}

Dataset Dataset::subset(const std::vector<Eigen::Index>& rows) const {
  const auto m = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd X(m, X_.cols());
  Eigen::VectorXd raw(m);
  std::optional<CorruptionTruth> truth;
  if (truth_) {
    truth.emplace();
    truth->epsilon.resize(m);
    truth->corrupted.resize(rows.size());
  }
  for (Eigen::Index k = 0; k < m; ++k) {
    const Eigen::Index r = rows[static_cast<std::size_t>(k)];
    X.row(k) = X_.row(r);
    raw[k] = raw_[r];
    if (truth) {
      truth->epsilon[k] = truth_->epsilon[r];
      truth->corrupted[static_cast<std::size_t>(k)] = truth_->corrupted[static_cast<std::size_t>(r)];
    }
  }
  return Dataset(std::move(X), std::move(raw), std::move(truth));
}

} // namespace labelnoise
