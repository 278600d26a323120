#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "labelnoise/dataset.hpp"
#include "labelnoise/gpr.hpp"
#include "labelnoise/kernel.hpp"
#include "labelnoise/noiseopt.hpp"

namespace labelnoise {

struct MetricSummary {
  std::optional<double> auc;
  /// recall level -> precision at the first operating point reaching it
  std::map<double, double> precision_at_recall;
  std::optional<double> r2_noise;
  std::optional<double> mae_plain;
  std::optional<double> mae_basic;
  std::optional<double> mae_full;
};

struct DetectionReport {
  NoiseVector sigma;
  Eigen::VectorXd scores;
  double threshold = 0.0;
  std::vector<bool> flags;
  std::optional<MetricSummary> metrics;
};

enum class NoiseModel { plain, basic, full };

std::string_view to_string(NoiseModel mode);
/// Accepts "plain", "basic" and "full"; anything else is a ConfigError.
NoiseModel parse_noise_model(std::string_view name);

/// flags[i] = sigma_i > threshold. Scores are the noise variances themselves.
DetectionReport flag_noisy(const NoiseVector& sigma, double threshold);

/// median(sigma) + 3 * MAD(sigma), with MAD the unscaled median absolute
/// deviation. Used when no threshold is given.
double default_threshold(const NoiseVector& sigma);

/// Mann-Whitney estimate of P(score_pos > score_neg), ties counting one half.
double roc_auc(const Eigen::VectorXd& scores, const std::vector<bool>& truth);

/// Sweeps thresholds over the distinct scores in descending order (tied
/// scores enter together) and, for each level r, reports the precision of
/// the first operating point whose recall is at least r.
std::map<double, double> precision_at_recall(const Eigen::VectorXd& scores,
                                             const std::vector<bool>& truth,
                                             const std::vector<double>& levels);

/// Coefficient of determination of `sigma` as a predictor of `target`
/// (the squared injected perturbations). May be negative.
double r2_noise(const NoiseVector& sigma, const Eigen::VectorXd& target);

/// Mean over folds of the held-out mean absolute error, for a fixed kernel.
///
/// Rows are shuffled with `seed` and cut into `folds` contiguous blocks whose
/// sizes differ by at most one. Each training split keeps the dataset's
/// centered labels (no per-fold recentering), so folds = N reproduces the
/// closed-form leave-one-out errors of the plain model.
double cv_mae(const Dataset& data, const KernelParams& params, NoiseModel mode, int folds,
              std::uint64_t seed, const MultUpdateConfig& config = {});

} // namespace labelnoise
