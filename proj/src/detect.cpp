#include "labelnoise/detect.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "labelnoise/errors.hpp"
#include "labelnoise/random.hpp"

namespace labelnoise {

namespace {

void check_truth(const Eigen::VectorXd& scores, const std::vector<bool>& truth) {
  if (static_cast<Eigen::Index>(truth.size()) != scores.size()) {
    throw InvalidInputError("scores and truth differ in length");
  }
}

double median(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double m = *mid;
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), mid));
  }
  return m;
}

} // namespace

std::string_view to_string(NoiseModel mode) {
  switch (mode) {
  case NoiseModel::plain:
    return "plain";
  case NoiseModel::basic:
    return "basic";
  case NoiseModel::full:
    return "full";
  }
  return "?";
}

NoiseModel parse_noise_model(std::string_view name) {
  if (name == "plain") {
    return NoiseModel::plain;
  }
  if (name == "basic") {
    return NoiseModel::basic;
  }
  if (name == "full") {
    return NoiseModel::full;
  }
  throw ConfigError("unknown noise model '" + std::string(name) + "'");
}

DetectionReport flag_noisy(const NoiseVector& sigma, double threshold) {
  if (!(threshold >= 0.0)) {
    throw ConfigError("threshold must be non-negative");
  }
  DetectionReport r;
  r.sigma = sigma;
  r.scores = sigma.values();
  r.threshold = threshold;
  r.flags.resize(static_cast<std::size_t>(sigma.size()));
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    r.flags[static_cast<std::size_t>(i)] = r.scores[i] > threshold;
  }
  return r;
}

double default_threshold(const NoiseVector& sigma) {
  if (sigma.size() == 0) {
    throw EmptyDatasetError();
  }
  std::vector<double> v(sigma.values().begin(), sigma.values().end());
  const double med = median(v);
  for (auto& x : v) {
    x = std::abs(x - med);
  }
  return med + 3.0 * median(std::move(v));
}

double roc_auc(const Eigen::VectorXd& scores, const std::vector<bool>& truth) {
  check_truth(scores, truth);
  // Rank-sum form of the pair count: average ranks resolve ties with 1/2 credit.
  const auto n = static_cast<std::size_t>(scores.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[static_cast<Eigen::Index>(a)] < scores[static_cast<Eigen::Index>(b)];
  });

  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    const double v = scores[static_cast<Eigen::Index>(order[i])];
    while (j < n && scores[static_cast<Eigen::Index>(order[j])] == v) {
      ++j;
    }
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (truth[order[k]]) {
        pos_rank_sum += avg_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw UndefinedMetricError("ROC AUC needs at least one positive and one negative label");
  }
  const double np = static_cast<double>(n_pos);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

std::map<double, double> precision_at_recall(const Eigen::VectorXd& scores,
                                             const std::vector<bool>& truth,
                                             const std::vector<double>& levels) {
  check_truth(scores, truth);
  const auto n = static_cast<std::size_t>(scores.size());
  const auto n_pos = static_cast<std::size_t>(std::count(truth.begin(), truth.end(), true));
  if (n_pos == 0) {
    throw UndefinedMetricError("precision at recall needs at least one positive label");
  }
  for (double r : levels) {
    if (!(r > 0.0 && r <= 1.0)) {
      throw ConfigError("recall levels must lie in (0, 1]");
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[static_cast<Eigen::Index>(a)] > scores[static_cast<Eigen::Index>(b)];
  });

  // Operating points (recall, precision) with all ties admitted together.
  std::vector<std::pair<double, double>> points;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    const double v = scores[static_cast<Eigen::Index>(order[i])];
    while (j < n && scores[static_cast<Eigen::Index>(order[j])] == v) {
      tp += truth[order[j]] ? 1 : 0;
      ++j;
    }
    points.emplace_back(static_cast<double>(tp) / static_cast<double>(n_pos),
                        static_cast<double>(tp) / static_cast<double>(j));
    i = j;
  }

  std::map<double, double> out;
  for (double r : levels) {
    const auto it = std::find_if(points.begin(), points.end(),
                                 [r](const auto& pt) { return pt.first >= r; });
    // Every positive is admitted by the last point, so `it` is valid.
    out[r] = it->second;
  }
  return out;
}

double r2_noise(const NoiseVector& sigma, const Eigen::VectorXd& target) {
  if (sigma.size() != target.size()) {
    throw InvalidInputError("sigma and target differ in length");
  }
  const double mean = target.mean();
  const double ss_tot = (target.array() - mean).square().sum();
  if (!(ss_tot > 0.0)) {
    throw UndefinedMetricError("R^2 is undefined for a constant target");
  }
  const double ss_res = (sigma.values() - target).squaredNorm();
  return 1.0 - ss_res / ss_tot;
}

double cv_mae(const Dataset& data, const KernelParams& params, NoiseModel mode, int folds,
              std::uint64_t seed, const MultUpdateConfig& config) {
  const Eigen::Index n = data.size();
  if (folds < 2 || n < folds) {
    throw ConfigError("cross-validation needs 2 <= folds <= N");
  }
  Xoshiro256 rng(seed);
  const auto perm = permutation(rng, static_cast<std::size_t>(n));
  const Eigen::MatrixXd K = build_kernel_matrix(params, data.X());
  const auto& y = data.y();

  double total = 0.0;
  for (int f = 0; f < folds; ++f) {
    const auto lo = static_cast<std::size_t>(f * n / folds);
    const auto hi = static_cast<std::size_t>((f + 1) * n / folds);
    std::vector<Eigen::Index> test;
    std::vector<Eigen::Index> train;
    for (std::size_t k = 0; k < perm.size(); ++k) {
      const auto idx = static_cast<Eigen::Index>(perm[k]);
      (k >= lo && k < hi ? test : train).push_back(idx);
    }
    std::sort(train.begin(), train.end());

    const auto m = static_cast<Eigen::Index>(train.size());
    Eigen::MatrixXd K_train(m, m);
    Eigen::VectorXd y_train(m);
    for (Eigen::Index a = 0; a < m; ++a) {
      y_train[a] = y[train[static_cast<std::size_t>(a)]];
      for (Eigen::Index b = 0; b < m; ++b) {
        K_train(a, b) = K(train[static_cast<std::size_t>(a)], train[static_cast<std::size_t>(b)]);
      }
    }

    try {
      NoiseVector sigma = NoiseVector::zeros(m);
      if (mode == NoiseModel::basic) {
        sigma = NoiseVector::constant(m, optimize_sigma_uniform(K_train, y_train, config).sigma);
      } else if (mode == NoiseModel::full) {
        sigma = optimize_sigma(K_train, y_train, config).sigma;
      }
      const auto state = GprState::factorize(K_train, sigma, y_train);
      double abs_err = 0.0;
      for (Eigen::Index t : test) {
        double mean = 0.0;
        for (Eigen::Index a = 0; a < m; ++a) {
          mean += K(t, train[static_cast<std::size_t>(a)]) * state.alpha()[a];
        }
        abs_err += std::abs(y[t] - mean);
      }
      total += abs_err / static_cast<double>(test.size());
    } catch (const NumericalError& e) {
      throw NumericalError("cross-validation fold " + std::to_string(f) + ": " + e.what(),
                           e.smallest_pivot());
    }
  }
  return total / folds;
}

} // namespace labelnoise
