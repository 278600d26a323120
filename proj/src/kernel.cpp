#include "labelnoise/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "labelnoise/errors.hpp"

namespace labelnoise {

namespace {

void check_inputs(const Eigen::MatrixXd& X) {
  if (X.rows() == 0) {
    throw EmptyDatasetError();
  }
  if (!X.allFinite()) {
    throw InvalidInputError("input points contain non-finite values");
  }
}

double squared_distance(const Eigen::MatrixXd& A, Eigen::Index i, const Eigen::MatrixXd& B,
                        Eigen::Index j) {
  return (A.row(i) - B.row(j)).squaredNorm();
}

} // namespace

void KernelParams::validate() const {
  if (!std::isfinite(signal_variance) || signal_variance <= 0.0) {
    throw InvalidInputError("signal_variance must be finite and positive");
  }
  if (!std::isfinite(length_scale) || length_scale <= 0.0) {
    throw InvalidInputError("length_scale must be finite and positive");
  }
}

Eigen::Vector2d KernelParams::to_log() const {
  return {std::log(signal_variance), std::log(length_scale)};
}

KernelParams KernelParams::from_log(const Eigen::Vector2d& log_params) {
  KernelParams p{std::exp(log_params[0]), std::exp(log_params[1])};
  p.validate();
  return p;
}

double eval_kernel(const KernelParams& params, const Eigen::Ref<const Eigen::VectorXd>& a,
                   const Eigen::Ref<const Eigen::VectorXd>& b) {
  params.validate();
  if (a.size() != b.size()) {
    throw InvalidInputError("kernel arguments differ in dimension");
  }
  if (!a.allFinite() || !b.allFinite()) {
    throw InvalidInputError("kernel arguments contain non-finite values");
  }
  const double r2 = (a - b).squaredNorm();
  const double l2 = params.length_scale * params.length_scale;
  return params.signal_variance * std::exp(-0.5 * r2 / l2);
}

Eigen::MatrixXd build_kernel_matrix(const KernelParams& params, const Eigen::MatrixXd& X) {
  params.validate();
  check_inputs(X);
  const Eigen::Index n = X.rows();
  const double inv_two_l2 = 0.5 / (params.length_scale * params.length_scale);
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    K(j, j) = params.signal_variance;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double k = params.signal_variance * std::exp(-inv_two_l2 * squared_distance(X, i, X, j));
      K(i, j) = k;
      K(j, i) = k;
    }
  }
  return K;
}

Eigen::MatrixXd build_cross_kernel(const KernelParams& params, const Eigen::MatrixXd& A,
                                   const Eigen::MatrixXd& B) {
  params.validate();
  if (A.cols() != B.cols()) {
    throw InvalidInputError("point sets differ in dimension");
  }
  if (!A.allFinite() || !B.allFinite()) {
    throw InvalidInputError("input points contain non-finite values");
  }
  const double inv_two_l2 = 0.5 / (params.length_scale * params.length_scale);
  Eigen::MatrixXd K(A.rows(), B.rows());
  for (Eigen::Index j = 0; j < B.rows(); ++j) {
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      K(i, j) = params.signal_variance * std::exp(-inv_two_l2 * squared_distance(A, i, B, j));
    }
  }
  return K;
}

std::array<Eigen::MatrixXd, KernelParams::kNumParams>
kernel_grad_theta(const KernelParams& params, const Eigen::MatrixXd& X) {
  Eigen::MatrixXd K = build_kernel_matrix(params, X);
  const Eigen::Index n = X.rows();
  const double inv_l2 = 1.0 / (params.length_scale * params.length_scale);

  // d/d(log l) exp(-r^2 / (2 l^2)) = (r^2 / l^2) exp(...)
  Eigen::MatrixXd dK_dlog_l = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double v = K(i, j) * squared_distance(X, i, X, j) * inv_l2;
      dK_dlog_l(i, j) = v;
      dK_dlog_l(j, i) = v;
    }
  }
  return {std::move(K), std::move(dK_dlog_l)};
}

double median_pairwise_distance(const Eigen::MatrixXd& X) {
  const Eigen::Index n = X.rows();
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j + 1; i < n; ++i) {
      d.push_back(std::sqrt(squared_distance(X, i, X, j)));
    }
  }
  if (d.empty()) {
    return 1.0;
  }
  const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  double median = *mid;
  if (d.size() % 2 == 0) {
    median = 0.5 * (median + *std::max_element(d.begin(), mid));
  }
  return median > 0.0 ? median : 1.0;
}

} // namespace labelnoise
