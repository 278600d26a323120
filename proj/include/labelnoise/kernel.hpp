#pragma once

#include <array>

#include <Eigen/Core>

namespace labelnoise {

/// Hyperparameters of the squared-exponential (RBF) covariance
///
///   k(a, b) = signal_variance * exp(-|a - b|^2 / (2 length_scale^2)).
///
/// Optimizers work on the natural logarithms of both fields, see
/// `to_log()` / `from_log()`.
struct KernelParams {
  double signal_variance = 1.0;
  double length_scale = 1.0;

  static constexpr int kNumParams = 2;

  /// Throws InvalidInputError unless both fields are finite and positive.
  void validate() const;

  Eigen::Vector2d to_log() const;
  static KernelParams from_log(const Eigen::Vector2d& log_params);
};

/// Covariance between two input points given as rows/vectors of equal length.
double eval_kernel(const KernelParams& params, const Eigen::Ref<const Eigen::VectorXd>& a,
                   const Eigen::Ref<const Eigen::VectorXd>& b);

/// N x N prior covariance over the rows of `X`. The diagonal is set to
/// `signal_variance` exactly and the upper triangle is mirrored, so the
/// result is symmetric bit for bit.
Eigen::MatrixXd build_kernel_matrix(const KernelParams& params, const Eigen::MatrixXd& X);

/// M x N covariance between the rows of `A` (M points) and `B` (N points).
Eigen::MatrixXd build_cross_kernel(const KernelParams& params, const Eigen::MatrixXd& A,
                                   const Eigen::MatrixXd& B);

/// Derivatives of the kernel matrix with respect to
/// (log signal_variance, log length_scale), in that order.
std::array<Eigen::MatrixXd, KernelParams::kNumParams>
kernel_grad_theta(const KernelParams& params, const Eigen::MatrixXd& X);

/// Median Euclidean distance over all distinct pairs of rows. Returns 1 when
/// N < 2 or when every pair coincides.
double median_pairwise_distance(const Eigen::MatrixXd& X);

} // namespace labelnoise
