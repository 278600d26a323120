#pragma once

#include <optional>
#include <span>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "labelnoise/dataset.hpp"
#include "labelnoise/kernel.hpp"

namespace labelnoise {

/// Per-label noise variances. Every entry is finite and non-negative.
class NoiseVector {
public:
  NoiseVector() = default;
  explicit NoiseVector(Eigen::VectorXd values);

  static NoiseVector zeros(Eigen::Index n) { return NoiseVector(Eigen::VectorXd::Zero(n)); }
  static NoiseVector constant(Eigen::Index n, double value) {
    return NoiseVector(Eigen::VectorXd::Constant(n, value));
  }

  Eigen::Index size() const { return values_.size(); }
  double operator[](Eigen::Index i) const { return values_[i]; }
  const Eigen::VectorXd& values() const { return values_; }

private:
  Eigen::VectorXd values_;
};

/// Factorization of the regularized covariance K~ = K + diag(sigma) together
/// with the quantities every downstream operation reads from it:
/// alpha = K~^-1 y, the full inverse K~^-1 and its diagonal.
///
/// If the plain Cholesky factorization breaks down, a jitter of
/// 1e-10 * mean(diag K) is added to the diagonal and escalated tenfold up to
/// three times before giving up with a NumericalError. The jitter that was
/// finally used is part of K~ for every derived quantity.
///
/// Immutable once constructed.
class GprState {
public:
  static GprState factorize(const Eigen::MatrixXd& K, const NoiseVector& sigma,
                            const Eigen::VectorXd& y);

  Eigen::Index size() const { return y_.size(); }

  const Eigen::MatrixXd& prior() const { return K_; }
  const NoiseVector& sigma() const { return sigma_; }
  const Eigen::VectorXd& y() const { return y_; }
  const Eigen::LLT<Eigen::MatrixXd>& chol() const { return chol_; }

  const Eigen::VectorXd& alpha() const { return alpha_; }
  const Eigen::VectorXd& kinv_diag() const { return kinv_diag_; }
  /// Symmetrized K~^-1; `kinv_diag()` is a copy of its diagonal.
  const Eigen::MatrixXd& kinv_full() const { return kinv_; }

  double log_det() const { return log_det_; }
  /// y^T K~^-1 y.
  double data_fit() const { return data_fit_; }
  double jitter() const { return jitter_; }

  /// K + diag(sigma) + jitter * I.
  Eigen::MatrixXd regularized() const;

private:
  GprState() = default;

  Eigen::MatrixXd K_;
  NoiseVector sigma_;
  Eigen::VectorXd y_;
  Eigen::LLT<Eigen::MatrixXd> chol_;
  Eigen::VectorXd alpha_;
  Eigen::MatrixXd kinv_;
  Eigen::VectorXd kinv_diag_;
  double log_det_ = 0.0;
  double data_fit_ = 0.0;
  double jitter_ = 0.0;
};

/// A fitted regressor: the state plus what prediction needs to build k*.
struct GprModel {
  KernelParams params;
  Eigen::MatrixXd X;
  GprState state;
};

struct Posterior {
  double mean = 0.0;
  double variance = 0.0;
};

struct LoocvResult {
  Eigen::VectorXd errors;
  Eigen::VectorXd stds;
};

GprModel fit(const KernelParams& params, const NoiseVector& sigma, const Dataset& data);

/// Fit on explicit inputs and (already centered) labels.
GprModel fit(const KernelParams& params, const NoiseVector& sigma, const Eigen::MatrixXd& X,
             const Eigen::VectorXd& y);

/// Posterior of the latent function at `x_star`, in centered label units.
/// A variance below zero from round-off is clamped to zero.
Posterior predict(const GprModel& model, const Eigen::Ref<const Eigen::VectorXd>& x_star);

/// log det K~ + y^T K~^-1 y (the additive constant is dropped).
double nll(const GprState& state);

/// diag(K~^-1) - alpha .* alpha, the gradient of `nll` in sigma.
Eigen::VectorXd grad_sigma(const GprState& state);

/// K~^-1 - alpha alpha^T, the gradient of `nll` with respect to the full
/// noise covariance. Its diagonal equals `grad_sigma` bit for bit.
Eigen::MatrixXd grad_sigma_full_matrix(const GprState& state);

/// tr(K~^-1 dK) - alpha^T dK alpha for each supplied kernel derivative,
/// evaluated as the elementwise sum of (K~^-1 - alpha alpha^T) .* dK.
Eigen::VectorXd grad_theta(const GprState& state, std::span<const Eigen::MatrixXd> dK_dtheta);

/// Closed-form leave-one-out residuals y_i - mu_{-i} and predictive standard
/// deviations, both taken on K~.
LoocvResult loocv(const GprState& state);

} // namespace labelnoise
