#include "labelnoise/gpr.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <tuple>
#include <utility>

#include <Eigen/Cholesky>
#include <spdlog/spdlog.h>

#include "labelnoise/errors.hpp"

namespace labelnoise {

namespace {

constexpr double kJitterBase = 1e-10;
constexpr int kJitterEscalations = 3;

/// log det A and y^T A^-1 y. Cholesky's backward error perturbs log det A by
/// roughly n eps cond(A), which near a stationary point of the objective is
/// larger than the changes the optimizers need to resolve; the extended
/// precision refactorization pushes that noise down by three orders.
std::pair<double, double> objective_terms(const Eigen::MatrixXd& A, const Eigen::VectorXd& y,
                                          const Eigen::LLT<Eigen::MatrixXd>& chol) {
  using MatrixXld = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  using VectorXld = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
  const Eigen::LLT<MatrixXld> wide(A.cast<long double>());
  if (wide.info() == Eigen::Success) {
    const VectorXld z = wide.matrixL().solve(y.cast<long double>());
    const long double log_det = 2.0L * wide.matrixLLT().diagonal().array().log().sum();
    return {static_cast<double>(log_det), static_cast<double>(z.squaredNorm())};
  }
  return {2.0 * chol.matrixLLT().diagonal().array().log().sum(),
          chol.matrixL().solve(y).squaredNorm()};
}

double smallest_pivot(const Eigen::MatrixXd& A) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  return ldlt.vectorD().minCoeff();
}

} // namespace

NoiseVector::NoiseVector(Eigen::VectorXd values) : values_(std::move(values)) {
  for (Eigen::Index i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i]) || values_[i] < 0.0) {
      throw InvalidInputError("noise variance " + std::to_string(i) +
                              " is negative or non-finite");
    }
  }
}

GprState GprState::factorize(const Eigen::MatrixXd& K, const NoiseVector& sigma,
                             const Eigen::VectorXd& y) {
  const Eigen::Index n = y.size();
  if (n == 0) {
    throw EmptyDatasetError();
  }
  if (K.rows() != n || K.cols() != n || sigma.size() != n) {
    throw InvalidInputError("kernel, noise and label dimensions disagree");
  }
  if (!K.allFinite() || !y.allFinite()) {
    throw InvalidInputError("kernel matrix or labels contain non-finite values");
  }

  GprState s;
  s.K_ = K;
  s.sigma_ = sigma;
  s.y_ = y;

  Eigen::MatrixXd A = K;
  A.diagonal() += sigma.values();
  const double jitter_unit = kJitterBase * K.diagonal().mean();

  double jitter = 0.0;
  for (int attempt = 0; attempt <= kJitterEscalations + 1; ++attempt) {
    if (attempt > 0) {
      const double next = jitter_unit * std::pow(10.0, attempt - 1);
      A.diagonal().array() += next - jitter;
      jitter = next;
    }
    s.chol_.compute(A);
    if (s.chol_.info() != Eigen::Success) {
      continue;
    }
    Eigen::MatrixXd kinv = s.chol_.solve(Eigen::MatrixXd::Identity(n, n));
    kinv = 0.5 * (kinv + kinv.transpose()).eval();
    if (!kinv.allFinite() || (kinv.diagonal().array() <= 0.0).any()) {
      continue;
    }
    s.jitter_ = jitter;
    s.kinv_ = std::move(kinv);
    s.kinv_diag_ = s.kinv_.diagonal();
    s.alpha_ = s.chol_.solve(y);
    std::tie(s.log_det_, s.data_fit_) = objective_terms(A, y, s.chol_);
    if (jitter > 0.0) {
      spdlog::debug("cholesky needed jitter {:.3e}", jitter);
    }
    return s;
  }

  const double pivot = smallest_pivot(A);
  throw NumericalError("cholesky factorization failed after jitter " + std::to_string(jitter) +
                           " (smallest pivot " + std::to_string(pivot) + ")",
                       pivot);
}

Eigen::MatrixXd GprState::regularized() const {
  Eigen::MatrixXd A = K_;
  A.diagonal() += sigma_.values();
  A.diagonal().array() += jitter_;
  return A;
}

GprModel fit(const KernelParams& params, const NoiseVector& sigma, const Dataset& data) {
  return fit(params, sigma, data.X(), data.y());
}

GprModel fit(const KernelParams& params, const NoiseVector& sigma, const Eigen::MatrixXd& X,
             const Eigen::VectorXd& y) {
  if (X.rows() != y.size()) {
    throw InvalidInputError("input and label counts differ");
  }
  auto state = GprState::factorize(build_kernel_matrix(params, X), sigma, y);
  return GprModel{params, X, std::move(state)};
}

Posterior predict(const GprModel& model, const Eigen::Ref<const Eigen::VectorXd>& x_star) {
  if (x_star.size() != model.X.cols()) {
    throw InvalidInputError("prediction point has wrong dimension");
  }
  if (!x_star.allFinite()) {
    throw InvalidInputError("prediction point contains non-finite values");
  }
  const Eigen::MatrixXd xs = x_star.transpose();
  const Eigen::VectorXd k_star = build_cross_kernel(model.params, model.X, xs).col(0);

  Posterior post;
  post.mean = k_star.dot(model.state.alpha());
  const Eigen::VectorXd v = model.state.chol().matrixL().solve(k_star);
  const double var = model.params.signal_variance - v.squaredNorm();
  if (var < -1e-8) {
    spdlog::warn("posterior variance {:.3e} clamped to 0", var);
  }
  post.variance = var > 0.0 ? var : 0.0;
  return post;
}

double nll(const GprState& state) {
  return state.log_det() + state.data_fit();
}

Eigen::VectorXd grad_sigma(const GprState& state) {
  return state.kinv_diag().array() - state.alpha().array() * state.alpha().array();
}

Eigen::MatrixXd grad_sigma_full_matrix(const GprState& state) {
  const auto& a = state.alpha();
  Eigen::MatrixXd G = state.kinv_full();
  for (Eigen::Index j = 0; j < G.cols(); ++j) {
    for (Eigen::Index i = 0; i < G.rows(); ++i) {
      G(i, j) = G(i, j) - a[i] * a[j];
    }
  }
  return G;
}

Eigen::VectorXd grad_theta(const GprState& state, std::span<const Eigen::MatrixXd> dK_dtheta) {
  const Eigen::MatrixXd W = grad_sigma_full_matrix(state);
  Eigen::VectorXd g(static_cast<Eigen::Index>(dK_dtheta.size()));
  for (std::size_t k = 0; k < dK_dtheta.size(); ++k) {
    const auto& dK = dK_dtheta[k];
    if (dK.rows() != W.rows() || dK.cols() != W.cols()) {
      throw InvalidInputError("kernel derivative has wrong shape");
    }
    g[static_cast<Eigen::Index>(k)] = W.cwiseProduct(dK).sum();
  }
  return g;
}

LoocvResult loocv(const GprState& state) {
  LoocvResult r;
  r.errors = state.alpha().array() / state.kinv_diag().array();
  r.stds = state.kinv_diag().array().rsqrt();
  return r;
}

} // namespace labelnoise
