#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "labelnoise/dataset.hpp"
#include "labelnoise/gpr.hpp"
#include "labelnoise/kernel.hpp"

namespace labelnoise {

/// Settings shared by the sigma optimizers.
///
/// Data-dependent defaults are resolved against the label scale
/// s = mean(y_i^2) (the label variance for centered labels):
/// `sigma_init` defaults to 0.1 s per entry and `zero_clip` to 1e-12 s.
struct MultUpdateConfig {
  int max_iters = 10000;
  /// Stop once max_i |sigma_i' - sigma_i| / sigma_i over nonzero entries
  /// falls below this.
  double tol_sigma = 1e-8;
  /// Stop once the objective decreases by less than this. 0 disables.
  double tol_nll = 0.0;
  /// Unset: default rule. double: broadcast. vector: per label.
  std::variant<std::monostate, double, Eigen::VectorXd> sigma_init;
  double penalty_lambda = 0.0;
  double penalty_p = 1.0;
  std::optional<double> zero_clip;

  void validate() const;
};

struct OptTrace {
  /// Objective after each evaluation that was accepted, starting at sigma^(0).
  std::vector<double> nll_per_iter;
  std::vector<double> sigma_change_per_iter;
  /// Cumulative number of factorizations when the matching NLL was recorded.
  std::vector<long> evals_per_iter;
  int iters = 0;
  long function_evals = 0;
  bool converged = false;
  /// No recorded objective exceeds its predecessor by more than 1e-10.
  bool monotone = true;

  double final_nll() const { return nll_per_iter.back(); }
};

struct SigmaResult {
  NoiseVector sigma;
  OptTrace trace;
};

struct UniformSigmaResult {
  double sigma = 0.0;
  OptTrace trace;
};

struct ProjectedGradientConfig {
  MultUpdateConfig base;
  double step_size = 1.0;
  /// Step multiplier after an accepted step; halving applies on rejection.
  double step_growth = 1.5;
  /// Start each line search from the Barzilai-Borwein step when the last
  /// displacement had positive curvature, instead of the grown previous step.
  bool spectral_step = true;
  int max_backtracks = 60;
  /// KKT tolerance used as the stopping rule, see `satisfies_kkt`.
  double kkt_tol = 1e-8;

  void validate() const;
};

struct JointOptConfig {
  int outer_rounds = 5;
  double learning_rate = 0.05;
  int theta_max_steps = 20;
  int max_backtracks = 30;
  /// Largest change of any log-hyperparameter in a single step.
  double max_log_step = 1.0;
  int restarts = 4;
  std::uint64_t restart_seed = 0;
  /// Half-width, in natural-log units, of the restart sampling box.
  double restart_radius = 2.0;

  void validate() const;
};

struct JointResult {
  KernelParams params;
  NoiseVector sigma;
  OptTrace trace;
  int best_restart = 0;
  int failed_restarts = 0;
};

double label_scale(const Eigen::VectorXd& y);
double resolve_zero_clip(const MultUpdateConfig& config, const Eigen::VectorXd& y);
NoiseVector resolve_sigma_init(const MultUpdateConfig& config, const Eigen::VectorXd& y);

/// nll(state) + lambda * sum_i sigma_i^p.
double penalized_nll(const GprState& state, double lambda, double p);

/// One multiplicative step
///
///   sigma_i <- sigma_i * alpha_i^2 / (diag(K~^-1)_i + lambda p sigma_i^(p-1))
///
/// followed by snapping entries below `zero_clip` to exactly zero.
NoiseVector mult_update_step(const GprState& state, const MultUpdateConfig& config,
                             double zero_clip);

/// First-order optimality of `nll` under sigma >= 0:
/// |g_i| <= tol * diag(K~^-1)_i where sigma_i > zero_clip, g_i >= -tol elsewhere.
bool satisfies_kkt(const GprState& state, double zero_clip, double tol = 1e-6);

/// Iterate `mult_update_step` on a fixed prior covariance. When the stopping
/// rule fires while a zero entry still has a negative gradient (zero is
/// absorbing for the step), that entry is lifted back above zero, provided the
/// objective does not increase, and iteration resumes.
SigmaResult optimize_sigma(const Eigen::MatrixXd& K, const Eigen::VectorXd& y,
                           const MultUpdateConfig& config);
SigmaResult optimize_sigma(const KernelParams& params, const Dataset& data,
                           const MultUpdateConfig& config);

/// Scalar noise model Sigma = sigma I, updated by
/// sigma <- sigma * |alpha|^2 / tr(K~^-1) (plus the penalty term).
UniformSigmaResult optimize_sigma_uniform(const Eigen::MatrixXd& K, const Eigen::VectorXd& y,
                                          const MultUpdateConfig& config);
UniformSigmaResult optimize_sigma_uniform(const KernelParams& params, const Dataset& data,
                                          const MultUpdateConfig& config);

/// Minimizer of `nll` for a diagonal prior: max(y_i^2 - K_ii, 0).
NoiseVector diagonal_solution(const Eigen::VectorXd& K_diag, const Eigen::VectorXd& y);

/// sigma <- max(sigma - eta g, 0) with step halving whenever the objective
/// would increase. Each trial point costs one factorization. The first trial
/// step is the Barzilai-Borwein step (or the grown previous step), capped so
/// no coordinate moves further than max(max_i sigma_i, 0.1 mean(y^2)).
/// Stops when `satisfies_kkt` holds at `kkt_tol`.
SigmaResult projected_gradient_baseline(const Eigen::MatrixXd& K, const Eigen::VectorXd& y,
                                        const ProjectedGradientConfig& config);
SigmaResult projected_gradient_baseline(const KernelParams& params, const Dataset& data,
                                        const ProjectedGradientConfig& config);

/// Block coordinate descent over (sigma, log theta) from several starting
/// hyperparameters. Restart 0 starts at the data-driven center
/// (signal variance = label scale, length scale = median pairwise distance);
/// the others are drawn log-uniformly within `restart_radius` of it.
/// The restart with the lowest final objective wins, ties going to the
/// lower restart index.
JointResult joint_optimize(const Dataset& data, const JointOptConfig& joint,
                           const MultUpdateConfig& mult);

/// The heuristic center used for restarts.
KernelParams heuristic_kernel_params(const Dataset& data);

} // namespace labelnoise
