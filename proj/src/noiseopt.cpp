#include "labelnoise/noiseopt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <spdlog/spdlog.h>

#include "labelnoise/errors.hpp"
#include "labelnoise/random.hpp"

namespace labelnoise {

namespace {

constexpr double kMonotoneSlack = 1e-10;
constexpr double kKktTol = 1e-6;

void check_problem(const Eigen::MatrixXd& K, const Eigen::VectorXd& y) {
  if (y.size() == 0) {
    throw EmptyDatasetError();
  }
  if (K.rows() != y.size() || K.cols() != y.size()) {
    throw InvalidInputError("kernel matrix does not match label count");
  }
}

double penalty_gradient(double sigma, double lambda, double p) {
  if (lambda == 0.0) {
    return 0.0;
  }
  return lambda * p * std::pow(sigma, p - 1.0);
}

/// Factorize, tagging failures with the iteration that triggered them.
GprState factorize_at(const Eigen::MatrixXd& K, const NoiseVector& sigma, const Eigen::VectorXd& y,
                      int iteration) {
  try {
    return GprState::factorize(K, sigma, y);
  } catch (const NumericalError& e) {
    throw NumericalError("iteration " + std::to_string(iteration) + ": " + e.what(),
                         e.smallest_pivot());
  }
}

/// Largest per-coordinate relative change over entries that were nonzero.
double relative_change(const Eigen::VectorXd& before, const Eigen::VectorXd& after) {
  double change = 0.0;
  for (Eigen::Index i = 0; i < before.size(); ++i) {
    if (before[i] > 0.0) {
      change = std::max(change, std::abs(after[i] - before[i]) / before[i]);
    }
  }
  return change;
}

class TraceRecorder {
public:
  explicit TraceRecorder(OptTrace& trace) : trace_(trace) {}

  void start(double objective, long evals) {
    trace_.nll_per_iter.push_back(objective);
    trace_.evals_per_iter.push_back(evals);
    trace_.function_evals = evals;
  }

  void step(double objective, double sigma_change, long evals) {
    if (objective > trace_.nll_per_iter.back() + kMonotoneSlack) {
      trace_.monotone = false;
    }
    trace_.nll_per_iter.push_back(objective);
    trace_.sigma_change_per_iter.push_back(sigma_change);
    trace_.evals_per_iter.push_back(evals);
    trace_.function_evals = evals;
    ++trace_.iters;
  }

private:
  OptTrace& trace_;
};

/// Zero is absorbing for the multiplicative step, so a coordinate snapped to 0
/// during a transient can end up stuck on the wrong side of the boundary.
/// Lift such coordinates (zero with a descent direction into sigma > 0) to the
/// largest trial value among `start`, `start`/2, ... that does not increase the
/// objective. Returns the accepted state, if any.
std::optional<GprState> revive_boundary(const Eigen::MatrixXd& K, const Eigen::VectorXd& y,
                                        const GprState& state, double objective, double start,
                                        double zero_clip, double lambda, double p, long& evals) {
  const auto g = grad_sigma(state);
  const auto& s = state.sigma().values();
  std::vector<Eigen::Index> stuck;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    // Absolute KKT tolerance, tightened to the relative one that keeps the
    // leave-one-out bound alpha_i^2 <= diag(K~^-1)_i (1 + tol) intact.
    const double tol = kKktTol * std::min(1.0, state.kinv_diag()[i]);
    if (s[i] == 0.0 && g[i] + penalty_gradient(0.0, lambda, p) < -tol) {
      stuck.push_back(i);
    }
  }
  if (stuck.empty()) {
    return std::nullopt;
  }
  for (double v = start; v > zero_clip; v *= 0.5) {
    Eigen::VectorXd cand = s;
    for (const auto i : stuck) {
      cand[i] = v;
    }
    ++evals;
    try {
      auto trial = GprState::factorize(K, NoiseVector(std::move(cand)), y);
      if (penalized_nll(trial, lambda, p) <= objective) {
        return trial;
      }
    } catch (const NumericalError&) {
    }
  }
  return std::nullopt;
}

bool kkt_with_penalty(const GprState& state, double zero_clip, double tol, double lambda, double p) {
  const auto g = grad_sigma(state);
  const auto& s = state.sigma().values();
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double gi = g[i] + penalty_gradient(s[i], lambda, p);
    if (s[i] > zero_clip) {
      if (std::abs(gi) > tol * state.kinv_diag()[i]) {
        return false;
      }
    } else if (gi < -tol) {
      return false;
    }
  }
  return true;
}

} // namespace

void MultUpdateConfig::validate() const {
  if (max_iters < 0) {
    throw ConfigError("max_iters must be non-negative");
  }
  if (!(tol_sigma >= 0.0) || !(tol_nll >= 0.0)) {
    throw ConfigError("tolerances must be non-negative");
  }
  if (!(penalty_lambda >= 0.0) || !std::isfinite(penalty_lambda)) {
    throw ConfigError("penalty lambda must be finite and non-negative");
  }
  if (!(penalty_p >= 1.0) || !std::isfinite(penalty_p)) {
    throw ConfigError("penalty exponent p must be at least 1");
  }
  if (zero_clip && !(*zero_clip >= 0.0)) {
    throw ConfigError("zero_clip must be non-negative");
  }
  if (const auto* v = std::get_if<double>(&sigma_init)) {
    if (!(*v > 0.0) || !std::isfinite(*v)) {
      throw ConfigError("sigma_init must be positive; zero is a fixed point of the update");
    }
  } else if (const auto* vec = std::get_if<Eigen::VectorXd>(&sigma_init)) {
    if (!vec->allFinite() || (vec->array() <= 0.0).any()) {
      throw ConfigError("sigma_init must be positive; zero is a fixed point of the update");
    }
  }
}

void ProjectedGradientConfig::validate() const {
  base.validate();
  if (!(step_size > 0.0) || !(step_growth >= 1.0) || max_backtracks < 0 || !(kkt_tol > 0.0)) {
    throw ConfigError("projected gradient needs step_size > 0, step_growth >= 1, kkt_tol > 0");
  }
}

void JointOptConfig::validate() const {
  if (outer_rounds < 0 || theta_max_steps < 0 || max_backtracks < 0) {
    throw ConfigError("joint optimization counts must be non-negative");
  }
  if (!(learning_rate > 0.0) || !(max_log_step > 0.0)) {
    throw ConfigError("learning rate and max_log_step must be positive");
  }
  if (restarts < 1) {
    throw ConfigError("at least one restart is required");
  }
  if (!(restart_radius >= 0.0)) {
    throw ConfigError("restart radius must be non-negative");
  }
}

double label_scale(const Eigen::VectorXd& y) {
  if (y.size() == 0) {
    return 1.0;
  }
  const double s = y.squaredNorm() / static_cast<double>(y.size());
  // All-zero labels carry no scale; fall back to unit variance.
  return s > 0.0 ? s : 1.0;
}

double resolve_zero_clip(const MultUpdateConfig& config, const Eigen::VectorXd& y) {
  return config.zero_clip ? *config.zero_clip : 1e-12 * label_scale(y);
}

NoiseVector resolve_sigma_init(const MultUpdateConfig& config, const Eigen::VectorXd& y) {
  const Eigen::Index n = y.size();
  if (const auto* v = std::get_if<double>(&config.sigma_init)) {
    return NoiseVector::constant(n, *v);
  }
  if (const auto* vec = std::get_if<Eigen::VectorXd>(&config.sigma_init)) {
    if (vec->size() != n) {
      throw ConfigError("sigma_init has " + std::to_string(vec->size()) + " entries, expected " +
                        std::to_string(n));
    }
    return NoiseVector(*vec);
  }
  return NoiseVector::constant(n, 0.1 * label_scale(y));
}

double penalized_nll(const GprState& state, double lambda, double p) {
  double value = nll(state);
  if (lambda > 0.0) {
    value += lambda * state.sigma().values().array().pow(p).sum();
  }
  return value;
}

NoiseVector mult_update_step(const GprState& state, const MultUpdateConfig& config,
                             double zero_clip) {
  const auto& s = state.sigma().values();
  const auto& a = state.alpha();
  const auto& kd = state.kinv_diag();
  Eigen::VectorXd next(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s[i] == 0.0) {
      next[i] = 0.0;
      continue;
    }
    const double denom = kd[i] + penalty_gradient(s[i], config.penalty_lambda, config.penalty_p);
    const double v = s[i] * (a[i] * a[i]) / denom;
    next[i] = v < zero_clip ? 0.0 : v;
  }
  if (!next.allFinite()) {
    throw NumericalError("multiplicative update produced a non-finite noise variance", 0.0);
  }
  return NoiseVector(std::move(next));
}

bool satisfies_kkt(const GprState& state, double zero_clip, double tol) {
  return kkt_with_penalty(state, zero_clip, tol, 0.0, 1.0);
}

SigmaResult optimize_sigma(const Eigen::MatrixXd& K, const Eigen::VectorXd& y,
                           const MultUpdateConfig& config) {
  config.validate();
  check_problem(K, y);
  const double clip = resolve_zero_clip(config, y);
  const double lambda = config.penalty_lambda;
  const double p = config.penalty_p;

  SigmaResult result{resolve_sigma_init(config, y), {}};
  TraceRecorder rec(result.trace);
  GprState state = factorize_at(K, result.sigma, y, 0);
  long evals = 1;
  double objective = penalized_nll(state, lambda, p);
  rec.start(objective, evals);

  for (int t = 0; t < config.max_iters; ++t) {
    NoiseVector next = mult_update_step(state, config, clip);
    const double change = relative_change(state.sigma().values(), next.values());
    state = factorize_at(K, next, y, t + 1);
    ++evals;
    const double next_objective = penalized_nll(state, lambda, p);
    if (!std::isfinite(next_objective)) {
      throw NumericalError("iteration " + std::to_string(t + 1) + ": objective is not finite", 0.0);
    }
    rec.step(next_objective, change, evals);
    const double decrease = objective - next_objective;
    objective = next_objective;
    result.sigma = std::move(next);
    if (change < config.tol_sigma || (config.tol_nll > 0.0 && decrease < config.tol_nll)) {
      auto revived = revive_boundary(K, y, state, objective, 1e-4 * label_scale(y), clip, lambda,
                                     p, evals);
      if (!revived) {
        result.trace.converged = true;
        break;
      }
      state = std::move(*revived);
      objective = penalized_nll(state, lambda, p);
      result.sigma = state.sigma();
      rec.step(objective, 0.0, evals);
    }
  }
  return result;
}

SigmaResult optimize_sigma(const KernelParams& params, const Dataset& data,
                           const MultUpdateConfig& config) {
  return optimize_sigma(build_kernel_matrix(params, data.X()), data.y(), config);
}

UniformSigmaResult optimize_sigma_uniform(const Eigen::MatrixXd& K, const Eigen::VectorXd& y,
                                          const MultUpdateConfig& config) {
  config.validate();
  check_problem(K, y);
  if (std::holds_alternative<Eigen::VectorXd>(config.sigma_init)) {
    throw ConfigError("the uniform noise model takes a scalar sigma_init");
  }
  const double clip = resolve_zero_clip(config, y);
  const double lambda = config.penalty_lambda;
  const double p = config.penalty_p;
  const auto n = static_cast<double>(y.size());

  UniformSigmaResult result;
  result.sigma = resolve_sigma_init(config, y)[0];
  TraceRecorder rec(result.trace);
  auto state = factorize_at(K, NoiseVector::constant(y.size(), result.sigma), y, 0);
  long evals = 1;
  double objective = penalized_nll(state, lambda, p);
  rec.start(objective, evals);

  for (int t = 0; t < config.max_iters; ++t) {
    const double s = result.sigma;
    double next = 0.0;
    if (s > 0.0) {
      const double denom = state.kinv_diag().sum() + n * penalty_gradient(s, lambda, p);
      next = s * state.alpha().squaredNorm() / denom;
      if (next < clip) {
        next = 0.0;
      }
    }
    if (!std::isfinite(next)) {
      throw NumericalError("uniform update produced a non-finite noise variance", 0.0);
    }
    const double change = s > 0.0 ? std::abs(next - s) / s : 0.0;
    state = factorize_at(K, NoiseVector::constant(y.size(), next), y, t + 1);
    ++evals;
    const double next_objective = penalized_nll(state, lambda, p);
    rec.step(next_objective, change, evals);
    const double decrease = objective - next_objective;
    objective = next_objective;
    result.sigma = next;
    if (change < config.tol_sigma || (config.tol_nll > 0.0 && decrease < config.tol_nll)) {
      if (next == 0.0) {
        // Same boundary repair as the per-label case, on the shared variance.
        const double g = state.kinv_diag().sum() - state.alpha().squaredNorm() +
                         n * penalty_gradient(0.0, lambda, p);
        const double tol = kKktTol * std::min(1.0, state.kinv_diag().sum());
        bool lifted = false;
        for (double v = 1e-4 * label_scale(y); g < -tol && v > clip; v *= 0.5) {
          ++evals;
          try {
            auto trial = GprState::factorize(K, NoiseVector::constant(y.size(), v), y);
            const double trial_objective = penalized_nll(trial, lambda, p);
            if (trial_objective <= objective) {
              state = std::move(trial);
              objective = trial_objective;
              result.sigma = v;
              rec.step(objective, 0.0, evals);
              lifted = true;
              break;
            }
          } catch (const NumericalError&) {
          }
        }
        if (lifted) {
          continue;
        }
      }
      result.trace.converged = true;
      break;
    }
  }
  return result;
}

UniformSigmaResult optimize_sigma_uniform(const KernelParams& params, const Dataset& data,
                                          const MultUpdateConfig& config) {
  return optimize_sigma_uniform(build_kernel_matrix(params, data.X()), data.y(), config);
}

NoiseVector diagonal_solution(const Eigen::VectorXd& K_diag, const Eigen::VectorXd& y) {
  if (K_diag.size() != y.size()) {
    throw InvalidInputError("diagonal and labels differ in length");
  }
  if ((K_diag.array() <= 0.0).any()) {
    throw InvalidInputError("diagonal kernel entries must be positive");
  }
  return NoiseVector((y.array().square() - K_diag.array()).max(0.0).matrix());
}

SigmaResult projected_gradient_baseline(const Eigen::MatrixXd& K, const Eigen::VectorXd& y,
                                        const ProjectedGradientConfig& config) {
  config.validate();
  check_problem(K, y);
  const auto& base = config.base;
  const double clip = resolve_zero_clip(base, y);
  const double lambda = base.penalty_lambda;
  const double p = base.penalty_p;

  SigmaResult result{resolve_sigma_init(base, y), {}};
  TraceRecorder rec(result.trace);
  GprState state = factorize_at(K, result.sigma, y, 0);
  long evals = 1;
  double objective = penalized_nll(state, lambda, p);
  rec.start(objective, evals);
  double step = config.step_size;
  Eigen::VectorXd prev_sigma;
  Eigen::VectorXd prev_grad;

  for (int t = 0; t < base.max_iters; ++t) {
    if (kkt_with_penalty(state, clip, config.kkt_tol, lambda, p)) {
      result.trace.converged = true;
      break;
    }
    const auto& s = state.sigma().values();
    Eigen::VectorXd g = grad_sigma(state);
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      g[i] += penalty_gradient(s[i], lambda, p);
    }

    double eta = step;
    if (config.spectral_step && prev_sigma.size() > 0) {
      // Barzilai-Borwein: s^T s / s^T d for the last displacement s and gradient change d.
      const Eigen::VectorXd ds = s - prev_sigma;
      const double curvature = ds.dot(g - prev_grad);
      if (curvature > 0.0) {
        eta = ds.squaredNorm() / curvature;
      }
    }
    prev_sigma = s;
    prev_grad = g;
    // Keep the first trial inside a box of the current variance scale: in
    // sigma coordinates the objective flattens like 1/sigma, so an overshoot
    // that still decreases it can strand the iterate on a long plateau.
    const double reach = std::max(s.lpNorm<Eigen::Infinity>(), 0.1 * label_scale(y));
    const double g_max = g.lpNorm<Eigen::Infinity>();
    if (g_max > 0.0) {
      eta = std::min(eta, reach / g_max);
    }
    std::optional<GprState> accepted;
    for (int b = 0; b <= config.max_backtracks; ++b, eta *= 0.5) {
      Eigen::VectorXd cand = (s - eta * g).cwiseMax(0.0);
      cand = (cand.array() < clip).select(0.0, cand);
      ++evals;
      std::optional<GprState> trial;
      try {
        trial = GprState::factorize(K, NoiseVector(std::move(cand)), y);
      } catch (const NumericalError&) {
        continue;
      }
      if (penalized_nll(*trial, lambda, p) <= objective) {
        accepted = std::move(trial);
        break;
      }
    }
    if (!accepted) {
      // No descent left at working precision.
      result.trace.converged = kkt_with_penalty(state, clip, config.kkt_tol, lambda, p);
      break;
    }
    const double change = relative_change(s, accepted->sigma().values());
    const double next_objective = penalized_nll(*accepted, lambda, p);
    rec.step(next_objective, change, evals);
    const double decrease = objective - next_objective;
    objective = next_objective;
    state = std::move(*accepted);
    result.sigma = state.sigma();
    step = eta * config.step_growth;
    if (base.tol_nll > 0.0 && decrease < base.tol_nll) {
      result.trace.converged = true;
      break;
    }
  }
  result.trace.function_evals = evals;
  return result;
}

SigmaResult projected_gradient_baseline(const KernelParams& params, const Dataset& data,
                                        const ProjectedGradientConfig& config) {
  return projected_gradient_baseline(build_kernel_matrix(params, data.X()), data.y(), config);
}

KernelParams heuristic_kernel_params(const Dataset& data) {
  return KernelParams{label_scale(data.y()), median_pairwise_distance(data.X())};
}

namespace {

struct RestartOutcome {
  KernelParams params;
  NoiseVector sigma;
  OptTrace trace;
};

RestartOutcome run_restart(const Dataset& data, const Eigen::Vector2d& log_theta0,
                           const JointOptConfig& joint, const MultUpdateConfig& mult) {
  const auto& X = data.X();
  const auto& y = data.y();
  const double lambda = mult.penalty_lambda;
  const double p = mult.penalty_p;

  RestartOutcome out{KernelParams::from_log(log_theta0), {}, {}};
  TraceRecorder rec(out.trace);
  long evals = 0;

  auto sigma_block = [&](const MultUpdateConfig& cfg) {
    auto res = optimize_sigma(build_kernel_matrix(out.params, X), y, cfg);
    evals += res.trace.function_evals;
    out.trace.converged = res.trace.converged;
    return res;
  };

  {
    auto res = sigma_block(mult);
    out.sigma = std::move(res.sigma);
    rec.start(res.trace.final_nll(), evals);
  }
  double objective = out.trace.final_nll();

  Eigen::Vector2d log_theta = log_theta0;
  for (int round = 0; round < joint.outer_rounds; ++round) {
    GprState state = GprState::factorize(build_kernel_matrix(out.params, X), out.sigma, y);
    ++evals;
    for (int step = 0; step < joint.theta_max_steps; ++step) {
      const auto dK = kernel_grad_theta(out.params, X);
      const Eigen::VectorXd g = grad_theta(state, dK);
      if (g.lpNorm<Eigen::Infinity>() < 1e-10) {
        break;
      }
      Eigen::Vector2d delta = -joint.learning_rate * g;
      const double largest = delta.lpNorm<Eigen::Infinity>();
      if (largest > joint.max_log_step) {
        delta *= joint.max_log_step / largest;
      }
      bool accepted = false;
      for (int b = 0; b <= joint.max_backtracks; ++b, delta *= 0.5) {
        const Eigen::Vector2d cand = log_theta + delta;
        ++evals;
        try {
          const auto params = KernelParams::from_log(cand);
          auto trial = GprState::factorize(build_kernel_matrix(params, X), out.sigma, y);
          const double f = penalized_nll(trial, lambda, p);
          if (f < objective) {
            log_theta = cand;
            out.params = params;
            state = std::move(trial);
            objective = f;
            accepted = true;
            break;
          }
        } catch (const Error&) {
          // Treated as a rejected trial point.
        }
      }
      if (!accepted) {
        break;
      }
      rec.step(objective, 0.0, evals);
    }

    // Warm start; entries pinned at zero are lifted so they can re-enter.
    MultUpdateConfig warm = mult;
    const double floor = 1e-3 * 0.1 * label_scale(y);
    warm.sigma_init = out.sigma.values().cwiseMax(floor).eval();
    auto res = sigma_block(warm);
    if (res.trace.final_nll() <= objective) {
      const double change = relative_change(out.sigma.values(), res.sigma.values());
      out.sigma = std::move(res.sigma);
      objective = res.trace.final_nll();
      rec.step(objective, change, evals);
    }
  }
  out.trace.function_evals = evals;
  return out;
}

} // namespace

JointResult joint_optimize(const Dataset& data, const JointOptConfig& joint,
                           const MultUpdateConfig& mult) {
  joint.validate();
  mult.validate();
  const Eigen::Vector2d center = heuristic_kernel_params(data).to_log();
  Xoshiro256 rng(joint.restart_seed);

  std::optional<JointResult> best;
  int failed = 0;
  for (int r = 0; r < joint.restarts; ++r) {
    Eigen::Vector2d start = center;
    if (r > 0) {
      for (Eigen::Index k = 0; k < start.size(); ++k) {
        start[k] += rng.uniform(-joint.restart_radius, joint.restart_radius);
      }
    }
    try {
      auto out = run_restart(data, start, joint, mult);
      if (!best || out.trace.final_nll() < best->trace.final_nll()) {
        best = JointResult{out.params, std::move(out.sigma), std::move(out.trace), r, 0};
      }
    } catch (const Error& e) {
      ++failed;
      spdlog::warn("joint optimization restart {} failed: {}", r, e.what());
    }
  }
  if (!best) {
    throw NumericalError("all " + std::to_string(joint.restarts) + " restarts failed", 0.0);
  }
  best->failed_restarts = failed;
  return *best;
}

} // namespace labelnoise
