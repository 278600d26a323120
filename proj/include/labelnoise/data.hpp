#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string_view>

#include "labelnoise/dataset.hpp"
#include "labelnoise/kernel.hpp"

namespace labelnoise {

/// Corruption protocol: round-half-up(rate * N) labels, chosen without
/// replacement, receive N(0, (level * std(y))^2) perturbations, where std is
/// the population standard deviation of the pristine labels. When
/// `base_noise_std` > 0 every label first receives N(0, base_noise_std^2)
/// measurement noise, which is not recorded as corruption.
struct NoiseInjectionSpec {
  double rate = 0.0;
  double level = 0.0;
  double base_noise_std = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

std::size_t corrupted_count(double rate, std::size_t n);

/// f(x) = cos(3 pi x) + sin(pi x) + 2 x^2.
double example1_function(double x);

/// 24 grid points on [-1, 1], N(0, 0.05^2) measurement noise on every label
/// and N(0, 0.75^2) contamination on 10 randomly chosen ones.
Dataset gen_example1(std::uint64_t seed);

/// `example1_function` on an n-point uniform grid over [-1, 1] with
/// N(0, base_noise_std^2) measurement noise and no corruption.
Dataset gen_grid(std::size_t n, double base_noise_std, std::uint64_t seed);

/// A draw from a zero-mean RBF Gaussian process at n inputs uniform in
/// [-1, 1]^dim, plus N(0, base_noise_std^2) measurement noise.
Dataset gen_gp(std::size_t n, std::size_t dim, const KernelParams& params, double base_noise_std,
               std::uint64_t seed);

enum class HeteroscedasticFamily { goldberg, le };

HeteroscedasticFamily parse_heteroscedastic_family(std::string_view name);

/// Mean curve, input-dependent measurement noise and contamination scale of
/// a 1-D heteroscedastic benchmark. Inputs are drawn uniformly from
/// [x_lo, x_hi].
struct HeteroscedasticParams {
  std::function<double(double)> mean;
  std::function<double(double)> noise_std;
  double x_lo = 0.0;
  double x_hi = 1.0;
  double contamination_std = 2.0;
};

/// Default curves for the two families. These are reconstructions of the
/// commonly used benchmark functions (Goldberg: 2 sin(2 pi x) with noise std
/// rising linearly from 0.5 to 1.5; Le: 2 (exp(-30 (x - 0.25)^2) + sin(pi x^2)) - 2
/// with noise std exp(sin(2 pi x))), not values fixed by any reference here.
HeteroscedasticParams default_heteroscedastic_params(HeteroscedasticFamily family);

/// Throws ConfigError when `params` is empty or incomplete.
Dataset gen_heteroscedastic(HeteroscedasticFamily family, std::size_t n, std::size_t n_corrupt,
                            const std::optional<HeteroscedasticParams>& params,
                            std::uint64_t seed);

/// Corrupt a copy of `clean` per `spec`, replacing any existing truth.
Dataset inject_noise(const Dataset& clean, const NoiseInjectionSpec& spec);

/// CSV with header `x0,...,x{d-1},y[,epsilon,corrupted]`. Labels are written
/// as given (uncentered); doubles use the shortest round-trip representation.
void write_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);

} // namespace labelnoise
