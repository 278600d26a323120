#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "labelnoise/dataset.hpp"
#include "labelnoise/detect.hpp"
#include "labelnoise/kernel.hpp"
#include "labelnoise/noiseopt.hpp"

namespace labelnoise::cli {

inline constexpr const char* kToolName = "labelnoise";
inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kSeedEnvVar = "LABELNOISE_SEED";

/// Process exit codes, stable across versions.
enum ExitCode : int {
  kSuccess = 0,
  kUsageError = 1,
  kIoError = 2,
  kNumericalError = 3,
  kNotConverged = 4,
};

/// Runs the command line `args` (without the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Everything a report needs besides the dataset.
struct ReportInputs {
  nlohmann::json config;
  NoiseModel mode = NoiseModel::full;
  KernelParams params;
  NoiseVector sigma;
  std::optional<OptTrace> trace;
  std::optional<double> threshold;
  std::vector<double> recall_levels{0.70, 0.95};
};

/// Report document: tool, config echo, kernel, per-label section, metrics
/// (only when the dataset carries truth) and a trace summary.
nlohmann::json build_report(const Dataset& data, const ReportInputs& inputs);

} // namespace labelnoise::cli
