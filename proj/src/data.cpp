#include "labelnoise/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "labelnoise/errors.hpp"
#include "labelnoise/format.hpp"
#include "labelnoise/random.hpp"

namespace labelnoise {

namespace {

constexpr std::size_t kExample1Size = 24;
constexpr std::size_t kExample1Corrupted = 10;
constexpr double kExample1BaseStd = 0.05;
constexpr double kExample1ContaminationStd = 0.75;

Eigen::VectorXd uniform_grid(std::size_t n, double lo, double hi) {
  if (n == 1) {
    return Eigen::VectorXd::Constant(1, 0.5 * (lo + hi));
  }
  return Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(n), lo, hi);
}

/// Adds N(0, std^2) to `n_corrupt` labels drawn without replacement and
/// returns the matching truth.
CorruptionTruth contaminate(Xoshiro256& rng, Eigen::VectorXd& labels, std::size_t n_corrupt,
                            double stddev) {
  const auto n = static_cast<std::size_t>(labels.size());
  CorruptionTruth truth{Eigen::VectorXd::Zero(labels.size()), std::vector<bool>(n, false)};
  for (std::size_t idx : sample_without_replacement(rng, n, n_corrupt)) {
    const auto i = static_cast<Eigen::Index>(idx);
    const double eps = stddev * rng.normal();
    labels[i] += eps;
    truth.epsilon[i] = eps;
    truth.corrupted[idx] = true;
  }
  return truth;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) {
      break;
    }
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

} // namespace

void NoiseInjectionSpec::validate() const {
  if (!(rate >= 0.0 && rate <= 1.0)) {
    throw ConfigError("noise rate must lie in [0, 1]");
  }
  if (!(level >= 0.0) || !std::isfinite(level)) {
    throw ConfigError("noise level must be finite and non-negative");
  }
  if (!(base_noise_std >= 0.0) || !std::isfinite(base_noise_std)) {
    throw ConfigError("base noise std must be finite and non-negative");
  }
}

std::size_t corrupted_count(double rate, std::size_t n) {
  // Decimal rates are rarely exact in binary (0.7 * 45 = 31.499999999999996);
  // a few ulps of slack keeps exact halves rounding up.
  const double product = rate * static_cast<double>(n);
  return static_cast<std::size_t>(std::floor(product + 0.5 + 1e-12 * std::max(1.0, product)));
}

double example1_function(double x) {
  using std::numbers::pi;
  return std::cos(3.0 * pi * x) + std::sin(pi * x) + 2.0 * x * x;
}

Dataset gen_example1(std::uint64_t seed) {
  Xoshiro256 rng(seed);
  const Eigen::VectorXd x = uniform_grid(kExample1Size, -1.0, 1.0);
  Eigen::VectorXd labels(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    labels[i] = example1_function(x[i]) + kExample1BaseStd * rng.normal();
  }
  auto truth = contaminate(rng, labels, kExample1Corrupted, kExample1ContaminationStd);
  return Dataset(x, std::move(labels), std::move(truth));
}

Dataset gen_grid(std::size_t n, double base_noise_std, std::uint64_t seed) {
  if (n == 0) {
    throw EmptyDatasetError();
  }
  Xoshiro256 rng(seed);
  const Eigen::VectorXd x = uniform_grid(n, -1.0, 1.0);
  Eigen::VectorXd labels(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    labels[i] = example1_function(x[i]) + base_noise_std * rng.normal();
  }
  return Dataset(x, std::move(labels));
}

Dataset gen_gp(std::size_t n, std::size_t dim, const KernelParams& params, double base_noise_std,
               std::uint64_t seed) {
  if (n == 0 || dim == 0) {
    throw EmptyDatasetError();
  }
  Xoshiro256 rng(seed);
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      X(i, j) = rng.uniform(-1.0, 1.0);
    }
  }
  Eigen::MatrixXd K = build_kernel_matrix(params, X);
  // Sampling only needs a factor of something close to K.
  K.diagonal().array() += 1e-8 * params.signal_variance;
  Eigen::LLT<Eigen::MatrixXd> llt(K);
  for (int attempt = 0; llt.info() != Eigen::Success && attempt < 4; ++attempt) {
    K.diagonal().array() += std::pow(10.0, attempt - 6) * params.signal_variance;
    llt.compute(K);
  }
  if (llt.info() != Eigen::Success) {
    throw NumericalError("could not factor the GP sampling covariance", 0.0);
  }
  Eigen::VectorXd z(X.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    z[i] = rng.normal();
  }
  Eigen::VectorXd labels = llt.matrixL() * z;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    labels[i] += base_noise_std * rng.normal();
  }
  return Dataset(std::move(X), std::move(labels));
}

HeteroscedasticFamily parse_heteroscedastic_family(std::string_view name) {
  if (name == "goldberg") {
    return HeteroscedasticFamily::goldberg;
  }
  if (name == "le") {
    return HeteroscedasticFamily::le;
  }
  throw ConfigError("unknown heteroscedastic generator '" + std::string(name) + "'");
}

HeteroscedasticParams default_heteroscedastic_params(HeteroscedasticFamily family) {
  using std::numbers::pi;
  HeteroscedasticParams p;
  switch (family) {
  case HeteroscedasticFamily::goldberg:
    p.mean = [](double x) { return 2.0 * std::sin(2.0 * pi * x); };
    p.noise_std = [](double x) { return 0.5 + x; };
    break;
  case HeteroscedasticFamily::le:
    p.mean = [](double x) {
      return 2.0 * (std::exp(-30.0 * (x - 0.25) * (x - 0.25)) + std::sin(pi * x * x)) - 2.0;
    };
    p.noise_std = [](double x) { return std::exp(std::sin(2.0 * pi * x)); };
    break;
  }
  return p;
}

Dataset gen_heteroscedastic(HeteroscedasticFamily family, std::size_t n, std::size_t n_corrupt,
                            const std::optional<HeteroscedasticParams>& params,
                            std::uint64_t seed) {
  if (!params || !params->mean || !params->noise_std) {
    throw ConfigError(std::string(family == HeteroscedasticFamily::goldberg ? "goldberg" : "le") +
                      " generator needs a mean curve and a noise profile");
  }
  if (n == 0) {
    throw EmptyDatasetError();
  }
  if (n_corrupt > n) {
    throw ConfigError("cannot corrupt more labels than there are samples");
  }
  if (!(params->x_hi > params->x_lo) || !(params->contamination_std >= 0.0)) {
    throw ConfigError("invalid heteroscedastic generator parameters");
  }
  Xoshiro256 rng(seed);
  Eigen::VectorXd x(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    x[i] = rng.uniform(params->x_lo, params->x_hi);
  }
  std::sort(x.begin(), x.end());
  Eigen::VectorXd labels(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    labels[i] = params->mean(x[i]) + params->noise_std(x[i]) * rng.normal();
  }
  auto truth = contaminate(rng, labels, n_corrupt, params->contamination_std);
  return Dataset(x, std::move(labels), std::move(truth));
}

Dataset inject_noise(const Dataset& clean, const NoiseInjectionSpec& spec) {
  spec.validate();
  Xoshiro256 rng(spec.seed);
  const auto n = static_cast<std::size_t>(clean.size());
  const auto& pristine = clean.raw_labels();
  const double pristine_std =
      std::sqrt((pristine.array() - pristine.mean()).square().sum() / static_cast<double>(n));

  Eigen::VectorXd labels = pristine;
  if (spec.base_noise_std > 0.0) {
    for (Eigen::Index i = 0; i < labels.size(); ++i) {
      labels[i] += spec.base_noise_std * rng.normal();
    }
  }
  auto truth = contaminate(rng, labels, corrupted_count(spec.rate, n), spec.level * pristine_std);
  return Dataset(clean.X(), std::move(labels), std::move(truth));
}

void write_dataset(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open '" + path.string() + "' for writing");
  }
  for (Eigen::Index j = 0; j < data.dim(); ++j) {
    out << 'x' << j << ',';
  }
  out << 'y';
  const auto& truth = data.truth();
  if (truth) {
    out << ",epsilon,corrupted";
  }
  out << '\n';
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (Eigen::Index j = 0; j < data.dim(); ++j) {
      out << format_double(data.X()(i, j)) << ',';
    }
    out << format_double(data.raw_labels()[i]);
    if (truth) {
      out << ',' << format_double(truth->epsilon[i]) << ','
          << (truth->corrupted[static_cast<std::size_t>(i)] ? '1' : '0');
    }
    out << '\n';
  }
  if (!out) {
    throw IoError("failed writing '" + path.string() + "'");
  }
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open '" + path.string() + "'");
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError("missing header", 1);
  }
  const auto header = split(line, ',');
  std::size_t dim = 0;
  while (dim < header.size() && trim(header[dim]) == "x" + std::to_string(dim)) {
    ++dim;
  }
  if (dim == 0 || dim >= header.size() || trim(header[dim]) != "y") {
    throw ParseError("header must read x0,...,x{d-1},y[,epsilon,corrupted]", 1);
  }
  const std::size_t extra = header.size() - dim - 1;
  const bool has_truth = extra == 2;
  if (!(extra == 0 || (has_truth && trim(header[dim + 1]) == "epsilon" &&
                       trim(header[dim + 2]) == "corrupted"))) {
    throw ParseError("unexpected header columns after y", 1);
  }

  std::vector<double> xs;
  std::vector<double> ys;
  std::vector<double> eps;
  std::vector<bool> corrupted;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) {
      continue;
    }
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " cells, found " +
                           std::to_string(cells.size()),
                       line_no);
    }
    auto number = [&](std::size_t c) {
      const auto v = parse_double(cells[c]);
      if (!v) {
        throw ParseError("cell " + std::to_string(c + 1) + " is not a number: '" +
                             std::string(trim(cells[c])) + "'",
                         line_no);
      }
      if (!std::isfinite(*v)) {
        throw ParseError("cell " + std::to_string(c + 1) + " is not finite", line_no);
      }
      return *v;
    };
    for (std::size_t c = 0; c < dim; ++c) {
      xs.push_back(number(c));
    }
    ys.push_back(number(dim));
    if (has_truth) {
      eps.push_back(number(dim + 1));
      const auto flag = trim(cells[dim + 2]);
      if (flag != "0" && flag != "1") {
        throw ParseError("corrupted must be 0 or 1", line_no);
      }
      corrupted.push_back(flag == "1");
    }
  }
  if (ys.empty()) {
    throw EmptyDatasetError("'" + path.string() + "' contains no samples");
  }

  const auto n = static_cast<Eigen::Index>(ys.size());
  Eigen::MatrixXd X(n, static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      X(i, j) = xs[static_cast<std::size_t>(i * X.cols() + j)];
    }
  }
  std::optional<CorruptionTruth> truth;
  if (has_truth) {
    truth = CorruptionTruth{Eigen::Map<const Eigen::VectorXd>(eps.data(), n), std::move(corrupted)};
  }
  return Dataset(std::move(X), Eigen::Map<const Eigen::VectorXd>(ys.data(), n), std::move(truth));
}

} // namespace labelnoise
