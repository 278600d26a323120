#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>

#include "labelnoise/data.hpp"
#include "labelnoise/errors.hpp"
#include "labelnoise/gpr.hpp"

using namespace labelnoise;
namespace fs = std::filesystem;

namespace {

/// A fresh directory under the system temp dir, removed on scope exit.
class TempDir {
public:
  explicit TempDir(const std::string& tag)
      : path_(fs::temp_directory_path() / ("labelnoise_" + tag + "_" +
                                           std::to_string(reinterpret_cast<std::uintptr_t>(this)))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

private:
  fs::path path_;
};

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

bool same(const Dataset& a, const Dataset& b) {
  if (a.X() != b.X() || a.raw_labels() != b.raw_labels() || a.y() != b.y() ||
      a.truth().has_value() != b.truth().has_value()) {
    return false;
  }
  if (a.truth()) {
    return a.truth()->epsilon == b.truth()->epsilon && a.truth()->corrupted == b.truth()->corrupted;
  }
  return true;
}

double population_std(const Eigen::VectorXd& v) {
  return std::sqrt((v.array() - v.mean()).square().mean());
}

} // namespace

TEST_CASE("example function closed form") {
  CHECK(example1_function(0.0) == 1.0);
  CHECK(example1_function(1.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(example1_function(-1.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(example1_function(0.5) ==
        doctest::Approx(std::cos(1.5 * std::numbers::pi) + 1.0 + 0.5).epsilon(1e-14));
}

TEST_CASE("gen_example1") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto d = gen_example1(seed);
    CAPTURE(seed);
    REQUIRE(d.size() == 24);
    CHECK(d.dim() == 1);
    REQUIRE(d.truth());
    CHECK(d.truth()->corrupted_count() == 10);
    CHECK(d.X()(0, 0) == -1.0);
    CHECK(d.X()(23, 0) == 1.0);
    for (Eigen::Index i = 0; i < 24; ++i) {
      const bool bad = d.truth()->corrupted[static_cast<std::size_t>(i)];
      CHECK((d.truth()->epsilon[i] != 0.0) == bad);
      // Raw labels are f(x) + base noise + contamination; base noise std is 0.05.
      const double base = d.raw_labels()[i] - example1_function(d.X()(i, 0)) - d.truth()->epsilon[i];
      CHECK(std::abs(base) < 0.05 * 6);
    }
    CHECK(std::abs(d.y().mean()) <= 1e-12 * population_std(d.y()));
  }
  CHECK(same(gen_example1(5), gen_example1(5)));
  CHECK_FALSE(same(gen_example1(5), gen_example1(6)));
}

TEST_CASE("gen_grid and gen_gp") {
  const auto g = gen_grid(30, 0.0, 1);
  CHECK(g.size() == 30);
  CHECK_FALSE(g.truth());
  for (Eigen::Index i = 0; i < 30; ++i) {
    CHECK(g.raw_labels()[i] == example1_function(g.X()(i, 0)));
  }
  CHECK_THROWS_AS(gen_grid(0, 0.0, 1), EmptyDatasetError);

  const auto gp = gen_gp(50, 3, {2.0, 0.5}, 0.0, 9);
  CHECK(gp.size() == 50);
  CHECK(gp.dim() == 3);
  CHECK((gp.X().array().abs() <= 1.0).all());
  CHECK(same(gp, gen_gp(50, 3, {2.0, 0.5}, 0.0, 9)));
  // Single-point draws are N(0, signal_variance).
  double var = 0.0;
  for (std::uint64_t s = 0; s < 200; ++s) {
    const double v = gen_gp(1, 1, {2.0, 0.5}, 0.0, s).raw_labels()[0];
    var += v * v;
  }
  CHECK(var / 200.0 == doctest::Approx(2.0).epsilon(0.3));
}

TEST_CASE("gen_heteroscedastic") {
  using F = HeteroscedasticFamily;
  const auto gold = gen_heteroscedastic(F::goldberg, 30, 20, default_heteroscedastic_params(F::goldberg), 3);
  CHECK(gold.size() == 30);
  CHECK(gold.truth()->corrupted_count() == 20);
  const auto le = gen_heteroscedastic(F::le, 50, 33, default_heteroscedastic_params(F::le), 3);
  CHECK(le.size() == 50);
  CHECK(le.truth()->corrupted_count() == 33);
  const auto none = gen_heteroscedastic(F::le, 50, 0, default_heteroscedastic_params(F::le), 3);
  CHECK(none.truth()->epsilon == Eigen::VectorXd::Zero(50));
  CHECK(none.truth()->corrupted_count() == 0);

  CHECK_THROWS_AS(gen_heteroscedastic(F::goldberg, 30, 20, std::nullopt, 3), ConfigError);
  HeteroscedasticParams incomplete = default_heteroscedastic_params(F::goldberg);
  incomplete.noise_std = nullptr;
  CHECK_THROWS_AS(gen_heteroscedastic(F::goldberg, 30, 20, incomplete, 3), ConfigError);
  CHECK_THROWS_AS(gen_heteroscedastic(F::goldberg, 30, 31, default_heteroscedastic_params(F::goldberg), 3),
                  ConfigError);
  CHECK(parse_heteroscedastic_family("le") == F::le);
  CHECK(parse_heteroscedastic_family("goldberg") == F::goldberg);
  CHECK_THROWS_AS(parse_heteroscedastic_family("sinc"), ConfigError);
}

TEST_CASE("corrupted_count rounds half up") {
  CHECK(corrupted_count(0.5, 24) == 12);
  CHECK(corrupted_count(0.1, 30) == 3);
  CHECK(corrupted_count(0.1, 25) == 3);   // 2.5 -> 3
  CHECK(corrupted_count(0.3, 5) == 2);    // 1.5 -> 2
  CHECK(corrupted_count(0.0, 100) == 0);
  CHECK(corrupted_count(1.0, 7) == 7);
  for (std::size_t n = 1; n < 200; ++n) {
    for (double r : {0.05, 0.1, 0.3, 0.5, 0.7}) {
      CHECK(corrupted_count(r, n) == static_cast<std::size_t>(std::floor(r * static_cast<double>(n) + 0.5 + 1e-9)));
    }
  }
}

TEST_CASE("inject_noise") {
  const auto clean = gen_grid(24, 0.0, 0);
  const double std_y = population_std(clean.raw_labels());

  const auto r0 = inject_noise(clean, {0.0, 1.0, 0.0, 4});
  CHECK(r0.raw_labels() == clean.raw_labels());
  CHECK(r0.truth()->corrupted_count() == 0);

  const auto l0 = inject_noise(clean, {0.5, 0.0, 0.0, 4});
  CHECK(l0.truth()->corrupted_count() == 12);
  CHECK(l0.truth()->epsilon == Eigen::VectorXd::Zero(24));
  CHECK(l0.raw_labels() == clean.raw_labels());

  int within = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto d = inject_noise(clean, {0.5, 0.8, 0.0, seed});
    CAPTURE(seed);
    REQUIRE(d.truth()->corrupted_count() == 12);
    // Perturbation is exactly the label difference; the pristine input is untouched.
    CHECK((d.raw_labels() - clean.raw_labels() - d.truth()->epsilon).cwiseAbs().maxCoeff() < 1e-12);
    double ss = 0.0;
    for (Eigen::Index i = 0; i < 24; ++i) {
      if (d.truth()->corrupted[static_cast<std::size_t>(i)]) {
        ss += d.truth()->epsilon[i] * d.truth()->epsilon[i];
      }
    }
    const double sample_std = std::sqrt(ss / 12.0);
    within += std::abs(sample_std / (0.8 * std_y) - 1.0) < 0.35 ? 1 : 0;
  }
  // A chi distribution with 12 dof stays within 35% of its scale with probability ~0.95.
  CHECK(within >= 34);

  CHECK(same(inject_noise(clean, {0.3, 1.0, 0.1, 7}), inject_noise(clean, {0.3, 1.0, 0.1, 7})));
  CHECK_THROWS_AS(inject_noise(clean, {1.5, 1.0, 0.0, 0}), ConfigError);
  CHECK_THROWS_AS(inject_noise(clean, {-0.1, 1.0, 0.0, 0}), ConfigError);
  CHECK_THROWS_AS(inject_noise(clean, {0.1, -1.0, 0.0, 0}), ConfigError);
}

TEST_CASE("Dataset centering and validation") {
  Eigen::MatrixXd X(3, 1);
  X << 0.0, 1.0, 2.0;
  const Dataset d(X, Eigen::Vector3d(10.0, 11.0, 15.0));
  CHECK(d.y_center() == 12.0);
  CHECK(d.y() == Eigen::Vector3d(-2.0, -1.0, 3.0));
  for (Eigen::Index i = 0; i < 3; ++i) {
    CHECK(d.uncenter(d.y()[i]) == d.raw_labels()[i]);
  }
  const auto sub = d.subset({0, 2});
  CHECK(sub.raw_labels() == Eigen::Vector2d(10.0, 15.0));
  CHECK(sub.y_center() == 12.5);

  CHECK_THROWS_AS(Dataset(Eigen::MatrixXd(0, 1), Eigen::VectorXd(0)), EmptyDatasetError);
  CHECK_THROWS_AS(Dataset(X, Eigen::Vector2d(1.0, 2.0)), InvalidInputError);
  CHECK_THROWS_AS(Dataset(X, Eigen::Vector3d(1.0, NAN, 2.0)), InvalidInputError);
  CorruptionTruth short_truth{Eigen::VectorXd::Zero(2), {false, false}};
  CHECK_THROWS_AS(Dataset(X, Eigen::Vector3d(1.0, 2.0, 3.0), short_truth), InvalidInputError);
}

TEST_CASE("predict then uncenter matches a fit on raw labels shifted back") {
  const auto d = inject_noise(gen_grid(20, 0.05, 2), {0.2, 1.0, 0.0, 2});
  const KernelParams p{1.0, 0.3};
  const auto sigma = NoiseVector::constant(20, 0.01);
  const auto centered = fit(p, sigma, d);
  // Reference: shift the raw labels by the stored offset by hand, fit, shift back.
  const Eigen::VectorXd shifted = (d.raw_labels().array() - d.y_center()).matrix();
  const auto manual = fit(p, sigma, d.X(), shifted);
  // A large common offset only changes the centering, up to rounding of the offset.
  const Dataset offset(d.X(), (d.raw_labels().array() + 1000.0).matrix());
  const auto far = fit(p, sigma, offset);
  Eigen::VectorXd x(1);
  for (double t : {-0.95, -0.3, 0.0, 0.41, 0.99}) {
    x[0] = t;
    const double a = d.uncenter(predict(centered, x).mean);
    const double b = predict(manual, x).mean + d.y_center();
    CHECK(std::abs(a - b) <= 1e-12 * std::abs(b));
    const double c = offset.uncenter(predict(far, x).mean) - 1000.0;
    CHECK(std::abs(a - c) <= 1e-10 * std::abs(b));
  }
}

TEST_CASE("CSV round trip is bit exact") {
  TempDir dir("roundtrip");
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto d = gen_example1(seed);
    const auto path = dir.path() / "ex1.csv";
    write_dataset(d, path);
    CHECK(same(read_dataset(path), d));
  }
  const auto gp = gen_gp(40, 3, {1.0, 0.7}, 0.01, 2);
  write_dataset(gp, dir.path() / "gp.csv");
  const auto back = read_dataset(dir.path() / "gp.csv");
  CHECK(same(back, gp));
  CHECK_FALSE(back.truth());

  std::ifstream in(dir.path() / "ex1.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "x0,y,epsilon,corrupted");
}

TEST_CASE("CSV parse errors") {
  TempDir dir("parse");
  const auto p = dir.path() / "d.csv";

  write_text(p, "x0,y\n");
  CHECK_THROWS_AS(read_dataset(p), EmptyDatasetError);

  write_text(p, "x0,y\n0.1,1\n0.2,NaN\n");
  try {
    read_dataset(p);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }

  write_text(p, "x0,y\n0.1,1\n0.2\n");
  try {
    read_dataset(p);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }

  write_text(p, "x0,y\n0.1,abc\n");
  CHECK_THROWS_AS(read_dataset(p), ParseError);
  write_text(p, "a,b\n0.1,1\n");
  CHECK_THROWS_AS(read_dataset(p), ParseError);
  write_text(p, "x0,y,epsilon,corrupted\n0.1,1,0,2\n");
  CHECK_THROWS_AS(read_dataset(p), ParseError);
  write_text(p, "");
  CHECK_THROWS_AS(read_dataset(p), ParseError);
  CHECK_THROWS_AS(read_dataset(dir.path() / "missing.csv"), IoError);
}
