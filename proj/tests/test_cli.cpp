#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "labelnoise/cli.hpp"
#include "labelnoise/data.hpp"

using namespace labelnoise;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
  explicit TempDir(const std::string& tag)
      : path_(fs::temp_directory_path() / ("labelnoise_cli_" + tag + "_" +
                                           std::to_string(reinterpret_cast<std::uintptr_t>(this)))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

private:
  fs::path path_;
};

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

bool same_bits(const Dataset& a, const Dataset& b) {
  return a.X() == b.X() && a.raw_labels() == b.raw_labels() && a.truth() && b.truth() &&
         a.truth()->epsilon == b.truth()->epsilon && a.truth()->corrupted == b.truth()->corrupted;
}

json read_json(const std::string& path) { return json::parse(slurp(path)); }

std::vector<std::vector<std::string>> read_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) {
      cells.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') {
      cells.emplace_back();
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

} // namespace

TEST_CASE("gen --example1 writes 24 rows with 10 corrupted") {
  TempDir dir("gen");
  const auto r = run({"gen", "--example1", "--seed", "0", "--out", dir / "d.csv"});
  REQUIRE(r.code == cli::kSuccess);
  CHECK(r.out.find("corrupted=10") != std::string::npos);
  const Dataset d = read_dataset(dir / "d.csv");
  CHECK(d.size() == 24);
  REQUIRE(d.truth());
  CHECK(d.truth()->corrupted_count() == 10);
  CHECK(same_bits(d, gen_example1(0)));
}

TEST_CASE("gen flag validation") {
  TempDir dir("genbad");
  CHECK(run({"gen", "--example1", "--rate", "0.5", "--out", dir / "d.csv"}).code ==
        cli::kUsageError);
  CHECK_FALSE(fs::exists(dir / "d.csv"));
  CHECK(run({"gen", "--out", dir / "d.csv"}).code == cli::kUsageError);
  CHECK(run({"gen", "--example1", "--grid", "--out", dir / "d.csv"}).code == cli::kUsageError);
  CHECK(run({"gen", "--grid", "--level", "0.5", "--out", dir / "d.csv"}).code ==
        cli::kUsageError);
  CHECK(run({"gen", "--grid", "--rate", "1.5", "--out", dir / "d.csv"}).code ==
        cli::kUsageError);
  CHECK(run({"gen", "--grid", "--bogus", "--out", dir / "d.csv"}).code == cli::kUsageError);
  CHECK(run({"gen", "--example1"}).code == cli::kUsageError);
  CHECK(run({}).code == cli::kUsageError);
  CHECK(run({"gen", "--example1", "--out", dir / "missing/d.csv"}).code == cli::kIoError);
}

TEST_CASE("gen --grid with rate and level corrupts round(rate * N) labels") {
  TempDir dir("grid");
  const auto r = run({"gen", "--grid", "--n", "30", "--rate", "0.1", "--level", "0.5", "--seed",
                      "7", "--out", dir / "d.csv"});
  REQUIRE(r.code == cli::kSuccess);
  const Dataset d = read_dataset(dir / "d.csv");
  CHECK(d.size() == 30);
  REQUIRE(d.truth());
  CHECK(d.truth()->corrupted_count() == 3);

  REQUIRE(run({"gen", "--grid", "--n", "30", "--rate", "0.1", "--level", "0.5", "--seed", "7",
               "--out", dir / "e.csv"})
              .code == cli::kSuccess);
  CHECK(slurp(dir / "d.csv") == slurp(dir / "e.csv"));
}

TEST_CASE("fit report on the example 1 fixture") {
  TempDir dir("fit");
  REQUIRE(run({"gen", "--example1", "--seed", "0", "--out", dir / "d.csv"}).code == 0);
  const auto r = run({"fit", "--data", dir / "d.csv", "--length-scale", "0.2", "--out",
                      dir / "r.json"});
  REQUIRE(r.code == cli::kSuccess);
  const json doc = read_json(dir / "r.json");
  CHECK(doc["tool"]["name"] == "labelnoise");
  CHECK(doc["noise_model"] == "full");
  CHECK(doc["kernel"]["length_scale"].get<double>() == 0.2);
  CHECK(doc["trace"]["monotone"].get<bool>());
  CHECK(doc["trace"]["converged"].get<bool>());
  REQUIRE(doc["labels"].size() == 24);
  int flagged = 0;
  for (const auto& l : doc["labels"]) {
    CHECK(l["sigma"].get<double>() >= 0.0);
    CHECK(l.contains("corrupted"));
    flagged += l["flag"].get<bool>();
  }
  CHECK(doc["n_flagged"].get<int>() == flagged);
  const double auc = doc["metrics"]["auc"].get<double>();
  CHECK(auc >= 0.0);
  CHECK(auc <= 1.0);

  // Report to stdout when --out is absent.
  const auto s = run({"fit", "--data", dir / "d.csv", "--length-scale", "0.2"});
  REQUIRE(s.code == cli::kSuccess);
  CHECK(json::parse(s.out) == doc);
}

TEST_CASE("fit echoes its configuration") {
  TempDir dir("fitcfg");
  REQUIRE(run({"gen", "--grid", "--n", "16", "--out", dir / "d.csv"}).code == 0);
  const auto r = run({"fit", "--data", dir / "d.csv", "--lambda", "0.5", "--sigma-init", "0.3",
                      "--out", dir / "r.json"});
  REQUIRE(r.code == cli::kSuccess);
  const json doc = read_json(dir / "r.json");
  CHECK(doc["config"]["optimizer"]["lambda"].get<double>() == 0.5);
  CHECK(doc["config"]["optimizer"]["sigma_init"].get<double>() == 0.3);
  CHECK_FALSE(doc.contains("metrics"));

  REQUIRE(run({"fit", "--data", dir / "d.csv", "--mode", "basic", "--out", dir / "b.json"}).code ==
          0);
  const json basic = read_json(dir / "b.json");
  CHECK(basic["noise_model"] == "basic");
  const double s0 = basic["labels"][0]["sigma"].get<double>();
  for (const auto& l : basic["labels"]) {
    CHECK(l["sigma"].get<double>() == s0);
  }

  REQUIRE(run({"fit", "--data", dir / "d.csv", "--mode", "plain", "--out", dir / "p.json"}).code ==
          0);
  for (const auto& l : read_json(dir / "p.json")["labels"]) {
    CHECK(l["sigma"].get<double>() == 0.0);
  }

  CHECK(run({"fit", "--data", dir / "d.csv", "--mode", "wide"}).code == cli::kUsageError);
  CHECK(run({"fit", "--data", dir / "d.csv", "--joint", "--mode", "basic"}).code ==
        cli::kUsageError);
  CHECK(run({"fit", "--data", dir / "d.csv", "--length-scale", "-1"}).code == cli::kUsageError);
  CHECK(run({"fit", "--data", dir / "nope.csv"}).code == cli::kIoError);
  std::ofstream(dir / "bad.csv") << "x0,y\n1,nan\n";
  CHECK(run({"fit", "--data", dir / "bad.csv"}).code == cli::kIoError);
}

TEST_CASE("fit reports non-convergence through the exit code") {
  TempDir dir("fitcap");
  REQUIRE(run({"gen", "--example1", "--out", dir / "d.csv"}).code == 0);
  const auto r = run({"fit", "--data", dir / "d.csv", "--length-scale", "0.2", "--max-iters", "2",
                      "--out", dir / "r.json"});
  CHECK(r.code == cli::kNotConverged);
  CHECK_FALSE(read_json(dir / "r.json")["trace"]["converged"].get<bool>());
}

TEST_CASE("detect from data and from an existing report") {
  TempDir dir("detect");
  REQUIRE(run({"gen", "--example1", "--seed", "2", "--out", dir / "d.csv"}).code == 0);
  const auto r = run({"detect", "--data", dir / "d.csv", "--length-scale", "0.2", "--out",
                      dir / "r.json"});
  REQUIRE(r.code == cli::kSuccess);
  const json doc = read_json(dir / "r.json");
  const auto& m = doc["metrics"];
  REQUIRE(m["auc"].is_number());
  CHECK(m["auc"].get<double>() >= 0.0);
  CHECK(m["auc"].get<double>() <= 1.0);
  REQUIRE(m["precision_at_recall"].size() == 2);
  CHECK(m["precision_at_recall"].contains("0.7"));
  CHECK(m["precision_at_recall"].contains("0.95"));
  CHECK(m["r2_noise"].get<double>() <= 1.0);

  const auto again = run({"detect", "--report", dir / "r.json", "--out", dir / "s.json"});
  REQUIRE(again.code == cli::kSuccess);
  const json re = read_json(dir / "s.json");
  CHECK(re["metrics"] == doc["metrics"]);
  CHECK(re["labels"] == doc["labels"]);
  CHECK(re["trace"] == doc["trace"]);

  const auto thr = run({"detect", "--report", dir / "r.json", "--threshold", "1e300"});
  REQUIRE(thr.code == cli::kSuccess);
  CHECK(json::parse(thr.out)["n_flagged"].get<int>() == 0);

  CHECK(run({"detect", "--data", dir / "d.csv", "--report", dir / "r.json"}).code ==
        cli::kUsageError);
  CHECK(run({"detect"}).code == cli::kUsageError);
  std::ofstream(dir / "junk.json") << "{ not json";
  CHECK(run({"detect", "--report", dir / "junk.json"}).code == cli::kIoError);
  std::ofstream(dir / "empty.json") << "{}";
  CHECK(run({"detect", "--report", dir / "empty.json"}).code == cli::kIoError);
}

TEST_CASE("detect without ground truth omits metrics") {
  TempDir dir("detect_clean");
  REQUIRE(run({"gen", "--grid", "--n", "20", "--out", dir / "d.csv"}).code == 0);
  const auto r = run({"detect", "--data", dir / "d.csv"});
  REQUIRE(r.code == cli::kSuccess);
  const json doc = json::parse(r.out);
  CHECK_FALSE(doc.contains("metrics"));
  CHECK(doc["labels"].size() == 20);
  CHECK_FALSE(doc["labels"][0].contains("corrupted"));
}

TEST_CASE("benchmark rows, undefined markers and determinism") {
  TempDir dir("bench");
  const std::vector<std::string> args{"benchmark", "--generator", "grid", "--n",   "40",
                                      "--rates",   "0,0.3",       "--levels", "0.5,1",
                                      "--folds",   "4",           "--seed", "5"};
  auto with_out = [&](const std::string& p) {
    auto a = args;
    a.push_back("--out");
    a.push_back(p);
    return a;
  };
  REQUIRE(run(with_out(dir / "a.csv")).code == cli::kSuccess);
  REQUIRE(run(with_out(dir / "b.csv")).code == cli::kSuccess);
  const std::string text = slurp(dir / "a.csv");
  CHECK(text == slurp(dir / "b.csv"));

  const auto rows = read_csv(text);
  REQUIRE(rows.size() == 5);
  CHECK(rows[0] == std::vector<std::string>{"rate", "level", "r2", "auc", "p70", "p95",
                                            "mae_plain", "mae_basic", "mae_full", "error"});
  for (std::size_t i = 1; i < rows.size(); ++i) {
    REQUIRE(rows[i].size() == rows[0].size());
    const bool clean = rows[i][0] == "0";
    CHECK((rows[i][2] == "NA") == clean);
    CHECK((rows[i][3] == "NA") == clean);
    for (int c = 6; c <= 8; ++c) {
      CHECK(rows[i][c] != "NA");
      CHECK(std::stod(rows[i][c]) >= 0.0);
    }
    CHECK(rows[i][9].empty());
  }

  CHECK(run({"benchmark", "--generator", "wave"}).code == cli::kUsageError);
  CHECK(run({"benchmark", "--rates", "1.5", "--n", "10"}).code == cli::kUsageError);
}

TEST_CASE("compare-optimizers on a diagonal instance") {
  TempDir dir("cmp");
  REQUIRE(run({"gen", "--grid", "--n", "10", "--out", dir / "d.csv"}).code == 0);
  // Grid spacing 2/9 against length scale 0.01 leaves K diagonal to machine precision.
  const auto r = run({"compare-optimizers", "--data", dir / "d.csv", "--length-scale", "0.01",
                      "--out", dir / "c.csv"});
  REQUIRE(r.code == cli::kSuccess);
  CHECK(r.err.find("multiplicative: iters=") != std::string::npos);

  const auto rows = read_csv(slurp(dir / "c.csv"));
  REQUIRE(rows.size() > 3);
  CHECK(rows[0] == std::vector<std::string>{"optimizer", "iter", "nll", "function_evals"});
  double mu_last = 0.0;
  double pg_last = 0.0;
  double prev = 1e300;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double v = std::stod(rows[i][2]);
    if (rows[i][0] == "multiplicative") {
      CHECK(v <= prev);
      prev = v;
      CHECK(std::stol(rows[i][3]) == std::stol(rows[i][1]) + 1);
      mu_last = v;
    } else {
      REQUIRE(rows[i][0] == "projected_gradient");
      pg_last = v;
    }
  }
  CHECK(std::abs(mu_last - pg_last) < 1e-6);

  CHECK(run({"compare-optimizers", "--data", dir / "d.csv", "--step-size", "0"}).code ==
        cli::kUsageError);
  CHECK(run({"compare-optimizers"}).code == cli::kUsageError);
}

TEST_CASE("config files") {
  TempDir dir("config");
  std::ofstream(dir / "gen.ini") << "grid=true\nn=12\nseed=3\n";
  REQUIRE(run({"gen", "--config", dir / "gen.ini", "--out", dir / "a.csv"}).code == 0);
  REQUIRE(run({"gen", "--grid", "--n", "12", "--seed", "3", "--out", dir / "b.csv"}).code == 0);
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));

  // Command-line flags take precedence.
  REQUIRE(run({"gen", "--config", dir / "gen.ini", "--n", "14", "--out", dir / "c.csv"}).code ==
          0);
  CHECK(read_dataset(dir / "c.csv").size() == 14);

  std::ofstream(dir / "bad.ini") << "grid=true\nwidth=3\n";
  CHECK(run({"gen", "--config", dir / "bad.ini", "--out", dir / "d.csv"}).code ==
        cli::kUsageError);
  CHECK(run({"gen", "--config", dir / "absent.ini", "--out", dir / "d.csv"}).code ==
        cli::kIoError);
  std::ofstream(dir / "sec.ini") << "[gen]\ngrid=true\n";
  CHECK(run({"gen", "--config", dir / "sec.ini", "--out", dir / "d.csv"}).code ==
        cli::kUsageError);
  std::ofstream(dir / "val.ini") << "grid=true\nn=many\n";
  CHECK(run({"gen", "--config", dir / "val.ini", "--out", dir / "d.csv"}).code ==
        cli::kUsageError);

  // Required settings may come from the file alone.
  std::ofstream(dir / "fit.ini") << "data=" << (dir / "a.csv") << "\nmode=basic\nlambda=0.25\n";
  const auto fit = run({"fit", "--config", dir / "fit.ini"});
  REQUIRE(fit.code == cli::kSuccess);
  const json doc = json::parse(fit.out);
  CHECK(doc["noise_model"] == "basic");
  CHECK(doc["config"]["optimizer"]["lambda"].get<double>() == 0.25);
  CHECK(run({"fit"}).code == cli::kUsageError);
}

TEST_CASE("seed from the environment") {
  TempDir dir("env");
  REQUIRE(run({"gen", "--grid", "--rate", "0.3", "--seed", "7", "--out", dir / "a.csv"}).code == 0);
  ::setenv(cli::kSeedEnvVar, "7", 1);
  const int code = run({"gen", "--grid", "--rate", "0.3", "--out", dir / "b.csv"}).code;
  const int flag_wins =
      run({"gen", "--grid", "--rate", "0.3", "--seed", "8", "--out", dir / "c.csv"}).code;
  ::unsetenv(cli::kSeedEnvVar);
  REQUIRE(code == 0);
  REQUIRE(flag_wins == 0);
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  CHECK(slurp(dir / "a.csv") != slurp(dir / "c.csv"));
}

TEST_CASE("help and version") {
  const auto v = run({"--version"});
  CHECK(v.code == cli::kSuccess);
  CHECK(v.out.find(cli::kToolVersion) != std::string::npos);
  const auto h = run({"fit", "--help"});
  CHECK(h.code == cli::kSuccess);
  CHECK(h.out.find("--lambda") != std::string::npos);
}

TEST_CASE("build_report without truth or trace") {
  const Dataset d(Eigen::MatrixXd::Zero(3, 1), Eigen::VectorXd::Zero(3));
  cli::ReportInputs in;
  in.params = KernelParams{1.0, 1.0};
  in.sigma = NoiseVector(Eigen::Vector3d(0.0, 1.0, 2.0));
  const json doc = cli::build_report(d, in);
  CHECK_FALSE(doc.contains("metrics"));
  CHECK_FALSE(doc.contains("trace"));
  CHECK(doc["labels"][2]["sigma"].get<double>() == 2.0);
  in.sigma = NoiseVector(Eigen::Vector2d(0.0, 1.0));
  CHECK_THROWS(cli::build_report(d, in));
}
