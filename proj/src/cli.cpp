#include "labelnoise/cli.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "labelnoise/data.hpp"
#include "labelnoise/errors.hpp"
#include "labelnoise/format.hpp"

namespace labelnoise::cli {

using nlohmann::json;

namespace {

// Seed used by `gen` for the corruption step, kept apart from the draw of
// the clean labels.
std::uint64_t injection_seed(std::uint64_t seed) { return seed + 0x9e3779b97f4a7c15ULL; }

json trace_json(const OptTrace& t) {
  return {{"iters", t.iters},
          {"converged", t.converged},
          {"monotone", t.monotone},
          {"final_nll", t.final_nll()},
          {"function_evals", t.function_evals}};
}

json mult_config_json(const MultUpdateConfig& c) {
  json j{{"max_iters", c.max_iters},
         {"tol_sigma", c.tol_sigma},
         {"tol_nll", c.tol_nll},
         {"lambda", c.penalty_lambda},
         {"p", c.penalty_p}};
  j["sigma_init"] = std::holds_alternative<double>(c.sigma_init)
                        ? json(std::get<double>(c.sigma_init))
                        : json("0.1*mean(y^2)");
  j["zero_clip"] = c.zero_clip ? json(*c.zero_clip) : json("1e-12*mean(y^2)");
  return j;
}

std::string recall_key(double level) { return format_double(level); }

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) {
    throw IoError("cannot open '" + path + "' for writing");
  }
  f << text;
  if (!f) {
    throw IoError("failed writing '" + path + "'");
  }
}

/// Merges a flat key=value file into `sub`. Keys name long options without
/// the leading dashes; options already given on the command line keep their
/// value.
void apply_config_file(CLI::App& sub, const std::string& path) {
  std::ifstream f(path);
  if (!f) {
    throw IoError("cannot open config file '" + path + "'");
  }
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_config(f);
  } catch (const CLI::Error& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
  for (const auto& item : items) {
    if (!item.parents.empty() || item.name == "++" || item.name == "--") {
      throw ConfigError("config file '" + path + "' must be flat key=value without sections");
    }
    CLI::Option* opt = sub.get_option_no_throw("--" + item.name);
    if (opt == nullptr || item.name == "config" || item.name == "help") {
      throw ConfigError("unknown config key '" + item.name + "' for " + sub.get_name());
    }
    if (opt->count() > 0) {
      continue;
    }
    try {
      opt->add_result(item.inputs);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw ConfigError("config key '" + item.name + "': " + e.what());
    }
  }
}

std::string csv_cell(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }

/// Options shared by every command that fits a model.
struct FitOptions {
  std::string data_path;
  std::string out_path;
  std::string mode = "full";
  bool joint = false;
  std::optional<double> signal_variance;
  std::optional<double> length_scale;
  MultUpdateConfig mult;
  std::optional<double> sigma_init;
  std::optional<double> zero_clip;
  JointOptConfig joint_cfg;
  std::optional<std::uint64_t> restart_seed;
  std::optional<double> threshold;
  std::vector<double> recall_levels{0.70, 0.95};
  std::uint64_t seed = 0;

  MultUpdateConfig resolved_mult() const {
    MultUpdateConfig c = mult;
    if (sigma_init) {
      c.sigma_init = *sigma_init;
    }
    c.zero_clip = zero_clip;
    return c;
  }

  KernelParams kernel_for(const Dataset& data) const {
    KernelParams p = heuristic_kernel_params(data);
    if (signal_variance) {
      p.signal_variance = *signal_variance;
    }
    if (length_scale) {
      p.length_scale = *length_scale;
    }
    p.validate();
    return p;
  }
};

void add_kernel_options(CLI::App* sub, std::optional<double>& sv, std::optional<double>& ls) {
  sub->add_option("--signal-variance", sv, "RBF signal variance (default: mean(y^2))");
  sub->add_option("--length-scale", ls, "RBF length scale (default: median pairwise distance)");
}

void add_fit_options(CLI::App* sub, FitOptions& o) {
  sub->add_option("--data", o.data_path, "dataset CSV (required)");
  sub->add_option("--out", o.out_path, "report path ('-' for stdout)");
  sub->add_option("--mode", o.mode, "noise model: plain, basic or full")
      ->check(CLI::IsMember({"plain", "basic", "full"}));
  sub->add_flag("--joint", o.joint, "also optimize the kernel hyperparameters");
  add_kernel_options(sub, o.signal_variance, o.length_scale);
  sub->add_option("--lambda", o.mult.penalty_lambda, "l_p penalty weight");
  sub->add_option("--p", o.mult.penalty_p, "l_p penalty exponent (>= 1)");
  sub->add_option("--max-iters", o.mult.max_iters, "iteration cap of the noise optimizer");
  sub->add_option("--tol-sigma", o.mult.tol_sigma, "relative sigma change tolerance");
  sub->add_option("--tol-nll", o.mult.tol_nll, "objective decrease tolerance (0 disables)");
  sub->add_option("--sigma-init", o.sigma_init, "initial noise variance (default 0.1*mean(y^2))");
  sub->add_option("--zero-clip", o.zero_clip, "snap variances below this to 0");
  sub->add_option("--outer-rounds", o.joint_cfg.outer_rounds, "joint: block coordinate rounds");
  sub->add_option("--theta-steps", o.joint_cfg.theta_max_steps, "joint: gradient steps per round");
  sub->add_option("--learning-rate", o.joint_cfg.learning_rate, "joint: log-theta step size");
  sub->add_option("--restarts", o.joint_cfg.restarts, "joint: random restarts");
  sub->add_option("--restart-seed", o.restart_seed, "joint: restart seed (default --seed)");
  sub->add_option("--threshold", o.threshold, "flag threshold (default median + 3 MAD)");
  sub->add_option("--recall-levels", o.recall_levels, "precision-at-recall levels")
      ->delimiter(',');
  sub->add_option("--seed", o.seed, "global seed")->envname(kSeedEnvVar);
}

struct FitOutcome {
  KernelParams params;
  NoiseVector sigma;
  OptTrace trace;
};

FitOutcome run_fit(const Dataset& data, const FitOptions& o, NoiseModel mode) {
  const MultUpdateConfig mult = o.resolved_mult();
  if (o.joint) {
    if (mode != NoiseModel::full) {
      throw ConfigError("--joint requires --mode full");
    }
    JointOptConfig jc = o.joint_cfg;
    jc.restart_seed = o.restart_seed.value_or(o.seed);
    auto res = joint_optimize(data, jc, mult);
    return {res.params, std::move(res.sigma), std::move(res.trace)};
  }
  const KernelParams params = o.kernel_for(data);
  const Eigen::MatrixXd K = build_kernel_matrix(params, data.X());
  switch (mode) {
  case NoiseModel::plain: {
    const auto state = GprState::factorize(K, NoiseVector::zeros(data.size()), data.y());
    OptTrace t;
    t.nll_per_iter.push_back(nll(state));
    t.evals_per_iter.push_back(1);
    t.function_evals = 1;
    t.converged = true;
    return {params, NoiseVector::zeros(data.size()), std::move(t)};
  }
  case NoiseModel::basic: {
    auto res = optimize_sigma_uniform(K, data.y(), mult);
    return {params, NoiseVector::constant(data.size(), res.sigma), std::move(res.trace)};
  }
  case NoiseModel::full:
    break;
  }
  auto res = optimize_sigma(K, data.y(), mult);
  return {params, std::move(res.sigma), std::move(res.trace)};
}

json fit_config_json(const FitOptions& o, NoiseModel mode) {
  json j{{"data", o.data_path},
         {"mode", std::string(to_string(mode))},
         {"joint", o.joint},
         {"seed", o.seed},
         {"optimizer", mult_config_json(o.resolved_mult())},
         {"recall_levels", o.recall_levels}};
  j["threshold"] = o.threshold ? json(*o.threshold) : json("median+3*MAD");
  if (o.joint) {
    j["joint"] = json{{"outer_rounds", o.joint_cfg.outer_rounds},
                      {"theta_max_steps", o.joint_cfg.theta_max_steps},
                      {"learning_rate", o.joint_cfg.learning_rate},
                      {"restarts", o.joint_cfg.restarts},
                      {"restart_seed", o.restart_seed.value_or(o.seed)}};
  }
  return j;
}

void require_data(const std::string& path) {
  if (path.empty()) {
    throw ConfigError("--data is required");
  }
}

int cmd_fit(const FitOptions& o, std::ostream& out) {
  require_data(o.data_path);
  const Dataset data = read_dataset(o.data_path);
  const NoiseModel mode = parse_noise_model(o.mode);
  auto fit = run_fit(data, o, mode);
  ReportInputs in;
  in.config = fit_config_json(o, mode);
  in.mode = mode;
  in.params = fit.params;
  in.sigma = fit.sigma;
  in.trace = fit.trace;
  in.threshold = o.threshold;
  in.recall_levels = o.recall_levels;
  write_text(o.out_path, build_report(data, in).dump(2) + "\n", out);
  return fit.trace.converged ? kSuccess : kNotConverged;
}

struct DetectOptions {
  FitOptions fit;
  std::string report_path;
};

int cmd_detect(DetectOptions& o, std::ostream& out) {
  if (o.fit.data_path.empty() == o.report_path.empty()) {
    throw ConfigError("detect needs exactly one of --data or --report");
  }
  if (!o.fit.data_path.empty()) {
    const Dataset data = read_dataset(o.fit.data_path);
    const NoiseModel mode = parse_noise_model(o.fit.mode);
    auto fit = run_fit(data, o.fit, mode);
    ReportInputs in;
    in.config = fit_config_json(o.fit, mode);
    in.mode = mode;
    in.params = fit.params;
    in.sigma = fit.sigma;
    in.trace = fit.trace;
    in.threshold = o.fit.threshold;
    in.recall_levels = o.fit.recall_levels;
    write_text(o.fit.out_path, build_report(data, in).dump(2) + "\n", out);
    return kSuccess;
  }

  std::ifstream f(o.report_path);
  if (!f) {
    throw IoError("cannot open '" + o.report_path + "'");
  }
  json src;
  try {
    src = json::parse(f);
  } catch (const json::exception& e) {
    throw IoError("'" + o.report_path + "' is not a valid report: " + e.what());
  }
  try {
    const auto& labels = src.at("labels");
    const auto n = static_cast<Eigen::Index>(labels.size());
    if (n == 0) {
      throw EmptyDatasetError("report has no labels");
    }
    Eigen::VectorXd sigma(n);
    Eigen::VectorXd eps(n);
    std::vector<bool> corrupted(static_cast<std::size_t>(n));
    bool has_truth = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& l = labels[static_cast<std::size_t>(i)];
      sigma[i] = l.at("sigma").get<double>();
      if (l.contains("epsilon") && l.contains("corrupted")) {
        eps[i] = l.at("epsilon").get<double>();
        corrupted[static_cast<std::size_t>(i)] = l.at("corrupted").get<bool>();
      } else {
        has_truth = false;
      }
    }
    std::optional<CorruptionTruth> truth;
    if (has_truth) {
      truth = CorruptionTruth{eps, corrupted};
    }
    // Only sigma and truth enter the metrics; inputs are placeholders.
    const Dataset stub(Eigen::MatrixXd::Zero(n, 1), Eigen::VectorXd::Zero(n), truth);
    ReportInputs in;
    in.config = json{{"report", o.report_path}, {"recall_levels", o.fit.recall_levels}};
    in.config["threshold"] = o.fit.threshold ? json(*o.fit.threshold) : json("median+3*MAD");
    in.mode = parse_noise_model(src.at("noise_model").get<std::string>());
    in.params = KernelParams{src.at("kernel").at("signal_variance").get<double>(),
                             src.at("kernel").at("length_scale").get<double>()};
    in.sigma = NoiseVector(sigma);
    in.threshold = o.fit.threshold;
    in.recall_levels = o.fit.recall_levels;
    json doc = build_report(stub, in);
    if (src.contains("trace")) {
      doc["trace"] = src["trace"];
    }
    write_text(o.fit.out_path, doc.dump(2) + "\n", out);
  } catch (const json::exception& e) {
    throw IoError("'" + o.report_path + "' is not a valid report: " + e.what());
  }
  return kSuccess;
}

struct GenOptions {
  bool example1 = false;
  bool grid = false;
  bool gp = false;
  bool goldberg = false;
  bool le = false;
  std::optional<std::size_t> n;
  std::size_t dim = 1;
  std::optional<double> rate;
  std::optional<double> level;
  std::optional<std::size_t> n_corrupt;
  std::optional<double> base_noise;
  std::optional<double> signal_variance;
  std::optional<double> length_scale;
  std::uint64_t seed = 0;
  std::string out_path;
};

Dataset generate(const GenOptions& o) {
  const int chosen = int(o.example1) + int(o.grid) + int(o.gp) + int(o.goldberg) + int(o.le);
  if (chosen != 1) {
    throw ConfigError("choose exactly one of --example1, --grid, --gp, --goldberg, --le");
  }
  if (o.example1) {
    if (o.n || o.rate || o.level || o.n_corrupt || o.base_noise) {
      throw ConfigError("--example1 has a fixed size and contamination; "
                        "--n/--rate/--level/--n-corrupt/--base-noise do not apply");
    }
    return gen_example1(o.seed);
  }
  if (o.goldberg || o.le) {
    if (o.rate || o.level || o.base_noise) {
      throw ConfigError("--goldberg/--le corrupt a fixed count; use --n-corrupt");
    }
    const auto family = o.goldberg ? HeteroscedasticFamily::goldberg : HeteroscedasticFamily::le;
    const std::size_t n = o.n.value_or(o.goldberg ? 30 : 50);
    const std::size_t k = o.n_corrupt.value_or(o.goldberg ? 20 : 33);
    return gen_heteroscedastic(family, n, k, default_heteroscedastic_params(family), o.seed);
  }
  if (o.n_corrupt) {
    throw ConfigError("--n-corrupt applies to --goldberg/--le; use --rate/--level");
  }
  if (o.level && !o.rate) {
    throw ConfigError("--level requires --rate");
  }
  Dataset clean = o.grid ? gen_grid(o.n.value_or(24), o.base_noise.value_or(0.05), o.seed)
                         : gen_gp(o.n.value_or(200), o.dim,
                                  KernelParams{o.signal_variance.value_or(1.0),
                                               o.length_scale.value_or(0.3)},
                                  o.base_noise.value_or(0.05), o.seed);
  if (!o.rate) {
    return clean;
  }
  NoiseInjectionSpec spec{*o.rate, o.level.value_or(1.0), 0.0, injection_seed(o.seed)};
  return inject_noise(clean, spec);
}

int cmd_gen(const GenOptions& o, std::ostream& out) {
  if (o.out_path.empty()) {
    throw ConfigError("--out is required");
  }
  const Dataset data = generate(o);
  write_dataset(data, o.out_path);
  const auto corrupted = data.truth() ? data.truth()->corrupted_count() : 0;
  out << "wrote " << o.out_path << ": N=" << data.size() << " d=" << data.dim()
      << " corrupted=" << corrupted << " seed=" << o.seed << '\n';
  return kSuccess;
}

struct BenchmarkOptions {
  std::vector<double> rates{0.1, 0.3, 0.5};
  std::vector<double> levels{0.5, 1.0};
  std::string data_path;
  std::string generator = "gp";
  std::size_t n = 200;
  std::size_t dim = 1;
  double base_noise = 0.05;
  std::optional<double> signal_variance;
  std::optional<double> length_scale;
  int folds = 5;
  std::vector<double> recall_levels{0.70, 0.95};
  MultUpdateConfig mult;
  std::uint64_t seed = 0;
  std::string out_path;
};

std::string recall_column(double level) {
  return "p" + format_double(std::round(level * 1000.0) / 10.0);
}

int cmd_benchmark(const BenchmarkOptions& o, std::ostream& out) {
  if (o.rates.empty() || o.levels.empty()) {
    throw ConfigError("benchmark needs at least one rate and one level");
  }
  Dataset clean;
  KernelParams params;
  if (!o.data_path.empty()) {
    clean = read_dataset(o.data_path);
    params = heuristic_kernel_params(clean);
  } else if (o.generator == "gp") {
    params = KernelParams{o.signal_variance.value_or(1.0), o.length_scale.value_or(0.3)};
    clean = gen_gp(o.n, o.dim, params, o.base_noise, o.seed);
  } else if (o.generator == "grid") {
    clean = gen_grid(o.n, o.base_noise, o.seed);
    params = heuristic_kernel_params(clean);
  } else {
    throw ConfigError("unknown benchmark generator '" + o.generator + "'");
  }
  if (o.signal_variance) {
    params.signal_variance = *o.signal_variance;
  }
  if (o.length_scale) {
    params.length_scale = *o.length_scale;
  }
  params.validate();
  for (double r : o.rates) {
    NoiseInjectionSpec{r, 0.0, 0.0, 0}.validate();
  }

  std::ostringstream table;
  table << "rate,level,r2,auc";
  for (double r : o.recall_levels) {
    table << ',' << recall_column(r);
  }
  table << ",mae_plain,mae_basic,mae_full,error\n";

  std::uint64_t cell = 0;
  for (double rate : o.rates) {
    for (double level : o.levels) {
      ++cell;
      std::optional<double> r2;
      std::optional<double> auc;
      std::map<double, double> pr;
      std::optional<double> mae[3];
      std::string error;
      try {
        NoiseInjectionSpec spec{rate, level, 0.0, o.seed + 1000 * cell};
        const Dataset noisy = inject_noise(clean, spec);
        const auto& truth = *noisy.truth();
        const auto sigma = optimize_sigma(params, noisy, o.mult).sigma;
        try {
          auc = roc_auc(sigma.values(), truth.corrupted);
          pr = precision_at_recall(sigma.values(), truth.corrupted, o.recall_levels);
        } catch (const UndefinedMetricError&) {
        }
        try {
          r2 = r2_noise(sigma, truth.epsilon.array().square().matrix());
        } catch (const UndefinedMetricError&) {
        }
        const NoiseModel modes[] = {NoiseModel::plain, NoiseModel::basic, NoiseModel::full};
        for (int m = 0; m < 3; ++m) {
          mae[m] = cv_mae(noisy, params, modes[m], o.folds, o.seed, o.mult);
        }
      } catch (const Error& e) {
        error = e.what();
        std::replace(error.begin(), error.end(), ',', ';');
        std::replace(error.begin(), error.end(), '\n', ' ');
      }
      table << format_double(rate) << ',' << format_double(level) << ',' << csv_cell(r2) << ','
            << csv_cell(auc);
      for (double r : o.recall_levels) {
        const auto it = pr.find(r);
        table << ',' << (it == pr.end() ? std::string("NA") : format_double(it->second));
      }
      table << ',' << csv_cell(mae[0]) << ',' << csv_cell(mae[1]) << ',' << csv_cell(mae[2])
            << ',' << error << '\n';
    }
  }
  write_text(o.out_path, table.str(), out);
  return kSuccess;
}

struct CompareOptions {
  std::string data_path;
  std::string out_path;
  std::optional<double> signal_variance;
  std::optional<double> length_scale;
  int max_iters = 10000;
  double step_size = 1.0;
  std::optional<double> sigma_init;
};

int cmd_compare(const CompareOptions& o, std::ostream& out, std::ostream& err) {
  require_data(o.data_path);
  const Dataset data = read_dataset(o.data_path);
  KernelParams params = heuristic_kernel_params(data);
  if (o.signal_variance) {
    params.signal_variance = *o.signal_variance;
  }
  if (o.length_scale) {
    params.length_scale = *o.length_scale;
  }
  params.validate();
  MultUpdateConfig mult;
  mult.max_iters = o.max_iters;
  if (o.sigma_init) {
    mult.sigma_init = *o.sigma_init;
  }
  ProjectedGradientConfig pg;
  pg.base = mult;
  pg.step_size = o.step_size;

  const Eigen::MatrixXd K = build_kernel_matrix(params, data.X());
  const auto mu = optimize_sigma(K, data.y(), mult);
  const auto pgr = projected_gradient_baseline(K, data.y(), pg);

  std::ostringstream csv;
  csv << "optimizer,iter,nll,function_evals\n";
  auto emit = [&](const char* name, const OptTrace& t) {
    for (std::size_t i = 0; i < t.nll_per_iter.size(); ++i) {
      csv << name << ',' << i << ',' << format_double(t.nll_per_iter[i]) << ','
          << t.evals_per_iter[i] << '\n';
    }
  };
  emit("multiplicative", mu.trace);
  emit("projected_gradient", pgr.trace);
  write_text(o.out_path, csv.str(), out);
  err << "multiplicative: iters=" << mu.trace.iters << " evals=" << mu.trace.function_evals
      << " nll=" << format_double(mu.trace.final_nll()) << '\n'
      << "projected_gradient: iters=" << pgr.trace.iters << " evals=" << pgr.trace.function_evals
      << " nll=" << format_double(pgr.trace.final_nll()) << '\n';
  return mu.trace.converged && pgr.trace.converged ? kSuccess : kNotConverged;
}

} // namespace

json build_report(const Dataset& data, const ReportInputs& in) {
  const Eigen::Index n = data.size();
  if (in.sigma.size() != n) {
    throw InvalidInputError("noise vector does not match dataset size");
  }
  const double threshold = in.threshold ? *in.threshold : default_threshold(in.sigma);
  const auto det = flag_noisy(in.sigma, threshold);
  const auto& truth = data.truth();

  json doc;
  doc["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
  doc["config"] = in.config;
  doc["noise_model"] = std::string(to_string(in.mode));
  doc["kernel"] = {{"family", "rbf"},
                   {"signal_variance", in.params.signal_variance},
                   {"length_scale", in.params.length_scale}};
  doc["threshold"] = threshold;
  doc["n_flagged"] = std::count(det.flags.begin(), det.flags.end(), true);

  json labels = json::array();
  for (Eigen::Index i = 0; i < n; ++i) {
    json l{{"index", i},
           {"sigma", in.sigma[i]},
           {"score", det.scores[i]},
           {"flag", static_cast<bool>(det.flags[static_cast<std::size_t>(i)])}};
    if (truth) {
      l["epsilon"] = truth->epsilon[i];
      l["corrupted"] = static_cast<bool>(truth->corrupted[static_cast<std::size_t>(i)]);
    }
    labels.push_back(std::move(l));
  }
  doc["labels"] = std::move(labels);

  if (truth) {
    json metrics;
    json errors = json::object();
    try {
      metrics["auc"] = roc_auc(det.scores, truth->corrupted);
    } catch (const Error& e) {
      metrics["auc"] = nullptr;
      errors["auc"] = e.what();
    }
    try {
      json pr = json::object();
      for (const auto& [level, precision] :
           precision_at_recall(det.scores, truth->corrupted, in.recall_levels)) {
        pr[recall_key(level)] = precision;
      }
      metrics["precision_at_recall"] = std::move(pr);
    } catch (const Error& e) {
      metrics["precision_at_recall"] = nullptr;
      errors["precision_at_recall"] = e.what();
    }
    try {
      metrics["r2_noise"] = r2_noise(in.sigma, truth->epsilon.array().square().matrix());
    } catch (const Error& e) {
      metrics["r2_noise"] = nullptr;
      errors["r2_noise"] = e.what();
    }
    metrics["r2_target"] = "epsilon^2 (squared injected perturbation)";
    if (!errors.empty()) {
      metrics["errors"] = std::move(errors);
    }
    doc["metrics"] = std::move(metrics);
  }
  if (in.trace) {
    doc["trace"] = trace_json(*in.trace);
  }
  return doc;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Detect and quantify noisy regression labels with a heteroscedastic GP", kToolName};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolName) + " " + kToolVersion);

  // CLI11 only reads config files attached to the top-level app, so each
  // subcommand records its path and the file is merged after parsing.
  std::map<CLI::App*, std::string> config_paths;
  auto with_config = [&config_paths](CLI::App* sub) {
    sub->add_option("--config", config_paths[sub],
                    "flat key=value file; command-line flags take precedence");
    return sub;
  };

  GenOptions gen;
  auto* gen_cmd = with_config(app.add_subcommand("gen", "generate a synthetic dataset"));
  gen_cmd->add_flag("--example1", gen.example1, "24-point example with 10 contaminated labels");
  gen_cmd->add_flag("--grid", gen.grid, "example function on a uniform grid");
  gen_cmd->add_flag("--gp", gen.gp, "draw from an RBF Gaussian process");
  gen_cmd->add_flag("--goldberg", gen.goldberg, "Goldberg-style heteroscedastic curve");
  gen_cmd->add_flag("--le", gen.le, "Le-style heteroscedastic curve");
  gen_cmd->add_option("--n", gen.n, "sample count");
  gen_cmd->add_option("--dim", gen.dim, "input dimension (--gp)");
  gen_cmd->add_option("--rate", gen.rate, "fraction of labels to corrupt");
  gen_cmd->add_option("--level", gen.level, "corruption std relative to std(y) (default 1)");
  gen_cmd->add_option("--n-corrupt", gen.n_corrupt, "corrupted count (--goldberg/--le)");
  gen_cmd->add_option("--base-noise", gen.base_noise, "measurement noise std on every label");
  add_kernel_options(gen_cmd, gen.signal_variance, gen.length_scale);
  gen_cmd->add_option("--seed", gen.seed, "seed")->envname(kSeedEnvVar);
  gen_cmd->add_option("--out", gen.out_path, "output CSV (required)");

  FitOptions fit;
  auto* fit_cmd = with_config(app.add_subcommand("fit", "learn per-label noise variances"));
  add_fit_options(fit_cmd, fit);

  DetectOptions detect;
  auto* det_cmd = with_config(app.add_subcommand("detect", "flag noisy labels and score them"));
  det_cmd->add_option("--data", detect.fit.data_path, "dataset CSV to fit in-line");
  det_cmd->add_option("--report", detect.report_path, "existing fit report");
  det_cmd->add_option("--out", detect.fit.out_path, "report path ('-' for stdout)");
  det_cmd->add_option("--mode", detect.fit.mode, "noise model for in-line fits")
      ->check(CLI::IsMember({"plain", "basic", "full"}));
  det_cmd->add_flag("--joint", detect.fit.joint, "in-line fit also optimizes the kernel");
  add_kernel_options(det_cmd, detect.fit.signal_variance, detect.fit.length_scale);
  det_cmd->add_option("--lambda", detect.fit.mult.penalty_lambda, "l_p penalty weight");
  det_cmd->add_option("--p", detect.fit.mult.penalty_p, "l_p penalty exponent");
  det_cmd->add_option("--max-iters", detect.fit.mult.max_iters, "iteration cap");
  det_cmd->add_option("--threshold", detect.fit.threshold, "flag threshold");
  det_cmd->add_option("--recall-levels", detect.fit.recall_levels, "precision-at-recall levels")
      ->delimiter(',');
  det_cmd->add_option("--seed", detect.fit.seed, "seed")->envname(kSeedEnvVar);

  BenchmarkOptions bench;
  auto* bench_cmd =
      with_config(app.add_subcommand("benchmark", "noise rate x level grid, one CSV row per cell"));
  bench_cmd->add_option("--rates", bench.rates, "noise rates")->delimiter(',');
  bench_cmd->add_option("--levels", bench.levels, "noise levels")->delimiter(',');
  bench_cmd->add_option("--data", bench.data_path, "clean base dataset CSV");
  bench_cmd->add_option("--generator", bench.generator, "base generator when --data is absent")
      ->check(CLI::IsMember({"gp", "grid"}));
  bench_cmd->add_option("--n", bench.n, "generated sample count");
  bench_cmd->add_option("--dim", bench.dim, "generated input dimension");
  bench_cmd->add_option("--base-noise", bench.base_noise, "generated measurement noise std");
  add_kernel_options(bench_cmd, bench.signal_variance, bench.length_scale);
  bench_cmd->add_option("--folds", bench.folds, "cross-validation folds");
  bench_cmd->add_option("--recall-levels", bench.recall_levels, "precision-at-recall levels")
      ->delimiter(',');
  bench_cmd->add_option("--max-iters", bench.mult.max_iters, "iteration cap");
  bench_cmd->add_option("--seed", bench.seed, "seed")->envname(kSeedEnvVar);
  bench_cmd->add_option("--out", bench.out_path, "output CSV ('-' for stdout)");

  CompareOptions cmp;
  auto* cmp_cmd = with_config(app.add_subcommand(
      "compare-optimizers", "multiplicative vs projected-gradient convergence traces"));
  cmp_cmd->add_option("--data", cmp.data_path, "dataset CSV (required)");
  cmp_cmd->add_option("--out", cmp.out_path, "output CSV ('-' for stdout)");
  add_kernel_options(cmp_cmd, cmp.signal_variance, cmp.length_scale);
  cmp_cmd->add_option("--max-iters", cmp.max_iters, "iteration cap for both optimizers");
  cmp_cmd->add_option("--step-size", cmp.step_size, "initial projected-gradient step");
  cmp_cmd->add_option("--sigma-init", cmp.sigma_init, "shared initial noise variance");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::CallForVersion&) {
    out << kToolName << ' ' << kToolVersion << '\n';
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  }

  try {
    for (auto& [sub, path] : config_paths) {
      if (*sub && !path.empty()) {
        apply_config_file(*sub, path);
      }
    }
    if (*gen_cmd) {
      return cmd_gen(gen, out);
    }
    if (*fit_cmd) {
      return cmd_fit(fit, out);
    }
    if (*det_cmd) {
      return cmd_detect(detect, out);
    }
    if (*bench_cmd) {
      return cmd_benchmark(bench, out);
    }
    if (*cmp_cmd) {
      return cmd_compare(cmp, out, err);
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const InvalidInputError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const EmptyDatasetError& e) {
    err << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kNumericalError;
  }
  return kUsageError;
}

} // namespace labelnoise::cli
