#include "fairflda/cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "fairflda/bench.hpp"
#include "fairflda/errors.hpp"
#include "fairflda/io.hpp"

namespace fairflda {

namespace {

namespace fs = std::filesystem;

// Thrown for infeasible calibration after all outputs were written.
struct InfeasibleRun {};

class RunManifest {
 public:
  RunManifest(const CLI::App& sub) : start_(std::chrono::steady_clock::now()) {
    m_.set("command", sub.get_name());
    m_.set("version", kVersion);
    for (const CLI::Option* opt : sub.get_options()) {
      const std::string name = opt->get_single_name();
      if (name == "help" || name == "config") continue;
      std::string value;
      if (opt->count() > 0) {
        for (const auto& r : opt->results()) value += (value.empty() ? "" : " ") + r;
      } else {
        value = opt->get_default_str();
        if (value.empty()) continue;
      }
      m_.set("option." + name, value);
    }
  }

  Manifest& entries() { return m_; }

  void write(const fs::path& path) {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    m_.set("wall_time_seconds", secs);
    std::ofstream os(path);
    if (!os) throw Error("cannot write manifest '" + path.string() + "'");
    os << m_.to_text();
  }

 private:
  Manifest m_;
  std::chrono::steady_clock::time_point start_;
};

void add_all(Manifest& dst, const Manifest& src, const std::string& prefix) {
  for (const auto& [k, v] : src.entries()) dst.set(prefix + k, v);
}

// Required options may come from a config file, so presence is checked after it is applied.
void require_option(const std::string& value, const char* name) {
  if (value.empty()) throw ArgumentError(std::string("--") + name + " is required");
}

fs::path manifest_path(const fs::path& out) { return fs::path(out.string() + ".manifest"); }

// Applies key=value entries to options that were not given on the command line.
void apply_config(CLI::App& sub, const std::string& path) {
  if (path.empty()) return;
  for (const auto& [key, value] : read_config(fs::path(path))) {
    CLI::Option* opt = sub.get_option_no_throw("--" + key);
    if (!opt || key == "config") throw ArgumentError("unknown configuration key '" + key + "'");
    if (opt->count() > 0) continue;
    if (opt->get_type_size() == 0) {
      if (value == "true" || value == "1") opt->add_result("true");
      else if (value == "false" || value == "0") continue;
      else throw ArgumentError("flag '" + key + "' takes true or false");
    } else {
      std::istringstream words(value);
      for (std::string w; words >> w;) opt->add_result(w);
    }
    opt->run_callback();
  }
}

std::vector<double> parse_deltas(const std::vector<std::string>& texts) {
  std::vector<double> out;
  for (const auto& t : texts) {
    const double d = parse_double(t);
    if (!(d >= 0.0)) throw ArgumentError("delta must be nonnegative or inf");
    out.push_back(d);
  }
  return out;
}

struct SimulateOpts {
  std::string preset = "main-beta1.5";
  std::optional<double> beta;
  std::size_t n = 2000;
  std::optional<double> p_a1, p_y1_a0, p_y1_a1;
  std::string family;
  std::size_t m = 513;
  std::uint64_t seed = 0;
  std::uint64_t replication = 0;
  std::string stream = "train";
  std::string out;
  std::string config;
};

struct FitOpts {
  std::string data, out, config;
  std::string disparity = "do";
  std::string delta = "0.05";
  std::string variant = "fair";
  double rho = 0.05;
  std::optional<double> kappa;
  std::optional<std::size_t> J;
  bool cv = false;
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  bool no_cross_fit = false;
};

struct ApplyOpts {
  std::string model, data, out, config;
};

struct ReproduceOpts {
  std::string figure, out, config;
  std::size_t reps = 100;
  std::size_t n = 2000;
  std::uint64_t seed = 0;
  std::vector<std::string> disparity{"do"};
  std::vector<std::string> delta;
  std::vector<std::string> methods{"flda", "fair", "fairc", "oracle"};
  double rho = 0.05;
  std::optional<double> kappa;
  std::optional<std::size_t> J;
  std::size_t threads = 0;
};

struct TuneOpts {
  std::string data, out, config;
  std::string disparity = "do";
  std::string delta = "0.05";
  double rho = 0.05;
  std::size_t splits = 100;
  std::size_t grid_points = 21;
  std::optional<std::size_t> J;
  std::uint64_t seed = 0;
};

// "main-sim" or any preset name.
ScenarioConfig figure_scenario(const std::string& figure, std::size_t n) {
  return preset(figure == "main-sim" ? "main-beta1.5" : figure, n);
}

void cmd_simulate(CLI::App& sub, const SimulateOpts& o, std::ostream& out) {
  require_option(o.out, "out");
  RunManifest manifest(sub);
  ScenarioConfig cfg = preset(o.preset);
  cfg.n_train = o.n;
  if (o.beta) cfg.beta = *o.beta;
  if (o.p_a1) cfg.p_a1 = *o.p_a1;
  if (o.p_y1_a0) cfg.p_y1_a0 = *o.p_y1_a0;
  if (o.p_y1_a1) cfg.p_y1_a1 = *o.p_y1_a1;
  if (o.family == "uniform") cfg.family = ScoreFamily::Uniform;
  else if (o.family == "gaussian") cfg.family = ScoreFamily::Gaussian;
  else if (!o.family.empty()) throw ArgumentError("family must be gaussian or uniform");
  cfg.m = o.m;
  cfg.seed = o.seed;
  if (o.stream != "train" && o.stream != "test") throw ArgumentError("stream must be train or test");
  const Stream stream = o.stream == "train" ? Stream::Train : Stream::Test;
  const Dataset data = generate(cfg, scenario_grid(cfg), o.n, o.replication, stream);
  write_dataset_csv(fs::path(o.out), data);
  auto& m = manifest.entries();
  m.set("scenario", cfg.name);
  m.set("beta", cfg.beta);
  m.set("family", std::string(to_string(cfg.family)));
  m.set("rows", std::to_string(data.size()));
  manifest.write(manifest_path(o.out));
  out << "wrote " << data.size() << " curves to " << o.out << '\n';
}

void cmd_fit(CLI::App& sub, const FitOpts& o, std::ostream& out) {
  require_option(o.data, "data");
  require_option(o.out, "out");
  RunManifest manifest(sub);
  const Dataset data = read_dataset_csv(fs::path(o.data));
  FitConfig cfg;
  cfg.disparity = parse_disparity(o.disparity);
  cfg.delta = parse_deltas({o.delta}).front();
  cfg.variant = parse_variant(o.variant);
  if (std::isinf(cfg.delta)) cfg.variant = Variant::FLDA;
  cfg.rho = o.rho;
  cfg.kappa_override = o.kappa;
  if (o.J && o.cv) throw ArgumentError("--J and --cv are mutually exclusive");
  cfg.J = o.J;
  cfg.cv_folds = o.folds;
  cfg.seed = o.seed;
  cfg.cross_fit = !o.no_cross_fit;
  const FittedFairClassifier clf = fit(data, cfg);
  save_model(fs::path(o.out), clf);
  add_all(manifest.entries(), clf.manifest(), "fit.");
  manifest.write(manifest_path(o.out));
  out << "J = " << clf.J();
  for (std::size_t h = 0; h < clf.halves().size(); ++h)
    out << ", tau_" << h + 1 << " = " << format_double(clf.halves()[h].tau());
  out << (clf.feasible() ? "" : " (infeasible: closest threshold used)") << '\n';
  if (!clf.feasible()) throw InfeasibleRun{};
}

void cmd_predict(CLI::App& sub, const ApplyOpts& o, std::ostream& out) {
  require_option(o.model, "model");
  require_option(o.data, "data");
  require_option(o.out, "out");
  RunManifest manifest(sub);
  const FittedFairClassifier clf = load_model(fs::path(o.model));
  const Dataset data = read_dataset_csv(fs::path(o.data));
  const Vector f = clf.predict(data);
  std::ofstream os(o.out);
  if (!os) throw Error("cannot write '" + o.out + "'");
  os << "row,a,prediction\n";
  for (std::size_t i = 0; i < data.size(); ++i)
    os << i << ',' << data.a()[i] << ',' << format_double(f(static_cast<Eigen::Index>(i))) << '\n';
  manifest.entries().set("rows", std::to_string(data.size()));
  add_all(manifest.entries(), clf.manifest(), "model.");
  manifest.write(manifest_path(o.out));
  out << "wrote " << data.size() << " predictions to " << o.out << '\n';
}

void cmd_evaluate(CLI::App& sub, const ApplyOpts& o, std::ostream& out) {
  require_option(o.model, "model");
  require_option(o.data, "data");
  require_option(o.out, "out");
  RunManifest manifest(sub);
  const FittedFairClassifier clf = load_model(fs::path(o.model));
  const Dataset data = read_dataset_csv(fs::path(o.data));
  const Vector f = clf.predict(data);
  auto disparity = [&](DisparityKind kind) {
    try {
      return format_double(test_disparity(f, data, kind));
    } catch (const DegenerateCellError&) {
      return std::string("nan");
    }
  };
  std::ostringstream row;
  row << data.size() << ',' << format_double(test_error(f, data)) << ',' << disparity(DisparityKind::DO) << ','
      << disparity(DisparityKind::PD) << ',' << disparity(DisparityKind::DD) << '\n';
  std::ofstream os(o.out);
  if (!os) throw Error("cannot write '" + o.out + "'");
  os << "n,error,DO,PD,DD\n" << row.str();
  add_all(manifest.entries(), clf.manifest(), "model.");
  manifest.write(manifest_path(o.out));
  out << "n,error,DO,PD,DD\n" << row.str();
}

void cmd_reproduce(CLI::App& sub, const ReproduceOpts& o, std::ostream& out) {
  require_option(o.figure, "figure");
  require_option(o.out, "out");
  RunManifest manifest(sub);
  ExperimentConfig cfg;
  cfg.scenario = figure_scenario(o.figure, o.n);
  cfg.replications = o.reps;
  cfg.seed = o.seed;
  cfg.kinds.clear();
  for (const auto& d : o.disparity) cfg.kinds.push_back(parse_disparity(d));
  if (!o.delta.empty()) cfg.deltas = parse_deltas(o.delta);
  cfg.methods.clear();
  for (const auto& m : o.methods) cfg.methods.push_back(parse_method(m));
  cfg.rho = o.rho;
  cfg.kappa = o.kappa;
  cfg.J = o.J;
  cfg.threads = o.threads;
  const EvalReport report = run_experiment(cfg);

  const fs::path dir(o.out);
  fs::create_directories(dir);
  for (const std::string table : {"error", "median_abs_disparity", "q95_abs_disparity"}) {
    std::ofstream os(dir / (table + ".csv"));
    write_summary_csv(os, report, table);
  }
  {
    std::ofstream os(dir / "summary.csv");
    write_summary_csv(os, report, "all");
  }
  {
    std::ofstream os(dir / "raw.csv");
    write_raw_csv(os, report);
  }
  manifest.entries().set("figure", o.figure);
  add_all(manifest.entries(), report.manifest, "");
  manifest.write(dir / "manifest.txt");
  out << "method,delta,statistic,value\n";
  for (const auto& s : report.summary)
    out << to_string(s.method) << ',' << format_double(s.delta) << ",median_abs_" << to_string(s.kind) << ','
        << format_double(s.median_abs_disparity) << '\n';
  out << "tables written to " << dir.string() << '\n';
}

void cmd_tune(CLI::App& sub, const TuneOpts& o, std::ostream& out) {
  require_option(o.data, "data");
  require_option(o.out, "out");
  RunManifest manifest(sub);
  const Dataset data = read_dataset_csv(fs::path(o.data));
  TuneConfig cfg;
  cfg.kind = parse_disparity(o.disparity);
  cfg.delta = parse_deltas({o.delta}).front();
  cfg.rho = o.rho;
  cfg.n_splits = o.splits;
  cfg.grid_points = o.grid_points;
  cfg.J = o.J;
  cfg.seed = o.seed;
  const KappaTuning t = tune_kappa(data, cfg);
  std::ofstream os(o.out);
  if (!os) throw Error("cannot write '" + o.out + "'");
  os << "kappa,quantile\n";
  for (std::size_t i = 0; i < t.grid.size(); ++i)
    os << format_double(t.grid[i]) << ',' << format_double(t.quantiles[i]) << '\n';
  auto& m = manifest.entries();
  m.set("J", std::to_string(t.J));
  m.set("kappa", t.kappa);
  m.set("found", t.found ? "true" : "false");
  manifest.write(manifest_path(o.out));
  out << "kappa = " << format_double(t.kappa) << (t.found ? "" : " (no candidate met delta)") << '\n';
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fairness-aware functional linear discriminant analysis", "fairflda"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  SimulateOpts sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a simulated dataset as CSV");
  simulate->add_option("--preset", sim.preset, "Scenario preset")->capture_default_str();
  simulate->add_option("--beta", sim.beta, "Mean decay exponent (overrides the preset)");
  simulate->add_option("--n", sim.n, "Number of curves")->capture_default_str();
  simulate->add_option("--p-a1", sim.p_a1, "P(A=1)");
  simulate->add_option("--p-y1-a0", sim.p_y1_a0, "P(Y=1|A=0)");
  simulate->add_option("--p-y1-a1", sim.p_y1_a1, "P(Y=1|A=1)");
  simulate->add_option("--family", sim.family, "Score family: gaussian or uniform");
  simulate->add_option("--m", sim.m, "Grid size")->capture_default_str();
  simulate->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
  simulate->add_option("--replication", sim.replication, "Replication index")->capture_default_str();
  simulate->add_option("--stream", sim.stream, "train or test")->capture_default_str();
  simulate->add_option("--out", sim.out, "Output CSV");
  simulate->add_option("--config", sim.config, "key = value file; flags win");

  FitOpts fo;
  auto* fitc = app.add_subcommand("fit", "Fit a classifier and write the model");
  fitc->add_option("--data", fo.data, "Training CSV");
  fitc->add_option("--out", fo.out, "Model file");
  fitc->add_option("--disparity", fo.disparity, "do, pd or dd")->capture_default_str();
  fitc->add_option("--delta", fo.delta, "Disparity budget or inf")->capture_default_str();
  fitc->add_option("--variant", fo.variant, "flda, fair or fairc")->capture_default_str();
  fitc->add_option("--rho", fo.rho, "Confidence level for fairc")->capture_default_str();
  fitc->add_option("--kappa", fo.kappa, "Manual calibration constant for fairc");
  fitc->add_option("--J", fo.J, "Fixed truncation level");
  fitc->add_flag("--cv", fo.cv, "Select the truncation level by cross-validation (default)");
  fitc->add_option("--folds", fo.folds, "Cross-validation folds")->capture_default_str();
  fitc->add_option("--seed", fo.seed, "Split and fold seed")->capture_default_str();
  fitc->add_flag("--no-cross-fit", fo.no_cross_fit, "Use a single estimation/calibration split");
  fitc->add_option("--config", fo.config, "key = value file; flags win");

  ApplyOpts po;
  auto* predictc = app.add_subcommand("predict", "Write decision values for a dataset");
  predictc->add_option("--model", po.model, "Model file");
  predictc->add_option("--data", po.data, "Dataset CSV");
  predictc->add_option("--out", po.out, "Output CSV");
  predictc->add_option("--config", po.config, "key = value file; flags win");

  ApplyOpts eo;
  auto* evaluatec = app.add_subcommand("evaluate", "Error and disparities of a model on a labelled dataset");
  evaluatec->add_option("--model", eo.model, "Model file");
  evaluatec->add_option("--data", eo.data, "Dataset CSV");
  evaluatec->add_option("--out", eo.out, "Metrics CSV");
  evaluatec->add_option("--config", eo.config, "key = value file; flags win");

  ReproduceOpts ro;
  auto* reproduce = app.add_subcommand("reproduce", "Run a replicated simulation and write summary tables");
  reproduce->add_option("--figure", ro.figure, "main-sim or a preset name such as perfect-I-beta0.5");
  reproduce->add_option("--out", ro.out, "Output directory");
  reproduce->add_option("--reps", ro.reps, "Replications")->capture_default_str();
  reproduce->add_option("--n", ro.n, "Training sample size (1000, 2000 or 5000)")->capture_default_str();
  reproduce->add_option("--seed", ro.seed, "Random seed")->capture_default_str();
  reproduce->add_option("--disparity", ro.disparity, "do, pd or dd (repeatable)")->capture_default_str();
  reproduce->add_option("--delta", ro.delta, "Budget (repeatable)");
  reproduce->add_option("--method", ro.methods, "flda, fair, fairc or oracle (repeatable)")->capture_default_str();
  reproduce->add_option("--rho", ro.rho, "Confidence level for fairc")->capture_default_str();
  reproduce->add_option("--kappa", ro.kappa, "Manual calibration constant for fairc");
  reproduce->add_option("--J", ro.J, "Fixed truncation level instead of cross-validation");
  reproduce->add_option("--threads", ro.threads, "Worker threads (0: all cores)")->capture_default_str();
  reproduce->add_option("--config", ro.config, "key = value file; flags win");

  TuneOpts to;
  auto* tune = app.add_subcommand("tune-kappa", "Pick the calibration constant by repeated splitting");
  tune->add_option("--data", to.data, "Dataset CSV");
  tune->add_option("--out", to.out, "Output CSV of kappa and quantile");
  tune->add_option("--disparity", to.disparity, "do, pd or dd")->capture_default_str();
  tune->add_option("--delta", to.delta, "Disparity budget")->capture_default_str();
  tune->add_option("--rho", to.rho, "Quantile level is 1 - rho")->capture_default_str();
  tune->add_option("--splits", to.splits, "Random splits")->capture_default_str();
  tune->add_option("--grid-points", to.grid_points, "Candidates in [0, delta]")->capture_default_str();
  tune->add_option("--J", to.J, "Fixed truncation level");
  tune->add_option("--seed", to.seed, "Random seed")->capture_default_str();
  tune->add_option("--config", to.config, "key = value file; flags win");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (simulate->parsed()) {
      apply_config(*simulate, sim.config);
      cmd_simulate(*simulate, sim, out);
    } else if (fitc->parsed()) {
      apply_config(*fitc, fo.config);
      cmd_fit(*fitc, fo, out);
    } else if (predictc->parsed()) {
      apply_config(*predictc, po.config);
      cmd_predict(*predictc, po, out);
    } else if (evaluatec->parsed()) {
      apply_config(*evaluatec, eo.config);
      cmd_evaluate(*evaluatec, eo, out);
    } else if (reproduce->parsed()) {
      apply_config(*reproduce, ro.config);
      cmd_reproduce(*reproduce, ro, out);
    } else if (tune->parsed()) {
      apply_config(*tune, to.config);
      cmd_tune(*tune, to, out);
    }
  } catch (const InfeasibleRun&) {
    err << "warning: calibration could not meet the disparity budget\n";
    return kExitInfeasible;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace fairflda
