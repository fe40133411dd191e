#include "fairflda/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>

#include "fairflda/errors.hpp"
#include "fairflda/io.hpp"
#include "fairflda/rng.hpp"

namespace fairflda {

std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::FLDA: return "FLDA";
    case Method::FairFLDA: return "Fair-FLDA";
    case Method::FairFLDAc: return "Fair-FLDA_c";
    case Method::Oracle: return "Oracle";
  }
  return "?";
}

Method parse_method(std::string_view text) {
  std::string s(text);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "oracle") return Method::Oracle;
  switch (parse_variant(s)) {
    case Variant::FLDA: return Method::FLDA;
    case Variant::FairFLDA: return Method::FairFLDA;
    case Variant::FairFLDAc: return Method::FairFLDAc;
  }
  return Method::FLDA;
}

namespace {

void require_matching(const Vector& decisions, const Dataset& test) {
  if (static_cast<std::size_t>(decisions.size()) != test.size())
    throw StructuralError("decision vector length differs from the test set");
}

// mean decision over rows with A = a and (y < 0 or Y = y)
double cell_mean(const Vector& decisions, const Dataset& test, int a, int y) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < test.size(); ++i)
    if (test.a()[i] == a && (y < 0 || test.y()[i] == y)) {
      sum += decisions(static_cast<Eigen::Index>(i));
      ++n;
    }
  if (n == 0)
    throw DegenerateCellError("test disparity needs a nonempty cell (a=" + std::to_string(a) +
                              (y < 0 ? "" : ", y=" + std::to_string(y)) + ")");
  return sum / static_cast<double>(n);
}

}  // namespace

double test_disparity(const Vector& decisions, const Dataset& test, DisparityKind kind) {
  require_matching(decisions, test);
  const int y = kind == DisparityKind::DO ? 1 : kind == DisparityKind::PD ? 0 : -1;
  return cell_mean(decisions, test, 1, y) - cell_mean(decisions, test, 0, y);
}

double test_disparity(const FittedFairClassifier& clf, const Dataset& test, DisparityKind kind) {
  return test_disparity(clf.predict(test), test, kind);
}

double test_error(const Vector& decisions, const Dataset& test) {
  require_matching(decisions, test);
  if (test.empty()) throw ArgumentError("test_error: empty test set");
  double sum = 0.0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const double f = decisions(static_cast<Eigen::Index>(i));
    sum += test.y()[i] == 1 ? 1.0 - f : f;
  }
  return sum / static_cast<double>(test.size());
}

double test_error(const FittedFairClassifier& clf, const Dataset& test) { return test_error(clf.predict(test), test); }

double nearest_rank_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ArgumentError("quantile of an empty sample");
  if (!(q > 0.0 && q <= 1.0)) throw ArgumentError("quantile level must lie in (0, 1]");
  std::sort(values.begin(), values.end());
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size()) - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

double median(std::vector<double> values) {
  if (values.empty()) throw ArgumentError("median of an empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

void ExperimentConfig::validate() const {
  scenario.validate();
  if (replications == 0) throw ArgumentError("replications must be at least 1");
  if (methods.empty() || kinds.empty() || deltas.empty()) throw ArgumentError("empty method, measure or delta list");
  for (const double d : deltas)
    if (!(d >= 0.0)) throw ArgumentError("delta must be nonnegative");
  if (!(rho > 0.0 && rho < 1.0)) throw ArgumentError("rho must lie in (0, 1)");
  if (cv_folds < 2) throw ArgumentError("cv_folds must be at least 2");
  if (max_attempts == 0) throw ArgumentError("max_attempts must be at least 1");
}

const SummaryRow& EvalReport::find(Method method, DisparityKind kind, double delta) const {
  for (const auto& row : summary)
    if (row.method == method && row.kind == kind && row.delta == delta) return row;
  throw ArgumentError("no summary row for " + std::string(to_string(method)) + " " + std::string(to_string(kind)) +
                      " delta=" + format_double(delta));
}

namespace {

constexpr std::uint64_t kReplicationSalt = 0x52;

struct OracleEntry {
  bool available = false;
  OracleTau tau;
};

struct Replication {
  std::vector<EvalRow> rows;
  std::size_t attempts = 1;
};

Variant variant_of(Method m) {
  switch (m) {
    case Method::FairFLDA: return Variant::FairFLDA;
    case Method::FairFLDAc: return Variant::FairFLDAc;
    default: return Variant::FLDA;
  }
}

Replication run_replication(const ExperimentConfig& cfg, std::size_t r, const GridPtr& grid,
                            const PopulationModel& population,
                            const std::vector<std::vector<OracleEntry>>& oracle_taus) {
  ScenarioConfig scn = cfg.scenario;
  scn.seed = cfg.seed;
  const std::uint64_t rep_seed = mix_seed(cfg.seed ^ kReplicationSalt, r);
  const std::size_t j_max = default_j_max(*grid);

  Replication out;
  std::size_t J = 0;
  std::array<std::shared_ptr<const HalfModel>, 2> halves;
  for (std::size_t attempt = 0;; ++attempt) {
    if (attempt >= cfg.max_attempts)
      throw DegenerateCellError("replication " + std::to_string(r) + ": no usable training set after " +
                                std::to_string(attempt) + " attempts");
    const Dataset train = generate(scn, grid, scn.n_train, r, Stream::Train, attempt);
    try {
      J = cfg.J ? *cfg.J : select_truncation_cv(train, cfg.J_grid, cfg.cv_folds, rep_seed, j_max).J;
      const auto [d1, d2] = split_halves(train, rep_seed);
      halves[0] = std::make_shared<const HalfModel>(fit_half(d1, d2, J, j_max));
      halves[1] = std::make_shared<const HalfModel>(fit_half(d2, d1, J, j_max));
      out.attempts = attempt + 1;
      break;
    } catch (const DegenerateCellError&) {
    } catch (const TruncationError&) {
    }
  }

  const Dataset test = generate(scn, grid, scn.n_test, r, Stream::Test, 0);
  std::array<std::array<Vector, 2>, 2> scores;  // [half][group]
  for (int h = 0; h < 2; ++h)
    for (int a = 0; a < 2; ++a) scores[h][a] = halves[h]->score.groups[a].evaluate(test.curves());

  std::optional<std::array<Vector, 2>> oracle_scores;
  const auto n = static_cast<Eigen::Index>(test.size());

  for (std::size_t k = 0; k < cfg.kinds.size(); ++k)
    for (const Method method : cfg.methods)
      for (std::size_t d = 0; d < cfg.deltas.size(); ++d) {
        EvalRow row;
        row.replication = r;
        row.method = method;
        row.kind = cfg.kinds[k];
        row.delta = cfg.deltas[d];
        row.J = J;
        row.attempts = out.attempts;
        Vector decisions = Vector::Zero(n);
        if (method == Method::Oracle) {
          const auto& entry = oracle_taus[k][d];
          if (!entry.available) continue;
          if (!oracle_scores) {
            const auto clf = make_oracle_classifier(population, bilinear_coefficients(row.kind, population.priors),
                                                    0.0, grid);
            oracle_scores = std::array<Vector, 2>{clf.score.groups[0].evaluate(test.curves()),
                                                  clf.score.groups[1].evaluate(test.curves())};
          }
          const DisparitySpec spec = bilinear_coefficients(row.kind, population.priors);
          const GroupThreshold rules[2] = {group_threshold(population.priors, spec, 0, entry.tau.tau),
                                           group_threshold(population.priors, spec, 1, entry.tau.tau)};
          for (Eigen::Index i = 0; i < n; ++i) {
            const int a = test.a()[static_cast<std::size_t>(i)];
            decisions(i) = rules[a].accepts_or_ties((*oracle_scores)[a](i)) ? 1.0 : 0.0;
          }
          row.tau = {entry.tau.tau};
          row.feasible = entry.tau.feasible;
        } else {
          FitConfig fc;
          fc.disparity = row.kind;
          fc.delta = row.delta;
          fc.variant = variant_of(method);
          fc.rho = cfg.rho;
          fc.kappa_override = cfg.kappa;
          for (int h = 0; h < 2; ++h) {
            const HalfFit fitted = calibrate(halves[h], fc);
            row.tau.push_back(fitted.tau());
            row.feasible = row.feasible && fitted.solution.feasible;
            for (Eigen::Index i = 0; i < n; ++i) {
              const int a = test.a()[static_cast<std::size_t>(i)];
              decisions(i) += fitted.decide(a, scores[h][a](i));
            }
          }
          decisions *= 0.5;
        }
        row.error = test_error(decisions, test);
        row.disparity = test_disparity(decisions, test, row.kind);
        out.rows.push_back(std::move(row));
      }
  return out;
}

}  // namespace

std::vector<SummaryRow> summarise(const std::vector<EvalRow>& rows, const ExperimentConfig& cfg) {
  std::vector<SummaryRow> out;
  for (const auto kind : cfg.kinds)
    for (const auto method : cfg.methods)
      for (const double delta : cfg.deltas) {
        std::vector<double> err, absd;
        SummaryRow s;
        s.method = method;
        s.kind = kind;
        s.delta = delta;
        for (const auto& row : rows)
          if (row.method == method && row.kind == kind && row.delta == delta) {
            err.push_back(row.error);
            absd.push_back(std::abs(row.disparity));
            if (!row.feasible) ++s.infeasible;
          }
        if (err.empty()) continue;
        s.R = err.size();
        s.median_error = median(err);
        s.median_abs_disparity = median(absd);
        s.q95_abs_disparity = nearest_rank_quantile(absd, 0.95);
        double mean = 0.0;
        for (const double e : err) mean += e;
        mean /= static_cast<double>(s.R);
        double ss = 0.0;
        for (const double e : err) ss += (e - mean) * (e - mean);
        s.mean_error = mean;
        s.se_median_error = s.R > 1 ? 1.2533 * std::sqrt(ss / static_cast<double>(s.R - 1) / static_cast<double>(s.R))
                                    : 0.0;
        out.push_back(s);
      }
  return out;
}

EvalReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const GridPtr grid = scenario_grid(cfg.scenario);
  const PopulationModel population = population_model(cfg.scenario);

  std::vector<std::vector<OracleEntry>> oracle_taus(cfg.kinds.size(), std::vector<OracleEntry>(cfg.deltas.size()));
  const bool want_oracle = std::find(cfg.methods.begin(), cfg.methods.end(), Method::Oracle) != cfg.methods.end();
  if (want_oracle && population.family == ScoreFamily::Gaussian)
    for (std::size_t k = 0; k < cfg.kinds.size(); ++k)
      for (std::size_t d = 0; d < cfg.deltas.size(); ++d) {
        const auto spec = bilinear_coefficients(cfg.kinds[k], population.priors);
        oracle_taus[k][d] = {true, oracle_tau(population, spec, cfg.deltas[d])};
      }

  std::vector<Replication> results(cfg.replications);
  std::size_t workers = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, cfg.replications);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t r = next++; r < cfg.replications; r = next++) {
      try {
        results[r] = run_replication(cfg, r, grid, population, oracle_taus);
      } catch (...) {
        const std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = cfg.replications;
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  EvalReport report;
  for (auto& rep : results) {
    report.regenerated += rep.attempts - 1;
    for (auto& row : rep.rows) report.rows.push_back(std::move(row));
  }
  report.summary = summarise(report.rows, cfg);

  auto& m = report.manifest;
  m.set("scenario", cfg.scenario.name);
  m.set("beta", cfg.scenario.beta);
  m.set("family", std::string(to_string(cfg.scenario.family)));
  m.set("n_train", std::to_string(cfg.scenario.n_train));
  m.set("n_test", std::to_string(cfg.scenario.n_test));
  m.set("grid_size", std::to_string(cfg.scenario.m));
  m.set("seed", std::to_string(cfg.seed));
  m.set("replications", std::to_string(cfg.replications));
  m.set("rho", cfg.rho);
  if (cfg.kappa) m.set("kappa", *cfg.kappa);
  m.set("J", cfg.J ? std::to_string(*cfg.J) : std::string("cv"));
  m.set("cv_folds", std::to_string(cfg.cv_folds));
  m.set("quantile", "nearest-rank");
  m.set("test_sets", "fresh per replication, shared across methods and deltas");
  m.set("regenerated_training_sets", std::to_string(report.regenerated));
  for (std::size_t k = 0; k < cfg.kinds.size(); ++k)
    for (std::size_t d = 0; d < cfg.deltas.size(); ++d)
      if (oracle_taus[k][d].available) {
        const std::string key = "oracle_tau." + std::string(to_string(cfg.kinds[k])) + "." + format_double(cfg.deltas[d]);
        m.set(key, oracle_taus[k][d].tau.tau);
        if (!oracle_taus[k][d].tau.feasible) m.set(key + ".feasible", "false");
      }
  if (want_oracle && population.family != ScoreFamily::Gaussian)
    m.set("oracle", "skipped: no closed form for this score family");
  return report;
}

void write_summary_csv(std::ostream& os, const EvalReport& report, const std::string& which) {
  if (which != "all" && which != "error" && which != "median_abs_disparity" && which != "q95_abs_disparity")
    throw ArgumentError("unknown summary table '" + which + "'");
  os << "method,delta,statistic,value\n";
  for (const auto& s : report.summary) {
    const std::string kind(to_string(s.kind));
    auto line = [&](const std::string& stat, const std::string& value) {
      os << to_string(s.method) << ',' << format_double(s.delta) << ',' << stat << ',' << value << '\n';
    };
    if (which == "all" || which == "error") {
      line(kind + "_median_error", format_double(s.median_error));
      line(kind + "_se_median_error", format_double(s.se_median_error));
    }
    if (which == "all" || which == "median_abs_disparity") line("median_abs_" + kind, format_double(s.median_abs_disparity));
    if (which == "all" || which == "q95_abs_disparity") line("q95_abs_" + kind, format_double(s.q95_abs_disparity));
    if (which == "all") {
      line(kind + "_mean_error", format_double(s.mean_error));
      line(kind + "_replications", std::to_string(s.R));
      line(kind + "_infeasible", std::to_string(s.infeasible));
    }
  }
}

void write_raw_csv(std::ostream& os, const EvalReport& report) {
  os << "replication,method,disparity_kind,delta,error,disparity,J,tau_1,tau_2,feasible,attempts\n";
  for (const auto& r : report.rows) {
    os << r.replication << ',' << to_string(r.method) << ',' << to_string(r.kind) << ',' << format_double(r.delta)
       << ',' << format_double(r.error) << ',' << format_double(r.disparity) << ',' << r.J << ','
       << (r.tau.empty() ? "" : format_double(r.tau[0])) << ',' << (r.tau.size() > 1 ? format_double(r.tau[1]) : "")
       << ',' << (r.feasible ? "true" : "false") << ',' << r.attempts << '\n';
  }
}

KappaTuning tune_kappa(const Dataset& data, const TuneConfig& cfg) {
  if (!(cfg.delta >= 0.0)) throw ArgumentError("tune_kappa: delta must be nonnegative");
  if (!(cfg.rho > 0.0 && cfg.rho < 1.0)) throw ArgumentError("tune_kappa: rho must lie in (0, 1)");
  if (cfg.n_splits == 0) throw ArgumentError("tune_kappa: n_splits must be positive");
  if (cfg.grid_points < 2) throw ArgumentError("tune_kappa: grid_points must be at least 2");
  const std::size_t j_max = default_j_max(*data.grid());

  KappaTuning out;
  out.J = cfg.J ? *cfg.J : select_truncation_cv(data, {}, cfg.cv_folds, mix_seed(cfg.seed, 0x4B), j_max).J;

  struct Split {
    std::array<std::shared_ptr<const HalfModel>, 2> halves;
    std::array<std::array<Vector, 2>, 2> scores;  // [half][group] on the evaluation part
    Dataset eval;
  };
  std::vector<Split> splits;
  splits.reserve(cfg.n_splits);
  for (std::size_t s = 0; s < cfg.n_splits; ++s) {
    const std::uint64_t split_seed = mix_seed(cfg.seed, 0x1000 + s);
    auto [fit_part, eval_part] = split_halves(data, split_seed);
    const auto [d1, d2] = split_halves(fit_part, mix_seed(split_seed, 1));
    Split sp{{std::make_shared<const HalfModel>(fit_half(d1, d2, out.J, j_max)),
              std::make_shared<const HalfModel>(fit_half(d2, d1, out.J, j_max))},
             {},
             std::move(eval_part)};
    for (int h = 0; h < 2; ++h)
      for (int a = 0; a < 2; ++a) sp.scores[h][a] = sp.halves[h]->score.groups[a].evaluate(sp.eval.curves());
    splits.push_back(std::move(sp));
  }

  std::vector<double> grid;
  if (std::isinf(cfg.delta)) {
    grid.push_back(0.0);
  } else {
    for (std::size_t i = 0; i < cfg.grid_points; ++i)
      grid.push_back(cfg.delta * static_cast<double>(i) / static_cast<double>(cfg.grid_points - 1));
  }

  for (const double kappa : grid) {
    FitConfig fc;
    fc.disparity = cfg.kind;
    fc.delta = cfg.delta;
    fc.variant = Variant::FairFLDAc;
    fc.rho = cfg.rho;
    fc.kappa_override = kappa;
    std::vector<double> abs_d;
    for (const auto& sp : splits) {
      const auto n = static_cast<Eigen::Index>(sp.eval.size());
      Vector decisions = Vector::Zero(n);
      for (int h = 0; h < 2; ++h) {
        const HalfFit fitted = calibrate(sp.halves[h], fc);
        for (Eigen::Index i = 0; i < n; ++i) {
          const int a = sp.eval.a()[static_cast<std::size_t>(i)];
          decisions(i) += fitted.decide(a, sp.scores[h][a](i));
        }
      }
      decisions *= 0.5;
      abs_d.push_back(std::abs(test_disparity(decisions, sp.eval, cfg.kind)));
    }
    const double q = nearest_rank_quantile(abs_d, 1.0 - cfg.rho);
    out.grid.push_back(kappa);
    out.quantiles.push_back(q);
    if (q <= cfg.delta) {
      out.kappa = kappa;
      out.found = true;
      return out;
    }
  }
  out.kappa = cfg.delta;
  out.found = false;
  return out;
}

}  // namespace fairflda
