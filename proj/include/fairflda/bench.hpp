#pragma once

// Replicated simulation experiments: test-set error and disparity of each
// method over a delta sweep, summary statistics and calibration-constant tuning.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fairflda/classifier.hpp"
#include "fairflda/simgen.hpp"

namespace fairflda {

enum class Method { FLDA, FairFLDA, FairFLDAc, Oracle };

std::string_view to_string(Method m) noexcept;
/// Accepts "flda", "fair", "fairc", "oracle" and the long names.
Method parse_method(std::string_view text);

/// Plug-in D(f) on a labelled set using expected decision values:
/// DO compares the y=1 cells, PD the y=0 cells, DD the two groups.
double test_disparity(const Vector& decisions, const Dataset& test, DisparityKind kind);
double test_disparity(const FittedFairClassifier& clf, const Dataset& test, DisparityKind kind);

/// Mean of f over y=0 rows and 1-f over y=1 rows.
double test_error(const Vector& decisions, const Dataset& test);
double test_error(const FittedFairClassifier& clf, const Dataset& test);

/// ceil(q R)-th order statistic.
double nearest_rank_quantile(std::vector<double> values, double q);
double median(std::vector<double> values);

struct ExperimentConfig {
  ScenarioConfig scenario;
  std::vector<Method> methods{Method::FLDA, Method::FairFLDA, Method::FairFLDAc, Method::Oracle};
  std::vector<DisparityKind> kinds{DisparityKind::DO};
  std::vector<double> deltas{0.01, 0.02, 0.05, 0.1, 0.15, 0.2};
  std::size_t replications = 100;
  std::uint64_t seed = 0;
  double rho = 0.05;
  std::optional<double> kappa;          ///< replaces the DKW constant for FairFLDAc
  std::optional<std::size_t> J;         ///< fixed truncation instead of CV
  std::vector<std::size_t> J_grid;
  std::size_t cv_folds = 5;
  std::size_t threads = 0;              ///< 0 means hardware concurrency
  std::size_t max_attempts = 100;

  void validate() const;
};

/// One (replication, method, measure, delta) outcome.
struct EvalRow {
  std::size_t replication = 0;
  Method method = Method::FLDA;
  DisparityKind kind = DisparityKind::DO;
  double delta = 0.0;
  double error = 0.0;
  double disparity = 0.0;  ///< signed test disparity
  std::size_t J = 0;
  std::vector<double> tau;  ///< one per half; the population shift for the oracle
  bool feasible = true;
  std::size_t attempts = 1;
};

struct SummaryRow {
  Method method = Method::FLDA;
  DisparityKind kind = DisparityKind::DO;
  double delta = 0.0;
  std::size_t R = 0;
  double median_error = 0.0;
  double median_abs_disparity = 0.0;
  double q95_abs_disparity = 0.0;
  double mean_error = 0.0;
  /// Standard error of the median error, 1.2533 sd / sqrt(R).
  double se_median_error = 0.0;
  std::size_t infeasible = 0;
};

struct EvalReport {
  std::vector<EvalRow> rows;        ///< sorted by replication, then configuration order
  std::vector<SummaryRow> summary;  ///< kinds x methods x deltas, in configuration order
  std::size_t regenerated = 0;      ///< training sets redrawn because of degenerate cells
  Manifest manifest;

  const SummaryRow& find(Method method, DisparityKind kind, double delta) const;
};

EvalReport run_experiment(const ExperimentConfig& cfg);

std::vector<SummaryRow> summarise(const std::vector<EvalRow>& rows, const ExperimentConfig& cfg);

/// Columns method, delta, statistic, value. `which` selects "error",
/// "median_abs_disparity", "q95_abs_disparity" or "all".
void write_summary_csv(std::ostream& os, const EvalReport& report, const std::string& which = "all");
void write_raw_csv(std::ostream& os, const EvalReport& report);

struct KappaTuning {
  double kappa = 0.0;
  bool found = true;                 ///< false: no candidate met delta, kappa = delta
  std::vector<double> grid;          ///< candidates evaluated, ascending
  std::vector<double> quantiles;     ///< 1-rho quantile of |D| per evaluated candidate
  std::size_t J = 0;
};

struct TuneConfig {
  DisparityKind kind = DisparityKind::DO;
  double delta = 0.05;
  double rho = 0.05;
  std::size_t n_splits = 100;
  std::size_t grid_points = 21;      ///< kappa = delta * i / (grid_points - 1)
  std::optional<std::size_t> J;
  std::size_t cv_folds = 5;
  std::uint64_t seed = 0;
};

/// Smallest kappa on the grid whose 1-rho quantile of |D| over random splits
/// (fit on one half, measure on the other) stays at or below delta.
KappaTuning tune_kappa(const Dataset& data, const TuneConfig& cfg);

}  // namespace fairflda
