#pragma once

// End-to-end Fair-FLDA: stratified halving, estimation on one half,
// threshold calibration on the other, cross-fitting and prediction.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fairflda/fairness.hpp"
#include "fairflda/fpca.hpp"

namespace fairflda {

enum class Variant { FLDA, FairFLDA, FairFLDAc };

std::string_view to_string(Variant v) noexcept;
/// Accepts "flda", "fair", "fairc" (and the long names) in any case.
Variant parse_variant(std::string_view text);

struct FitConfig {
  DisparityKind disparity = DisparityKind::DO;
  double delta = 0.0;  ///< may be +infinity
  Variant variant = Variant::FairFLDA;
  double rho = 0.05;
  std::optional<std::size_t> J;       ///< fixed truncation; cross-validated when empty
  std::vector<std::size_t> J_grid;    ///< CV grid; empty means 1..j_max
  std::size_t cv_folds = 5;
  std::size_t j_max = 0;              ///< 0 means default_j_max(grid)
  std::uint64_t seed = 0;
  bool cross_fit = true;
  std::optional<double> kappa_override;

  void validate() const;
};

/// Ordered key/value record of a fit.
class Manifest {
 public:
  void set(std::string key, std::string value);
  void set(std::string key, double value);
  const std::vector<std::pair<std::string, std::string>>& entries() const noexcept { return entries_; }
  std::optional<std::string> get(const std::string& key) const;
  /// One "key = value" line per entry.
  std::string to_text() const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Estimation half: priors and score functional fitted on one subset, plus
/// the log scores of the other subset used for calibration.
struct HalfModel {
  ClassPriors priors;
  ScoreFunctional score;
  CalibrationScores calibration;
  std::size_t n_calibration = 0;
};

HalfModel fit_half(const Dataset& train, const Dataset& calibration, std::size_t J, std::size_t j_max = 0);

/// A calibrated half-classifier.
struct HalfFit {
  std::shared_ptr<const HalfModel> model;
  DisparitySpec spec;
  ThresholdSolution solution;
  double kappa = 0.0;
  double delta_eff = 0.0;

  double tau() const noexcept { return solution.tau; }
  /// Indicator of the half-classifier for a precomputed log score.
  int decide(int a, double log_eta) const noexcept;
};

HalfFit calibrate(std::shared_ptr<const HalfModel> model, const FitConfig& cfg);

class FittedFairClassifier {
 public:
  FittedFairClassifier(std::vector<HalfFit> halves, bool cross_fit, std::size_t J, Manifest manifest);

  /// Average of the half indicators: {0, 1/2, 1} when cross-fitted, {0, 1} otherwise.
  double predict(const FunctionSample& x, int a) const;
  /// Predictions for every row of a dataset.
  Vector predict(const Dataset& data) const;

  const std::vector<HalfFit>& halves() const noexcept { return halves_; }
  bool cross_fit() const noexcept { return cross_fit_; }
  std::size_t J() const noexcept { return J_; }
  const GridPtr& grid() const { return halves_.front().model->score.groups[0].grid(); }
  const Manifest& manifest() const noexcept { return manifest_; }
  bool feasible() const noexcept;

 private:
  std::vector<HalfFit> halves_;
  bool cross_fit_;
  std::size_t J_;
  Manifest manifest_;
};

/// Stratified random halving by (a, y); odd cells put the extra sample in the
/// first half. Every cell needs at least 4 samples.
std::pair<Dataset, Dataset> split_halves(const Dataset& data, std::uint64_t seed);

struct CvResult {
  std::size_t J = 0;
  std::vector<std::size_t> grid;
  std::vector<double> mean_error;  ///< +infinity for unusable grid entries
  std::size_t folds = 0;
};

/// Cross-validated truncation level minimising the held-out error of the
/// unconstrained classifier. Ties go to the smallest J. The fold count drops
/// until every cell has a sample in each fold and two left for training.
CvResult select_truncation_cv(const Dataset& data, const std::vector<std::size_t>& J_grid, std::size_t folds,
                              std::uint64_t seed, std::size_t j_max = 0);

FittedFairClassifier fit(const Dataset& data, const FitConfig& cfg);

double predict(const FittedFairClassifier& clf, const FunctionSample& x, int a);

}  // namespace fairflda
