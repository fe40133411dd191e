#pragma once

// Calibration step of Fair-FLDA: bilinear disparity measures, the empirical
// disparity step function and the minimal-|tau| threshold shift meeting a
// disparity budget.

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "fairflda/fpca.hpp"

namespace fairflda {

enum class DisparityKind { DO, PD, DD };

std::string_view to_string(DisparityKind kind) noexcept;
/// Accepts "do", "pd", "dd" in any case.
DisparityKind parse_disparity(std::string_view text);

/// D(f) = sum_a int f(x,a) { s_a dP_{a,1}/dP_{a,0}(x) + b_a } dP_{a,0}(x)
struct DisparitySpec {
  DisparityKind kind = DisparityKind::DO;
  std::array<double, 2> s{};
  std::array<double, 2> b{};
};

/// DO: s_a = 2a-1, b_a = 0. PD: s_a = 0, b_a = 2a-1.
/// DD: s_a = (2a-1) pi_{a,1}/pi_a, b_a = (2a-1) pi_{a,0}/pi_a.
DisparitySpec bilinear_coefficients(DisparityKind kind, const ClassPriors& pi);

/// The group-a rule 1{scale * eta > bound} with scale = pi_{a,1} - tau s_a and
/// bound = pi_{a,0} + tau b_a, evaluated on log(eta) so that extreme scores
/// neither overflow nor underflow.
struct GroupThreshold {
  double scale = 0.0;
  double bound = 0.0;

  /// Strict inequality, as used by the estimated classifier.
  bool accepts(double log_eta) const noexcept;
  /// Non-strict inequality, as used by the population rule.
  bool accepts_or_ties(double log_eta) const noexcept;
};

GroupThreshold group_threshold(const ClassPriors& pi, const DisparitySpec& spec, int a, double tau) noexcept;

/// log eta_hat of the calibration samples, per (a, y) cell, sorted ascending.
struct CalibrationScores {
  std::array<std::array<std::vector<double>, 2>, 2> log_eta;

  std::size_t count(int a, int y) const { return log_eta.at(a).at(y).size(); }
  /// Sorts every cell; call after filling log_eta by hand.
  void sort();
};

CalibrationScores calibration_scores(const ScoreFunctional& score, const Dataset& calibration);

/// Empirical D_hat(tau). Only cells with a nonzero coefficient are required.
double empirical_disparity(const CalibrationScores& scores, const DisparitySpec& spec, const ClassPriors& pi,
                           double tau);

/// Values of tau at which one calibration indicator flips, ascending and
/// deduplicated: tau(v) = (pi_{a,1} v - pi_{a,0}) / (s_a v + b_a).
std::vector<double> candidate_thresholds(const CalibrationScores& scores, const DisparitySpec& spec,
                                         const ClassPriors& pi);

struct ThresholdSolution {
  double tau = 0.0;
  bool feasible = true;
  double achieved = 0.0;  ///< D_hat(tau)
  std::size_t candidates_scanned = 0;
};

/// Points at which solve_tau evaluates D_hat on one side of zero, in scan
/// order: the open gap after zero, then each breakpoint followed by the open
/// gap after it (represented by its midpoint, or one unit past the last one).
std::vector<double> scan_points(const std::vector<double>& candidates, int side);

/// argmin{|tau| : |D_hat(tau)| <= delta_eff}. Returns tau = 0 when D_hat(0)
/// already meets the budget; otherwise scans the side implied by the sign of
/// D_hat(0). When nothing is feasible, reports the point of smallest |D_hat|.
ThresholdSolution solve_tau(const CalibrationScores& scores, const DisparitySpec& spec, const ClassPriors& pi,
                            double delta_eff);

/// kappa = min(sqrt(2 log(1/rho) / n), delta).
double dkw_calibration_constant(std::size_t n, double rho, double delta);

}  // namespace fairflda
