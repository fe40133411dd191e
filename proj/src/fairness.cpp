#include "fairflda/fairness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <string>

#include "fairflda/errors.hpp"

namespace fairflda {

std::string_view to_string(DisparityKind kind) noexcept {
  switch (kind) {
    case DisparityKind::DO: return "DO";
    case DisparityKind::PD: return "PD";
    case DisparityKind::DD: return "DD";
  }
  return "?";
}

DisparityKind parse_disparity(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "do") return DisparityKind::DO;
  if (lower == "pd") return DisparityKind::PD;
  if (lower == "dd") return DisparityKind::DD;
  throw ArgumentError("unknown disparity measure '" + std::string(text) + "' (expected do, pd or dd)");
}

DisparitySpec bilinear_coefficients(DisparityKind kind, const ClassPriors& pi) {
  DisparitySpec spec;
  spec.kind = kind;
  for (int a = 0; a < 2; ++a) {
    const double sign = 2.0 * a - 1.0;
    switch (kind) {
      case DisparityKind::DO:
        spec.s[a] = sign;
        spec.b[a] = 0.0;
        break;
      case DisparityKind::PD:
        spec.s[a] = 0.0;
        spec.b[a] = sign;
        break;
      case DisparityKind::DD: {
        const double group = pi.group(a);
        if (!(group > 0.0))
          throw DegenerateCellError("DD coefficients need a positive probability for group " + std::to_string(a));
        spec.s[a] = sign * pi(a, 1) / group;
        spec.b[a] = sign * pi(a, 0) / group;
        break;
      }
    }
  }
  return spec;
}

bool GroupThreshold::accepts(double log_eta) const noexcept {
  if (scale > 0.0) {
    if (bound <= 0.0) return true;
    return log_eta > std::log(bound) - std::log(scale);
  }
  if (scale == 0.0) return bound < 0.0;
  // scale < 0: scale * eta > bound needs bound < 0 and eta < bound / scale
  if (bound >= 0.0) return false;
  return log_eta < std::log(-bound) - std::log(-scale);
}

bool GroupThreshold::accepts_or_ties(double log_eta) const noexcept {
  if (scale > 0.0) {
    if (bound <= 0.0) return true;
    return log_eta >= std::log(bound) - std::log(scale);
  }
  if (scale == 0.0) return bound <= 0.0;
  if (bound > 0.0) return false;
  if (bound == 0.0) return false;
  return log_eta <= std::log(-bound) - std::log(-scale);
}

GroupThreshold group_threshold(const ClassPriors& pi, const DisparitySpec& spec, int a, double tau) noexcept {
  return {pi.pi[a][1] - tau * spec.s[a], pi.pi[a][0] + tau * spec.b[a]};
}

void CalibrationScores::sort() {
  for (auto& group : log_eta)
    for (auto& cell : group) std::sort(cell.begin(), cell.end());
}

CalibrationScores calibration_scores(const ScoreFunctional& score, const Dataset& calibration) {
  CalibrationScores out;
  for (int a = 0; a < 2; ++a) {
    const Vector values = score.groups[a].evaluate(calibration.curves());
    for (std::size_t i = 0; i < calibration.size(); ++i)
      if (calibration.a()[i] == a)
        out.log_eta[a][calibration.y()[i]].push_back(values(static_cast<Eigen::Index>(i)));
  }
  out.sort();
  return out;
}

namespace {

double coefficient(const DisparitySpec& spec, int a, int y) { return y == 1 ? spec.s[a] : spec.b[a]; }

void require_scored_cells(const CalibrationScores& scores, const DisparitySpec& spec) {
  for (int a = 0; a < 2; ++a)
    for (int y = 0; y < 2; ++y)
      if (coefficient(spec, a, y) != 0.0 && scores.count(a, y) == 0)
        throw DegenerateCellError("calibration cell (a=" + std::to_string(a) + ", y=" + std::to_string(y) +
                                  ") is empty but carries a disparity coefficient");
}

// Number of sorted values accepted by the rule. Uses the same comparisons as
// GroupThreshold::accepts so counts agree with per-sample evaluation.
std::size_t count_accepted(const std::vector<double>& sorted, const GroupThreshold& rule) {
  if (rule.scale > 0.0) {
    if (rule.bound <= 0.0) return sorted.size();
    const double cut = std::log(rule.bound) - std::log(rule.scale);
    return static_cast<std::size_t>(sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), cut));
  }
  if (rule.scale == 0.0) return rule.bound < 0.0 ? sorted.size() : 0;
  if (rule.bound >= 0.0) return 0;
  const double cut = std::log(-rule.bound) - std::log(-rule.scale);
  return static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), cut) - sorted.begin());
}

double disparity_unchecked(const CalibrationScores& scores, const DisparitySpec& spec, const ClassPriors& pi,
                           double tau) {
  double total = 0.0;
  for (int a = 0; a < 2; ++a) {
    const GroupThreshold rule = group_threshold(pi, spec, a, tau);
    for (int y = 0; y < 2; ++y) {
      const double c = coefficient(spec, a, y);
      if (c == 0.0) continue;
      const auto& cell = scores.log_eta[a][y];
      const double rate = static_cast<double>(count_accepted(cell, rule)) / static_cast<double>(cell.size());
      total += c * rate;
    }
  }
  return total;
}

// Breakpoint of one score, computed without forming exp(log_eta) when it would overflow.
bool breakpoint(double log_eta, double p, double q, double s, double b, double& tau) {
  double num = 0.0, den = 0.0;
  if (log_eta > 0.0) {
    const double e = std::exp(-log_eta);
    num = p - q * e;
    den = s + b * e;
  } else {
    const double e = std::exp(log_eta);
    num = p * e - q;
    den = s * e + b;
  }
  if (den == 0.0) return false;
  tau = num / den;
  return std::isfinite(tau);
}

}  // namespace

double empirical_disparity(const CalibrationScores& scores, const DisparitySpec& spec, const ClassPriors& pi,
                           double tau) {
  require_scored_cells(scores, spec);
  return disparity_unchecked(scores, spec, pi, tau);
}

std::vector<double> candidate_thresholds(const CalibrationScores& scores, const DisparitySpec& spec,
                                         const ClassPriors& pi) {
  std::vector<double> out;
  for (int a = 0; a < 2; ++a)
    for (int y = 0; y < 2; ++y) {
      if (coefficient(spec, a, y) == 0.0) continue;
      for (const double v : scores.log_eta[a][y]) {
        double tau = 0.0;
        if (breakpoint(v, pi.pi[a][1], pi.pi[a][0], spec.s[a], spec.b[a], tau)) out.push_back(tau);
      }
    }
  std::sort(out.begin(), out.end());
  std::vector<double> unique;
  unique.reserve(out.size());
  for (const double t : out)
    if (unique.empty() || t - unique.back() > 1e-14 * std::max(1.0, std::abs(t))) unique.push_back(t);
  return unique;
}

std::vector<double> scan_points(const std::vector<double>& candidates, int side) {
  std::vector<double> ordered;
  for (const double t : candidates)
    if ((side > 0 && t > 0.0) || (side < 0 && t < 0.0)) ordered.push_back(std::abs(t));
  std::sort(ordered.begin(), ordered.end());
  std::vector<double> points;
  points.reserve(2 * ordered.size() + 1);
  const double dir = side > 0 ? 1.0 : -1.0;
  if (ordered.empty()) {
    points.push_back(dir);
    return points;
  }
  points.push_back(dir * 0.5 * ordered.front());
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    points.push_back(dir * ordered[i]);
    const double next = i + 1 < ordered.size() ? 0.5 * (ordered[i] + ordered[i + 1])
                                               : ordered[i] + std::max(1.0, ordered[i]);
    points.push_back(dir * next);
  }
  return points;
}

ThresholdSolution solve_tau(const CalibrationScores& scores, const DisparitySpec& spec, const ClassPriors& pi,
                            double delta_eff) {
  if (!(delta_eff >= 0.0)) throw ArgumentError("solve_tau: delta_eff must be nonnegative");
  require_scored_cells(scores, spec);
  ThresholdSolution best;
  best.tau = 0.0;
  best.achieved = disparity_unchecked(scores, spec, pi, 0.0);
  best.candidates_scanned = 1;
  if (std::abs(best.achieved) <= delta_eff) return best;

  const int side = best.achieved > 0.0 ? 1 : -1;
  const auto points = scan_points(candidate_thresholds(scores, spec, pi), side);
  best.feasible = false;
  for (const double tau : points) {
    const double d = disparity_unchecked(scores, spec, pi, tau);
    ++best.candidates_scanned;
    if (std::abs(d) <= delta_eff) return {tau, true, d, best.candidates_scanned};
    if (std::abs(d) < std::abs(best.achieved)) {
      best.tau = tau;
      best.achieved = d;
    }
  }
  return best;
}

double dkw_calibration_constant(std::size_t n, double rho, double delta) {
  if (n == 0) throw ArgumentError("dkw_calibration_constant: n must be positive");
  if (!(rho > 0.0 && rho < 1.0)) throw ArgumentError("dkw_calibration_constant: rho must lie in (0, 1)");
  if (!(delta >= 0.0)) throw ArgumentError("dkw_calibration_constant: delta must be nonnegative");
  return std::min(std::sqrt(2.0 * std::log(1.0 / rho) / static_cast<double>(n)), delta);
}

}  // namespace fairflda
