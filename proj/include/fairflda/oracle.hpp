#pragma once

// Population quantities of the two-group Gaussian process model written in a
// known cosine basis: RKHS separations, closed-form disparity and risk of the
// fair Bayes rule, the optimal threshold shift and Monte Carlo counterparts.

#include <array>
#include <cstddef>
#include <cstdint>

#include "fairflda/fairness.hpp"
#include "fairflda/fnspace.hpp"
#include "fairflda/fpca.hpp"

namespace fairflda {

enum class ScoreFamily { Gaussian, Uniform };

std::string_view to_string(ScoreFamily family) noexcept;

/// Law of (X, A, Y) with X = mu_{a,y} + sum_k zeta_{a,k} phi_k.
struct PopulationModel {
  ClassPriors priors;
  std::array<Vector, 2> lambda;                       ///< per group, length K
  std::array<std::array<Vector, 2>, 2> theta;         ///< [a][y], length K
  ScoreFamily family = ScoreFamily::Gaussian;

  std::size_t components() const noexcept { return static_cast<std::size_t>(lambda[0].size()); }
  /// Throws ArgumentError on nonpositive priors or eigenvalues or on size mismatches.
  void validate() const;
};

/// phi_k(t) = sqrt(2) cos(k pi t), k = 1..K, one column per k.
Matrix cosine_basis(const Grid& grid, std::size_t K);

double normal_cdf(double x) noexcept;

/// sum_k (theta_{a,1,k} - theta_{a,0,k})^2 / lambda_{a,k}
double rkhs_norm_sq(const PopulationModel& model, int a);

/// P(rule of group a at tau says 1 | A=a, Y=y) when log eta | (a, y) ~ N(+-D^2/2, D^2).
double oracle_positive_rate(const PopulationModel& model, const DisparitySpec& spec, int a, int y, double tau);

/// Population disparity D(tau) of the thresholded Bayes rule. Gaussian family only.
double oracle_disparity(const PopulationModel& model, const DisparitySpec& spec, double tau);

/// Open interval of tau on which both scales and both bounds stay positive.
struct TauInterval {
  double lo;
  double hi;
};
TauInterval admissible_interval(const ClassPriors& pi, const DisparitySpec& spec);

struct OracleTau {
  double tau = 0.0;
  bool feasible = true;
  double achieved = 0.0;  ///< D(tau)
};

/// argmin{|tau| : |D(tau)| <= delta} by bisection inside the admissible interval.
OracleTau oracle_tau(const PopulationModel& model, const DisparitySpec& spec, double delta);

/// Misclassification error of the rule at tau in closed form; tau must be admissible.
double oracle_misclassification(const PopulationModel& model, const DisparitySpec& spec, double tau);

/// Fair Bayes rule on a fixed grid, using the full K-term log density ratio.
struct OracleClassifier {
  PopulationModel model;
  DisparitySpec spec;
  double tau = 0.0;
  ScoreFunctional score;
};

OracleClassifier make_oracle_classifier(const PopulationModel& model, const DisparitySpec& spec, double tau,
                                        const GridPtr& grid);

/// 1{scale * eta >= bound}; ties go to 1.
int oracle_decide(const OracleClassifier& clf, int a, double log_eta) noexcept;
int oracle_predict(const OracleClassifier& clf, const FunctionSample& x, int a);
/// Decisions for every row of a dataset.
Vector oracle_predict(const OracleClassifier& clf, const Dataset& data);

/// Monte Carlo estimate of the rule at tau, drawing basis scores directly.
struct MonteCarloEstimate {
  std::array<std::array<double, 2>, 2> positive_rate{};  ///< [a][y]
  double error = 0.0;
  double disparity = 0.0;
};

/// `draws` samples from each (a, y) cell; rates are combined with the model priors.
MonteCarloEstimate monte_carlo_rule(const PopulationModel& model, const DisparitySpec& spec, double tau,
                                    std::size_t draws, std::uint64_t seed);

}  // namespace fairflda
