#include "fairflda/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "fairflda/errors.hpp"
#include "fairflda/rng.hpp"

namespace fairflda {

std::string_view to_string(ScoreFamily family) noexcept {
  return family == ScoreFamily::Gaussian ? "gaussian" : "uniform";
}

void PopulationModel::validate() const {
  double total = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int y = 0; y < 2; ++y) {
      if (!(priors.pi[a][y] > 0.0)) throw ArgumentError("population priors must be positive");
      total += priors.pi[a][y];
    }
  if (std::abs(total - 1.0) > 1e-12) throw ArgumentError("population priors must sum to 1");
  const auto K = lambda[0].size();
  if (K == 0) throw ArgumentError("population model needs at least one component");
  for (int a = 0; a < 2; ++a) {
    if (lambda[a].size() != K || theta[a][0].size() != K || theta[a][1].size() != K)
      throw ArgumentError("population model component counts disagree");
    for (Eigen::Index k = 0; k < K; ++k)
      if (!(lambda[a](k) > 0.0)) throw ArgumentError("population eigenvalues must be positive");
  }
}

Matrix cosine_basis(const Grid& grid, std::size_t K) {
  const auto& t = grid.points();
  Matrix phi(t.size(), static_cast<Eigen::Index>(K));
  for (std::size_t k = 1; k <= K; ++k)
    phi.col(static_cast<Eigen::Index>(k - 1)) =
        (std::numbers::sqrt2 * (static_cast<double>(k) * std::numbers::pi * t.array()).cos()).matrix();
  return phi;
}

double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double rkhs_norm_sq(const PopulationModel& model, int a) {
  const Vector d = model.theta.at(a)[1] - model.theta.at(a)[0];
  return (d.array().square() / model.lambda.at(a).array()).sum();
}

double oracle_positive_rate(const PopulationModel& model, const DisparitySpec& spec, int a, int y, double tau) {
  const GroupThreshold rule = group_threshold(model.priors, spec, a, tau);
  const double sep = std::sqrt(rkhs_norm_sq(model, a));
  const double mean = (y == 1 ? 0.5 : -0.5) * sep * sep;
  if (sep == 0.0) return rule.accepts_or_ties(0.0) ? 1.0 : 0.0;
  if (rule.scale > 0.0) {
    if (rule.bound <= 0.0) return 1.0;
    const double cut = std::log(rule.bound) - std::log(rule.scale);
    return normal_cdf((mean - cut) / sep);
  }
  if (rule.scale == 0.0) return rule.bound <= 0.0 ? 1.0 : 0.0;
  if (rule.bound >= 0.0) return 0.0;
  const double cut = std::log(-rule.bound) - std::log(-rule.scale);
  return normal_cdf((cut - mean) / sep);
}

namespace {

void require_gaussian(const PopulationModel& model) {
  if (model.family != ScoreFamily::Gaussian)
    throw UnsupportedError("closed-form oracle needs Gaussian scores; use monte_carlo_rule");
}

double disparity_from_rates(const std::array<std::array<double, 2>, 2>& rate, const DisparitySpec& spec) {
  double total = 0.0;
  for (int a = 0; a < 2; ++a) total += spec.s[a] * rate[a][1] + spec.b[a] * rate[a][0];
  return total;
}

}  // namespace

double oracle_disparity(const PopulationModel& model, const DisparitySpec& spec, double tau) {
  require_gaussian(model);
  std::array<std::array<double, 2>, 2> rate{};
  for (int a = 0; a < 2; ++a)
    for (int y = 0; y < 2; ++y) rate[a][y] = oracle_positive_rate(model, spec, a, y, tau);
  return disparity_from_rates(rate, spec);
}

TauInterval admissible_interval(const ClassPriors& pi, const DisparitySpec& spec) {
  TauInterval iv{-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  // c + tau * g > 0
  auto restrict = [&iv](double c, double g) {
    if (g > 0.0) iv.lo = std::max(iv.lo, -c / g);
    if (g < 0.0) iv.hi = std::min(iv.hi, -c / g);
  };
  for (int a = 0; a < 2; ++a) {
    restrict(pi.pi[a][1], -spec.s[a]);
    restrict(pi.pi[a][0], spec.b[a]);
  }
  return iv;
}

OracleTau oracle_tau(const PopulationModel& model, const DisparitySpec& spec, double delta) {
  require_gaussian(model);
  if (!(delta >= 0.0)) throw ArgumentError("oracle_tau: delta must be nonnegative");
  const double d0 = oracle_disparity(model, spec, 0.0);
  if (std::abs(d0) <= delta) return {0.0, true, d0};

  const double target = d0 > 0.0 ? delta : -delta;
  const TauInterval iv = admissible_interval(model.priors, spec);
  double edge = d0 > 0.0 ? iv.hi : iv.lo;
  if (std::isinf(edge)) {
    edge = d0 > 0.0 ? 1.0 : -1.0;
    while (std::abs(edge) < 1e12 && std::abs(oracle_disparity(model, spec, edge)) > delta) edge *= 2.0;
  } else {
    edge -= std::copysign(1e-12 * std::max(1.0, std::abs(edge)), edge);
  }
  const double d_edge = oracle_disparity(model, spec, edge);
  if (std::abs(d_edge) > delta && (d0 > 0.0 ? d_edge > target : d_edge < target)) return {edge, false, d_edge};

  // inner: still violates; outer: meets the budget
  double inner = 0.0, outer = edge, d_outer = d_edge;
  for (int it = 0; it < 200; ++it) {
    if (std::abs(d_outer - target) <= 1e-10 || std::abs(outer - inner) <= 1e-12 * std::max(1.0, std::abs(outer)))
      break;
    const double mid = 0.5 * (inner + outer);
    const double d = oracle_disparity(model, spec, mid);
    if (std::abs(d) <= delta || (d0 > 0.0 ? d < target : d > target)) {
      outer = mid;
      d_outer = d;
    } else {
      inner = mid;
    }
  }
  return {outer, true, d_outer};
}

double oracle_misclassification(const PopulationModel& model, const DisparitySpec& spec, double tau) {
  require_gaussian(model);
  double risk = 0.0;
  for (int a = 0; a < 2; ++a) {
    const GroupThreshold rule = group_threshold(model.priors, spec, a, tau);
    if (!(rule.scale > 0.0 && rule.bound > 0.0))
      throw ArgumentError("oracle_misclassification: tau " + std::to_string(tau) + " is outside the admissible interval");
    const double L = std::log(rule.bound) - std::log(rule.scale);
    const double sep = std::sqrt(rkhs_norm_sq(model, a));
    const double p0 = model.priors.pi[a][0], p1 = model.priors.pi[a][1];
    if (sep == 0.0) {
      risk += L <= 0.0 ? p0 : p1;
      continue;
    }
    risk += p0 * normal_cdf(-0.5 * sep - L / sep) + p1 * normal_cdf(-0.5 * sep + L / sep);
  }
  return risk;
}

OracleClassifier make_oracle_classifier(const PopulationModel& model, const DisparitySpec& spec, double tau,
                                        const GridPtr& grid) {
  model.validate();
  const Matrix phi = cosine_basis(*grid, model.components());
  auto group = [&](int a) {
    Matrix theta(2, static_cast<Eigen::Index>(model.components()));
    theta.row(0) = model.theta[a][0].transpose();
    theta.row(1) = model.theta[a][1].transpose();
    return GroupScore(grid, model.lambda[a], phi, theta);
  };
  return {model, spec, tau, ScoreFunctional{{group(0), group(1)}}};
}

int oracle_decide(const OracleClassifier& clf, int a, double log_eta) noexcept {
  return group_threshold(clf.model.priors, clf.spec, a, clf.tau).accepts_or_ties(log_eta) ? 1 : 0;
}

int oracle_predict(const OracleClassifier& clf, const FunctionSample& x, int a) {
  if (a != 0 && a != 1) throw ArgumentError("group must be 0 or 1");
  return oracle_decide(clf, a, clf.score.log_density_ratio(x, a));
}

Vector oracle_predict(const OracleClassifier& clf, const Dataset& data) {
  if (!same_grid(data.grid(), clf.score.groups[0].grid()))
    throw StructuralError("oracle_predict: data is not on the classifier grid");
  const std::array<Vector, 2> scores{clf.score.groups[0].evaluate(data.curves()),
                                     clf.score.groups[1].evaluate(data.curves())};
  Vector out(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int a = data.a()[i];
    out(static_cast<Eigen::Index>(i)) = oracle_decide(clf, a, scores[a](static_cast<Eigen::Index>(i)));
  }
  return out;
}

MonteCarloEstimate monte_carlo_rule(const PopulationModel& model, const DisparitySpec& spec, double tau,
                                    std::size_t draws, std::uint64_t seed) {
  model.validate();
  if (draws == 0) throw ArgumentError("monte_carlo_rule: draws must be positive");
  const auto K = static_cast<Eigen::Index>(model.components());
  const std::uint64_t stride = static_cast<std::uint64_t>(K + (K % 2));
  const CounterRng root(seed);
  MonteCarloEstimate est;
  std::vector<double> z(static_cast<std::size_t>(K));
  for (int a = 0; a < 2; ++a) {
    const Vector d = model.theta[a][1] - model.theta[a][0];
    const Vector c = d.array() / model.lambda[a].array();
    const Vector noise_coef = c.array() * model.lambda[a].array().sqrt();
    const GroupThreshold rule = group_threshold(model.priors, spec, a, tau);
    for (int y = 0; y < 2; ++y) {
      const Vector centred = model.theta[a][y] - 0.5 * (model.theta[a][0] + model.theta[a][1]);
      const double base = c.dot(centred);
      const CounterRng rng = root.child(static_cast<std::uint64_t>(2 * a + y));
      std::size_t accepted = 0;
      for (std::size_t i = 0; i < draws; ++i) {
        const std::uint64_t first = i * stride;
        if (model.family == ScoreFamily::Gaussian) {
          rng.fill_normal(first, z);
        } else {
          for (Eigen::Index k = 0; k < K; ++k)
            z[static_cast<std::size_t>(k)] =
                std::sqrt(3.0) * (2.0 * rng.uniform(first + static_cast<std::uint64_t>(k)) - 1.0);
        }
        double ell = base;
        for (Eigen::Index k = 0; k < K; ++k) ell += noise_coef(k) * z[static_cast<std::size_t>(k)];
        if (rule.accepts_or_ties(ell)) ++accepted;
      }
      est.positive_rate[a][y] = static_cast<double>(accepted) / static_cast<double>(draws);
    }
  }
  for (int a = 0; a < 2; ++a)
    est.error += model.priors.pi[a][0] * est.positive_rate[a][0] +
                 model.priors.pi[a][1] * (1.0 - est.positive_rate[a][1]);
  est.disparity = disparity_from_rates(est.positive_rate, spec);
  return est;
}

}  // namespace fairflda
