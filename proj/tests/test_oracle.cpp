#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fairflda/errors.hpp"
#include "fairflda/oracle.hpp"
#include "fairflda/simgen.hpp"

using namespace fairflda;

namespace {

double harmonic(int n) {
  double h = 0.0;
  for (int k = 1; k <= n; ++k) h += 1.0 / k;
  return h;
}

double Phi(double x) { return 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2)); }

// One-component model with separation `sep` in both groups.
PopulationModel scalar_model(double sep0, double sep1, ClassPriors pi) {
  PopulationModel m;
  m.priors = pi;
  for (int a = 0; a < 2; ++a) {
    m.lambda[a] = Vector::Ones(1);
    m.theta[a][0] = Vector::Zero(1);
    m.theta[a][1] = Vector::Constant(1, a ? sep1 : sep0);
  }
  return m;
}

// Independent sampler: draws X-scores with std::normal_distribution and
// applies the population rule with the non-strict inequality.
std::array<std::array<double, 2>, 2> sampled_rates(const PopulationModel& m, const DisparitySpec& spec, double tau,
                                                   int draws, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z;
  std::array<std::array<double, 2>, 2> rate{};
  const auto K = m.lambda[0].size();
  for (int a = 0; a < 2; ++a) {
    const double scale = m.priors(a, 1) - tau * spec.s[a];
    const double bound = m.priors(a, 0) + tau * spec.b[a];
    for (int y = 0; y < 2; ++y) {
      int hits = 0;
      for (int i = 0; i < draws; ++i) {
        double ell = 0.0;
        for (Eigen::Index k = 0; k < K; ++k) {
          const double x = m.theta[a][y](k) + std::sqrt(m.lambda[a](k)) * z(gen);
          const double d = m.theta[a][1](k) - m.theta[a][0](k);
          ell += d * (x - m.theta[a][0](k)) / m.lambda[a](k) - 0.5 * d * d / m.lambda[a](k);
        }
        if (scale * std::exp(ell) >= bound) ++hits;
      }
      rate[a][y] = double(hits) / draws;
    }
  }
  return rate;
}

}  // namespace

TEST_CASE("rkhs norms of the main scenario") {
  auto model = population_model(preset("main-beta1.5"));
  CHECK(std::abs(rkhs_norm_sq(model, 0) - 0.64 * harmonic(50)) < 1e-12);
  CHECK(std::abs(rkhs_norm_sq(model, 1) - harmonic(50)) < 1e-12);
  CHECK(std::abs(rkhs_norm_sq(model, 0) - 2.8795) < 1e-4);
  CHECK(std::abs(rkhs_norm_sq(model, 1) - 4.4992) < 1e-4);
  auto same = model;
  same.theta[0][1] = same.theta[0][0];
  CHECK(rkhs_norm_sq(same, 0) == 0.0);
}

TEST_CASE("normal cdf") {
  CHECK(normal_cdf(0.0) == 0.5);
  CHECK(std::abs(normal_cdf(1.96) - 0.9750021048517795) < 1e-15);
  CHECK(normal_cdf(-37.0) > 0.0);
  CHECK(normal_cdf(-40.0) < 1e-300);
  CHECK(normal_cdf(-37.0) < 1e-298);
}

TEST_CASE("DO closed form matches the printed expression") {
  auto model = population_model(preset("main-beta1.5"));
  const auto spec = bilinear_coefficients(DisparityKind::DO, model.priors);
  const double n0 = std::sqrt(rkhs_norm_sq(model, 0)), n1 = std::sqrt(rkhs_norm_sq(model, 1));
  const auto& p = model.priors;
  for (double tau : {-0.1, 0.0, 0.05, 0.2, 0.45}) {
    const double expected = Phi(n1 / 2 - std::log(p(1, 0) / (p(1, 1) - tau)) / n1) -
                            Phi(n0 / 2 - std::log(p(0, 0) / (p(0, 1) + tau)) / n0);
    CHECK(std::abs(oracle_disparity(model, spec, tau) - expected) < 1e-14);
  }
  CHECK(std::abs(oracle_disparity(model, spec, 0.0) - 0.199) < 5e-4);
  // group 1 rejects everything once tau >= pi_11
  for (double tau : {0.49, 0.6, 2.0}) {
    const double expected = -Phi(n0 / 2 - std::log(p(0, 0) / (p(0, 1) + tau)) / n0);
    CHECK(std::abs(oracle_disparity(model, spec, tau) - expected) < 1e-14);
    CHECK(oracle_disparity(model, spec, tau) <= 0.0);
  }
}

TEST_CASE("identical groups have no disparity at zero") {
  ClassPriors pi;
  pi.pi = {{{0.3, 0.2}, {0.3, 0.2}}};
  auto m = scalar_model(1.3, 1.3, pi);
  for (auto kind : {DisparityKind::DO, DisparityKind::PD, DisparityKind::DD})
    CHECK(std::abs(oracle_disparity(m, bilinear_coefficients(kind, pi), 0.0)) < 1e-15);
}

TEST_CASE("closed forms agree with an independent sampler") {
  auto model = population_model(preset("main-beta1.5"));
  model.lambda[0].conservativeResize(10);
  model.lambda[1].conservativeResize(10);
  for (int a = 0; a < 2; ++a)
    for (int y = 0; y < 2; ++y) model.theta[a][y].conservativeResize(10);
  const int draws = 40000;
  const double tol = 4.0 * std::sqrt(0.25 / draws) * 2.0;
  for (auto kind : {DisparityKind::DO, DisparityKind::PD, DisparityKind::DD}) {
    const auto spec = bilinear_coefficients(kind, model.priors);
    for (double tau : {0.0, 0.08}) {
      const auto r = sampled_rates(model, spec, tau, draws, 17);
      double d = 0.0, err = 0.0;
      for (int a = 0; a < 2; ++a) {
        d += spec.s[a] * r[a][1] + spec.b[a] * r[a][0];
        err += model.priors(a, 0) * r[a][0] + model.priors(a, 1) * (1.0 - r[a][1]);
        for (int y = 0; y < 2; ++y) CHECK(std::abs(oracle_positive_rate(model, spec, a, y, tau) - r[a][y]) < tol);
      }
      CHECK(std::abs(oracle_disparity(model, spec, tau) - d) < tol);
      CHECK(std::abs(oracle_misclassification(model, spec, tau) - err) < tol);
    }
  }
}

TEST_CASE("library Monte Carlo agrees with the closed form") {
  auto model = population_model(preset("main-beta1.5"));
  const auto spec = bilinear_coefficients(DisparityKind::DO, model.priors);
  auto mc = monte_carlo_rule(model, spec, 0.0, 100000, 3);
  CHECK(std::abs(mc.error - oracle_misclassification(model, spec, 0.0)) < 0.004);
  CHECK(std::abs(mc.disparity - oracle_disparity(model, spec, 0.0)) < 0.006);
  auto again = monte_carlo_rule(model, spec, 0.0, 1000, 3);
  CHECK(again.error == monte_carlo_rule(model, spec, 0.0, 1000, 3).error);
  CHECK_THROWS_AS(monte_carlo_rule(model, spec, 0.0, 0, 3), ArgumentError);
}

TEST_CASE("misclassification limits") {
  ClassPriors pi;
  pi.pi = {{{0.25, 0.25}, {0.25, 0.25}}};
  auto far = scalar_model(20.0, 20.0, pi);
  CHECK(oracle_misclassification(far, bilinear_coefficients(DisparityKind::DO, pi), 0.0) < 1e-15);

  // weak separation: compare with the sampler
  auto near = scalar_model(0.1, 0.1, pi);
  const auto spec = bilinear_coefficients(DisparityKind::DO, pi);
  const auto r = sampled_rates(near, spec, 0.0, 200000, 5);
  double err = 0.0;
  for (int a = 0; a < 2; ++a) err += 0.25 * r[a][0] + 0.25 * (1.0 - r[a][1]);
  CHECK(std::abs(oracle_misclassification(near, spec, 0.0) - err) < 0.005);
  CHECK(oracle_misclassification(near, spec, 0.0) == doctest::Approx(2 * 0.25 * 2 * Phi(-0.05)).epsilon(1e-12));

  auto model = population_model(preset("main-beta1.5"));
  const auto dspec = bilinear_coefficients(DisparityKind::DO, model.priors);
  CHECK_THROWS_AS(oracle_misclassification(model, dspec, 0.49), ArgumentError);
  CHECK_THROWS_AS(oracle_misclassification(model, dspec, -0.125), ArgumentError);
}

TEST_CASE("oracle disparity is non-increasing in tau") {
  for (const char* name : {"main-beta1.5", "main-beta2", "perfect-I-beta0.5", "perfect-II-beta0.5"}) {
    auto model = population_model(preset(name));
    for (auto kind : {DisparityKind::DO, DisparityKind::PD, DisparityKind::DD}) {
      const auto spec = bilinear_coefficients(kind, model.priors);
      double prev = oracle_disparity(model, spec, -1.0);
      for (int i = 1; i < 200; ++i) {
        const double d = oracle_disparity(model, spec, -1.0 + 2.0 * i / 199.0);
        CHECK(d <= prev + 1e-15);
        prev = d;
      }
    }
  }
}

TEST_CASE("oracle tau meets the budget inside the admissible interval") {
  auto model = population_model(preset("main-beta1.5"));
  for (auto kind : {DisparityKind::DO, DisparityKind::PD, DisparityKind::DD}) {
    const auto spec = bilinear_coefficients(kind, model.priors);
    const double d0 = oracle_disparity(model, spec, 0.0);
    const auto iv = admissible_interval(model.priors, spec);
    for (double delta : {0.0, 0.01, 0.05, 0.1}) {
      auto t = oracle_tau(model, spec, delta);
      REQUIRE(t.feasible);
      CHECK(t.tau > iv.lo);
      CHECK(t.tau < iv.hi);
      if (std::abs(d0) <= delta) {
        CHECK(t.tau == 0.0);
      } else {
        CHECK(std::abs(t.achieved - std::copysign(delta, d0)) <= 1e-10);
        CHECK(std::signbit(t.tau) == std::signbit(d0));
        for (int a = 0; a < 2; ++a) {
          const auto rule = group_threshold(model.priors, spec, a, t.tau);
          CHECK(rule.scale > 0.0);
          CHECK(rule.bound > 0.0);
        }
      }
    }
    CHECK(oracle_tau(model, spec, 1.0).tau == 0.0);
  }
  auto t = oracle_tau(model, bilinear_coefficients(DisparityKind::DO, model.priors), 0.05);
  CHECK(t.tau > 0.0);
  CHECK(std::abs(t.achieved - 0.05) <= 1e-10);
}

TEST_CASE("risk grows as tau moves away from zero") {
  auto model = population_model(preset("main-beta1.5"));
  const auto spec = bilinear_coefficients(DisparityKind::DO, model.priors);
  const double star = oracle_tau(model, spec, 0.0).tau;
  REQUIRE(star > 0.0);
  double prev = oracle_misclassification(model, spec, 0.0);
  for (int i = 1; i <= 50; ++i) {
    const double r = oracle_misclassification(model, spec, star * i / 50.0);
    CHECK(r >= prev - 1e-15);
    prev = r;
  }
  prev = oracle_misclassification(model, spec, 0.0);
  for (int i = 1; i <= 50; ++i) {
    const double r = oracle_misclassification(model, spec, -0.1 * i / 50.0);
    CHECK(r >= prev - 1e-15);
    prev = r;
  }
}

TEST_CASE("demographic disparity under perfect separation cannot be reduced") {
  auto model = population_model(preset("perfect-I-beta0.5"));
  const auto spec = bilinear_coefficients(DisparityKind::DD, model.priors);
  CHECK(std::abs(oracle_disparity(model, spec, 0.0) - 0.3) < 1e-6);
  auto t = oracle_tau(model, spec, 0.1);
  CHECK_FALSE(t.feasible);
  CHECK(std::abs(std::abs(t.achieved) - 0.3) < 0.05);
  // DO and PD are already met by the Bayes rule
  for (auto kind : {DisparityKind::DO, DisparityKind::PD}) {
    auto s = bilinear_coefficients(kind, model.priors);
    CHECK(oracle_tau(model, s, 0.01).tau == 0.0);
  }
}

TEST_CASE("closed forms are refused for uniform scores") {
  auto model = population_model(preset("nongauss-beta1.5"));
  const auto spec = bilinear_coefficients(DisparityKind::DO, model.priors);
  CHECK_THROWS_AS(oracle_disparity(model, spec, 0.0), UnsupportedError);
  CHECK_THROWS_AS(oracle_tau(model, spec, 0.05), UnsupportedError);
  auto mc = monte_carlo_rule(model, spec, 0.0, 20000, 1);
  CHECK(mc.error > 0.0);
  CHECK(mc.error < 0.5);
}

TEST_CASE("oracle classifier on the grid") {
  ClassPriors pi;
  pi.pi = {{{0.25, 0.25}, {0.25, 0.25}}};
  auto cfg = preset("main-beta1.5");
  auto model = population_model(cfg);
  model.priors = pi;
  const auto spec = bilinear_coefficients(DisparityKind::DO, pi);
  auto g = uniform_grid(513);
  auto clf = make_oracle_classifier(model, spec, 0.0, g);
  const Matrix phi = cosine_basis(*g, 50);
  for (int a = 0; a < 2; ++a) {
    CHECK(oracle_predict(clf, FunctionSample(g, phi * model.theta[a][1]), a) == 1);
    CHECK(oracle_predict(clf, FunctionSample(g, phi * model.theta[a][0]), a) == 0);
    // the grid score is the full 50-term log ratio
    const double sep = rkhs_norm_sq(model, a);
    CHECK(std::abs(clf.score.groups[a](FunctionSample(g, phi * model.theta[a][1])) - 0.5 * sep) < 1e-4 * sep);
  }
  // ties accept
  CHECK(oracle_decide(clf, 0, 0.0) == 1);
  CHECK(oracle_decide(clf, 0, -1e-12) == 0);
}

TEST_CASE("admissible interval for DO") {
  ClassPriors pi;
  pi.pi = {{{0.18, 0.12}, {0.21, 0.49}}};
  auto iv = admissible_interval(pi, bilinear_coefficients(DisparityKind::DO, pi));
  CHECK(iv.lo == doctest::Approx(-0.12));
  CHECK(iv.hi == doctest::Approx(0.49));
}
