#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fairflda/errors.hpp"
#include "fairflda/fairness.hpp"

using namespace fairflda;

namespace {

ClassPriors main_priors() {
  ClassPriors p;
  p.pi = {{{0.18, 0.12}, {0.21, 0.49}}};
  return p;
}

CalibrationScores from_eta(std::vector<double> e00, std::vector<double> e01, std::vector<double> e10,
                           std::vector<double> e11) {
  const std::array<std::array<std::vector<double>, 2>, 2> eta{{{e00, e01}, {e10, e11}}};
  CalibrationScores s;
  for (int a = 0; a < 2; ++a)
    for (int y = 0; y < 2; ++y)
      for (double v : eta[a][y]) s.log_eta[a][y].push_back(std::log(v));
  s.sort();
  return s;
}

// Indicator count in the linear domain, written straight from the rule
// 1{(pi_a1 - tau s_a) eta > pi_a0 + tau b_a}.
double brute_disparity(const CalibrationScores& s, const DisparitySpec& spec, const ClassPriors& pi, double tau) {
  double total = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int y = 0; y < 2; ++y) {
      const double c = y ? spec.s[a] : spec.b[a];
      if (c == 0.0) continue;
      double hits = 0.0;
      for (double v : s.log_eta[a][y])
        if ((pi.pi[a][1] - tau * spec.s[a]) * std::exp(v) > pi.pi[a][0] + tau * spec.b[a]) hits += 1.0;
      total += c * (hits / static_cast<double>(s.log_eta[a][y].size()));
    }
  return total;
}

// Sample-by-sample count with the library's per-sample decision, so that ties
// at exact breakpoints resolve the same way as in the sorted count.
double per_sample_disparity(const CalibrationScores& s, const DisparitySpec& spec, const ClassPriors& pi, double tau) {
  double total = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int y = 0; y < 2; ++y) {
      const double c = y ? spec.s[a] : spec.b[a];
      if (c == 0.0) continue;
      const auto rule = group_threshold(pi, spec, a, tau);
      double hits = 0.0;
      for (double v : s.log_eta[a][y]) hits += rule.accepts(v) ? 1.0 : 0.0;
      total += c * (hits / static_cast<double>(s.log_eta[a][y].size()));
    }
  return total;
}

struct Instance {
  ClassPriors pi;
  CalibrationScores scores;
  DisparitySpec spec;
};

Instance random_instance(std::mt19937_64& gen, DisparityKind kind) {
  std::uniform_real_distribution<double> u(0.05, 1.0), logv(-2.5, 2.5);
  std::uniform_int_distribution<int> size(1, 8);
  Instance in;
  double w[4], total = 0.0;
  for (double& x : w) total += (x = u(gen));
  in.pi.pi = {{{w[0] / total, w[1] / total}, {w[2] / total, w[3] / total}}};
  for (int a = 0; a < 2; ++a)
    for (int y = 0; y < 2; ++y) {
      const int n = size(gen);
      for (int i = 0; i < n; ++i) {
        // occasional exact duplicates exercise ties
        if (i > 0 && gen() % 5 == 0)
          in.scores.log_eta[a][y].push_back(in.scores.log_eta[a][y].back());
        else
          in.scores.log_eta[a][y].push_back(logv(gen));
      }
    }
  in.scores.sort();
  in.spec = bilinear_coefficients(kind, in.pi);
  return in;
}

// Breakpoints in the linear domain, independently of candidate_thresholds.
std::vector<double> brute_breakpoints(const Instance& in) {
  std::vector<double> out;
  for (int a = 0; a < 2; ++a)
    for (int y = 0; y < 2; ++y) {
      if ((y ? in.spec.s[a] : in.spec.b[a]) == 0.0) continue;
      for (double lv : in.scores.log_eta[a][y]) {
        const double v = std::exp(lv);
        const double den = in.spec.s[a] * v + in.spec.b[a];
        if (den != 0.0) out.push_back((in.pi.pi[a][1] * v - in.pi.pi[a][0]) / den);
      }
    }
  std::sort(out.begin(), out.end());
  return out;
}

// Exhaustive argmin of |tau| over zero, every breakpoint on both sides, the
// open gaps between them and the rays beyond the extremes.
std::pair<double, bool> exhaustive_argmin(const Instance& in, const std::vector<double>& bps, double delta) {
  std::vector<double> pts{0.0};
  for (int side : {1, -1}) {
    std::vector<double> mags;
    for (double t : bps)
      if (side * t > 0.0) mags.push_back(std::abs(t));
    std::sort(mags.begin(), mags.end());
    if (mags.empty()) {
      pts.push_back(side * 1.0);
      continue;
    }
    pts.push_back(side * 0.5 * mags.front());
    for (std::size_t i = 0; i < mags.size(); ++i) {
      pts.push_back(side * mags[i]);
      pts.push_back(side * (i + 1 < mags.size() ? 0.5 * (mags[i] + mags[i + 1]) : mags[i] + std::max(1.0, mags[i])));
    }
  }
  std::sort(pts.begin(), pts.end(), [](double x, double y) { return std::abs(x) < std::abs(y); });
  for (double t : pts)
    if (std::abs(per_sample_disparity(in.scores, in.spec, in.pi, t)) <= delta) return {t, true};
  return {0.0, false};
}

}  // namespace

TEST_CASE("bilinear coefficients") {
  const auto pi = main_priors();
  auto d = bilinear_coefficients(DisparityKind::DO, pi);
  CHECK(d.s[1] == 1.0);
  CHECK(d.b[1] == 0.0);
  CHECK(d.s[0] == -1.0);
  CHECK(d.b[0] == 0.0);
  auto p = bilinear_coefficients(DisparityKind::PD, pi);
  CHECK(p.s[0] == 0.0);
  CHECK(p.b[0] == -1.0);
  auto dd = bilinear_coefficients(DisparityKind::DD, pi);
  CHECK(dd.s[1] == doctest::Approx(0.7));
  CHECK(dd.b[1] == doctest::Approx(0.3));
  CHECK(dd.s[0] == doctest::Approx(-0.4));
  CHECK(dd.b[0] == doctest::Approx(-0.6));

  ClassPriors empty;
  empty.pi = {{{0.0, 0.0}, {0.5, 0.5}}};
  CHECK_THROWS_AS(bilinear_coefficients(DisparityKind::DD, empty), DegenerateCellError);
  CHECK(parse_disparity("Dd") == DisparityKind::DD);
  CHECK_THROWS_AS(parse_disparity("eo"), ArgumentError);
}

TEST_CASE("empirical disparity on hand examples") {
  const auto pi = main_priors();
  auto s = from_eta({}, {0.1, 0.1}, {}, {3.0, 3.0});
  const auto spec = bilinear_coefficients(DisparityKind::DO, pi);
  CHECK(empirical_disparity(s, spec, pi, 0.0) == 1.0);
  // tau >= pi_11 makes the group 1 rule reject everything
  CHECK(empirical_disparity(s, spec, pi, 0.49) <= 0.0);
  CHECK(empirical_disparity(s, spec, pi, 2.0) <= 0.0);

  auto sym = from_eta({}, {0.5, 2.0}, {}, {0.5, 2.0});
  ClassPriors same;
  same.pi = {{{0.25, 0.25}, {0.25, 0.25}}};
  CHECK(empirical_disparity(sym, bilinear_coefficients(DisparityKind::DO, same), same, 0.0) == 0.0);

  // DO only needs the y = 1 cells
  CHECK_THROWS_AS(empirical_disparity(s, bilinear_coefficients(DisparityKind::PD, pi), pi, 0.0), DegenerateCellError);
}

TEST_CASE("candidate thresholds match the closed form") {
  const auto pi = main_priors();
  auto s = from_eta({}, {}, {}, {3.0});
  auto cands = candidate_thresholds(s, bilinear_coefficients(DisparityKind::DO, pi), pi);
  REQUIRE(cands.size() == 1);
  CHECK(cands[0] == doctest::Approx((0.49 * 3 - 0.21) / 3).epsilon(1e-14));
  CHECK(cands[0] == doctest::Approx(0.42));

  auto t = from_eta({}, {}, {2.0}, {});
  auto pd = candidate_thresholds(t, bilinear_coefficients(DisparityKind::PD, pi), pi);
  REQUIRE(pd.size() == 1);
  CHECK(pd[0] == doctest::Approx(0.49 * 2 - 0.21));
  CHECK(pd[0] == doctest::Approx(0.77));

  CalibrationScores none;
  CHECK(candidate_thresholds(none, bilinear_coefficients(DisparityKind::DO, pi), pi).empty());
}

TEST_CASE("solve_tau basic cases") {
  const auto pi = main_priors();
  const auto spec = bilinear_coefficients(DisparityKind::DO, pi);
  auto s = from_eta({}, {0.1, 0.1}, {}, {3.0, 3.0});
  auto big = solve_tau(s, spec, pi, 1.0);
  CHECK(big.tau == 0.0);
  CHECK(big.feasible);

  auto zero = from_eta({}, {10.0}, {}, {3.0});
  auto r = solve_tau(zero, spec, pi, 0.0);
  CHECK(r.tau == 0.0);
  CHECK(r.achieved == 0.0);

  auto r2 = solve_tau(s, spec, pi, 0.0);
  CHECK(r2.feasible);
  CHECK(r2.tau > 0.0);
  CHECK(std::abs(r2.achieved) <= 1e-12);
  CHECK(std::abs(brute_disparity(s, spec, pi, r2.tau)) == 0.0);

  CHECK_THROWS_AS(solve_tau(s, spec, pi, -0.1), ArgumentError);
}

TEST_CASE("solve_tau reports infeasible demographic disparity with the smallest |D|") {
  // perfectly separated scores and P(Y=1|A=1) - P(Y=1|A=0) = 0.3
  ClassPriors pi;
  pi.pi = {{{0.18, 0.12}, {0.21, 0.49}}};
  CalibrationScores s;
  for (int i = 0; i < 40; ++i) {
    s.log_eta[0][0].push_back(-1e4 - i);
    s.log_eta[0][1].push_back(1e4 + i);
    s.log_eta[1][0].push_back(-1e4 - i);
    s.log_eta[1][1].push_back(1e4 + i);
  }
  s.sort();
  const auto spec = bilinear_coefficients(DisparityKind::DD, pi);
  CHECK(empirical_disparity(s, spec, pi, 0.0) == doctest::Approx(0.3));
  auto r = solve_tau(s, spec, pi, 0.1);
  CHECK(r.candidates_scanned > 1);
  CHECK_FALSE(r.feasible);
  CHECK(std::abs(r.achieved) == doctest::Approx(0.3));
}

TEST_CASE("dkw calibration constant") {
  CHECK(std::abs(dkw_calibration_constant(1000, 0.05, 0.1) - 0.07740) < 1e-5);
  CHECK(dkw_calibration_constant(1000, 0.05, 0.0) == 0.0);
  CHECK(dkw_calibration_constant(10, 0.05, 0.02) == 0.02);
  CHECK(dkw_calibration_constant(1000, 1.0 - 1e-12, 0.5) < 1e-6);
  CHECK_THROWS_AS(dkw_calibration_constant(10, 1.0, 0.1), ArgumentError);
  CHECK_THROWS_AS(dkw_calibration_constant(10, 0.0, 0.1), ArgumentError);
  CHECK_THROWS_AS(dkw_calibration_constant(0, 0.5, 0.1), ArgumentError);
}

TEST_CASE("group threshold rules in the log domain") {
  GroupThreshold r{0.5, 0.25};
  CHECK(r.accepts(std::log(0.6)));
  CHECK_FALSE(r.accepts(std::log(0.4)));
  CHECK(r.accepts_or_ties(std::log(0.5)));
  CHECK_FALSE(GroupThreshold{0.5, 0.25}.accepts(-std::log(2.0)));
  // nonpositive bound with positive scale accepts everything
  CHECK(GroupThreshold{0.5, -0.1}.accepts(-1e300));
  CHECK_FALSE(GroupThreshold{-0.5, 0.1}.accepts(1e300));
  CHECK(GroupThreshold{-0.5, -0.1}.accepts(std::log(0.1)));
  CHECK_FALSE(GroupThreshold{-0.5, -0.1}.accepts(std::log(0.3)));
  CHECK_FALSE(GroupThreshold{0.0, 0.0}.accepts(1.0));
  CHECK(GroupThreshold{0.0, 0.0}.accepts_or_ties(1.0));
  // extreme scores do not overflow
  CHECK(GroupThreshold{0.3, 0.2}.accepts(800.0));
  CHECK_FALSE(GroupThreshold{0.3, 0.2}.accepts(-800.0));
}

TEST_CASE("empirical disparity equals brute-force counts") {
  std::mt19937_64 gen(20240601);
  std::uniform_real_distribution<double> taus(-1.5, 1.5);
  for (auto kind : {DisparityKind::DO, DisparityKind::PD, DisparityKind::DD})
    for (int rep = 0; rep < 30; ++rep) {
      auto in = random_instance(gen, kind);
      for (int k = 0; k < 20; ++k) {
        const double tau = taus(gen);
        CHECK(empirical_disparity(in.scores, in.spec, in.pi, tau) == brute_disparity(in.scores, in.spec, in.pi, tau));
      }
    }
}

TEST_CASE("empirical disparity is a non-increasing step function") {
  std::mt19937_64 gen(77);
  for (auto kind : {DisparityKind::DO, DisparityKind::PD, DisparityKind::DD})
    for (int rep = 0; rep < 60; ++rep) {
      auto in = random_instance(gen, kind);
      double prev = empirical_disparity(in.scores, in.spec, in.pi, -3.0);
      for (int k = 1; k <= 600; ++k) {
        const double d = empirical_disparity(in.scores, in.spec, in.pi, -3.0 + 0.01 * k);
        CHECK(d <= prev);
        prev = d;
      }
      // constant between consecutive breakpoints
      auto c = candidate_thresholds(in.scores, in.spec, in.pi);
      for (std::size_t i = 0; i + 1 < c.size(); ++i) {
        const double lo = c[i] + 0.25 * (c[i + 1] - c[i]), hi = c[i] + 0.75 * (c[i + 1] - c[i]);
        CHECK(empirical_disparity(in.scores, in.spec, in.pi, lo) == empirical_disparity(in.scores, in.spec, in.pi, hi));
      }
    }
}

TEST_CASE("DO boundary values") {
  std::mt19937_64 gen(3);
  for (int rep = 0; rep < 50; ++rep) {
    auto in = random_instance(gen, DisparityKind::DO);
    CHECK(empirical_disparity(in.scores, in.spec, in.pi, in.pi(1, 1)) <= 0.0);
    CHECK(empirical_disparity(in.scores, in.spec, in.pi, -in.pi(0, 1)) >= 0.0);
  }
}

TEST_CASE("solve_tau equals the exhaustive argmin") {
  std::mt19937_64 gen(4242);
  std::uniform_real_distribution<double> deltas(0.0, 0.6);
  for (auto kind : {DisparityKind::DO, DisparityKind::PD, DisparityKind::DD})
    for (int rep = 0; rep < 40; ++rep) {
      auto in = random_instance(gen, kind);
      const auto lib = candidate_thresholds(in.scores, in.spec, in.pi);
      const auto bps = brute_breakpoints(in);
      // same breakpoints up to rounding and deduplication
      for (double t : bps) {
        auto it = std::lower_bound(lib.begin(), lib.end(), t - 1e-12 * std::max(1.0, std::abs(t)));
        REQUIRE(it != lib.end());
        CHECK(std::abs(*it - t) <= 1e-12 * std::max(1.0, std::abs(t)));
      }
      const double delta = rep % 4 == 0 ? 0.0 : deltas(gen);
      const auto sol = solve_tau(in.scores, in.spec, in.pi, delta);
      const auto [tau, found] = exhaustive_argmin(in, lib, delta);
      CHECK(sol.feasible == found);
      if (found) {
        CHECK(sol.tau == tau);
        CHECK(std::abs(sol.achieved) <= delta + 1e-12);
      }
      if (std::abs(empirical_disparity(in.scores, in.spec, in.pi, 0.0)) <= delta) CHECK(sol.tau == 0.0);
    }
}
