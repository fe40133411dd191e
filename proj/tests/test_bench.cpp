#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "fairflda/bench.hpp"
#include "fairflda/errors.hpp"

using namespace fairflda;

namespace {

// two points per cell, rows ordered (0,0),(0,0),(0,1),(0,1),(1,0),(1,0),(1,1),(1,1)
Dataset hand_dataset() {
  auto g = uniform_grid(3);
  CurveMatrix c = CurveMatrix::Zero(8, 3);
  return Dataset(g, c, {0, 0, 0, 0, 1, 1, 1, 1}, {0, 0, 1, 1, 0, 0, 1, 1});
}

ExperimentConfig small_experiment() {
  ExperimentConfig cfg;
  cfg.scenario = preset("main-beta1.5");
  cfg.scenario.m = 65;
  cfg.scenario.n_train = 400;
  cfg.scenario.n_test = 500;
  cfg.replications = 3;
  cfg.deltas = {0.02, 0.1};
  cfg.J = 5;
  cfg.seed = 11;
  cfg.threads = 1;
  return cfg;
}

}  // namespace

TEST_CASE("test metrics on a hand dataset") {
  auto d = hand_dataset();
  Vector ones = Vector::Ones(8);
  CHECK(test_disparity(ones, d, DisparityKind::DO) == 0.0);
  CHECK(test_error(ones, d) == 0.5);

  Vector group1(8);
  group1 << 0, 0, 0, 0, 1, 1, 1, 1;
  for (auto kind : {DisparityKind::DO, DisparityKind::PD, DisparityKind::DD}) CHECK(test_disparity(group1, d, kind) == 1.0);

  Vector half = Vector::Constant(8, 0.5);
  CHECK(test_error(half, d) == 0.5);

  Vector f(8);
  f << 1, 0, 1, 0.5, 0, 0, 1, 1;
  // DO: mean(1,1) - mean(0,1) = 1 - 0.75
  CHECK(test_disparity(f, d, DisparityKind::DO) == doctest::Approx(0.25));
  // PD: mean(1,0) - mean(0,0) = 0 - 0.5
  CHECK(test_disparity(f, d, DisparityKind::PD) == doctest::Approx(-0.5));
  // DD: mean over group 1 - mean over group 0 = 0.5 - 0.625
  CHECK(test_disparity(f, d, DisparityKind::DD) == doctest::Approx(-0.125));
  // errors: y=0 rows contribute f, y=1 rows 1-f: 1 + 0 + 0 + 0.5 + 0 + 0 + 0 + 0
  CHECK(test_error(f, d) == doctest::Approx(1.5 / 8));

  Vector perfect(8);
  perfect << 0, 0, 1, 1, 0, 0, 1, 1;
  CHECK(test_error(perfect, d) == 0.0);

  auto g = uniform_grid(3);
  Dataset no_pos(g, CurveMatrix::Zero(2, 3), {0, 1}, {0, 0});
  CHECK_THROWS_AS(test_disparity(Vector::Ones(2), no_pos, DisparityKind::DO), DegenerateCellError);
  CHECK_NOTHROW(test_disparity(Vector::Ones(2), no_pos, DisparityKind::PD));
  CHECK_THROWS_AS(test_error(Vector::Ones(3), d), StructuralError);
}

TEST_CASE("nearest-rank quantile and median") {
  std::vector<double> v;
  for (int i = 100; i >= 1; --i) v.push_back(i / 100.0);
  CHECK(nearest_rank_quantile(v, 0.95) == 0.95);
  CHECK(nearest_rank_quantile(v, 1.0) == 1.0);
  CHECK(nearest_rank_quantile({3.0, 1.0, 2.0}, 0.5) == 2.0);
  CHECK(nearest_rank_quantile({5.0, 1.0, 4.0, 2.0, 3.0, 6.0, 7.0}, 0.95) == 7.0);
  std::vector<double> twenty;
  for (int i = 1; i <= 20; ++i) twenty.push_back(i);
  // ceil(0.95 * 20) = 19
  CHECK(nearest_rank_quantile(twenty, 0.95) == 19.0);
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK_THROWS_AS(median({}), ArgumentError);
  CHECK_THROWS_AS(nearest_rank_quantile({1.0}, 0.0), ArgumentError);
}

TEST_CASE("parse_method") {
  CHECK(parse_method("Oracle") == Method::Oracle);
  CHECK(parse_method("fairc") == Method::FairFLDAc);
  CHECK(parse_method("FLDA") == Method::FLDA);
  CHECK_THROWS_AS(parse_method("knn"), ArgumentError);
}

TEST_CASE("run_experiment is deterministic and independent of threads") {
  auto cfg = small_experiment();
  auto a = run_experiment(cfg);
  cfg.threads = 3;
  auto b = run_experiment(cfg);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].replication == b.rows[i].replication);
    CHECK(a.rows[i].error == b.rows[i].error);
    CHECK(a.rows[i].disparity == b.rows[i].disparity);
    CHECK(a.rows[i].tau == b.rows[i].tau);
  }
  // 3 replications x 4 methods x 2 deltas
  CHECK(a.rows.size() == 24);
  CHECK(a.summary.size() == 8);
  for (const auto& s : a.summary) {
    CHECK(s.R == 3);
    CHECK(s.median_error >= 0.0);
    CHECK(s.median_error <= 1.0);
    CHECK(s.q95_abs_disparity >= s.median_abs_disparity);
    CHECK(s.q95_abs_disparity <= 1.0);
  }
  CHECK(a.manifest.get("quantile") == "nearest-rank");
  CHECK(a.manifest.get("oracle_tau.DO.0.02").has_value());

  // FLDA ignores delta
  const auto& f1 = a.find(Method::FLDA, DisparityKind::DO, 0.02);
  const auto& f2 = a.find(Method::FLDA, DisparityKind::DO, 0.1);
  CHECK(f1.median_error == f2.median_error);
  CHECK_THROWS_AS(a.find(Method::FLDA, DisparityKind::PD, 0.02), ArgumentError);

  cfg.seed = 12;
  auto c = run_experiment(cfg);
  CHECK(c.rows[0].error != a.rows[0].error);
}

TEST_CASE("summaries and csv tables") {
  auto cfg = small_experiment();
  cfg.replications = 2;
  cfg.methods = {Method::FairFLDA};
  cfg.kinds = {DisparityKind::DO, DisparityKind::DD};
  auto r = run_experiment(cfg);
  std::ostringstream all, err, raw;
  write_summary_csv(all, r);
  write_summary_csv(err, r, "error");
  write_raw_csv(raw, r);
  CHECK(all.str().rfind("method,delta,statistic,value\n", 0) == 0);
  CHECK(all.str().find("Fair-FLDA,0.02,median_abs_DO,") != std::string::npos);
  CHECK(all.str().find("q95_abs_DD") != std::string::npos);
  CHECK(err.str().find("median_abs") == std::string::npos);
  CHECK(raw.str().rfind("replication,method,disparity_kind,delta,error,disparity,J,tau_1,tau_2,feasible,attempts\n", 0) == 0);
  std::size_t lines = 0;
  for (char ch : raw.str()) lines += ch == '\n';
  CHECK(lines == 1 + r.rows.size());
  std::ostringstream bad;
  CHECK_THROWS_AS(write_summary_csv(bad, r, "mean"), ArgumentError);

  // recomputing the summary from the raw rows gives the same numbers
  auto again = summarise(r.rows, cfg);
  REQUIRE(again.size() == r.summary.size());
  for (std::size_t i = 0; i < again.size(); ++i) CHECK(again[i].median_error == r.summary[i].median_error);
}

TEST_CASE("non-Gaussian scenarios skip the oracle") {
  auto cfg = small_experiment();
  cfg.scenario.family = ScoreFamily::Uniform;
  cfg.replications = 1;
  cfg.methods = {Method::FLDA, Method::Oracle};
  auto r = run_experiment(cfg);
  for (const auto& row : r.rows) CHECK(row.method == Method::FLDA);
  CHECK(r.manifest.get("oracle").has_value());
}

TEST_CASE("harness oracle error matches the closed form") {
  auto cfg = small_experiment();
  cfg.scenario.m = 129;
  cfg.scenario.n_test = 5000;
  cfg.replications = 2;
  cfg.methods = {Method::Oracle};
  cfg.deltas = {std::numeric_limits<double>::infinity()};
  auto r = run_experiment(cfg);
  auto model = population_model(cfg.scenario);
  const double R0 = oracle_misclassification(model, bilinear_coefficients(DisparityKind::DO, model.priors), 0.0);
  for (const auto& row : r.rows) CHECK(std::abs(row.error - R0) < 3.0 * std::sqrt(R0 * (1 - R0) / 5000));
}

TEST_CASE("experiment validation") {
  auto cfg = small_experiment();
  cfg.replications = 0;
  CHECK_THROWS_AS(run_experiment(cfg), ArgumentError);
  cfg = small_experiment();
  cfg.deltas = {-0.1};
  CHECK_THROWS_AS(run_experiment(cfg), ArgumentError);
}

TEST_CASE("tune_kappa") {
  auto scn = preset("main-beta1.5");
  scn.m = 65;
  scn.seed = 3;
  auto data = generate(scn, scenario_grid(scn), 800);
  TuneConfig tc;
  tc.delta = 1.0;
  tc.n_splits = 5;
  tc.J = 4;
  auto easy = tune_kappa(data, tc);
  CHECK(easy.kappa == 0.0);
  CHECK(easy.found);
  CHECK(easy.grid.size() == 1);

  tc.delta = 0.05;
  tc.grid_points = 6;
  auto a = tune_kappa(data, tc);
  auto b = tune_kappa(data, tc);
  CHECK(a.kappa == b.kappa);
  CHECK(a.quantiles == b.quantiles);
  CHECK(a.kappa >= 0.0);
  CHECK(a.kappa <= 0.05);
  if (a.found) CHECK(a.quantiles.back() <= 0.05);
  for (std::size_t i = 0; i < a.grid.size(); ++i) CHECK(a.grid[i] == doctest::Approx(0.01 * i));

  tc.grid_points = 1;
  CHECK_THROWS_AS(tune_kappa(data, tc), ArgumentError);
}
