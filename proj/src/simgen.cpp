#include "fairflda/simgen.hpp"

#include <cmath>
#include <numbers>

#include "fairflda/errors.hpp"
#include "fairflda/rng.hpp"

namespace fairflda {

void ScenarioConfig::validate() const {
  for (const double p : {p_a1, p_y1_a0, p_y1_a1})
    if (!(p > 0.0 && p < 1.0)) throw ArgumentError("scenario probabilities must lie in (0, 1)");
  if (!(beta > 0.0)) throw ArgumentError("beta must be positive");
  if (m < 3) throw ArgumentError("grid needs at least 3 points");
  if (K == 0) throw ArgumentError("scenario needs at least one component");
}

namespace {

std::string normalise_name(std::string_view name) {
  std::string out(name);
  const std::string greek = "\xCE\xB2";  // UTF-8 beta
  for (std::size_t pos = out.find(greek); pos != std::string::npos; pos = out.find(greek, pos))
    out.replace(pos, greek.size(), "beta");
  return out;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"main-beta1.5", "main-beta2", "nongauss-beta1.5", "perfect-I-beta0.5", "perfect-II-beta0.5"};
}

ScenarioConfig preset(std::string_view name, std::size_t n_train) {
  std::string key = normalise_name(name);
  if (const auto slash = key.find("/n="); slash != std::string::npos) {
    try {
      n_train = std::stoul(key.substr(slash + 3));
    } catch (const std::exception&) {
      throw ArgumentError("bad sample size in preset name '" + std::string(name) + "'");
    }
    key.resize(slash);
  }
  if (n_train != 1000 && n_train != 2000 && n_train != 5000)
    throw ArgumentError("preset sample size must be 1000, 2000 or 5000");
  ScenarioConfig cfg;
  cfg.name = key;
  cfg.n_train = n_train;
  if (key == "main-beta1.5") {
    cfg.beta = 1.5;
  } else if (key == "main-beta2") {
    cfg.beta = 2.0;
  } else if (key == "nongauss-beta1.5") {
    cfg.beta = 1.5;
    cfg.family = ScoreFamily::Uniform;
  } else if (key == "perfect-I-beta0.5") {
    cfg.beta = 0.5;
  } else if (key == "perfect-II-beta0.5") {
    cfg.beta = 0.5;
    cfg.p_y1_a0 = 0.5;
    cfg.p_y1_a1 = 0.5;
  } else {
    throw ArgumentError("unknown preset '" + std::string(name) + "'");
  }
  return cfg;
}

PopulationModel population_model(const ScenarioConfig& cfg) {
  cfg.validate();
  PopulationModel model;
  model.family = cfg.family;
  const double p_a0 = 1.0 - cfg.p_a1;
  model.priors.pi[0] = {p_a0 * (1.0 - cfg.p_y1_a0), p_a0 * cfg.p_y1_a0};
  model.priors.pi[1] = {cfg.p_a1 * (1.0 - cfg.p_y1_a1), cfg.p_a1 * cfg.p_y1_a1};
  const auto K = static_cast<Eigen::Index>(cfg.K);
  const std::array<double, 2> lambda_scale{1.0, 2.0};
  const std::array<double, 2> mean_scale{0.8, std::numbers::sqrt2};
  for (int a = 0; a < 2; ++a) {
    model.lambda[a].resize(K);
    model.theta[a][0] = Vector::Zero(K);
    model.theta[a][1].resize(K);
    for (Eigen::Index i = 0; i < K; ++i) {
      const double k = static_cast<double>(i + 1);
      model.lambda[a](i) = lambda_scale[a] / (k * k);
      model.theta[a][1](i) = mean_scale[a] * ((i + 1) % 2 ? -1.0 : 1.0) * std::pow(k, -cfg.beta);
    }
  }
  return model;
}

GridPtr scenario_grid(const ScenarioConfig& cfg) { return uniform_grid(cfg.m); }

Dataset generate(const ScenarioConfig& cfg, const GridPtr& grid, std::size_t n, std::uint64_t replication,
                 Stream stream, std::uint64_t attempt) {
  const PopulationModel model = population_model(cfg);
  if (grid->size() != cfg.m) throw StructuralError("generate: grid size differs from the scenario");
  const auto K = static_cast<Eigen::Index>(cfg.K);
  const Matrix phi = cosine_basis(*grid, cfg.K);
  const CounterRng rng =
      CounterRng(cfg.seed).child(replication).child(static_cast<std::uint64_t>(stream)).child(attempt);
  // counters per sample: A, Y, then K scores; even stride keeps Box-Muller pairs aligned
  const std::uint64_t stride = static_cast<std::uint64_t>(K + 2 + (K % 2));

  Matrix scores(static_cast<Eigen::Index>(n), K);
  Matrix mean_coef(static_cast<Eigen::Index>(n), K);
  std::vector<int> a(n), y(n);
  std::vector<double> z(static_cast<std::size_t>(K));
  const double root3 = std::sqrt(3.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const std::uint64_t base = i * stride;
    a[i] = rng.uniform(base) < cfg.p_a1 ? 1 : 0;
    y[i] = rng.uniform(base + 1) < (a[i] ? cfg.p_y1_a1 : cfg.p_y1_a0) ? 1 : 0;
    if (cfg.family == ScoreFamily::Gaussian) {
      rng.fill_normal(base + 2, z);
    } else {
      for (Eigen::Index k = 0; k < K; ++k)
        z[static_cast<std::size_t>(k)] = root3 * (2.0 * rng.uniform(base + 2 + static_cast<std::uint64_t>(k)) - 1.0);
    }
    for (Eigen::Index k = 0; k < K; ++k)
      scores(row, k) = std::sqrt(model.lambda[a[i]](k)) * z[static_cast<std::size_t>(k)];
    mean_coef.row(row) = model.theta[a[i]][y[i]].transpose();
  }
  CurveMatrix curves = (scores + mean_coef) * phi.transpose();
  return Dataset(grid, std::move(curves), std::move(a), std::move(y));
}

Dataset generate(const ScenarioConfig& cfg) { return generate(cfg, scenario_grid(cfg), cfg.n_train); }

}  // namespace fairflda
