#pragma once

// Simulated functional data: truncated Karhunen-Loeve expansions in the cosine
// basis with Gaussian or scaled-uniform scores, and named scenarios.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "fairflda/fnspace.hpp"
#include "fairflda/oracle.hpp"

namespace fairflda {

struct ScenarioConfig {
  std::string name = "custom";
  double beta = 1.5;
  double p_a1 = 0.7;        ///< P(A=1)
  double p_y1_a0 = 0.4;     ///< P(Y=1 | A=0)
  double p_y1_a1 = 0.7;     ///< P(Y=1 | A=1)
  ScoreFamily family = ScoreFamily::Gaussian;
  std::size_t n_train = 2000;
  std::size_t n_test = 5000;
  std::size_t m = 513;
  std::size_t K = 50;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Names: main-beta1.5, main-beta2, nongauss-beta1.5, perfect-I-beta0.5,
/// perfect-II-beta0.5 ("β" may replace "beta"); n in {1000, 2000, 5000}.
ScenarioConfig preset(std::string_view name, std::size_t n_train = 2000);
std::vector<std::string> preset_names();

/// Exact law of the scenario over its K components.
PopulationModel population_model(const ScenarioConfig& cfg);

GridPtr scenario_grid(const ScenarioConfig& cfg);

/// Which sample of a replication is being drawn.
enum class Stream : std::uint64_t { Train = 0, Test = 1 };

/// n labelled curves. Every draw is keyed by (seed, replication, stream,
/// attempt, sample, component), so the result does not depend on call order.
Dataset generate(const ScenarioConfig& cfg, const GridPtr& grid, std::size_t n, std::uint64_t replication = 0,
                 Stream stream = Stream::Train, std::uint64_t attempt = 0);
/// cfg.n_train training curves of replication 0.
Dataset generate(const ScenarioConfig& cfg);

}  // namespace fairflda
