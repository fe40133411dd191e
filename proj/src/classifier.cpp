#include "fairflda/classifier.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <sstream>

#include "fairflda/errors.hpp"
#include "fairflda/io.hpp"
#include "fairflda/rng.hpp"

namespace fairflda {

namespace {

constexpr std::uint64_t kSplitSalt = 0x5350;  // "SP"
constexpr std::uint64_t kCvSalt = 0x4356;     // "CV"

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

std::string_view to_string(Variant v) noexcept {
  switch (v) {
    case Variant::FLDA: return "FLDA";
    case Variant::FairFLDA: return "Fair-FLDA";
    case Variant::FairFLDAc: return "Fair-FLDA_c";
  }
  return "?";
}

Variant parse_variant(std::string_view text) {
  const auto s = lower(text);
  if (s == "flda") return Variant::FLDA;
  if (s == "fair" || s == "fair-flda" || s == "fairflda") return Variant::FairFLDA;
  if (s == "fairc" || s == "fair-flda_c" || s == "fairfldac" || s == "fair-fldac") return Variant::FairFLDAc;
  throw ArgumentError("unknown variant '" + std::string(text) + "' (expected flda, fair or fairc)");
}

void FitConfig::validate() const {
  if (!(delta >= 0.0)) throw ArgumentError("delta must be nonnegative");
  if (!(rho > 0.0 && rho < 1.0)) throw ArgumentError("rho must lie in (0, 1)");
  if (J && *J == 0) throw ArgumentError("truncation level must be at least 1");
  if (cv_folds < 2) throw ArgumentError("cross-validation needs at least 2 folds");
  if (kappa_override && !(*kappa_override >= 0.0)) throw ArgumentError("kappa must be nonnegative");
  for (const auto j : J_grid)
    if (j == 0) throw ArgumentError("truncation grid entries must be at least 1");
}

void Manifest::set(std::string key, std::string value) {
  for (auto& [k, v] : entries_)
    if (k == key) {
      v = std::move(value);
      return;
    }
  entries_.emplace_back(std::move(key), std::move(value));
}

void Manifest::set(std::string key, double value) { set(std::move(key), format_double(value)); }

std::optional<std::string> Manifest::get(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return v;
  return std::nullopt;
}

std::string Manifest::to_text() const {
  std::ostringstream os;
  for (const auto& [k, v] : entries_) os << k << " = " << v << '\n';
  return os.str();
}

HalfModel fit_half(const Dataset& train, const Dataset& calibration, std::size_t J, std::size_t j_max) {
  if (!same_grid(train.grid(), calibration.grid()))
    throw StructuralError("training and calibration data use different grids");
  if (j_max == 0) j_max = default_j_max(*train.grid());
  if (J > j_max) throw TruncationError("truncation level exceeds the number of computed components");
  const auto models = fit_group_models(train, j_max);
  HalfModel h{models[0].priors, make_score(models, J), {}, calibration.size()};
  h.calibration = calibration_scores(h.score, calibration);
  return h;
}

int HalfFit::decide(int a, double log_eta) const noexcept {
  return group_threshold(model->priors, spec, a, solution.tau).accepts(log_eta) ? 1 : 0;
}

HalfFit calibrate(std::shared_ptr<const HalfModel> model, const FitConfig& cfg) {
  cfg.validate();
  HalfFit h;
  h.spec = bilinear_coefficients(cfg.disparity, model->priors);
  const auto& scores = model->calibration;
  switch (cfg.variant) {
    case Variant::FLDA:
      h.delta_eff = std::numeric_limits<double>::infinity();
      h.solution = {0.0, true, empirical_disparity(scores, h.spec, model->priors, 0.0), 1};
      break;
    case Variant::FairFLDA:
      h.delta_eff = cfg.delta;
      h.solution = solve_tau(scores, h.spec, model->priors, h.delta_eff);
      break;
    case Variant::FairFLDAc:
      h.kappa = cfg.kappa_override ? *cfg.kappa_override
                                   : dkw_calibration_constant(model->n_calibration, cfg.rho, cfg.delta);
      h.delta_eff = std::max(0.0, cfg.delta - h.kappa);
      h.solution = solve_tau(scores, h.spec, model->priors, h.delta_eff);
      break;
  }
  h.model = std::move(model);
  return h;
}

FittedFairClassifier::FittedFairClassifier(std::vector<HalfFit> halves, bool cross_fit, std::size_t J,
                                           Manifest manifest)
    : halves_(std::move(halves)), cross_fit_(cross_fit), J_(J), manifest_(std::move(manifest)) {
  if (halves_.empty()) throw ArgumentError("classifier needs at least one half");
  if (cross_fit_ && halves_.size() != 2) throw ArgumentError("cross-fitted classifier needs two halves");
}

double FittedFairClassifier::predict(const FunctionSample& x, int a) const {
  if (a != 0 && a != 1) throw ArgumentError("group must be 0 or 1");
  int votes = 0;
  for (const auto& h : halves_) votes += h.decide(a, h.model->score.log_density_ratio(x, a));
  return static_cast<double>(votes) / static_cast<double>(halves_.size());
}

Vector FittedFairClassifier::predict(const Dataset& data) const {
  if (!same_grid(data.grid(), grid())) throw StructuralError("predict: data is not on the model grid");
  Vector out = Vector::Zero(static_cast<Eigen::Index>(data.size()));
  for (const auto& h : halves_) {
    const std::array<Vector, 2> scores{h.model->score.groups[0].evaluate(data.curves()),
                                       h.model->score.groups[1].evaluate(data.curves())};
    for (std::size_t i = 0; i < data.size(); ++i) {
      const int a = data.a()[i];
      out(static_cast<Eigen::Index>(i)) += h.decide(a, scores[a](static_cast<Eigen::Index>(i)));
    }
  }
  return out / static_cast<double>(halves_.size());
}

bool FittedFairClassifier::feasible() const noexcept {
  return std::all_of(halves_.begin(), halves_.end(), [](const HalfFit& h) { return h.solution.feasible; });
}

double predict(const FittedFairClassifier& clf, const FunctionSample& x, int a) { return clf.predict(x, a); }

std::pair<Dataset, Dataset> split_halves(const Dataset& data, std::uint64_t seed) {
  const CounterRng rng(mix_seed(seed, kSplitSalt));
  std::vector<std::size_t> first, second;
  for (int a = 0; a < 2; ++a)
    for (int y = 0; y < 2; ++y) {
      const auto rows = data.cell_rows(a, y);
      if (rows.size() < 4)
        throw DegenerateCellError("split_halves: cell (a=" + std::to_string(a) + ", y=" + std::to_string(y) +
                                  ") has " + std::to_string(rows.size()) + " samples, need at least 4");
      const auto perm = permutation(rng.child(static_cast<std::uint64_t>(2 * a + y)), rows.size());
      const std::size_t take = (rows.size() + 1) / 2;
      for (std::size_t k = 0; k < rows.size(); ++k) (k < take ? first : second).push_back(rows[perm[k]]);
    }
  std::sort(first.begin(), first.end());
  std::sort(second.begin(), second.end());
  return {data.subset(first), data.subset(second)};
}

namespace {

// fold index for every row, stratified by cell
std::vector<std::size_t> assign_folds(const Dataset& data, std::size_t folds, const CounterRng& rng) {
  std::vector<std::size_t> fold(data.size(), 0);
  for (int a = 0; a < 2; ++a)
    for (int y = 0; y < 2; ++y) {
      const auto rows = data.cell_rows(a, y);
      const auto perm = permutation(rng.child(static_cast<std::uint64_t>(2 * a + y)), rows.size());
      for (std::size_t k = 0; k < rows.size(); ++k) fold[rows[perm[k]]] = k % folds;
    }
  return fold;
}

bool folds_viable(const Dataset& data, std::size_t folds) {
  for (int a = 0; a < 2; ++a)
    for (int y = 0; y < 2; ++y) {
      const std::size_t n = data.count(a, y);
      const std::size_t largest_fold = (n + folds - 1) / folds;
      if (n < folds || n < largest_fold + 2) return false;
    }
  return true;
}

}  // namespace

CvResult select_truncation_cv(const Dataset& data, const std::vector<std::size_t>& J_grid, std::size_t folds,
                              std::uint64_t seed, std::size_t j_max) {
  if (folds < 2) throw ArgumentError("select_truncation_cv: folds must be at least 2");
  if (j_max == 0) j_max = default_j_max(*data.grid());
  CvResult result;
  result.grid = J_grid;
  if (result.grid.empty())
    for (std::size_t j = 1; j <= j_max; ++j) result.grid.push_back(j);
  for (const auto j : result.grid)
    if (j == 0) throw ArgumentError("select_truncation_cv: grid entries must be at least 1");
  if (result.grid.size() == 1) {
    result.J = result.grid.front();
    result.mean_error = {0.0};
    result.folds = 0;
    return result;
  }
  while (folds > 2 && !folds_viable(data, folds)) --folds;
  if (!folds_viable(data, folds)) throw DegenerateCellError("select_truncation_cv: cells too small for 2 folds");
  result.folds = folds;

  const std::size_t top = std::min(j_max, *std::max_element(result.grid.begin(), result.grid.end()));
  const auto fold_of = assign_folds(data, folds, CounterRng(mix_seed(seed, kCvSalt)));
  std::vector<double> error_sum(top, 0.0);
  std::size_t usable = top;

  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t i = 0; i < data.size(); ++i) (fold_of[i] == f ? test_rows : train_rows).push_back(i);
    const Dataset train = data.subset(train_rows);
    const Dataset test = data.subset(test_rows);
    const auto models = fit_group_models(train, top);
    std::array<Matrix, 2> cum;
    for (int a = 0; a < 2; ++a) {
      const std::size_t k = std::min(top, models[a].eigen.usable());
      usable = std::min(usable, k);
      cum[a] = cumulative_log_ratios(models[a], test.curves(), k);
    }
    const DisparitySpec none = bilinear_coefficients(DisparityKind::DO, models[0].priors);
    for (std::size_t j = 0; j < usable; ++j) {
      std::size_t wrong = 0;
      for (std::size_t i = 0; i < test.size(); ++i) {
        const int a = test.a()[i];
        const bool yes = group_threshold(models[0].priors, none, a, 0.0)
                             .accepts(cum[a](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        if (static_cast<int>(yes) != test.y()[i]) ++wrong;
      }
      error_sum[j] += static_cast<double>(wrong) / static_cast<double>(test.size());
    }
  }

  result.mean_error.clear();
  double best = std::numeric_limits<double>::infinity();
  for (const auto j : result.grid) {
    const double e = j <= usable ? error_sum[j - 1] / static_cast<double>(folds)
                                 : std::numeric_limits<double>::infinity();
    result.mean_error.push_back(e);
    if (e < best || (e == best && j < result.J)) {
      best = e;
      result.J = j;
    }
  }
  if (!std::isfinite(best)) throw TruncationError("select_truncation_cv: no usable truncation level in the grid");
  return result;
}

FittedFairClassifier fit(const Dataset& data, const FitConfig& cfg) {
  cfg.validate();
  const std::size_t j_max = cfg.j_max ? cfg.j_max : default_j_max(*data.grid());
  Manifest manifest;
  manifest.set("variant", std::string(to_string(cfg.variant)));
  manifest.set("disparity", std::string(to_string(cfg.disparity)));
  manifest.set("delta", cfg.delta);
  manifest.set("rho", cfg.rho);
  manifest.set("seed", std::to_string(cfg.seed));
  manifest.set("cross_fit", cfg.cross_fit ? "true" : "false");
  manifest.set("n", std::to_string(data.size()));

  std::size_t J = 0;
  if (cfg.J) {
    J = *cfg.J;
    manifest.set("J_source", "fixed");
  } else {
    const auto cv = select_truncation_cv(data, cfg.J_grid, cfg.cv_folds, cfg.seed, j_max);
    J = cv.J;
    manifest.set("J_source", "cv");
    manifest.set("cv_folds", std::to_string(cv.folds));
  }
  manifest.set("J", std::to_string(J));

  auto [d1, d2] = split_halves(data, cfg.seed);
  std::vector<std::pair<const Dataset*, const Dataset*>> roles{{&d1, &d2}};
  if (cfg.cross_fit) roles.emplace_back(&d2, &d1);

  std::vector<HalfFit> halves;
  for (std::size_t h = 0; h < roles.size(); ++h) {
    auto model = std::make_shared<const HalfModel>(fit_half(*roles[h].first, *roles[h].second, J, j_max));
    halves.push_back(calibrate(std::move(model), cfg));
    const auto& fitted = halves.back();
    const std::string p = "half" + std::to_string(h + 1) + ".";
    manifest.set(p + "n_train", std::to_string(roles[h].first->size()));
    manifest.set(p + "n_calibration", std::to_string(roles[h].second->size()));
    manifest.set(p + "kappa", fitted.kappa);
    manifest.set(p + "delta_eff", fitted.delta_eff);
    manifest.set(p + "tau", fitted.solution.tau);
    manifest.set(p + "achieved", fitted.solution.achieved);
    manifest.set(p + "feasible", fitted.solution.feasible ? "true" : "false");
    manifest.set(p + "candidates_scanned", std::to_string(fitted.solution.candidates_scanned));
  }
  return FittedFairClassifier(std::move(halves), cfg.cross_fit, J, std::move(manifest));
}

}  // namespace fairflda
