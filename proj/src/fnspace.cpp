#include "fairflda/fnspace.hpp"

#include <cmath>
#include <string>

#include "fairflda/errors.hpp"

namespace fairflda {

Grid::Grid(Vector points, Vector weights) : points_(std::move(points)), weights_(std::move(weights)) {
  const auto m = points_.size();
  if (m < 2) throw ArgumentError("grid needs at least two points");
  if (weights_.size() != m) throw StructuralError("grid weights and points differ in length");
  if (points_(0) != 0.0 || points_(m - 1) != 1.0)
    throw ArgumentError("grid must start at 0 and end at 1");
  for (Eigen::Index i = 1; i < m; ++i)
    if (!(points_(i) > points_(i - 1))) throw ArgumentError("grid points must be strictly ascending");
  for (Eigen::Index i = 0; i < m; ++i)
    if (!(weights_(i) > 0.0) || !std::isfinite(weights_(i)))
      throw ArgumentError("grid weights must be positive and finite");
  if (std::abs(weights_.sum() - 1.0) > 1e-10) throw ArgumentError("grid weights must sum to 1");
}

bool Grid::same_as(const Grid& other) const noexcept {
  return points_.size() == other.points_.size() && points_ == other.points_ && weights_ == other.weights_;
}

GridPtr uniform_grid(std::size_t m) {
  if (m < 3) throw ArgumentError("uniform_grid: m must be at least 3, got " + std::to_string(m));
  const auto n = static_cast<Eigen::Index>(m);
  const double h = 1.0 / static_cast<double>(m - 1);
  Vector points(n), weights(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    points(i) = static_cast<double>(i) * h;
    weights(i) = h;
  }
  points(n - 1) = 1.0;
  weights(0) = weights(n - 1) = 0.5 * h;
  return std::make_shared<const Grid>(std::move(points), std::move(weights));
}

bool same_grid(const GridPtr& a, const GridPtr& b) noexcept {
  if (a == b) return true;
  if (!a || !b) return false;
  return a->same_as(*b);
}

FunctionSample::FunctionSample(GridPtr grid, Vector values) : grid_(std::move(grid)), values_(std::move(values)) {
  if (!grid_) throw StructuralError("function sample without a grid");
  if (values_.size() != static_cast<Eigen::Index>(grid_->size()))
    throw StructuralError("function sample length " + std::to_string(values_.size()) +
                          " does not match grid length " + std::to_string(grid_->size()));
  if (!values_.allFinite()) throw ArgumentError("function sample has non-finite values");
}

double l2_inner(const FunctionSample& f, const FunctionSample& g) {
  if (!same_grid(f.grid(), g.grid())) throw StructuralError("l2_inner: samples live on different grids");
  const Vector& w = f.grid()->weights();
  return (w.array() * f.values().array() * g.values().array()).sum();
}

double l2_norm(const FunctionSample& f) { return std::sqrt(std::max(0.0, l2_inner(f, f))); }

namespace {

CellCounts count_cells(const std::vector<int>& a, const std::vector<int>& y) {
  CellCounts c{};
  for (std::size_t i = 0; i < a.size(); ++i) ++c[a[i]][y[i]];
  return c;
}

}  // namespace

Dataset::Dataset(GridPtr grid, CurveMatrix curves, std::vector<int> a, std::vector<int> y)
    : grid_(std::move(grid)), curves_(std::move(curves)), a_(std::move(a)), y_(std::move(y)) {
  if (!grid_) throw StructuralError("dataset without a grid");
  if (a_.size() != y_.size() || static_cast<std::size_t>(curves_.rows()) != a_.size())
    throw StructuralError("dataset columns differ in length");
  if (curves_.rows() > 0 && curves_.cols() != static_cast<Eigen::Index>(grid_->size()))
    throw StructuralError("dataset curves do not match the grid length");
  for (std::size_t i = 0; i < a_.size(); ++i)
    if ((a_[i] != 0 && a_[i] != 1) || (y_[i] != 0 && y_[i] != 1))
      throw ArgumentError("sensitive attribute and label must be 0 or 1 (row " + std::to_string(i) + ")");
  if (!curves_.allFinite()) throw ArgumentError("dataset has non-finite curve values");
  counts_ = count_cells(a_, y_);
}

Dataset::Dataset(const std::vector<LabeledSample>& samples) {
  if (samples.empty()) throw ArgumentError("dataset from an empty sample list");
  grid_ = samples.front().x.grid();
  curves_.resize(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(grid_->size()));
  a_.reserve(samples.size());
  y_.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (!same_grid(grid_, s.x.grid())) throw StructuralError("dataset samples must share one grid");
    if ((s.a != 0 && s.a != 1) || (s.y != 0 && s.y != 1))
      throw ArgumentError("sensitive attribute and label must be 0 or 1");
    curves_.row(static_cast<Eigen::Index>(i)) = s.x.values().transpose();
    a_.push_back(s.a);
    y_.push_back(s.y);
  }
  counts_ = count_cells(a_, y_);
}

LabeledSample Dataset::sample(std::size_t i) const { return {curve(i), a_.at(i), y_.at(i)}; }

FunctionSample Dataset::curve(std::size_t i) const {
  if (i >= size()) throw ArgumentError("dataset row out of range");
  return FunctionSample(grid_, curves_.row(static_cast<Eigen::Index>(i)).transpose());
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  CurveMatrix sub(static_cast<Eigen::Index>(rows.size()), curves_.cols());
  std::vector<int> sa, sy;
  sa.reserve(rows.size());
  sy.reserve(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto r = rows[k];
    if (r >= size()) throw ArgumentError("subset row out of range");
    sub.row(static_cast<Eigen::Index>(k)) = curves_.row(static_cast<Eigen::Index>(r));
    sa.push_back(a_[r]);
    sy.push_back(y_[r]);
  }
  return Dataset(grid_, std::move(sub), std::move(sa), std::move(sy));
}

std::vector<std::size_t> Dataset::cell_rows(int a, int y) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < size(); ++i)
    if (a_[i] == a && y_[i] == y) rows.push_back(i);
  return rows;
}

}  // namespace fairflda
