#pragma once

// Discretised L2([0,1]): grids with trapezoid weights, function samples and
// labelled datasets sharing one grid.

#include <array>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace fairflda {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
/// Curves stored one per row.
using CurveMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Quadrature grid on [0,1]. Immutable once built.
class Grid {
 public:
  /// Validates: strictly ascending points from 0 to 1, positive weights.
  Grid(Vector points, Vector weights);

  std::size_t size() const noexcept { return static_cast<std::size_t>(points_.size()); }
  const Vector& points() const noexcept { return points_; }
  const Vector& weights() const noexcept { return weights_; }

  /// Same size and identical coordinates and weights.
  bool same_as(const Grid& other) const noexcept;

 private:
  Vector points_;
  Vector weights_;
};

using GridPtr = std::shared_ptr<const Grid>;

/// m equally spaced points with trapezoid weights (h/2, h, ..., h, h/2).
GridPtr uniform_grid(std::size_t m);

/// True when both pointers refer to the same grid or to equal grids.
bool same_grid(const GridPtr& a, const GridPtr& b) noexcept;

/// A real function observed on a grid.
class FunctionSample {
 public:
  FunctionSample(GridPtr grid, Vector values);

  const GridPtr& grid() const noexcept { return grid_; }
  const Vector& values() const noexcept { return values_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(values_.size()); }

 private:
  GridPtr grid_;
  Vector values_;
};

double l2_inner(const FunctionSample& f, const FunctionSample& g);
double l2_norm(const FunctionSample& f);

struct LabeledSample {
  FunctionSample x;
  int a;
  int y;
};

/// Per (a, y) cell counts, indexed [a][y].
using CellCounts = std::array<std::array<std::size_t, 2>, 2>;

/// Labelled curves on one shared grid; row i of curves() is sample i.
class Dataset {
 public:
  Dataset(GridPtr grid, CurveMatrix curves, std::vector<int> a, std::vector<int> y);
  explicit Dataset(const std::vector<LabeledSample>& samples);

  const GridPtr& grid() const noexcept { return grid_; }
  const CurveMatrix& curves() const noexcept { return curves_; }
  const std::vector<int>& a() const noexcept { return a_; }
  const std::vector<int>& y() const noexcept { return y_; }
  std::size_t size() const noexcept { return a_.size(); }
  bool empty() const noexcept { return a_.empty(); }

  const CellCounts& counts() const noexcept { return counts_; }
  std::size_t count(int a, int y) const { return counts_.at(a).at(y); }

  LabeledSample sample(std::size_t i) const;
  FunctionSample curve(std::size_t i) const;

  Dataset subset(std::span<const std::size_t> rows) const;
  /// Row indices of the (a, y) cell in ascending order.
  std::vector<std::size_t> cell_rows(int a, int y) const;

 private:
  GridPtr grid_;
  CurveMatrix curves_;
  std::vector<int> a_;
  std::vector<int> y_;
  CellCounts counts_{};
};

}  // namespace fairflda
