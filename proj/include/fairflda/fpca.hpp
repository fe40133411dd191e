#pragma once

// Estimation step of Fair-FLDA: class probabilities, group means, pooled
// within-group covariance, its discrete Mercer decomposition and the
// truncated log density ratio between the two class laws of each group.

#include <array>
#include <cstddef>

#include "fairflda/fnspace.hpp"

namespace fairflda {

/// Joint probabilities P(A=a, Y=y), indexed [a][y].
struct ClassPriors {
  std::array<std::array<double, 2>, 2> pi{};

  double operator()(int a, int y) const { return pi.at(a).at(y); }
  double group(int a) const { return pi.at(a)[0] + pi.at(a)[1]; }
};

/// pi_hat(a, y) = n_{a,y} / n. Every cell must be nonempty.
ClassPriors estimate_priors(const Dataset& train);

/// Pointwise sample means of each (a, y) cell.
struct CellMeans {
  GridPtr grid;
  std::array<std::array<Vector, 2>, 2> values;

  FunctionSample mean(int a, int y) const { return FunctionSample(grid, values.at(a).at(y)); }
};

CellMeans estimate_means(const Dataset& train);

/// Pooled covariance of group a: each class covariance uses divisor n_{a,y}-1
/// and the two are weighted by n_{a,y} / (n_{a,0} + n_{a,1}).
Matrix estimate_pooled_covariance(const Dataset& train, int a);
Matrix estimate_pooled_covariance(const Dataset& train, int a, const CellMeans& means);

/// Eigenpairs of a covariance kernel under the grid's quadrature.
struct EigenSystem {
  GridPtr grid;
  Vector eigenvalues;     ///< nonincreasing, clamped at 0
  Matrix eigenfunctions;  ///< one L2-normalised eigenfunction per column

  std::size_t size() const noexcept { return static_cast<std::size_t>(eigenvalues.size()); }
  /// Values at or below this are never used in a score.
  double floor() const;
  /// Number of leading eigenvalues strictly above floor().
  std::size_t usable() const;
  FunctionSample eigenfunction(std::size_t j) const;
};

/// min(50, m - 1).
std::size_t default_j_max(const Grid& grid) noexcept;

/// Leading j_max eigenpairs of the kernel operator, solved as the symmetric
/// problem W^{1/2} K W^{1/2}. Each eigenfunction is signed so that its
/// largest-magnitude coordinate is positive.
EigenSystem eigendecompose(const Matrix& kernel, const GridPtr& grid, std::size_t j_max);

/// theta(y, j) = <mu_y, phi_j> for j < J. Returns a 2 x J matrix.
Matrix project_mean_coeffs(const std::array<Vector, 2>& means, const EigenSystem& eigen, std::size_t J);

/// Everything estimated for one sensitive group.
struct GroupModel {
  int a = 0;
  ClassPriors priors;
  std::array<Vector, 2> mu;  ///< class means mu_{a,0}, mu_{a,1}
  Matrix cov;
  EigenSystem eigen;
  Matrix theta;              ///< 2 x eigen.size() projected mean coefficients
};

GroupModel fit_group_model(const Dataset& train, int a, std::size_t j_max);
std::array<GroupModel, 2> fit_group_models(const Dataset& train, std::size_t j_max);

/// Truncated log density ratio of one group, folded into an affine functional
///   log eta(x) = sum_j c_j <x, phi_j> + offset,  c_j = (theta_1j - theta_0j) / lambda_j.
class GroupScore {
 public:
  /// Throws TruncationError when any of the first J eigenvalues is at or below the floor.
  GroupScore(const EigenSystem& eigen, const Matrix& theta, std::size_t J);
  /// Rebuilds a score from its stored parts (lambda: J, phi: m x J, theta: 2 x J).
  GroupScore(GridPtr grid, Vector eigenvalues, Matrix eigenfunctions, Matrix theta);

  double operator()(const FunctionSample& x) const;
  /// Scores of every row of `curves` (which must live on this grid).
  Vector evaluate(const CurveMatrix& curves) const;

  std::size_t J() const noexcept { return static_cast<std::size_t>(eigenvalues_.size()); }
  const GridPtr& grid() const noexcept { return grid_; }
  const Vector& eigenvalues() const noexcept { return eigenvalues_; }
  const Matrix& eigenfunctions() const noexcept { return eigenfunctions_; }
  const Matrix& theta() const noexcept { return theta_; }
  const Vector& coefficients() const noexcept { return coef_; }
  double offset() const noexcept { return offset_; }
  /// sum_j (theta_1j - theta_0j)^2 / lambda_j
  double separation() const noexcept { return separation_; }

 private:
  void build();

  GridPtr grid_;
  Vector eigenvalues_;
  Matrix eigenfunctions_;
  Matrix theta_;
  Vector coef_;
  Vector direction_;  // quadrature-weighted sum_j c_j phi_j
  double offset_ = 0.0;
  double separation_ = 0.0;
};

/// Log density ratios of both groups.
struct ScoreFunctional {
  std::array<GroupScore, 2> groups;

  double log_density_ratio(const FunctionSample& x, int a) const { return groups.at(a)(x); }
};

ScoreFunctional make_score(const std::array<GroupModel, 2>& models, std::size_t J);

double log_density_ratio(const ScoreFunctional& score, const FunctionSample& x, int a);

/// Log density ratios of group `model.a` for every truncation 1..k at once:
/// column J-1 holds the J-term score of each row of `curves`.
Matrix cumulative_log_ratios(const GroupModel& model, const CurveMatrix& curves, std::size_t k);

}  // namespace fairflda
