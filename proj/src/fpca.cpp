#include "fairflda/fpca.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "fairflda/errors.hpp"

namespace fairflda {

namespace {

void require_cells(const Dataset& d, std::size_t minimum, const char* who) {
  for (int a = 0; a < 2; ++a)
    for (int y = 0; y < 2; ++y)
      if (d.count(a, y) < minimum)
        throw DegenerateCellError(std::string(who) + ": cell (a=" + std::to_string(a) + ", y=" +
                                  std::to_string(y) + ") has " + std::to_string(d.count(a, y)) +
                                  " samples, need at least " + std::to_string(minimum));
}

Vector cell_mean(const Dataset& d, int a, int y) {
  Vector sum = Vector::Zero(d.curves().cols());
  std::size_t n = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.a()[i] != a || d.y()[i] != y) continue;
    sum += d.curves().row(static_cast<Eigen::Index>(i)).transpose();
    ++n;
  }
  return sum / static_cast<double>(n);
}

// LU factorisation with partial pivoting of a tridiagonal matrix (dl, d, du),
// kept in place with the second superdiagonal du2 created by row swaps.
struct TridiagonalLu {
  Vector dl, d, du, du2;
  std::vector<bool> swapped;

  TridiagonalLu(const Vector& diag, const Vector& sub, double shift, double tiny)
      : dl(sub), d(diag.array() - shift), du(sub), du2(Vector::Zero(std::max<Eigen::Index>(sub.size() - 1, 0))),
        swapped(static_cast<std::size_t>(sub.size()), false) {
    const Eigen::Index n = d.size();
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      if (std::abs(d(i)) >= std::abs(dl(i))) {
        if (d(i) != 0.0) {
          const double f = dl(i) / d(i);
          dl(i) = f;
          d(i + 1) -= f * du(i);
        }
      } else {
        const double f = d(i) / dl(i);
        d(i) = dl(i);
        dl(i) = f;
        const double t = du(i);
        du(i) = d(i + 1);
        d(i + 1) = t - f * d(i + 1);
        if (i + 2 < n) {
          du2(i) = du(i + 1);
          du(i + 1) = -f * du(i + 1);
        }
        swapped[static_cast<std::size_t>(i)] = true;
      }
    }
    for (Eigen::Index i = 0; i < n; ++i)
      if (std::abs(d(i)) < tiny) d(i) = d(i) < 0.0 ? -tiny : tiny;
  }

  void solve(Vector& b) const {
    const Eigen::Index n = d.size();
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      if (!swapped[static_cast<std::size_t>(i)]) {
        b(i + 1) -= dl(i) * b(i);
      } else {
        const double t = b(i);
        b(i) = b(i + 1);
        b(i + 1) = t - dl(i) * b(i);
      }
    }
    b(n - 1) /= d(n - 1);
    if (n > 1) b(n - 2) = (b(n - 2) - du(n - 2) * b(n - 1)) / d(n - 2);
    for (Eigen::Index i = n - 3; i >= 0; --i) b(i) = (b(i) - du(i) * b(i + 1) - du2(i) * b(i + 2)) / d(i);
  }
};

// Largest k eigenpairs of a symmetric matrix, descending: Householder
// tridiagonalisation, implicit QR for the eigenvalues, inverse iteration for
// the wanted eigenvectors (reorthogonalised within clusters), back-transform.
void leading_eigenpairs(const Matrix& b, Eigen::Index k, Vector& values, Matrix& vectors) {
  const Eigen::Index n = b.rows();
  Eigen::Tridiagonalization<Matrix> tri(b);
  const Vector diag = tri.diagonal();
  const Vector sub = tri.subDiagonal();
  Eigen::SelfAdjointEigenSolver<Matrix> tev;
  tev.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  if (tev.info() != Eigen::Success) throw Error("eigendecompose: tridiagonal QR did not converge");
  const Vector& ascending = tev.eigenvalues();

  double norm = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    norm = std::max(norm, std::abs(diag(i)) + (i > 0 ? std::abs(sub(i - 1)) : 0.0) +
                              (i + 1 < n ? std::abs(sub(i)) : 0.0));
  norm = std::max(norm, std::numeric_limits<double>::min());
  const double eps = std::numeric_limits<double>::epsilon();
  const double cluster_gap = 1e-3 * norm;

  values.resize(k);
  Matrix z(n, k);
  Eigen::Index cluster_start = 0;
  for (Eigen::Index j = 0; j < k; ++j) {
    double lambda = ascending(n - 1 - j);
    values(j) = lambda;
    if (j > 0 && values(j - 1) - lambda > cluster_gap) cluster_start = j;
    // separate numerically equal eigenvalues so each gets its own vector
    if (j > cluster_start && values(j - 1) - lambda < 10.0 * eps * norm) lambda = values(j - 1) - 10.0 * eps * norm;
    const TridiagonalLu lu(diag, sub, lambda, eps * norm);
    Vector x(n);
    for (Eigen::Index i = 0; i < n; ++i) x(i) = 1.0 + 0.5 * std::sin(0.7548776662 * static_cast<double>(i + 1) * (j + 1));
    for (int it = 0; it < 4; ++it) {
      x /= x.cwiseAbs().maxCoeff();
      lu.solve(x);
      for (Eigen::Index c = cluster_start; c < j; ++c) x -= z.col(c).dot(x) * z.col(c);
      x.normalize();
    }
    z.col(j) = x;
  }
  vectors = tri.matrixQ() * z;
}

}  // namespace

ClassPriors estimate_priors(const Dataset& train) {
  if (train.empty()) throw DegenerateCellError("estimate_priors: empty dataset");
  require_cells(train, 1, "estimate_priors");
  ClassPriors p;
  const auto n = static_cast<double>(train.size());
  for (int a = 0; a < 2; ++a)
    for (int y = 0; y < 2; ++y) p.pi[a][y] = static_cast<double>(train.count(a, y)) / n;
  return p;
}

CellMeans estimate_means(const Dataset& train) {
  require_cells(train, 1, "estimate_means");
  CellMeans m{train.grid(), {}};
  for (int a = 0; a < 2; ++a)
    for (int y = 0; y < 2; ++y) m.values[a][y] = cell_mean(train, a, y);
  return m;
}

Matrix estimate_pooled_covariance(const Dataset& train, int a) {
  for (int y = 0; y < 2; ++y)
    if (train.count(a, y) < 2)
      throw DegenerateCellError("estimate_pooled_covariance: cell (a=" + std::to_string(a) + ", y=" +
                                std::to_string(y) + ") needs at least 2 samples");
  CellMeans means{train.grid(), {}};
  for (int y = 0; y < 2; ++y) means.values[a][y] = cell_mean(train, a, y);
  return estimate_pooled_covariance(train, a, means);
}

Matrix estimate_pooled_covariance(const Dataset& train, int a, const CellMeans& means) {
  if (a != 0 && a != 1) throw ArgumentError("group must be 0 or 1");
  const std::size_t n0 = train.count(a, 0), n1 = train.count(a, 1);
  if (n0 < 2 || n1 < 2)
    throw DegenerateCellError("estimate_pooled_covariance: group " + std::to_string(a) +
                              " needs at least 2 samples per class");
  const auto m = train.curves().cols();
  Matrix K = Matrix::Zero(m, m);
  for (int y = 0; y < 2; ++y) {
    const auto rows = train.cell_rows(a, y);
    CurveMatrix centered(static_cast<Eigen::Index>(rows.size()), m);
    for (std::size_t k = 0; k < rows.size(); ++k)
      centered.row(static_cast<Eigen::Index>(k)) =
          train.curves().row(static_cast<Eigen::Index>(rows[k])) - means.values[a][y].transpose();
    const double ny = static_cast<double>(rows.size());
    const double weight = ny / static_cast<double>(n0 + n1) / (ny - 1.0);
    K.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose(), weight);
  }
  K.triangularView<Eigen::StrictlyUpper>() = K.transpose();
  return K;
}

double EigenSystem::floor() const {
  const double top = eigenvalues.size() > 0 ? eigenvalues(0) : 0.0;
  return std::max(top, 1.0) * 1e-10;
}

std::size_t EigenSystem::usable() const {
  const double f = floor();
  std::size_t k = 0;
  while (k < size() && eigenvalues(static_cast<Eigen::Index>(k)) > f) ++k;
  return k;
}

FunctionSample EigenSystem::eigenfunction(std::size_t j) const {
  if (j >= size()) throw ArgumentError("eigenfunction index out of range");
  return FunctionSample(grid, eigenfunctions.col(static_cast<Eigen::Index>(j)));
}

std::size_t default_j_max(const Grid& grid) noexcept { return std::min<std::size_t>(50, grid.size() - 1); }

EigenSystem eigendecompose(const Matrix& kernel, const GridPtr& grid, std::size_t j_max) {
  if (!grid) throw StructuralError("eigendecompose: missing grid");
  const auto m = static_cast<Eigen::Index>(grid->size());
  if (kernel.rows() != m || kernel.cols() != m)
    throw StructuralError("eigendecompose: kernel is not aligned with the grid");
  if (j_max == 0 || j_max > grid->size()) throw ArgumentError("eigendecompose: j_max out of range");
  const double scale = std::max(1.0, kernel.cwiseAbs().maxCoeff());
  if ((kernel - kernel.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw ArgumentError("eigendecompose: kernel is not symmetric");

  const Vector sqrt_w = grid->weights().cwiseSqrt();
  const Matrix b = sqrt_w.asDiagonal() * kernel * sqrt_w.asDiagonal();
  const auto k = static_cast<Eigen::Index>(j_max);
  Vector values;
  Matrix vectors;
  leading_eigenpairs(b, k, values, vectors);

  EigenSystem es;
  es.grid = grid;
  es.eigenvalues.resize(k);
  es.eigenfunctions.resize(m, k);
  const Vector inv_sqrt_w = sqrt_w.cwiseInverse();
  for (Eigen::Index j = 0; j < k; ++j) {
    es.eigenvalues(j) = std::max(0.0, values(j));
    Vector phi = inv_sqrt_w.cwiseProduct(vectors.col(j));
    Eigen::Index peak = 0;
    phi.cwiseAbs().maxCoeff(&peak);
    if (phi(peak) < 0) phi = -phi;
    es.eigenfunctions.col(j) = phi;
  }
  return es;
}

Matrix project_mean_coeffs(const std::array<Vector, 2>& means, const EigenSystem& eigen, std::size_t J) {
  if (J > eigen.size()) throw ArgumentError("project_mean_coeffs: J exceeds retained components");
  const auto j = static_cast<Eigen::Index>(J);
  const Vector& w = eigen.grid->weights();
  Matrix theta(2, j);
  for (int y = 0; y < 2; ++y) {
    if (means[y].size() != w.size()) throw StructuralError("project_mean_coeffs: mean not on the eigen grid");
    theta.row(y) = (w.cwiseProduct(means[y])).transpose() * eigen.eigenfunctions.leftCols(j);
  }
  return theta;
}

GroupModel fit_group_model(const Dataset& train, int a, std::size_t j_max) {
  GroupModel g;
  g.a = a;
  g.priors = estimate_priors(train);
  const CellMeans means = estimate_means(train);
  g.mu = {means.values[a][0], means.values[a][1]};
  g.cov = estimate_pooled_covariance(train, a, means);
  g.eigen = eigendecompose(g.cov, train.grid(), j_max);
  g.theta = project_mean_coeffs(g.mu, g.eigen, g.eigen.size());
  return g;
}

std::array<GroupModel, 2> fit_group_models(const Dataset& train, std::size_t j_max) {
  return {fit_group_model(train, 0, j_max), fit_group_model(train, 1, j_max)};
}

GroupScore::GroupScore(const EigenSystem& eigen, const Matrix& theta, std::size_t J) : grid_(eigen.grid) {
  if (J == 0) throw TruncationError("truncation level must be at least 1");
  if (J > eigen.usable())
    throw TruncationError("truncation level " + std::to_string(J) + " uses eigenvalues at or below the floor (" +
                          std::to_string(eigen.usable()) + " usable)");
  if (theta.rows() != 2 || static_cast<std::size_t>(theta.cols()) < J)
    throw StructuralError("GroupScore: theta must be 2 x J");
  const auto j = static_cast<Eigen::Index>(J);
  eigenvalues_ = eigen.eigenvalues.head(j);
  eigenfunctions_ = eigen.eigenfunctions.leftCols(j);
  theta_ = theta.leftCols(j);
  build();
}

GroupScore::GroupScore(GridPtr grid, Vector eigenvalues, Matrix eigenfunctions, Matrix theta)
    : grid_(std::move(grid)),
      eigenvalues_(std::move(eigenvalues)),
      eigenfunctions_(std::move(eigenfunctions)),
      theta_(std::move(theta)) {
  if (!grid_) throw StructuralError("GroupScore: missing grid");
  const auto J = eigenvalues_.size();
  if (J == 0) throw TruncationError("truncation level must be at least 1");
  if (eigenfunctions_.rows() != static_cast<Eigen::Index>(grid_->size()) || eigenfunctions_.cols() != J ||
      theta_.rows() != 2 || theta_.cols() != J)
    throw StructuralError("GroupScore: inconsistent component shapes");
  const double floor = std::max(eigenvalues_(0), 1.0) * 1e-10;
  if ((eigenvalues_.array() <= floor).any()) throw TruncationError("GroupScore: eigenvalue at or below the floor");
  build();
}

void GroupScore::build() {
  const Vector diff = (theta_.row(1) - theta_.row(0)).transpose();
  coef_ = diff.cwiseQuotient(eigenvalues_);
  separation_ = diff.dot(coef_);
  offset_ = -coef_.dot(theta_.row(0).transpose()) - 0.5 * separation_;
  direction_ = grid_->weights().cwiseProduct(eigenfunctions_ * coef_);
  if (!coef_.allFinite() || !std::isfinite(offset_)) throw TruncationError("GroupScore: non-finite coefficients");
}

double GroupScore::operator()(const FunctionSample& x) const {
  if (!same_grid(x.grid(), grid_)) throw StructuralError("log density ratio: sample is not on the model grid");
  return x.values().dot(direction_) + offset_;
}

Vector GroupScore::evaluate(const CurveMatrix& curves) const {
  if (curves.cols() != direction_.size()) throw StructuralError("log density ratio: curves are not on the model grid");
  return (curves * direction_).array() + offset_;
}

ScoreFunctional make_score(const std::array<GroupModel, 2>& models, std::size_t J) {
  return ScoreFunctional{{GroupScore(models[0].eigen, models[0].theta, J),
                          GroupScore(models[1].eigen, models[1].theta, J)}};
}

double log_density_ratio(const ScoreFunctional& score, const FunctionSample& x, int a) {
  if (a != 0 && a != 1) throw ArgumentError("group must be 0 or 1");
  return score.log_density_ratio(x, a);
}

Matrix cumulative_log_ratios(const GroupModel& model, const CurveMatrix& curves, std::size_t k) {
  if (k > model.eigen.usable()) throw TruncationError("cumulative_log_ratios: k exceeds usable components");
  const auto kk = static_cast<Eigen::Index>(k);
  const Matrix& phi = model.eigen.eigenfunctions;
  const Vector& w = model.eigen.grid->weights();
  // projections <x, phi_j> for every row
  const Matrix proj = curves * (w.asDiagonal() * phi.leftCols(kk));
  Matrix out(curves.rows(), kk);
  Vector running = Vector::Zero(curves.rows());
  double penalty = 0.0;
  for (Eigen::Index j = 0; j < kk; ++j) {
    const double d = model.theta(1, j) - model.theta(0, j);
    const double lambda = model.eigen.eigenvalues(j);
    running += (d / lambda) * (proj.col(j).array() - model.theta(0, j)).matrix();
    penalty += 0.5 * d * d / lambda;
    out.col(j) = running.array() - penalty;
  }
  return out;
}

}  // namespace fairflda
