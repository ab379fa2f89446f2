#include "mgopt/problem.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace mgopt {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = 3.14159265358979323846;

void check_dim(const VecX& x, int n, const char* what) {
  if (x.size() != n)
    throw std::invalid_argument(std::string(what) + ": length " + std::to_string(x.size()) +
                                " does not match dimension " + std::to_string(n));
}
}  // namespace

BoundSet BoundSet::unbounded(int n) {
  BoundSet b;
  b.lower = VecX::Constant(n, -kInf);
  b.upper = VecX::Constant(n, kInf);
  return b;
}

void BoundSet::validate() const {
  if (lower.size() != upper.size())
    throw std::invalid_argument("BoundSet: lower/upper length mismatch");
  for (int i = 0; i < lower.size(); ++i)
    if (!(lower[i] < upper[i]))
      throw std::invalid_argument("BoundSet: lower must be strictly below upper at node " +
                                  std::to_string(i));
}

bool ActiveSetMask::any() const {
  for (Activity a : state)
    if (a != Activity::Free) return true;
  return false;
}

int ActiveSetMask::count_active() const {
  int c = 0;
  for (Activity a : state) c += (a != Activity::Free);
  return c;
}

Mask ActiveSetMask::lower() const {
  Mask m(state.size());
  for (std::size_t i = 0; i < state.size(); ++i) m[i] = state[i] == Activity::AtLower;
  return m;
}

Mask ActiveSetMask::upper() const {
  Mask m(state.size());
  for (std::size_t i = 0; i < state.size(); ++i) m[i] = state[i] == Activity::AtUpper;
  return m;
}

Mask ActiveSetMask::any_active() const {
  Mask m(state.size());
  for (std::size_t i = 0; i < state.size(); ++i) m[i] = state[i] != Activity::Free;
  return m;
}

ActiveSetMask detect_active(const VecX& x, const BoundSet& bounds) {
  check_dim(x, bounds.dim(), "detect_active");
  ActiveSetMask mask;
  mask.state.resize(static_cast<std::size_t>(x.size()));
  for (int i = 0; i < x.size(); ++i) {
    if (x[i] < bounds.lower[i] || x[i] > bounds.upper[i])
      throw std::domain_error("detect_active: infeasible point at node " + std::to_string(i));
    if (x[i] == bounds.lower[i])
      mask.state[static_cast<std::size_t>(i)] = Activity::AtLower;
    else if (x[i] == bounds.upper[i])
      mask.state[static_cast<std::size_t>(i)] = Activity::AtUpper;
    else
      mask.state[static_cast<std::size_t>(i)] = Activity::Free;
  }
  return mask;
}

// ---------------------------------------------------------------------------
// objectives

QuadraticObjective::QuadraticObjective(SpMat Q, VecX q) : Q_(std::move(Q)), q_(std::move(q)) {
  if (Q_.rows() != Q_.cols() || Q_.rows() != q_.size())
    throw std::invalid_argument("QuadraticObjective: inconsistent dimensions");
}

double QuadraticObjective::value(const VecX& x) const {
  check_dim(x, dim(), "QuadraticObjective::value");
  return 0.5 * x.dot(Q_ * x) - q_.dot(x);
}

VecX QuadraticObjective::gradient(const VecX& x) const {
  check_dim(x, dim(), "QuadraticObjective::gradient");
  return Q_ * x - q_;
}

NodalObjective::NodalObjective(SpMat Q, VecX q, VecX weights, Term term)
    : Q_(std::move(Q)), q_(std::move(q)), w_(std::move(weights)), term_(term) {
  if (Q_.rows() != Q_.cols() || Q_.rows() != q_.size() || w_.size() != q_.size())
    throw std::invalid_argument("NodalObjective: inconsistent dimensions");
}

double NodalObjective::value(const VecX& x) const {
  check_dim(x, dim(), "NodalObjective::value");
  double nodal = 0.0;
  switch (term_) {
    case Term::ExpWell:
      for (int i = 0; i < x.size(); ++i) nodal += w_[i] * std::exp(x[i]) * (x[i] - 1.0);
      break;
    case Term::CubicSixth:
      for (int i = 0; i < x.size(); ++i) nodal += w_[i] * x[i] * x[i] * x[i] / 6.0;
      break;
  }
  return 0.5 * x.dot(Q_ * x) - q_.dot(x) - nodal;
}

VecX NodalObjective::gradient(const VecX& x) const {
  check_dim(x, dim(), "NodalObjective::gradient");
  VecX g = Q_ * x - q_;
  switch (term_) {
    case Term::ExpWell:
      for (int i = 0; i < x.size(); ++i) g[i] -= w_[i] * x[i] * std::exp(x[i]);
      break;
    case Term::CubicSixth:
      for (int i = 0; i < x.size(); ++i) g[i] -= 0.5 * w_[i] * x[i] * x[i];
      break;
  }
  return g;
}

MinimalSurfaceObjective::MinimalSurfaceObjective(const GridLevel& level, const BoundaryFn& boundary)
    : m_(level.m), n_(level.n), h_(level.h) {
  const int M = m_ + 2;
  border_.assign(static_cast<std::size_t>(M) * M, 0.0);
  for (int gy = 0; gy < M; ++gy) {
    for (int gx = 0; gx < M; ++gx) {
      if (gx != 0 && gy != 0 && gx != M - 1 && gy != M - 1) continue;
      border_[static_cast<std::size_t>(gy) * M + gx] = boundary(gx * h_, gy * h_);
    }
  }
}

double MinimalSurfaceObjective::grid_value(const VecX& x, int gx, int gy) const {
  const int M = m_ + 2;
  if (gx == 0 || gy == 0 || gx == M - 1 || gy == M - 1)
    return border_[static_cast<std::size_t>(gy) * M + gx];
  const int i = (gy - 1) * m_ + (gx - 1);
  if (!pinned_.empty() && pinned_[static_cast<std::size_t>(i)]) return pinned_values_[i];
  return x[i];
}

namespace {
// tensor 2x2 Gauss rule on the reference square; one-point (centroid)
// quadrature leaves the checkerboard mode unpenalized and that wrecks
// both the discrete solution and the coarse-grid correction
constexpr double kGaussLo = 0.5 - 0.28867513459481287;  // 1/(2*sqrt(3))
constexpr double kGaussHi = 0.5 + 0.28867513459481287;
constexpr double kGaussPts[2] = {kGaussLo, kGaussHi};
}  // namespace

double MinimalSurfaceObjective::value(const VecX& x) const {
  check_dim(x, n_, "MinimalSurfaceObjective::value");
  const double w = 0.25 * h_ * h_;
  const double inv_h = 1.0 / h_;
  double total = 0.0;
  for (int ey = 0; ey <= m_; ++ey) {
    for (int ex = 0; ex <= m_; ++ex) {
      const double u00 = grid_value(x, ex, ey);
      const double u10 = grid_value(x, ex + 1, ey);
      const double u01 = grid_value(x, ex, ey + 1);
      const double u11 = grid_value(x, ex + 1, ey + 1);
      for (double eta : kGaussPts) {
        const double dx0 = (u10 - u00) * (1.0 - eta) + (u11 - u01) * eta;
        for (double xi : kGaussPts) {
          const double gx = dx0 * inv_h;
          const double gy = ((u01 - u00) * (1.0 - xi) + (u11 - u10) * xi) * inv_h;
          total += w * std::sqrt(1.0 + gx * gx + gy * gy);
        }
      }
    }
  }
  return total;
}

VecX MinimalSurfaceObjective::gradient(const VecX& x) const {
  check_dim(x, n_, "MinimalSurfaceObjective::gradient");
  const double w = 0.25 * h_ * h_;
  const double inv_h = 1.0 / h_;
  VecX g = VecX::Zero(n_);
  const int M = m_ + 2;
  auto add = [&](int gx_, int gy_, double v) {
    if (gx_ == 0 || gy_ == 0 || gx_ == M - 1 || gy_ == M - 1) return;
    const int i = (gy_ - 1) * m_ + (gx_ - 1);
    if (!pinned_.empty() && pinned_[static_cast<std::size_t>(i)]) return;
    g[i] += v;
  };
  for (int ey = 0; ey <= m_; ++ey) {
    for (int ex = 0; ex <= m_; ++ex) {
      const double u00 = grid_value(x, ex, ey);
      const double u10 = grid_value(x, ex + 1, ey);
      const double u01 = grid_value(x, ex, ey + 1);
      const double u11 = grid_value(x, ex + 1, ey + 1);
      for (double eta : kGaussPts) {
        for (double xi : kGaussPts) {
          const double gx = ((u10 - u00) * (1.0 - eta) + (u11 - u01) * eta) * inv_h;
          const double gy = ((u01 - u00) * (1.0 - xi) + (u11 - u10) * xi) * inv_h;
          const double coef = w / std::sqrt(1.0 + gx * gx + gy * gy);
          const double ax = coef * gx * inv_h;
          const double ay = coef * gy * inv_h;
          add(ex, ey, -ax * (1.0 - eta) - ay * (1.0 - xi));
          add(ex + 1, ey, ax * (1.0 - eta) - ay * xi);
          add(ex, ey + 1, -ax * eta + ay * (1.0 - xi));
          add(ex + 1, ey + 1, ax * eta + ay * xi);
        }
      }
    }
  }
  return g;
}

std::shared_ptr<MinimalSurfaceObjective> MinimalSurfaceObjective::frozen(
    const Mask& pin, const VecX& pin_values) const {
  if (static_cast<int>(pin.size()) != n_ || pin_values.size() != n_)
    throw std::invalid_argument("MinimalSurfaceObjective::frozen: mask length mismatch");
  auto out = std::make_shared<MinimalSurfaceObjective>(*this);
  if (out->pinned_.empty()) {
    out->pinned_ = pin;
    out->pinned_values_ = pin_values;
  } else {
    // merging keeps earlier pins; new pins only add
    for (int i = 0; i < n_; ++i) {
      if (pin[static_cast<std::size_t>(i)] && !out->pinned_[static_cast<std::size_t>(i)]) {
        out->pinned_[static_cast<std::size_t>(i)] = 1;
        out->pinned_values_[i] = pin_values[i];
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// counted evaluation

double ProblemSet::value(int k, const VecX& x, EvalLog& log) const {
  const LevelProblem& lp = at(k);
  if (!x.allFinite()) throw std::invalid_argument("ProblemSet::value: non-finite input entries");
  log.ensure(k);
  ++log.value_calls[static_cast<std::size_t>(k)];
  return lp.objective->value(x);
}

VecX ProblemSet::gradient(int k, const VecX& x, EvalLog& log) const {
  const LevelProblem& lp = at(k);
  if (!x.allFinite()) throw std::invalid_argument("ProblemSet::gradient: non-finite input entries");
  log.ensure(k);
  ++log.gradient_calls[static_cast<std::size_t>(k)];
  return lp.objective->gradient(x);
}

// ---------------------------------------------------------------------------
// assembly

Eigen::Matrix4d laplacian_element_matrix() {
  Eigen::Matrix4d K;
  const double d = 2.0 / 3.0, e = -1.0 / 6.0, c = -1.0 / 3.0;
  // corner order (0,0), (1,0), (0,1), (1,1)
  K << d, e, e, c,
       e, d, c, e,
       e, c, d, e,
       c, e, e, d;
  return K;
}

SpMat assemble_laplacian(const GridLevel& level) {
  const Eigen::Matrix4d K = laplacian_element_matrix();
  const int m = level.m;
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(level.n) * 9);
  // elements indexed by their lower-left full-grid corner
  for (int ey = 0; ey <= m; ++ey) {
    for (int ex = 0; ex <= m; ++ex) {
      const int cgx[4] = {ex, ex + 1, ex, ex + 1};
      const int cgy[4] = {ey, ey, ey + 1, ey + 1};
      for (int a = 0; a < 4; ++a) {
        const int ax = cgx[a] - 1, ay = cgy[a] - 1;
        if (ax < 0 || ay < 0 || ax >= m || ay >= m) continue;  // boundary eliminated
        for (int b = 0; b < 4; ++b) {
          const int bx = cgx[b] - 1, by = cgy[b] - 1;
          if (bx < 0 || by < 0 || bx >= m || by >= m) continue;
          trips.emplace_back(level.node(ax, ay), level.node(bx, by), K(a, b));
        }
      }
    }
  }
  SpMat Q(level.n, level.n);
  Q.setFromTriplets(trips.begin(), trips.end());
  Q.makeCompressed();
  return Q;
}

// ---------------------------------------------------------------------------
// benchmark formulas

double spiral_obstacle(double x1, double x2) {
  // the obstacle lives on (-1,1)^2; map the unit square onto it
  const double u = 2.0 * x1 - 1.0;
  const double v = 2.0 * x2 - 1.0;
  const double r = std::hypot(u, v);
  if (r == 0.0) return 3.6;
  const double phi = std::atan2(v, u);
  return std::sin(2.0 * kPi / r + kPi / 2.0 - phi) + r * (r + 1.0) / (r - 2.0) - 3.0 * r + 3.6;
}

double nonquadratic_load(double x1, double x2) {
  const double p = x1 * x1 - x1 * x1 * x1;
  return (9.0 * kPi * kPi + std::exp(p * std::sin(3.0 * kPi * x2)) * p + 6.0 * x1 - 2.0) *
         std::sin(3.0 * kPi * x1);
}

double minsurf_boundary(double x1, double x2) {
  if (x2 == 0.0) return -std::sin(2.0 * kPi * x1);
  if (x1 == 1.0) return std::sin(2.0 * kPi * x2);
  if (x2 == 1.0) return std::sin(2.0 * kPi * x1);
  if (x1 == 0.0) return -std::sin(2.0 * kPi * x2);
  throw std::invalid_argument("minsurf_boundary: point is not on the boundary");
}

namespace {

VecX eval_on_nodes(const GridLevel& lv, double (*f)(double, double)) {
  VecX out(lv.n);
  for (int iy = 0; iy < lv.m; ++iy)
    for (int ix = 0; ix < lv.m; ++ix)
      out[lv.node(ix, iy)] = f(lv.coord(ix), lv.coord(iy));
  return out;
}

double paraboloid(double x1, double x2, double cx, double cy, double steep, double top) {
  return -steep * (x1 - cx) * (x1 - cx) - steep * (x2 - cy) * (x2 - cy) + top;
}

}  // namespace

ProblemSet make_spiral(const GridHierarchy& grid) {
  ProblemSet ps;
  ps.family = "spiral";
  ps.grid = &grid;
  for (int k = 0; k <= grid.finest(); ++k) {
    const GridLevel& lv = grid.level(k);
    LevelProblem lp;
    lp.objective =
        std::make_shared<QuadraticObjective>(assemble_laplacian(lv), VecX::Zero(lv.n));
    lp.bounds.lower = eval_on_nodes(lv, &spiral_obstacle);
    lp.bounds.upper = VecX::Constant(lv.n, kInf);
    lp.bounds.validate();
    ps.levels.push_back(std::move(lp));
  }
  return ps;
}

ProblemSet make_nonquadratic(const GridHierarchy& grid) {
  ProblemSet ps;
  ps.family = "nonquad";
  ps.grid = &grid;
  for (int k = 0; k <= grid.finest(); ++k) {
    const GridLevel& lv = grid.level(k);
    const double w = lv.h * lv.h;
    LevelProblem lp;
    lp.objective = std::make_shared<NodalObjective>(
        assemble_laplacian(lv), w * eval_on_nodes(lv, &nonquadratic_load),
        VecX::Constant(lv.n, w), NodalObjective::Term::ExpWell);
    lp.bounds.lower = VecX(lv.n);
    for (int iy = 0; iy < lv.m; ++iy)
      for (int ix = 0; ix < lv.m; ++ix)
        lp.bounds.lower[lv.node(ix, iy)] =
            paraboloid(lv.coord(ix), lv.coord(iy), 7.0 / 16.0, 7.0 / 16.0, 8.0, 0.2);
    lp.bounds.upper = VecX::Constant(lv.n, 0.5);
    lp.bounds.validate();
    ps.levels.push_back(std::move(lp));
  }
  return ps;
}

ProblemSet make_minsurf(const GridHierarchy& grid) {
  ProblemSet ps;
  ps.family = "minsurf";
  ps.grid = &grid;
  for (int k = 0; k <= grid.finest(); ++k) {
    const GridLevel& lv = grid.level(k);
    LevelProblem lp;
    lp.objective = std::make_shared<MinimalSurfaceObjective>(lv, &minsurf_boundary);
    lp.bounds.lower = VecX(lv.n);
    for (int iy = 0; iy < lv.m; ++iy)
      for (int ix = 0; ix < lv.m; ++ix)
        lp.bounds.lower[lv.node(ix, iy)] =
            paraboloid(lv.coord(ix), lv.coord(iy), 0.5, 0.5, 8.0, 0.55);
    lp.bounds.upper = VecX::Constant(lv.n, kInf);
    lp.bounds.validate();
    ps.levels.push_back(std::move(lp));
  }
  return ps;
}

ProblemSet make_equality(const GridHierarchy& grid) {
  ProblemSet ps;
  ps.family = "equality";
  ps.grid = &grid;
  for (int k = 0; k <= grid.finest(); ++k) {
    const GridLevel& lv = grid.level(k);
    const double w = lv.h * lv.h;
    LevelProblem lp;
    lp.objective = std::make_shared<NodalObjective>(assemble_laplacian(lv), VecX::Zero(lv.n),
                                                    VecX::Constant(lv.n, w),
                                                    NodalObjective::Term::CubicSixth);
    lp.bounds.lower = VecX(lv.n);
    for (int iy = 0; iy < lv.m; ++iy)
      for (int ix = 0; ix < lv.m; ++ix)
        lp.bounds.lower[lv.node(ix, iy)] =
            paraboloid(lv.coord(ix), lv.coord(iy), 0.5, 0.5, 32.0, 2.5);
    lp.bounds.upper = VecX::Constant(lv.n, kInf);
    lp.bounds.validate();
    lp.equality_sum = 1.0 / w;  // lumped form of the unit-integral constraint
    ps.levels.push_back(std::move(lp));
  }
  return ps;
}

ProblemSet make_problem(const std::string& family, const GridHierarchy& grid) {
  if (family == "spiral") return make_spiral(grid);
  if (family == "nonquad") return make_nonquadratic(grid);
  if (family == "minsurf") return make_minsurf(grid);
  if (family == "equality") return make_equality(grid);
  throw std::invalid_argument("make_problem: unknown family '" + family + "'");
}

// ---------------------------------------------------------------------------
// truncation and coarsening

SpMat truncate_matrix(const SpMat& Q, const Mask& active) {
  if (static_cast<int>(active.size()) != Q.rows())
    throw std::invalid_argument("truncate_matrix: mask length mismatch");
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(Q.nonZeros()));
  for (int r = 0; r < Q.outerSize(); ++r) {
    if (active[static_cast<std::size_t>(r)]) continue;
    for (SpMat::InnerIterator it(Q, r); it; ++it) {
      if (active[static_cast<std::size_t>(it.col())]) continue;
      trips.emplace_back(r, static_cast<int>(it.col()), it.value());
    }
  }
  SpMat out(Q.rows(), Q.cols());
  out.setFromTriplets(trips.begin(), trips.end());
  out.makeCompressed();
  return out;
}

VecX truncate_vector(VecX v, const Mask& active) {
  if (static_cast<int>(active.size()) != v.size())
    throw std::invalid_argument("truncate_vector: mask length mismatch");
  for (int i = 0; i < v.size(); ++i)
    if (active[static_cast<std::size_t>(i)]) v[i] = 0.0;
  return v;
}

LevelProblem truncate(const LevelProblem& problem, const ActiveSetMask& mask) {
  if (mask.dim() != problem.objective->dim())
    throw std::invalid_argument("truncate: mask length mismatch");
  const Mask any = mask.any_active();
  LevelProblem out;
  out.bounds = problem.bounds;
  out.equality_sum = problem.equality_sum;

  const Objective* f = problem.objective.get();
  if (const auto* quad = dynamic_cast<const QuadraticObjective*>(f)) {
    out.objective = std::make_shared<QuadraticObjective>(
        truncate_matrix(*quad->quadratic_matrix(), any),
        truncate_vector(*quad->linear_term(), any));
  } else if (const auto* nodal = dynamic_cast<const NodalObjective*>(f)) {
    out.objective = std::make_shared<NodalObjective>(
        truncate_matrix(*nodal->quadratic_matrix(), any),
        truncate_vector(*nodal->linear_term(), any), truncate_vector(nodal->weights(), any),
        nodal->term());
  } else if (const auto* ms = dynamic_cast<const MinimalSurfaceObjective*>(f)) {
    VecX pin_values = VecX::Zero(mask.dim());
    for (int i = 0; i < mask.dim(); ++i) {
      if (mask.state[static_cast<std::size_t>(i)] == Activity::AtLower)
        pin_values[i] = problem.bounds.lower[i];
      else if (mask.state[static_cast<std::size_t>(i)] == Activity::AtUpper)
        pin_values[i] = problem.bounds.upper[i];
    }
    out.objective = ms->frozen(any, pin_values);
  } else {
    throw std::invalid_argument("truncate: unsupported objective kind");
  }
  return out;
}

SpMat galerkin_coarse(const SpMat& fine, const GridHierarchy& grid, int fine_level) {
  const SpMat& P = grid.prolongation_matrix(fine_level);
  if (fine.rows() != P.rows() || fine.cols() != P.rows())
    throw std::invalid_argument("galerkin_coarse: matrix dimension mismatch");
  SpMat QP = fine * P;
  SpMat coarse = SpMat(0.25 * (P.transpose() * QP));
  SpMat coarse_t = SpMat(coarse.transpose());
  SpMat out = SpMat(0.5 * (coarse + coarse_t));  // exact symmetry
  out.makeCompressed();
  return out;
}

}  // namespace mgopt
