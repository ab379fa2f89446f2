#include "mgopt/analysis.hpp"

#include "mgopt/problem.hpp"
#include "mgopt/smoother.hpp"

#include <Eigen/SparseCholesky>

#include <cmath>
#include <random>
#include <stdexcept>

namespace mgopt {

namespace {
constexpr double kPi = 3.14159265358979323846;

// Box-Muller on top of mt19937_64 keeps the draw sequence identical
// across standard libraries.
class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed) : rng_(seed) {}
  double operator()() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = (static_cast<double>(rng_()) + 0.5) * 0x1.0p-64;
    const double u2 = (static_cast<double>(rng_()) + 0.5) * 0x1.0p-64;
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * kPi * u2);
    have_spare_ = true;
    return r * std::cos(2.0 * kPi * u2);
  }

 private:
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Load sized so that the smooth solution carries as much energy as the
// unit-normal start; both error components then show up clearly.
double smooth_load(double x1, double x2) {
  return 40.0 * kPi * kPi * std::sin(kPi * x1) * std::sin(kPi * x2);
}
}  // namespace

RateEstimate asymptotic_rate(const std::vector<double>& errors) {
  const int n = static_cast<int>(errors.size());
  if (n < 3) throw std::invalid_argument("asymptotic_rate: need at least three errors");
  for (double e : errors)
    if (!(e > 0.0)) throw std::invalid_argument("asymptotic_rate: errors must be positive");

  RateEstimate r;
  r.formula_rate = std::pow(errors.back() / errors.front(), 1.0 / static_cast<double>(n - 1));
  const int window = std::min(5, n - 1);
  double log_sum = 0.0;
  for (int i = n - window; i < n; ++i) log_sum += std::log(errors[static_cast<std::size_t>(i)] /
                                                           errors[static_cast<std::size_t>(i - 1)]);
  r.reported_rate = std::exp(log_sum / static_cast<double>(window));
  r.ratios_used = window;
  return r;
}

SmoothingProjectors::SmoothingProjectors(const SpMat& Q_fine, const GridHierarchy& grid,
                                         int fine_level)
    : Q_(Q_fine), P_(grid.prolongation_matrix(fine_level)) {
  if (fine_level < 1 || fine_level > 5)
    throw std::invalid_argument("SmoothingProjectors: fine level must be in [1, 5]");
  if (Q_.rows() != grid.level(fine_level).n)
    throw std::invalid_argument("SmoothingProjectors: matrix/level size mismatch");
  const Eigen::MatrixXd gram = Eigen::MatrixXd(SpMat(P_.transpose() * SpMat(Q_ * P_)));
  gram_.compute(gram);
  if (gram_.info() != Eigen::Success)
    throw std::runtime_error("SmoothingProjectors: coarse Gram matrix is singular");
}

VecX SmoothingProjectors::low(const VecX& e) const {
  const VecX rhs = P_.transpose() * (Q_ * e);
  return P_ * gram_.solve(rhs);
}

VecX SmoothingProjectors::high(const VecX& e) const { return e - low(e); }

double SmoothingProjectors::energy_norm(const VecX& v) const {
  return std::sqrt(std::max(0.0, v.dot(Q_ * v)));
}

ErrorSplit SmoothingProjectors::split(const VecX& e) const {
  const VecX s = low(e);
  ErrorSplit out;
  out.low = energy_norm(s);
  out.high = energy_norm(e - s);
  return out;
}

std::string to_string(SmoothingMethod m) {
  switch (m) {
    case SmoothingMethod::SteepestDescentExact: return "sd-exact";
    case SmoothingMethod::SteepestDescentLineSearch: return "sd-linesearch";
    case SmoothingMethod::GaussSeidel: return "gauss-seidel";
  }
  return "?";
}

SmoothingTrace run_smoothing_experiment(int iterations, SmoothingMethod method,
                                        std::uint64_t seed) {
  if (iterations < 0) throw std::invalid_argument("run_smoothing_experiment: negative count");
  const GridHierarchy grid = build_hierarchy(4);  // 31x31 interior fine, 15x15 coarse
  const GridLevel& lv = grid.level(4);
  const SpMat Q = assemble_laplacian(lv);
  VecX q(lv.n);
  for (int iy = 0; iy < lv.m; ++iy)
    for (int ix = 0; ix < lv.m; ++ix)
      q[lv.node(ix, iy)] = lv.h * lv.h * smooth_load(lv.coord(ix), lv.coord(iy));

  // discrete solution, then a rough initial iterate with all frequencies
  const Eigen::SparseMatrix<double> Q_col(Q);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(Q_col);
  if (ldlt.info() != Eigen::Success)
    throw std::runtime_error("run_smoothing_experiment: factorization failed");
  const VecX x_star = ldlt.solve(q);

  NormalSampler normal(seed);
  VecX x(lv.n);
  for (int i = 0; i < lv.n; ++i) x[i] = normal();

  SmoothingProjectors proj(Q, grid, 4);
  SmoothingTrace trace;
  trace.splits.push_back(proj.split(x_star - x));

  // loose two-sided condition estimate via power iterations
  {
    NormalSampler aux(1);
    VecX v(lv.n);
    for (int i = 0; i < lv.n; ++i) v[i] = aux();
    v.normalize();
    double lam_max = 0.0;
    for (int it = 0; it < 200; ++it) {
      VecX w = Q * v;
      lam_max = v.dot(w);
      v = w.normalized();
    }
    VecX u(lv.n);
    for (int i = 0; i < lv.n; ++i) u[i] = aux();
    u.normalize();
    double lam_min = 0.0;
    for (int it = 0; it < 200; ++it) {
      VecX w = ldlt.solve(u);
      lam_min = u.dot(w);
      u = w.normalized();
    }
    trace.condition_estimate = lam_max * lam_min;  // lam_min holds 1/lambda_min here
  }

  EvalLog log;
  log.resize(5);
  QuadraticObjective f(Q, q);
  ShiftedObjective F(f, 4, log);
  SmootherConfig cfg;
  cfg.tolerance = 0.0;
  cfg.max_iterations = 1;
  SmootherState state;
  const BoundSet free_box = BoundSet::unbounded(lv.n);

  for (int it = 0; it < iterations; ++it) {
    switch (method) {
      case SmoothingMethod::SteepestDescentExact: {
        const VecX g = Q * x - q;
        const double denom = g.dot(Q * g);
        if (denom > 0.0) x -= (g.squaredNorm() / denom) * g;
        break;
      }
      case SmoothingMethod::SteepestDescentLineSearch:
        x = sd_solve(F, std::move(x), cfg, state);
        break;
      case SmoothingMethod::GaussSeidel:
        pgs_sweep(Q, q, free_box, x);
        break;
    }
    trace.splits.push_back(proj.split(x_star - x));
  }
  return trace;
}

}  // namespace mgopt
