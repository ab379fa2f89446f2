#pragma once

#include "mgopt/grid.hpp"
#include "mgopt/types.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace mgopt {

/// Box constraints; -inf/+inf entries mark one-sided or absent bounds.
struct BoundSet {
  VecX lower;
  VecX upper;

  int dim() const { return static_cast<int>(lower.size()); }
  static BoundSet unbounded(int n);
  /// Checks lower_i < upper_i and matching lengths.
  void validate() const;
};

enum class Activity : std::uint8_t { Free = 0, AtLower = 1, AtUpper = 2 };

/// Per-node classification of an iterate against its bounds.
struct ActiveSetMask {
  std::vector<Activity> state;

  int dim() const { return static_cast<int>(state.size()); }
  bool any() const;
  int count_active() const;
  Mask lower() const;
  Mask upper() const;
  Mask any_active() const;
};

/// Exact floating-point activity test; projections write bound values
/// bit-exactly, so equality is the right test. Throws on infeasible x.
ActiveSetMask detect_active(const VecX& x, const BoundSet& bounds);

/// Smooth objective on one level. Implementations are immutable and
/// evaluation is thread-safe.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual int dim() const = 0;
  virtual double value(const VecX& x) const = 0;
  virtual VecX gradient(const VecX& x) const = 0;

  /// Sparse quadratic part, when the objective is (Q, q)-representable.
  virtual const SpMat* quadratic_matrix() const { return nullptr; }
  virtual const VecX* linear_term() const { return nullptr; }
};

/// f(x) = 1/2 x'Qx - q'x
class QuadraticObjective final : public Objective {
 public:
  QuadraticObjective(SpMat Q, VecX q);

  int dim() const override { return static_cast<int>(q_.size()); }
  double value(const VecX& x) const override;
  VecX gradient(const VecX& x) const override;
  const SpMat* quadratic_matrix() const override { return &Q_; }
  const VecX* linear_term() const override { return &q_; }

 private:
  SpMat Q_;
  VecX q_;
};

/// f(x) = 1/2 x'Qx - q'x - sum_i w_i eta(x_i) with a scalar nonlinearity
/// eta applied node by node (lumped quadrature; w_i carries the element
/// area).
class NodalObjective final : public Objective {
 public:
  enum class Term : std::uint8_t {
    ExpWell,     ///< eta(u) = u e^u - e^u
    CubicSixth,  ///< eta(u) = u^3 / 6
  };

  NodalObjective(SpMat Q, VecX q, VecX weights, Term term);

  int dim() const override { return static_cast<int>(q_.size()); }
  double value(const VecX& x) const override;
  VecX gradient(const VecX& x) const override;
  const SpMat* quadratic_matrix() const override { return &Q_; }
  const VecX* linear_term() const override { return &q_; }
  const VecX& weights() const { return w_; }
  Term term() const { return term_; }

 private:
  SpMat Q_;
  VecX q_;
  VecX w_;
  Term term_;
};

/// Discrete area functional sum_e h^2 sqrt(1 + |grad u|^2) with the
/// element gradient taken at the centroid from the four corner values.
/// Boundary values are fixed; nodes may additionally be frozen at given
/// values so that coarse corrections treat them as Dirichlet data.
class MinimalSurfaceObjective final : public Objective {
 public:
  using BoundaryFn = std::function<double(double, double)>;

  MinimalSurfaceObjective(const GridLevel& level, const BoundaryFn& boundary);

  int dim() const override { return n_; }
  double value(const VecX& x) const override;
  VecX gradient(const VecX& x) const override;

  /// Copy of this objective with the flagged nodes pinned at the given
  /// values; their gradient components become zero.
  std::shared_ptr<MinimalSurfaceObjective> frozen(const Mask& pin, const VecX& pin_values) const;

 private:
  double grid_value(const VecX& x, int gx, int gy) const;

  int m_;
  int n_;
  double h_;
  std::vector<double> border_;  // full-grid ring of fixed boundary values
  Mask pinned_;
  VecX pinned_values_;
};

/// One level of a benchmark problem.
struct LevelProblem {
  std::shared_ptr<const Objective> objective;
  BoundSet bounds;
  std::optional<double> equality_sum;  ///< target for sum(x) when present
};

/// A benchmark family discretized on every level of a hierarchy.
struct ProblemSet {
  std::string family;
  const GridHierarchy* grid = nullptr;
  std::vector<LevelProblem> levels;

  int finest() const { return static_cast<int>(levels.size()) - 1; }
  const LevelProblem& at(int k) const { return levels.at(static_cast<std::size_t>(k)); }

  /// Counted evaluation entry points; one increment per call on the
  /// queried level. Rejects non-finite input entries.
  double value(int k, const VecX& x, EvalLog& log) const;
  VecX gradient(int k, const VecX& x, EvalLog& log) const;
};

/// Interior-node stiffness matrix of the Laplacian on one level
/// (bilinear square elements, homogeneous Dirichlet boundary).
SpMat assemble_laplacian(const GridLevel& level);
/// The 4x4 element matrix behind assemble_laplacian (corner order
/// (0,0), (1,0), (0,1), (1,1)).
Eigen::Matrix4d laplacian_element_matrix();

ProblemSet make_spiral(const GridHierarchy& grid);
ProblemSet make_nonquadratic(const GridHierarchy& grid);
ProblemSet make_minsurf(const GridHierarchy& grid);
ProblemSet make_equality(const GridHierarchy& grid);

ProblemSet make_problem(const std::string& family, const GridHierarchy& grid);

/// Obstacle/boundary formulas, exposed for direct evaluation in tests
/// and plotting.
double spiral_obstacle(double x1, double x2);
double nonquadratic_load(double x1, double x2);
double minsurf_boundary(double x1, double x2);

/// Zero rows and columns (including the diagonal) at flagged nodes.
SpMat truncate_matrix(const SpMat& Q, const Mask& active);
/// Zero flagged entries.
VecX truncate_vector(VecX v, const Mask& active);

/// Truncated view of a level problem: quadratic rows/columns and linear
/// entries zeroed, nodal weights dropped, minimal-surface nodes frozen at
/// their bound values. Bounds and equality data pass through unchanged.
LevelProblem truncate(const LevelProblem& problem, const ActiveSetMask& mask);

/// Coarse matrix through the hierarchy transfers: restriction * Q *
/// prolongation. The result is symmetrized exactly.
SpMat galerkin_coarse(const SpMat& fine, const GridHierarchy& grid, int fine_level);

}  // namespace mgopt
