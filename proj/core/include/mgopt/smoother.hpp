#pragma once

#include "mgopt/problem.hpp"
#include "mgopt/types.hpp"

namespace mgopt {

/// Tunables shared by the first-order solvers.
struct SmootherConfig {
  double tolerance = 1e-9;  ///< stationarity target (projected-gradient norm)
  int max_iterations = 1;
  double step_growth = 2.0;  ///< line-search growth factor c > 1
  int max_doublings = 60;
  int max_halvings = 60;
  double armijo_sigma = 1e-4;
};

/// Line-search state carried between calls: the accepted step of one call
/// seeds the first trial of the next.
struct SmootherState {
  double step = 1.0;
  bool step_capped = false;  ///< last search ran into the halving cap
};

/// What the solvers actually minimize: scale * f(x) - shift'x, with every
/// evaluation counted on the owning level. Both shift and scale are
/// optional; the referenced objects must outlive the wrapper.
class ShiftedObjective {
 public:
  ShiftedObjective(const Objective& f, int level, EvalLog& log)
      : f_(&f), level_(level), log_(&log) {}
  ShiftedObjective(const Objective& f, double scale, const VecX* shift, int level, EvalLog& log)
      : f_(&f), shift_(shift), scale_(scale), level_(level), log_(&log) {}

  int dim() const { return f_->dim(); }
  int level() const { return level_; }

  double value(const VecX& x) const {
    log_->ensure(level_);
    ++log_->value_calls[static_cast<std::size_t>(level_)];
    double v = scale_ * f_->value(x);
    if (shift_) v -= shift_->dot(x);
    return v;
  }

  VecX gradient(const VecX& x) const {
    log_->ensure(level_);
    ++log_->gradient_calls[static_cast<std::size_t>(level_)];
    VecX g = f_->gradient(x);
    if (scale_ != 1.0) g *= scale_;
    if (shift_) g -= *shift_;
    return g;
  }

 private:
  const Objective* f_;
  const VecX* shift_ = nullptr;
  double scale_ = 1.0;
  int level_ = 0;
  EvalLog* log_ = nullptr;
};

/// Componentwise median(lower, x, upper); bound values are written
/// bit-exactly.
VecX project_box(const VecX& x, const BoundSet& bounds);

/// Projected-gradient stationarity measure ||x - P(x - g)||_2 computed
/// from an already evaluated gradient.
double kkt_residual_from_gradient(const VecX& x, const VecX& g, const BoundSet& bounds);
/// Same, evaluating the gradient (one counted call).
double kkt_residual(const ShiftedObjective& f, const BoundSet& bounds, const VecX& x);

/// Directional-derivative surrogate of the projected search: the gradient
/// at the trial point is masked to zero on the trial's active set before
/// the inner product with the search direction.
double masked_descent_derivative(const VecX& direction_gradient, const VecX& trial_gradient,
                                 const VecX& trial, const BoundSet& bounds);

/// Gradient-based line search along x - s*g for convex unconstrained
/// problems. Doubles the step while the directional derivative at the
/// trial point stays negative, then steps back once; halves when the
/// first trial already overshoots. A zero derivative counts as an
/// overshoot. Throws after max_doublings ("unbounded descent direction");
/// flags state.step_capped after max_halvings and returns the smallest
/// tried step.
double line_search_unconstrained(const ShiftedObjective& f, const VecX& x, const VecX& g,
                                 SmootherState& state, const SmootherConfig& cfg);

/// Projected variant: trials are projected onto the box and the
/// derivative surrogate uses the masked gradient. Identical bracketing
/// logic; an all-active trial yields a zero surrogate and is treated as
/// an overshoot.
double line_search_projected(const ShiftedObjective& f, const VecX& x, const VecX& g,
                             const BoundSet& bounds, SmootherState& state,
                             const SmootherConfig& cfg);

/// Steepest descent with the gradient-based search; stops at
/// ||grad|| <= tolerance.
VecX sd_solve(const ShiftedObjective& f, VecX x, const SmootherConfig& cfg, SmootherState& state);

/// Projected gradient method with the gradient-based search; the
/// workhorse smoother. The initial point is projected first, so an
/// infeasible start is fine. max_iterations == 0 returns the projected
/// start.
VecX gp_solve(const ShiftedObjective& f, const BoundSet& bounds, VecX x,
              const SmootherConfig& cfg, SmootherState& state);

enum class ZeroDiagonalPolicy { Reject, Skip };

/// One projected Gauss-Seidel sweep over the quadratic model
/// 1/2 x'Qx - rhs'x. Skip leaves components with a zero diagonal
/// untouched (they arise in truncated coarse matrices).
void pgs_sweep(const SpMat& Q, const VecX& rhs, const BoundSet& bounds, VecX& x,
               ZeroDiagonalPolicy policy = ZeroDiagonalPolicy::Reject);

/// Exact Euclidean projection onto {lower <= z <= upper, sum(z) = target}.
/// Breakpoint scan over the shifted clip function; throws when the set is
/// empty.
VecX project_box_hyperplane(const VecX& x, const BoundSet& bounds, double target_sum);

/// Projected gradient with backtracking on the function value, projecting
/// every trial onto the box/hyperplane intersection. Stops when the
/// accepted move is shorter than the tolerance.
VecX armijo_pg_solve(const ShiftedObjective& f, const BoundSet& bounds, double target_sum, VecX x,
                     const SmootherConfig& cfg, SmootherState& state);

}  // namespace mgopt
