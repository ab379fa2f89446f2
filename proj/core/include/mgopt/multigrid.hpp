#pragma once

#include "mgopt/problem.hpp"
#include "mgopt/smoother.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace mgopt {

/// Multigrid cycle flavour.
enum class CycleVariant {
  CsTruncated,   ///< correction scheme with basis truncation; quadratic only
  FasTruncated,  ///< full approximation scheme with basis truncation
  FasPlain,      ///< full approximation scheme, guarded coarse bounds
};

enum class SmootherKind {
  GradientProjection,    ///< projected gradient with gradient-based search
  ProjectedGaussSeidel,  ///< one sweep per smoothing step; quadratic only
};

std::string to_string(CycleVariant v);
CycleVariant variant_from_string(const std::string& s);
std::string to_string(SmootherKind s);
SmootherKind smoother_from_string(const std::string& s);

struct VCycleConfig {
  CycleVariant variant = CycleVariant::FasTruncated;
  SmootherKind smoother = SmootherKind::GradientProjection;
  int pre_smooth = 1;          ///< nu1
  int post_smooth = 1;         ///< nu2
  double smooth_tol = 1e-9;    ///< eps for smoothing calls on levels > 0
  double coarse_tol = 1e-9;    ///< eps0
  int coarse_max_iter = 10000; ///< nu0
  int max_cycles = 100;        ///< outer iteration cap
  double outer_step_tol = 0.0; ///< stop when ||x_t - x_{t-1}|| falls below; 0 disables
  double reference_rel_tol = 1e-8;  ///< stop when err <= tol * ||reference||
  bool keep_iterates = false;

  void validate() const;
};

/// Optional instrumentation for tests: called as the cycle descends.
struct CycleObserver {
  std::function<void(int level, const VecX& x, const BoundSet& bounds)> on_coarse_entry;
  std::function<void(int fine_level)> on_galerkin;
  std::function<void(int level)> on_truncation;
};

struct SolveReport {
  VecX solution;
  int cycles = 0;
  std::string stop_reason;

  double initial_error = 0.0;      ///< vs reference, when one was given
  double initial_objective = 0.0;  ///< finest objective at the start

  std::vector<double> error_history;      ///< per cycle, vs reference
  std::vector<double> objective_history;  ///< per cycle, finest level, shift-free
  std::vector<double> equality_residual_history;
  std::vector<double> feasibility_violation_history;
  std::vector<VecX> iterates;  ///< per cycle, only when keep_iterates

  EvalLog evals;
};

/// Runs a single V-cycle from the finest level. State vectors must have
/// one entry per level and persist across cycles for the warm-started
/// line search.
VecX v_cycle(const ProblemSet& problems, const VCycleConfig& cfg, VecX x, EvalLog& log,
             std::vector<SmootherState>& states, const CycleObserver* observer = nullptr);

/// Outer iteration: repeats V-cycles from the zero vector (or the given
/// start) until the stopping rules fire. The reference solution, when
/// given, drives the error history and the error-based stop.
SolveReport solve(const ProblemSet& problems, const VCycleConfig& cfg,
                  const VecX* reference = nullptr, const VecX* initial = nullptr,
                  const CycleObserver* observer = nullptr);

/// Coarse right-hand side for the sum constraint: the entry sum of the
/// restricted iterate.
double restrict_equality_target(const GridHierarchy& grid, int fine_level, const VecX& x_fine);

}  // namespace mgopt
