#include "mgopt/multigrid.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

namespace mgopt {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

// Non-owning quadratic view over cycle-local matrices.
class QuadraticRef final : public Objective {
 public:
  QuadraticRef(const SpMat& Q, const VecX& q) : Q_(&Q), q_(&q) {}
  int dim() const override { return static_cast<int>(q_->size()); }
  double value(const VecX& x) const override { return 0.5 * x.dot(*Q_ * x) - q_->dot(x); }
  VecX gradient(const VecX& x) const override { return *Q_ * x - *q_; }
  const SpMat* quadratic_matrix() const override { return Q_; }
  const VecX* linear_term() const override { return q_; }

 private:
  const SpMat* Q_;
  const VecX* q_;
};

struct Ctx {
  const ProblemSet* ps;
  const GridHierarchy* grid;
  const VCycleConfig* cfg;
  EvalLog* log;
  std::vector<SmootherState>* states;
  const CycleObserver* obs;
  int finest;
};

// Coarse objective for kinds without a global matrix: the finest
// objective composed with the accumulated interpolation,
// value(z) = scale * f(C z). The curvature a coarse level sees is then
// exactly the transfer product of the fine one, which a rediscretized
// objective cannot match once the integrand weights vary.
class ComposedObjective final : public Objective {
 public:
  ComposedObjective(std::shared_ptr<const Objective> base, std::shared_ptr<const SpMat> interp,
                    double scale)
      : base_(std::move(base)), interp_(std::move(interp)), scale_(scale) {}
  int dim() const override { return static_cast<int>(interp_->cols()); }
  double value(const VecX& z) const override { return scale_ * base_->value(*interp_ * z); }
  VecX gradient(const VecX& z) const override {
    return scale_ * (interp_->transpose() * base_->gradient(*interp_ * z));
  }

 private:
  std::shared_ptr<const Objective> base_;
  std::shared_ptr<const SpMat> interp_;
  double scale_;
};

void note_coarse_entry(const Ctx& c, int k, const VecX& x, const BoundSet& b) {
  if (c.obs && c.obs->on_coarse_entry && k < c.finest) c.obs->on_coarse_entry(k, x, b);
}

VecX smooth_quadratic(Ctx& c, int k, const SpMat& Q, const VecX& rhs, const BoundSet& bounds,
                      VecX x, double tol, int iters) {
  if (c.cfg->smoother == SmootherKind::ProjectedGaussSeidel) {
    x = project_box(x, bounds);
    for (int it = 0; it < iters; ++it) {
      const VecX g = Q * x - rhs;
      if (kkt_residual_from_gradient(x, g, bounds) <= tol) break;
      pgs_sweep(Q, rhs, bounds, x, ZeroDiagonalPolicy::Skip);
    }
    return x;
  }
  QuadraticRef f(Q, rhs);
  ShiftedObjective F(f, k, *c.log);
  SmootherConfig scfg;
  scfg.tolerance = tol;
  scfg.max_iterations = iters;
  return gp_solve(F, bounds, std::move(x), scfg, (*c.states)[static_cast<std::size_t>(k)]);
}

void widen_active_bounds(const ActiveSetMask& mask, VecX& lo_hat, VecX& hi_hat) {
  for (int i = 0; i < lo_hat.size(); ++i) {
    const Activity a = mask.state[static_cast<std::size_t>(i)];
    if (a == Activity::AtLower) lo_hat[i] = -kInf;
    if (a == Activity::AtUpper) hi_hat[i] = kInf;
  }
}

// Correction-scheme cycle on the quadratic model 1/2 x'Qx - rhs'x. The
// finest matrix and residual are truncated on the current active set;
// coarse data inherit the truncation through the transfer products.
// level_scale tracks the 1/4-per-level factor the transfers bake into
// the data, so the stationarity tolerances stay meaningful in the
// original units.
VecX cs_mgm(Ctx& c, int k, VecX x, const SpMat& Q, const VecX& rhs, const BoundSet& bounds,
            double level_scale) {
  note_coarse_entry(c, k, x, bounds);
  if (k == 0)
    return smooth_quadratic(c, k, Q, rhs, bounds, std::move(x),
                            level_scale * c.cfg->coarse_tol, c.cfg->coarse_max_iter);

  x = smooth_quadratic(c, k, Q, rhs, bounds, std::move(x), level_scale * c.cfg->smooth_tol,
                       c.cfg->pre_smooth);

  VecX residual = rhs - Q * x;
  VecX lo_hat = bounds.lower - x;
  VecX hi_hat = bounds.upper - x;
  SpMat Q_trunc;
  const SpMat* Q_form = &Q;
  if (k == c.finest) {
    const ActiveSetMask mask = detect_active(x, bounds);
    const Mask any = mask.any_active();
    Q_trunc = truncate_matrix(Q, any);
    Q_form = &Q_trunc;
    residual = truncate_vector(std::move(residual), any);
    widen_active_bounds(mask, lo_hat, hi_hat);
    if (c.obs && c.obs->on_truncation) c.obs->on_truncation(k);
  }

  if (c.obs && c.obs->on_galerkin) c.obs->on_galerkin(k);
  SpMat Q_coarse = galerkin_coarse(*Q_form, *c.grid, k);
  VecX rhs_coarse = c.grid->restrict_to_coarse(k, residual);
  BoundSet coarse_bounds;
  coarse_bounds.lower = c.grid->restrict_bounds_max(k, lo_hat);
  coarse_bounds.upper = c.grid->restrict_bounds_min(k, hi_hat);

  VecX v = cs_mgm(c, k - 1, VecX::Zero(Q_coarse.rows()), Q_coarse, rhs_coarse, coarse_bounds,
                  0.25 * level_scale);
  x += c.grid->prolongate(k, v);

  return smooth_quadratic(c, k, Q, rhs, bounds, std::move(x), level_scale * c.cfg->smooth_tol,
                          c.cfg->post_smooth);
}

// Full-approximation cycle with truncation. Matrix-representable kinds
// inherit the truncated quadratic part through transfer products (the
// 1/4-per-level factor rides along); their nodal weights are
// rediscretized with the matching scale so both parts stay consistent.
// Kinds without a global matrix inherit by composing the (frozen)
// finest objective with the accumulated interpolation.
VecX fas_trunc_mgm(Ctx& c, int k, VecX x, const Objective& f, double level_scale,
                   const SpMat* chain_Q, std::shared_ptr<const Objective> comp_base,
                   std::shared_ptr<const SpMat> comp_interp, const VecX& shift,
                   const BoundSet& bounds) {
  note_coarse_entry(c, k, x, bounds);
  ShiftedObjective F(f, 1.0, &shift, k, *c.log);
  auto smooth = [&](VecX y, double tol, int iters) {
    SmootherConfig scfg;
    scfg.tolerance = level_scale * tol;  // the data carry this scale too
    scfg.max_iterations = iters;
    return gp_solve(F, bounds, std::move(y), scfg, (*c.states)[static_cast<std::size_t>(k)]);
  };

  if (k == 0) return smooth(std::move(x), c.cfg->coarse_tol, c.cfg->coarse_max_iter);

  x = smooth(std::move(x), c.cfg->smooth_tol, c.cfg->pre_smooth);
  VecX xc = c.grid->restrict_to_coarse(k, x);

  ShiftedObjective F0(f, 1.0, nullptr, k, *c.log);
  VecX g = F0.gradient(x);
  VecX lo_hat = bounds.lower - x;
  VecX hi_hat = bounds.upper - x;

  SpMat Q_trunc;
  const SpMat* Q_chain = chain_Q;
  if (k == c.finest) {
    const ActiveSetMask mask = detect_active(x, bounds);
    const Mask any = mask.any_active();
    g = truncate_vector(std::move(g), any);
    widen_active_bounds(mask, lo_hat, hi_hat);
    if (chain_Q) {
      Q_trunc = truncate_matrix(*chain_Q, any);
      Q_chain = &Q_trunc;
    } else {
      comp_base = truncate(c.ps->at(k), mask).objective;  // values frozen at their bound
    }
    if (c.obs && c.obs->on_truncation) c.obs->on_truncation(k);
  }

  const double coarse_scale = 0.25 * level_scale;
  std::unique_ptr<Objective> coarse_own;
  const Objective* coarse_f = nullptr;
  const SpMat* coarse_chain = nullptr;
  std::shared_ptr<const SpMat> coarse_interp;
  if (Q_chain) {
    if (c.obs && c.obs->on_galerkin) c.obs->on_galerkin(k);
    SpMat Q_coarse = galerkin_coarse(*Q_chain, *c.grid, k);
    const int nc = static_cast<int>(Q_coarse.rows());
    const Objective* base = c.ps->at(k - 1).objective.get();
    if (const auto* nodal = dynamic_cast<const NodalObjective*>(base)) {
      coarse_own = std::make_unique<NodalObjective>(std::move(Q_coarse), VecX::Zero(nc),
                                                    coarse_scale * nodal->weights(),
                                                    nodal->term());
    } else {
      coarse_own = std::make_unique<QuadraticObjective>(std::move(Q_coarse), VecX::Zero(nc));
    }
    coarse_f = coarse_own.get();
    coarse_chain = coarse_f->quadratic_matrix();
  } else {
    if (c.obs && c.obs->on_galerkin) c.obs->on_galerkin(k);
    const SpMat& P = c.grid->prolongation_matrix(k);
    coarse_interp =
        comp_interp ? std::make_shared<const SpMat>(SpMat(*comp_interp * P))
                    : std::make_shared<const SpMat>(P);
    coarse_own = std::make_unique<ComposedObjective>(comp_base, coarse_interp, coarse_scale);
    coarse_f = coarse_own.get();
  }

  VecX coarse_shift = c.grid->restrict_to_coarse(k, shift);
  {
    ShiftedObjective C0(*coarse_f, 1.0, nullptr, k - 1, *c.log);
    coarse_shift += C0.gradient(xc);
  }
  coarse_shift -= c.grid->restrict_to_coarse(k, g);

  BoundSet coarse_bounds;
  coarse_bounds.lower = c.grid->restrict_bounds_max(k, lo_hat) + xc;
  coarse_bounds.upper = c.grid->restrict_bounds_min(k, hi_hat) + xc;

  VecX v = fas_trunc_mgm(c, k - 1, VecX(xc), *coarse_f, coarse_scale, coarse_chain, comp_base,
                         coarse_interp, coarse_shift, coarse_bounds);
  x += c.grid->prolongate(k, v - xc);

  return smooth(std::move(x), c.cfg->smooth_tol, c.cfg->post_smooth);
}

// Full-approximation cycle without truncation: rediscretized coarse
// objectives (transfer-scaled), guarded coarse bounds, optional sum
// constraint carried by restriction. Kinds without a global matrix use
// the composed coarse objective instead of a rediscretization, for the
// same curvature-consistency reason as in the truncated cycle.
VecX fas_plain_mgm(Ctx& c, int k, VecX x, double level_scale,
                   std::shared_ptr<const Objective> comp_base,
                   std::shared_ptr<const SpMat> comp_interp, const VecX& shift,
                   const BoundSet& bounds, std::optional<double> gamma) {
  note_coarse_entry(c, k, x, bounds);
  std::unique_ptr<Objective> composed_here;
  const Objective* f = c.ps->at(k).objective.get();
  double run_scale = level_scale;
  if (comp_base && k < c.finest) {
    composed_here = std::make_unique<ComposedObjective>(comp_base, comp_interp, level_scale);
    f = composed_here.get();
    run_scale = 1.0;
  }
  ShiftedObjective F(*f, run_scale, &shift, k, *c.log);
  auto smooth = [&](VecX y, double tol, int iters) {
    SmootherConfig scfg;
    // gradient-based stops see the scaled data; the backtracking solver
    // stops on the step norm, which lives in unscaled units
    scfg.tolerance = gamma ? tol : level_scale * tol;
    scfg.max_iterations = iters;
    auto& st = (*c.states)[static_cast<std::size_t>(k)];
    if (gamma) return armijo_pg_solve(F, bounds, *gamma, std::move(y), scfg, st);
    return gp_solve(F, bounds, std::move(y), scfg, st);
  };

  if (k == 0) return smooth(std::move(x), c.cfg->coarse_tol, c.cfg->coarse_max_iter);

  x = smooth(std::move(x), c.cfg->smooth_tol, c.cfg->pre_smooth);
  VecX xc = c.grid->restrict_to_coarse(k, x);

  ShiftedObjective F0(*f, run_scale, nullptr, k, *c.log);
  const VecX g = F0.gradient(x);
  const double coarse_scale = 0.25 * level_scale;

  std::unique_ptr<Objective> coarse_composed;
  const Objective* coarse_f = c.ps->at(k - 1).objective.get();
  double coarse_run_scale = coarse_scale;
  std::shared_ptr<const SpMat> coarse_interp;
  if (comp_base) {
    const SpMat& P = c.grid->prolongation_matrix(k);
    coarse_interp = comp_interp ? std::make_shared<const SpMat>(SpMat(*comp_interp * P))
                                : std::make_shared<const SpMat>(P);
    coarse_composed = std::make_unique<ComposedObjective>(comp_base, coarse_interp, coarse_scale);
    coarse_f = coarse_composed.get();
    coarse_run_scale = 1.0;
  }

  VecX coarse_shift = c.grid->restrict_to_coarse(k, shift - g);
  {
    ShiftedObjective C0(*coarse_f, coarse_run_scale, nullptr, k - 1, *c.log);
    coarse_shift += C0.gradient(xc);
  }

  VecX lo_hat = bounds.lower - x;
  VecX hi_hat = bounds.upper - x;
  const ActiveSetMask mask = detect_active(x, bounds);
  if (k == c.finest) widen_active_bounds(mask, lo_hat, hi_hat);

  BoundSet coarse_bounds;
  coarse_bounds.lower = c.grid->restrict_bounds_guarded_lower(k, lo_hat, mask.lower()) + xc;
  coarse_bounds.upper = c.grid->restrict_bounds_guarded_upper(k, hi_hat, mask.upper()) + xc;

  std::optional<double> coarse_gamma;
  if (gamma) coarse_gamma = xc.sum();

  VecX v = fas_plain_mgm(c, k - 1, VecX(xc), coarse_scale, comp_base, coarse_interp,
                         coarse_shift, coarse_bounds, coarse_gamma);
  x += c.grid->prolongate(k, v - xc);

  return smooth(std::move(x), c.cfg->smooth_tol, c.cfg->post_smooth);
}

void validate_compat(const ProblemSet& ps, const VCycleConfig& cfg) {
  cfg.validate();
  if (ps.levels.empty()) throw std::invalid_argument("solve: empty problem set");
  const LevelProblem& top = ps.at(ps.finest());
  const bool has_equality = top.equality_sum.has_value();
  if (cfg.variant == CycleVariant::CsTruncated &&
      !dynamic_cast<const QuadraticObjective*>(top.objective.get()))
    throw std::invalid_argument("cs-truncated cycle requires a plain quadratic objective");
  if (has_equality && cfg.variant != CycleVariant::FasPlain)
    throw std::invalid_argument(
        "the sum constraint is incompatible with truncation; use the fas-plain cycle");
  if (cfg.smoother == SmootherKind::ProjectedGaussSeidel &&
      cfg.variant != CycleVariant::CsTruncated)
    throw std::invalid_argument("projected Gauss-Seidel smoothing requires the cs-truncated cycle");
}

double feasibility_violation(const VecX& x, const BoundSet& b) {
  double v = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    if (b.lower[i] > -kInf) v = std::max(v, b.lower[i] - x[i]);
    if (b.upper[i] < kInf) v = std::max(v, x[i] - b.upper[i]);
  }
  return std::max(v, 0.0);
}

VecX run_cycle(Ctx& c, VecX x) {
  const int j = c.finest;
  const LevelProblem& top = c.ps->at(j);
  switch (c.cfg->variant) {
    case CycleVariant::CsTruncated: {
      const auto* quad = static_cast<const QuadraticObjective*>(top.objective.get());
      return cs_mgm(c, j, std::move(x), *quad->quadratic_matrix(), *quad->linear_term(),
                    top.bounds, 1.0);
    }
    case CycleVariant::FasTruncated: {
      const VecX zero_shift = VecX::Zero(top.objective->dim());
      return fas_trunc_mgm(c, j, std::move(x), *top.objective, 1.0,
                           top.objective->quadratic_matrix(), nullptr, nullptr, zero_shift,
                           top.bounds);
    }
    case CycleVariant::FasPlain: {
      const VecX zero_shift = VecX::Zero(top.objective->dim());
      // matrix-free kinds coarsen by composition with the interpolation
      std::shared_ptr<const Objective> comp_base;
      if (!top.objective->quadratic_matrix()) comp_base = top.objective;
      return fas_plain_mgm(c, j, std::move(x), 1.0, comp_base, nullptr, zero_shift, top.bounds,
                           top.equality_sum);
    }
  }
  throw std::logic_error("run_cycle: unknown variant");
}

}  // namespace

std::string to_string(CycleVariant v) {
  switch (v) {
    case CycleVariant::CsTruncated: return "cs-truncated";
    case CycleVariant::FasTruncated: return "fas-truncated";
    case CycleVariant::FasPlain: return "fas-plain";
  }
  return "?";
}

CycleVariant variant_from_string(const std::string& s) {
  if (s == "cs-truncated") return CycleVariant::CsTruncated;
  if (s == "fas-truncated") return CycleVariant::FasTruncated;
  if (s == "fas-plain") return CycleVariant::FasPlain;
  throw std::invalid_argument("unknown cycle variant '" + s + "'");
}

std::string to_string(SmootherKind s) {
  return s == SmootherKind::GradientProjection ? "gp" : "gsp";
}

SmootherKind smoother_from_string(const std::string& s) {
  if (s == "gp") return SmootherKind::GradientProjection;
  if (s == "gsp") return SmootherKind::ProjectedGaussSeidel;
  throw std::invalid_argument("unknown smoother '" + s + "'");
}

void VCycleConfig::validate() const {
  if (pre_smooth < 0 || post_smooth < 0 || pre_smooth + post_smooth < 1)
    throw std::invalid_argument("VCycleConfig: need at least one smoothing step per cycle");
  if (!(coarse_tol <= smooth_tol))
    throw std::invalid_argument("VCycleConfig: coarse tolerance must not exceed the smoothing one");
  if (coarse_max_iter < 1) throw std::invalid_argument("VCycleConfig: coarse_max_iter must be >= 1");
  if (max_cycles < 0) throw std::invalid_argument("VCycleConfig: max_cycles must be >= 0");
}

VecX v_cycle(const ProblemSet& problems, const VCycleConfig& cfg, VecX x, EvalLog& log,
             std::vector<SmootherState>& states, const CycleObserver* observer) {
  validate_compat(problems, cfg);
  const int levels = problems.finest() + 1;
  if (static_cast<int>(states.size()) < levels) states.resize(static_cast<std::size_t>(levels));
  log.ensure(problems.finest());
  Ctx c{&problems, problems.grid, &cfg, &log, &states, observer, problems.finest()};
  return run_cycle(c, std::move(x));
}

SolveReport solve(const ProblemSet& problems, const VCycleConfig& cfg, const VecX* reference,
                  const VecX* initial, const CycleObserver* observer) {
  validate_compat(problems, cfg);
  const int j = problems.finest();
  const LevelProblem& top = problems.at(j);
  const int n = top.objective->dim();

  SolveReport rep;
  rep.evals.resize(j + 1);
  std::vector<SmootherState> states(static_cast<std::size_t>(j) + 1);
  Ctx c{&problems, problems.grid, &cfg, &rep.evals, &states, observer, j};

  VecX x = initial ? *initial : VecX::Zero(n);
  const double ref_norm = reference ? reference->norm() : 0.0;
  rep.initial_objective = top.objective->value(x);
  if (reference) rep.initial_error = (x - *reference).norm();
  rep.stop_reason = "max_cycles";

  for (int t = 0; t < cfg.max_cycles; ++t) {
    const VecX prev = x;
    x = run_cycle(c, std::move(x));
    const double moved = (x - prev).norm();
    if (moved <= 1e-13 * std::max(1.0, x.norm())) {
      // fixed point at the resolution of the smoothers; a further cycle
      // cannot change anything, so the stagnant state is not recorded
      rep.stop_reason = "stalled";
      x = prev;
      break;
    }
    rep.cycles = t + 1;

    rep.objective_history.push_back(top.objective->value(x));
    rep.feasibility_violation_history.push_back(feasibility_violation(x, top.bounds));
    if (top.equality_sum)
      rep.equality_residual_history.push_back(std::abs(x.sum() - *top.equality_sum));
    if (cfg.keep_iterates) rep.iterates.push_back(x);

    if (reference) {
      const double err = (x - *reference).norm();
      rep.error_history.push_back(err);
      if (err <= cfg.reference_rel_tol * std::max(ref_norm, 1e-300)) {
        rep.stop_reason = "reference_tolerance";
        break;
      }
    }
    if (cfg.outer_step_tol > 0.0 && moved <= cfg.outer_step_tol) {
      rep.stop_reason = "step_tolerance";
      break;
    }
  }
  rep.solution = std::move(x);
  return rep;
}

double restrict_equality_target(const GridHierarchy& grid, int fine_level, const VecX& x_fine) {
  return grid.restrict_to_coarse(fine_level, x_fine).sum();
}

}  // namespace mgopt
