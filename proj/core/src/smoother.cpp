#include "mgopt/smoother.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace mgopt {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

struct SearchResult {
  double step = 0.0;
  VecX point;
  VecX gradient;
  bool capped = false;
};

// Shared bracketing logic of the two gradient-based searches. probe(s)
// returns the trial point, its gradient and the directional-derivative
// surrogate gamma(s); gamma(0) < 0 is assumed. A nonnegative gamma means
// the step overshot: growing stops and steps back once, shrinking stops
// at the first negative gamma.
template <typename Probe>
SearchResult bracket_search(double s0, Probe&& probe, SmootherState& state,
                            const SmootherConfig& cfg) {
  struct Trial {
    double s;
    VecX point;
    VecX grad;
    double gamma;
  };
  auto eval = [&](double s) {
    Trial t;
    t.s = s;
    t.gamma = probe(s, t.point, t.grad);
    return t;
  };

  state.step_capped = false;
  Trial cur = eval(s0);
  if (cur.gamma < 0.0) {
    Trial prev = std::move(cur);
    for (int i = 0;; ++i) {
      if (i >= cfg.max_doublings)
        throw std::runtime_error("line search: unbounded descent direction");
      Trial next = eval(prev.s * cfg.step_growth);
      if (next.gamma >= 0.0) break;
      prev = std::move(next);
    }
    state.step = prev.s;
    return {prev.s, std::move(prev.point), std::move(prev.grad), false};
  }
  for (int i = 0;; ++i) {
    cur = eval(cur.s / cfg.step_growth);
    if (cur.gamma < 0.0) break;
    if (i + 1 >= cfg.max_halvings) {
      state.step_capped = true;
      break;
    }
  }
  state.step = cur.s;
  return {cur.s, std::move(cur.point), std::move(cur.grad), state.step_capped};
}

SearchResult search_unconstrained(const ShiftedObjective& f, const VecX& x, const VecX& g,
                                  SmootherState& state, const SmootherConfig& cfg) {
  auto probe = [&](double s, VecX& point, VecX& grad) {
    point = x - s * g;
    grad = f.gradient(point);
    return -g.dot(grad);
  };
  return bracket_search(state.step, probe, state, cfg);
}

SearchResult search_projected(const ShiftedObjective& f, const VecX& x, const VecX& g,
                              const BoundSet& bounds, SmootherState& state,
                              const SmootherConfig& cfg) {
  auto probe = [&](double s, VecX& point, VecX& grad) {
    point = project_box(x - s * g, bounds);
    grad = f.gradient(point);
    return masked_descent_derivative(g, grad, point, bounds);
  };
  return bracket_search(state.step, probe, state, cfg);
}

// Plain backtracking on function values, used when the gradient-based
// search cannot bracket (the objective stopped looking convex).
SearchResult armijo_box_fallback(const ShiftedObjective& f, const VecX& x, const VecX& g,
                                 const BoundSet& bounds, SmootherState& state,
                                 const SmootherConfig& cfg) {
  const double fx = f.value(x);
  double s = state.step;
  SearchResult r;
  for (int i = 0; i < cfg.max_halvings; ++i) {
    VecX trial = project_box(x - s * g, bounds);
    const double ft = f.value(trial);
    if (ft <= fx + cfg.armijo_sigma * g.dot(trial - x)) {
      r.point = std::move(trial);
      break;
    }
    s *= 0.5;
  }
  if (r.point.size() == 0) r.point = x;
  r.step = s;
  r.gradient = f.gradient(r.point);
  state.step = s;
  return r;
}

}  // namespace

VecX project_box(const VecX& x, const BoundSet& bounds) {
  if (x.size() != bounds.dim()) throw std::invalid_argument("project_box: dimension mismatch");
  VecX out(x.size());
  for (int i = 0; i < x.size(); ++i)
    out[i] = std::min(std::max(x[i], bounds.lower[i]), bounds.upper[i]);
  return out;
}

double kkt_residual_from_gradient(const VecX& x, const VecX& g, const BoundSet& bounds) {
  double acc = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    const double d = x[i] - std::min(std::max(x[i] - g[i], bounds.lower[i]), bounds.upper[i]);
    acc += d * d;
  }
  return std::sqrt(acc);
}

double kkt_residual(const ShiftedObjective& f, const BoundSet& bounds, const VecX& x) {
  return kkt_residual_from_gradient(x, f.gradient(x), bounds);
}

double masked_descent_derivative(const VecX& direction_gradient, const VecX& trial_gradient,
                                 const VecX& trial, const BoundSet& bounds) {
  double acc = 0.0;
  for (int i = 0; i < trial.size(); ++i) {
    if (trial[i] == bounds.lower[i] || trial[i] == bounds.upper[i]) continue;
    acc += direction_gradient[i] * trial_gradient[i];
  }
  return -acc;
}

double line_search_unconstrained(const ShiftedObjective& f, const VecX& x, const VecX& g,
                                 SmootherState& state, const SmootherConfig& cfg) {
  return search_unconstrained(f, x, g, state, cfg).step;
}

double line_search_projected(const ShiftedObjective& f, const VecX& x, const VecX& g,
                             const BoundSet& bounds, SmootherState& state,
                             const SmootherConfig& cfg) {
  return search_projected(f, x, g, bounds, state, cfg).step;
}

VecX sd_solve(const ShiftedObjective& f, VecX x, const SmootherConfig& cfg, SmootherState& state) {
  if (cfg.max_iterations <= 0) return x;
  VecX g = f.gradient(x);
  for (int it = 0; it < cfg.max_iterations; ++it) {
    if (g.norm() <= cfg.tolerance) break;
    SearchResult r = search_unconstrained(f, x, g, state, cfg);
    x = std::move(r.point);
    g = std::move(r.gradient);
  }
  return x;
}

VecX gp_solve(const ShiftedObjective& f, const BoundSet& bounds, VecX x,
              const SmootherConfig& cfg, SmootherState& state) {
  x = project_box(x, bounds);
  if (cfg.max_iterations <= 0) return x;
  VecX g = f.gradient(x);
  for (int it = 0; it < cfg.max_iterations; ++it) {
    if (kkt_residual_from_gradient(x, g, bounds) <= cfg.tolerance) break;
    SearchResult r = search_projected(f, x, g, bounds, state, cfg);
    if (r.capped) r = armijo_box_fallback(f, x, g, bounds, state, cfg);
    if ((r.point - x).isZero(0.0)) break;  // pinned everywhere; nothing left to move
    x = std::move(r.point);
    g = std::move(r.gradient);
  }
  return x;
}

void pgs_sweep(const SpMat& Q, const VecX& rhs, const BoundSet& bounds, VecX& x,
               ZeroDiagonalPolicy policy) {
  if (Q.rows() != x.size() || rhs.size() != x.size() || bounds.dim() != x.size())
    throw std::invalid_argument("pgs_sweep: dimension mismatch");
  for (int i = 0; i < Q.outerSize(); ++i) {
    double diag = 0.0;
    double off = 0.0;
    for (SpMat::InnerIterator it(Q, i); it; ++it) {
      if (static_cast<int>(it.col()) == i)
        diag = it.value();
      else
        off += it.value() * x[it.col()];
    }
    if (diag == 0.0) {
      if (policy == ZeroDiagonalPolicy::Reject)
        throw std::runtime_error("pgs_sweep: zero diagonal entry at row " + std::to_string(i));
      continue;
    }
    x[i] = std::min(std::max((rhs[i] - off) / diag, bounds.lower[i]), bounds.upper[i]);
  }
}

VecX project_box_hyperplane(const VecX& x, const BoundSet& bounds, double target_sum) {
  const int n = static_cast<int>(x.size());
  if (bounds.dim() != n) throw std::invalid_argument("project_box_hyperplane: dimension mismatch");
  if (n == 0) throw std::invalid_argument("project_box_hyperplane: empty problem");

  // explicit infeasibility check, with slack at the accuracy the
  // projection itself guarantees (degenerate sets where the target sits
  // exactly on the bound sum are legitimate)
  {
    double lo = 0.0, hi = 0.0;
    bool lo_inf = false, hi_inf = false;
    for (int i = 0; i < n; ++i) {
      if (bounds.lower[i] == -kInf)
        lo_inf = true;
      else
        lo += bounds.lower[i];
      if (bounds.upper[i] == kInf)
        hi_inf = true;
      else
        hi += bounds.upper[i];
    }
    const double slack = 1e-10 * std::max(1.0, std::abs(target_sum));
    if ((!lo_inf && lo > target_sum + slack) || (!hi_inf && hi < target_sum - slack))
      throw std::domain_error("project_box_hyperplane: empty feasible set");
  }

  // z(lambda) = clip(x - lambda); S(lambda) = sum z is continuous,
  // piecewise linear and nonincreasing. Sweep the breakpoints.
  struct Event {
    double lam;
    int idx;
    bool pin_lower;  // false: node leaves its upper bound, true: node hits its lower bound
  };
  std::vector<Event> events;
  events.reserve(2 * static_cast<std::size_t>(n));
  double pinned_sum = 0.0;
  double free_sum = 0.0;
  long free_cnt = 0;
  for (int i = 0; i < n; ++i) {
    if (bounds.upper[i] < kInf) {
      pinned_sum += bounds.upper[i];
      events.push_back({x[i] - bounds.upper[i], i, false});
    } else {
      free_sum += x[i];
      ++free_cnt;
    }
    if (bounds.lower[i] > -kInf) events.push_back({x[i] - bounds.lower[i], i, true});
  }
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    if (a.lam != b.lam) return a.lam < b.lam;
    if (a.pin_lower != b.pin_lower) return !a.pin_lower;
    return a.idx < b.idx;
  });

  double lambda = 0.0;
  bool found = false;
  double prev_lam = -kInf;
  for (const Event& ev : events) {
    const double s_here = pinned_sum + free_sum - ev.lam * static_cast<double>(free_cnt);
    if (s_here <= target_sum) {
      if (free_cnt > 0) {
        lambda = (pinned_sum + free_sum - target_sum) / static_cast<double>(free_cnt);
        lambda = std::min(std::max(lambda, prev_lam), ev.lam);
      } else {
        lambda = ev.lam;  // flat segment meeting the target
      }
      found = true;
      break;
    }
    if (ev.pin_lower) {
      --free_cnt;
      free_sum -= x[ev.idx];
      pinned_sum += bounds.lower[ev.idx];
    } else {
      pinned_sum -= bounds.upper[ev.idx];
      ++free_cnt;
      free_sum += x[ev.idx];
    }
    prev_lam = ev.lam;
  }
  if (!found) {
    if (free_cnt > 0) {
      lambda = (pinned_sum + free_sum - target_sum) / static_cast<double>(free_cnt);
      lambda = std::max(lambda, prev_lam);
    } else {
      lambda = prev_lam;  // everything pinned; pre-checks guarantee the sums match
    }
  }

  auto clip_shift = [&](double lam, VecX& z, long& nfree) {
    nfree = 0;
    double sum = 0.0, comp = 0.0;
    for (int i = 0; i < n; ++i) {
      const double v = x[i] - lam;
      double zi = v;
      if (zi < bounds.lower[i])
        zi = bounds.lower[i];
      else if (zi > bounds.upper[i])
        zi = bounds.upper[i];
      else
        ++nfree;
      z[i] = zi;
      const double y = zi - comp;
      const double t = sum + y;
      comp = (t - sum) - y;
      sum = t;
    }
    return sum;
  };

  VecX z(n);
  long nfree = 0;
  double sum = clip_shift(lambda, z, nfree);
  // one or two corrective passes keep the sum at the target up to rounding
  for (int pass = 0; pass < 2 && nfree > 0; ++pass) {
    const double gap = sum - target_sum;
    if (std::abs(gap) <= 1e-14 * std::max(1.0, std::abs(target_sum))) break;
    lambda += gap / static_cast<double>(nfree);
    sum = clip_shift(lambda, z, nfree);
  }
  return z;
}

VecX armijo_pg_solve(const ShiftedObjective& f, const BoundSet& bounds, double target_sum, VecX x,
                     const SmootherConfig& cfg, SmootherState& state) {
  x = project_box_hyperplane(x, bounds, target_sum);
  if (cfg.max_iterations <= 0) return x;
  double s = state.step;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    const VecX g = f.gradient(x);
    const double fx = f.value(x);
    VecX trial;
    double ft = fx, slope = 0.0;
    for (int halvings = 0;; ++halvings) {
      trial = project_box_hyperplane(x - s * g, bounds, target_sum);
      ft = f.value(trial);
      slope = g.dot(trial - x);
      if (ft <= fx + cfg.armijo_sigma * slope || halvings >= cfg.max_halvings) break;
      s *= 0.5;
    }
    // refine the accepted step toward the one-dimensional minimizer of
    // the interpolating parabola; a sufficient-decrease step alone can
    // sit where the stiffest modes see no damping at all
    const double curvature = 2.0 * (ft - fx - slope);
    if (curvature > 0.0 && slope < 0.0) {
      const double t = std::min(std::max(-slope / curvature, 0.1), 4.0);
      VecX refined = project_box_hyperplane(x - (s * t) * g, bounds, target_sum);
      const double fr = f.value(refined);
      if (fr <= fx + cfg.armijo_sigma * g.dot(refined - x) && fr <= ft) {
        s *= t;
        trial = std::move(refined);
      }
    }
    const double moved = (trial - x).norm();
    x = std::move(trial);
    if (moved <= cfg.tolerance) break;
  }
  state.step = s;
  return x;
}

}  // namespace mgopt
