#include "mgopt/multigrid.hpp"

#include "mgopt/harness.hpp"

#include "doctest.h"

#include <cmath>
#include <limits>
#include <set>

using namespace mgopt;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

VCycleConfig basic_config(CycleVariant variant, int nu) {
  VCycleConfig vc;
  vc.variant = variant;
  vc.pre_smooth = nu;
  vc.post_smooth = nu;
  return vc;
}

// textbook correction-scheme cycle written independently of the library
// recursion: no truncation, no bounds, same smoother and transfers
VecX reference_cs_cycle(const ProblemSet& ps, int k, VecX x, const SpMat& Q, const VecX& rhs,
                        EvalLog& log, std::vector<SmootherState>& states, const VCycleConfig& vc) {
  const GridHierarchy& grid = *ps.grid;
  const BoundSet wide = BoundSet::unbounded(static_cast<int>(x.size()));
  QuadraticObjective f(Q, rhs);
  ShiftedObjective F(f, k, log);
  SmootherConfig sc;
  sc.tolerance = (k == 0) ? vc.coarse_tol : vc.smooth_tol;
  sc.max_iterations = (k == 0) ? vc.coarse_max_iter : vc.pre_smooth;
  if (k == 0) return gp_solve(F, wide, std::move(x), sc, states[0]);
  x = gp_solve(F, wide, std::move(x), sc, states[static_cast<std::size_t>(k)]);
  const VecX residual = rhs - Q * x;
  const SpMat Qc = galerkin_coarse(Q, grid, k);
  const VecX rc = grid.restrict_to_coarse(k, residual);
  const VecX v = reference_cs_cycle(ps, k - 1, VecX::Zero(Qc.rows()), Qc, rc, log, states, vc);
  x += grid.prolongate(k, v);
  sc.max_iterations = vc.post_smooth;
  return gp_solve(F, wide, std::move(x), sc, states[static_cast<std::size_t>(k)]);
}
}  // namespace

TEST_CASE("config validation") {
  VCycleConfig vc;
  vc.pre_smooth = 0;
  vc.post_smooth = 0;
  CHECK_THROWS_AS(vc.validate(), std::invalid_argument);
  vc.post_smooth = 1;
  vc.coarse_tol = 1.0;
  vc.smooth_tol = 1e-9;
  CHECK_THROWS_AS(vc.validate(), std::invalid_argument);
}

TEST_CASE("variant and smoother names round-trip") {
  for (auto v : {CycleVariant::CsTruncated, CycleVariant::FasTruncated, CycleVariant::FasPlain})
    CHECK(variant_from_string(to_string(v)) == v);
  CHECK_THROWS_AS(variant_from_string("w-cycle"), std::invalid_argument);
  for (auto s : {SmootherKind::GradientProjection, SmootherKind::ProjectedGaussSeidel})
    CHECK(smoother_from_string(to_string(s)) == s);
}

TEST_CASE("variant/problem compatibility is enforced") {
  const GridHierarchy grid = build_hierarchy(2);
  EvalLog log;
  std::vector<SmootherState> states;

  const ProblemSet nonquad = make_nonquadratic(grid);
  CHECK_THROWS_AS(v_cycle(nonquad, basic_config(CycleVariant::CsTruncated, 1),
                          VecX::Zero(nonquad.at(2).objective->dim()), log, states),
                  std::invalid_argument);

  const ProblemSet equality = make_equality(grid);
  CHECK_THROWS_AS(v_cycle(equality, basic_config(CycleVariant::FasTruncated, 1),
                          VecX::Zero(equality.at(2).objective->dim()), log, states),
                  std::invalid_argument);

  const ProblemSet spiral = make_spiral(grid);
  VCycleConfig vc = basic_config(CycleVariant::FasPlain, 1);
  vc.smoother = SmootherKind::ProjectedGaussSeidel;
  CHECK_THROWS_AS(
      v_cycle(spiral, vc, VecX::Zero(spiral.at(2).objective->dim()), log, states),
      std::invalid_argument);
}

TEST_CASE("one deep cycle matches a direct solve on a small spiral") {
  const GridHierarchy grid = build_hierarchy(1);
  const ProblemSet ps = make_spiral(grid);
  const int n = ps.at(1).objective->dim();

  VCycleConfig vc = basic_config(CycleVariant::CsTruncated, 400);
  vc.smooth_tol = 1e-10;
  vc.coarse_tol = 1e-11;

  EvalLog log;
  std::vector<SmootherState> states;
  const VecX x = v_cycle(ps, vc, VecX::Zero(n), log, states);

  EvalLog ref_log;
  SmootherState st;
  ShiftedObjective F(*ps.at(1).objective, 1, ref_log);
  SmootherConfig sc;
  sc.tolerance = 1e-11;
  sc.max_iterations = 200000;
  const VecX direct = gp_solve(F, ps.at(1).bounds, VecX::Zero(n), sc, st);
  CHECK((x - direct).norm() <= 1e-7);
}

TEST_CASE("unbounded cycle equals a textbook correction scheme") {
  const GridHierarchy grid = build_hierarchy(2);
  ProblemSet ps = make_spiral(grid);
  // strip the obstacle: pure linear multigrid territory
  for (auto& lp : ps.levels) lp.bounds = BoundSet::unbounded(lp.objective->dim());

  VCycleConfig vc = basic_config(CycleVariant::CsTruncated, 2);
  const int n = ps.at(2).objective->dim();

  EvalLog log_a;
  std::vector<SmootherState> st_a;
  VecX a = VecX::Zero(n);
  EvalLog log_b;
  std::vector<SmootherState> st_b(3);
  VecX b = VecX::Zero(n);
  const SpMat& Q = *ps.at(2).objective->quadratic_matrix();
  const VecX& q = *ps.at(2).objective->linear_term();
  for (int cycle = 0; cycle < 3; ++cycle) {
    a = v_cycle(ps, vc, std::move(a), log_a, st_a);
    b = reference_cs_cycle(ps, 2, std::move(b), Q, q, log_b, st_b, vc);
    CHECK((a - b).norm() <= 1e-10 * std::max(1.0, b.norm()));
  }
}

TEST_CASE("truncated full-approximation cycle coincides with the correction scheme on quadratics") {
  const GridHierarchy grid = build_hierarchy(1);
  const ProblemSet ps = make_spiral(grid);
  const int n = ps.at(1).objective->dim();

  VCycleConfig cs = basic_config(CycleVariant::CsTruncated, 2);
  VCycleConfig fas = basic_config(CycleVariant::FasTruncated, 2);

  EvalLog log_a, log_b;
  std::vector<SmootherState> st_a, st_b;
  VecX a = VecX::Zero(n), b = VecX::Zero(n);
  for (int cycle = 0; cycle < 4; ++cycle) {
    a = v_cycle(ps, cs, std::move(a), log_a, st_a);
    b = v_cycle(ps, fas, std::move(b), log_b, st_b);
    CHECK((a - b).norm() <= 1e-9 * std::max(1.0, a.norm()));
  }
}

TEST_CASE("truncation happens once, at the finest level, and coarsening walks the chain") {
  const GridHierarchy grid = build_hierarchy(3);
  const ProblemSet ps = make_spiral(grid);
  std::vector<int> truncated_at;
  std::vector<int> galerkin_at;
  CycleObserver obs;
  obs.on_truncation = [&](int level) { truncated_at.push_back(level); };
  obs.on_galerkin = [&](int level) { galerkin_at.push_back(level); };

  EvalLog log;
  std::vector<SmootherState> states;
  v_cycle(ps, basic_config(CycleVariant::CsTruncated, 1),
          VecX::Zero(ps.at(3).objective->dim()), log, states, &obs);

  REQUIRE(truncated_at.size() == 1);
  CHECK(truncated_at[0] == 3);
  REQUIRE(galerkin_at.size() == 3);
  CHECK(galerkin_at == std::vector<int>({3, 2, 1}));
}

TEST_CASE("restricted iterates enter every coarse solve feasibly") {
  for (const char* family : {"spiral", "nonquad", "minsurf", "equality"}) {
    CAPTURE(family);
    const GridHierarchy grid = build_hierarchy(3);
    const ProblemSet ps = make_problem(family, grid);
    CycleObserver obs;
    int checks = 0;
    obs.on_coarse_entry = [&](int, const VecX& x, const BoundSet& b) {
      ++checks;
      for (int i = 0; i < x.size(); ++i) {
        CHECK(x[i] >= b.lower[i]);
        CHECK(x[i] <= b.upper[i]);
      }
    };
    VCycleConfig vc = basic_config(CycleVariant::FasPlain, 1);
    vc.max_cycles = 3;
    solve(ps, vc, nullptr, nullptr, &obs);
    CHECK(checks > 0);
  }
}

TEST_CASE("plain cycle keeps iterates feasible and the objective monotone") {
  for (const char* family : {"spiral", "nonquad", "minsurf", "equality"}) {
    CAPTURE(family);
    const GridHierarchy grid = build_hierarchy(3);
    const ProblemSet ps = make_problem(family, grid);
    VCycleConfig vc = basic_config(CycleVariant::FasPlain, 1);
    vc.max_cycles = 6;
    const SolveReport rep = solve(ps, vc);
    REQUIRE(rep.cycles == 6);
    for (double v : rep.feasibility_violation_history) CHECK(v == 0.0);
    for (std::size_t t = 1; t < rep.objective_history.size(); ++t)
      CHECK(rep.objective_history[t] <=
            rep.objective_history[t - 1] + 1e-10 * std::abs(rep.objective_history[t - 1]));
    if (ps.at(3).equality_sum) {
      for (double r : rep.equality_residual_history)
        CHECK(r <= 1e-10 * std::abs(*ps.at(3).equality_sum));
    }
  }
}

TEST_CASE("equality bookkeeping under restriction") {
  const GridHierarchy grid = build_hierarchy(2);

  SUBCASE("zero field restricts to a zero target") {
    CHECK(restrict_equality_target(grid, 2, VecX::Zero(grid.level(2).n)) == 0.0);
  }

  SUBCASE("prolongated fields restrict to the stencil-weighted sum") {
    VecX v = VecX::Zero(grid.level(1).n);
    v[grid.level(1).node(1, 1)] = 2.0;
    const VecX fine = grid.prolongate(2, v);
    const double direct = grid.restrict_to_coarse(2, fine).sum();
    CHECK(restrict_equality_target(grid, 2, fine) == direct);
  }
}

TEST_CASE("outer loop bookkeeping") {
  const GridHierarchy grid = build_hierarchy(2);
  const ProblemSet ps = make_spiral(grid);

  SUBCASE("zero cycles returns the start and empty histories") {
    VCycleConfig vc = basic_config(CycleVariant::CsTruncated, 1);
    vc.max_cycles = 0;
    const SolveReport rep = solve(ps, vc);
    CHECK(rep.cycles == 0);
    CHECK(rep.solution.isZero(0.0));
    CHECK(rep.error_history.empty());
    CHECK(rep.objective_history.empty());
  }

  SUBCASE("reference stop fires and the histories line up") {
    const VecX ref = compute_reference(ps, 1e-11);
    VCycleConfig vc = basic_config(CycleVariant::CsTruncated, 2);
    vc.max_cycles = 50;
    const SolveReport rep = solve(ps, vc, &ref);
    CHECK(rep.stop_reason == "reference_tolerance");
    CHECK(rep.error_history.size() == static_cast<std::size_t>(rep.cycles));
    CHECK(rep.error_history.back() <= 1e-8 * ref.norm());
    CHECK(rep.initial_error == doctest::Approx(ref.norm()));
  }
}

TEST_CASE("fixed points: a cycle started at the solution stays there") {
  const GridHierarchy grid = build_hierarchy(2);
  struct Case {
    const char* family;
    CycleVariant variant;
  };
  const Case cases[] = {
      {"spiral", CycleVariant::CsTruncated},
      {"spiral", CycleVariant::FasTruncated},
      {"spiral", CycleVariant::FasPlain},
      {"nonquad", CycleVariant::FasTruncated},
      {"minsurf", CycleVariant::FasTruncated},
      {"equality", CycleVariant::FasPlain},
  };
  for (const Case& c : cases) {
    CAPTURE(c.family);
    CAPTURE(to_string(c.variant));
    const ProblemSet ps = make_problem(c.family, grid);
    const VecX star = compute_reference(ps, 1e-11);
    EvalLog log;
    std::vector<SmootherState> states;
    const VecX moved = v_cycle(ps, basic_config(c.variant, 2), VecX(star), log, states);
    CHECK((moved - star).norm() <= 1e-7);
  }
}
