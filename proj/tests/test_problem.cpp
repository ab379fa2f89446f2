#include "mgopt/problem.hpp"

#include "doctest.h"

#include <cmath>
#include <limits>
#include <random>

using namespace mgopt;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

// central differences with a scaled step; the independent check for every
// analytic gradient in the problem module
VecX fd_gradient(const Objective& f, const VecX& x) {
  VecX g(x.size());
  for (int i = 0; i < x.size(); ++i) {
    const double step = 1e-6 * std::max(1.0, std::abs(x[i]));
    VecX xp = x, xm = x;
    xp[i] += step;
    xm[i] -= step;
    g[i] = (f.value(xp) - f.value(xm)) / (2.0 * step);
  }
  return g;
}

VecX random_feasible(const BoundSet& b, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  VecX x(b.dim());
  for (int i = 0; i < b.dim(); ++i) {
    const double lo = std::max(b.lower[i], -2.0);
    const double hi = std::min(b.upper[i], 2.0);
    const double t = 0.5 * (dist(rng) + 1.0);
    x[i] = lo + t * (hi - lo);
  }
  return x;
}
}  // namespace

TEST_CASE("element assembly matches the reference stiffness data") {
  const Eigen::Matrix4d K = laplacian_element_matrix();
  for (int i = 0; i < 4; ++i) CHECK(K(i, i) == doctest::Approx(2.0 / 3.0));
  CHECK(K(0, 3) == doctest::Approx(-1.0 / 3.0));
  CHECK(K(0, 1) == doctest::Approx(-1.0 / 6.0));

  const GridHierarchy h = build_hierarchy(2);
  SUBCASE("coarsest level: a single 8/3 entry") {
    const SpMat Q = assemble_laplacian(h.level(0));
    REQUIRE(Q.rows() == 1);
    CHECK(Q.coeff(0, 0) == doctest::Approx(8.0 / 3.0).epsilon(1e-15));
  }
  SUBCASE("constant fields lie in the interior kernel") {
    const SpMat Q = assemble_laplacian(h.level(2));
    const VecX r = Q * VecX::Ones(Q.rows());
    CHECK(std::abs(r[h.level(2).node(3, 3)]) <= 1e-14);
  }
  SUBCASE("assembled matrix is exactly symmetric") {
    const SpMat Q = assemble_laplacian(h.level(2));
    const SpMat D = SpMat(SpMat(Q.transpose()) - Q);
    const double asym = D.nonZeros() == 0 ? 0.0 : D.coeffs().abs().maxCoeff();
    CHECK(asym == 0.0);
  }
}

TEST_CASE("spiral problem data") {
  const GridHierarchy h = build_hierarchy(2);
  const ProblemSet ps = make_spiral(h);
  const GridLevel& lv = h.level(2);
  const int center = lv.node((lv.m - 1) / 2, (lv.m - 1) / 2);
  CHECK(ps.at(2).bounds.lower[center] == doctest::Approx(3.6));
  CHECK(ps.at(2).bounds.upper.minCoeff() == kInf);
  CHECK(ps.at(2).objective->linear_term()->isZero(0.0));
  CHECK(!ps.at(2).equality_sum.has_value());
}

TEST_CASE("nonquadratic problem data") {
  const GridHierarchy h = build_hierarchy(3);
  const ProblemSet ps = make_nonquadratic(h);
  const GridLevel& lv = h.level(3);
  CHECK(ps.at(3).bounds.upper.maxCoeff() == 0.5);
  CHECK(ps.at(3).bounds.upper.minCoeff() == 0.5);
  // node sitting at (7/16, 7/16): the paraboloid vertex
  const int ix = 6;  // (6+1)/16 == 7/16
  CHECK(lv.coord(ix) == 7.0 / 16.0);
  CHECK(ps.at(3).bounds.lower[lv.node(ix, ix)] == doctest::Approx(0.2));
  // nodal term has zero slope at the origin
  const auto* nodal = dynamic_cast<const NodalObjective*>(ps.at(3).objective.get());
  REQUIRE(nodal != nullptr);
  const VecX zero = VecX::Zero(lv.n);
  const VecX g = nodal->gradient(zero);
  const VecX expected = -*nodal->linear_term();  // Q x and the nodal slope vanish
  CHECK((g - expected).lpNorm<Eigen::Infinity>() <= 1e-14);
}

TEST_CASE("minimal surface problem data") {
  const GridHierarchy h = build_hierarchy(2);
  const GridLevel& lv = h.level(2);

  SUBCASE("flat zero surface over a zero boundary has unit area") {
    MinimalSurfaceObjective flat(lv, [](double, double) { return 0.0; });
    const VecX zero = VecX::Zero(lv.n);
    CHECK(flat.value(zero) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(flat.gradient(zero).lpNorm<Eigen::Infinity>() == 0.0);
  }

  SUBCASE("boundary formulas agree at the corners") {
    CHECK(minsurf_boundary(0.0, 0.0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(minsurf_boundary(1.0, 0.0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(minsurf_boundary(0.0, 1.0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(minsurf_boundary(1.0, 1.0) == doctest::Approx(0.0).epsilon(1e-12));
  }

  SUBCASE("obstacle peaks at the domain center") {
    const ProblemSet ps = make_minsurf(h);
    const int center = lv.node((lv.m - 1) / 2, (lv.m - 1) / 2);
    CHECK(ps.at(2).bounds.lower[center] == doctest::Approx(0.55));
    CHECK(ps.at(2).bounds.upper.minCoeff() == kInf);
  }
}

TEST_CASE("equality problem data") {
  const GridHierarchy h = build_hierarchy(4);
  const ProblemSet ps = make_equality(h);
  const GridLevel& lv = h.level(4);
  const int center = lv.node((lv.m - 1) / 2, (lv.m - 1) / 2);
  CHECK(ps.at(4).bounds.lower[center] == doctest::Approx(2.5));
  REQUIRE(ps.at(4).equality_sum.has_value());
  CHECK(*ps.at(4).equality_sum == 1024.0);
  // the constant vector meeting the constraint has a unit lumped integral
  const double c = *ps.at(4).equality_sum / lv.n;
  CHECK(lv.h * lv.h * (c * lv.n) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("analytic gradients match central differences") {
  const GridHierarchy h = build_hierarchy(2);
  std::mt19937_64 rng(17);
  for (const char* family : {"spiral", "nonquad", "minsurf", "equality"}) {
    const ProblemSet ps = make_problem(family, h);
    const LevelProblem& lp = ps.at(2);
    for (int rep = 0; rep < 3; ++rep) {
      const VecX x = random_feasible(lp.bounds, rng);
      const VecX g = lp.objective->gradient(x);
      const VecX fd = fd_gradient(*lp.objective, x);
      const double rel = (g - fd).norm() / std::max(1.0, g.norm());
      CAPTURE(family);
      CHECK(rel <= 1e-6);
    }
  }
}

TEST_CASE("evaluation counters attribute one increment per call") {
  const GridHierarchy h = build_hierarchy(1);
  const ProblemSet ps = make_spiral(h);
  EvalLog log;
  log.resize(2);
  const VecX x = VecX::Zero(ps.at(1).objective->dim());
  ps.value(1, x, log);
  ps.value(1, x, log);
  ps.gradient(1, x, log);
  ps.value(0, VecX::Zero(1), log);
  CHECK(log.value_calls[1] == 2);
  CHECK(log.gradient_calls[1] == 1);
  CHECK(log.value_calls[0] == 1);
  CHECK(log.gradient_calls[0] == 0);
  CHECK(log.combined(1) == 3);
  CHECK(log.combined_total() == 4);
}

TEST_CASE("evaluators reject non-finite points") {
  const GridHierarchy h = build_hierarchy(1);
  const ProblemSet ps = make_spiral(h);
  EvalLog log;
  VecX bad = VecX::Zero(ps.at(1).objective->dim());
  bad[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(ps.value(1, bad, log), std::invalid_argument);
  CHECK_THROWS_AS(ps.gradient(1, bad, log), std::invalid_argument);
}

TEST_CASE("quadratic evaluator agrees with the raw sparse data") {
  const GridHierarchy h = build_hierarchy(3);
  const ProblemSet ps = make_spiral(h);
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  VecX x(ps.at(3).objective->dim());
  for (int i = 0; i < x.size(); ++i) x[i] = dist(rng);
  const SpMat& Q = *ps.at(3).objective->quadratic_matrix();
  const double direct = 0.5 * x.dot(Q * x);
  const double via = ps.at(3).objective->value(x);
  CHECK(std::abs(direct - via) <= 1e-12 * std::max(1.0, std::abs(direct)));
}

TEST_CASE("matrix truncation zeroes active rows and columns") {
  SpMat Q(2, 2);
  Q.insert(0, 0) = 2.0;
  Q.insert(0, 1) = -1.0;
  Q.insert(1, 0) = -1.0;
  Q.insert(1, 1) = 2.0;
  Q.makeCompressed();
  VecX q(2);
  q << 1.0, 1.0;
  const Mask active = {1, 0};

  const SpMat Qt = truncate_matrix(Q, active);
  CHECK(Qt.coeff(0, 0) == 0.0);
  CHECK(Qt.coeff(0, 1) == 0.0);
  CHECK(Qt.coeff(1, 0) == 0.0);
  CHECK(Qt.coeff(1, 1) == 2.0);
  const VecX qt = truncate_vector(q, active);
  CHECK(qt[0] == 0.0);
  CHECK(qt[1] == 1.0);
}

TEST_CASE("problem truncation: trivial masks and idempotence") {
  const GridHierarchy h = build_hierarchy(2);
  std::mt19937_64 rng(31);

  for (const char* family : {"spiral", "nonquad", "minsurf"}) {
    CAPTURE(family);
    const ProblemSet ps = make_problem(family, h);
    const LevelProblem& lp = ps.at(2);
    const int n = lp.objective->dim();

    ActiveSetMask none;
    none.state.assign(static_cast<std::size_t>(n), Activity::Free);
    const LevelProblem same = truncate(lp, none);
    const VecX probe = random_feasible(lp.bounds, rng);
    CHECK(same.objective->value(probe) == doctest::Approx(lp.objective->value(probe)));

    ActiveSetMask all;
    all.state.assign(static_cast<std::size_t>(n), Activity::AtLower);
    const LevelProblem dead = truncate(lp, all);
    const VecX probe2 = random_feasible(lp.bounds, rng);
    CHECK(dead.objective->value(probe) == doctest::Approx(dead.objective->value(probe2)));
    CHECK(dead.objective->gradient(probe).lpNorm<Eigen::Infinity>() == 0.0);

    // idempotence on a random mask
    ActiveSetMask mask;
    mask.state.assign(static_cast<std::size_t>(n), Activity::Free);
    std::uniform_int_distribution<int> coin(0, 3);
    for (int i = 0; i < n; ++i)
      if (coin(rng) == 0) mask.state[static_cast<std::size_t>(i)] = Activity::AtLower;
    const LevelProblem once = truncate(lp, mask);
    const LevelProblem twice = truncate(once, mask);
    CHECK(once.objective->value(probe) == doctest::Approx(twice.objective->value(probe)));
    CHECK((once.objective->gradient(probe) - twice.objective->gradient(probe))
              .lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("transfer coarsening reproduces the nested-space matrix") {
  const GridHierarchy h = build_hierarchy(2);
  const ProblemSet ps = make_spiral(h);

  SUBCASE("level pair (1,0): a quarter of the assembled coarse entry") {
    const SpMat coarse = galerkin_coarse(*ps.at(1).objective->quadratic_matrix(), h, 1);
    REQUIRE(coarse.rows() == 1);
    CHECK(coarse.coeff(0, 0) == doctest::Approx(0.25 * 8.0 / 3.0).epsilon(1e-14));
  }

  SUBCASE("level pair (2,1): a quarter of the assembled coarse matrix") {
    const SpMat coarse = galerkin_coarse(*ps.at(2).objective->quadratic_matrix(), h, 2);
    const SpMat direct = assemble_laplacian(h.level(1));
    const Eigen::MatrixXd diff =
        Eigen::MatrixXd(coarse) - 0.25 * Eigen::MatrixXd(direct);
    CHECK(diff.cwiseAbs().maxCoeff() <= 1e-14);
  }

  SUBCASE("identity coarsens to the squared-stencil weights on the diagonal") {
    SpMat eye(h.level(2).n, h.level(2).n);
    eye.setIdentity();
    const SpMat coarse = galerkin_coarse(eye, h, 2);
    CHECK(coarse.coeff(h.level(1).node(1, 1), h.level(1).node(1, 1)) ==
          doctest::Approx(0.5625).epsilon(1e-14));
  }

  SUBCASE("result is exactly symmetric") {
    const SpMat coarse = galerkin_coarse(*ps.at(2).objective->quadratic_matrix(), h, 2);
    const SpMat diff = SpMat(SpMat(coarse.transpose()) - coarse);
    const double asym = diff.nonZeros() == 0 ? 0.0 : diff.coeffs().abs().maxCoeff();
    CHECK(asym == 0.0);
  }
}

TEST_CASE("active-set detection uses exact equality") {
  BoundSet b;
  b.lower = VecX::Constant(3, 0.0);
  b.upper = VecX::Constant(3, 1.0);

  VecX interior = VecX::Constant(3, 0.5);
  const ActiveSetMask free_mask = detect_active(interior, b);
  CHECK(!free_mask.any());

  const ActiveSetMask low = detect_active(VecX(b.lower), b);
  CHECK(low.count_active() == 3);
  for (auto s : low.state) CHECK(s == Activity::AtLower);

  VecX outside(3);
  outside << -2.0, 0.5, 7.0;
  VecX clipped(3);
  for (int i = 0; i < 3; ++i)
    clipped[i] = std::min(std::max(outside[i], b.lower[i]), b.upper[i]);
  const ActiveSetMask clip_mask = detect_active(clipped, b);
  CHECK(clip_mask.state[0] == Activity::AtLower);
  CHECK(clip_mask.state[1] == Activity::Free);
  CHECK(clip_mask.state[2] == Activity::AtUpper);

  CHECK_THROWS_AS(detect_active(outside, b), std::domain_error);
}
