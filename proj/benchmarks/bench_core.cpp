#include "mgopt/multigrid.hpp"
#include "mgopt/problem.hpp"
#include "mgopt/smoother.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

using namespace mgopt;

VecX random_vec(int n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  VecX v(n);
  for (int i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

void BM_Prolongate(benchmark::State& state) {
  const int level = static_cast<int>(state.range(0));
  const GridHierarchy grid = build_hierarchy(level);
  const VecX v = random_vec(grid.level(level - 1).n, 1);
  for (auto _ : state) {
    VecX out = grid.prolongate(level, v);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetComplexityN(grid.level(level).n);
}
BENCHMARK(BM_Prolongate)->DenseRange(4, 8, 2)->Complexity();

void BM_Restrict(benchmark::State& state) {
  const int level = static_cast<int>(state.range(0));
  const GridHierarchy grid = build_hierarchy(level);
  const VecX v = random_vec(grid.level(level).n, 2);
  for (auto _ : state) {
    VecX out = grid.restrict_to_coarse(level, v);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetComplexityN(grid.level(level).n);
}
BENCHMARK(BM_Restrict)->DenseRange(4, 8, 2)->Complexity();

void BM_PgsSweep(benchmark::State& state) {
  const int level = static_cast<int>(state.range(0));
  const GridHierarchy grid = build_hierarchy(level);
  const ProblemSet ps = make_spiral(grid);
  const SpMat& Q = *ps.at(level).objective->quadratic_matrix();
  const VecX rhs = random_vec(grid.level(level).n, 3);
  VecX x = VecX::Zero(grid.level(level).n);
  for (auto _ : state) {
    pgs_sweep(Q, rhs, ps.at(level).bounds, x);
    benchmark::DoNotOptimize(x.data());
  }
}
BENCHMARK(BM_PgsSweep)->DenseRange(4, 7, 1);

void BM_GradientProjectionStep(benchmark::State& state) {
  const int level = static_cast<int>(state.range(0));
  const GridHierarchy grid = build_hierarchy(level);
  const ProblemSet ps = make_spiral(grid);
  EvalLog log;
  log.resize(level + 1);
  ShiftedObjective F(*ps.at(level).objective, level, log);
  SmootherConfig cfg;
  cfg.tolerance = 0.0;
  cfg.max_iterations = 1;
  SmootherState st;
  VecX x = VecX::Zero(grid.level(level).n);
  for (auto _ : state) {
    x = gp_solve(F, ps.at(level).bounds, std::move(x), cfg, st);
    benchmark::DoNotOptimize(x.data());
  }
}
BENCHMARK(BM_GradientProjectionStep)->DenseRange(4, 7, 1);

void BM_MinsurfGradient(benchmark::State& state) {
  const int level = static_cast<int>(state.range(0));
  const GridHierarchy grid = build_hierarchy(level);
  const ProblemSet ps = make_minsurf(grid);
  const VecX x = random_vec(grid.level(level).n, 4);
  for (auto _ : state) {
    VecX g = ps.at(level).objective->gradient(x);
    benchmark::DoNotOptimize(g.data());
  }
}
BENCHMARK(BM_MinsurfGradient)->DenseRange(3, 6, 1);

void BM_VCycle(benchmark::State& state) {
  const int level = static_cast<int>(state.range(0));
  const GridHierarchy grid = build_hierarchy(level);
  const ProblemSet ps = make_spiral(grid);
  VCycleConfig vc;
  vc.variant = CycleVariant::CsTruncated;
  vc.pre_smooth = 2;
  vc.post_smooth = 2;
  EvalLog log;
  std::vector<SmootherState> states;
  VecX x = VecX::Zero(grid.level(level).n);
  for (auto _ : state) {
    x = v_cycle(ps, vc, std::move(x), log, states);
    benchmark::DoNotOptimize(x.data());
  }
}
BENCHMARK(BM_VCycle)->DenseRange(4, 6, 1);

}  // namespace

BENCHMARK_MAIN();
