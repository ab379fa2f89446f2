// Benchmark driver for the multigrid library: runs rate tables,
// truncation-comparison curves, the smoothing study and single solves.

#include "mgopt/harness.hpp"
#include "mgopt/multigrid.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

namespace {

struct CommonFlags {
  std::string config_file;
  std::string problem;
  std::string levels;
  std::string nu;
  std::string variant;
  std::string out;
  std::string smoother;
  long seed = -1;
  int niter = -1;
  double ref_tol = -1.0;
  bool timing = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_file, "key=value configuration file");
  cmd->add_option("--problem", f.problem, "spiral | nonquad | minsurf | equality");
  cmd->add_option("--levels,--level", f.levels, "level or range, e.g. 4..8");
  cmd->add_option("--nu", f.nu, "smoothing steps per side, e.g. 2 or 1..5");
  cmd->add_option("--variant", f.variant, "cs-truncated | fas-truncated | fas-plain");
  cmd->add_option("--smoother", f.smoother, "gp | gsp | gp,gsp");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_option("--niter", f.niter, "outer V-cycle cap");
  cmd->add_option("--ref-tol", f.ref_tol, "reference solution tolerance");
  cmd->add_flag("--timing", f.timing, "record wall-clock seconds (non-deterministic output)");
}

mgopt::ExperimentConfig build_config(const CommonFlags& f) {
  mgopt::ExperimentConfig cfg;
  if (!f.config_file.empty()) cfg = mgopt::parse_config_file(f.config_file);
  if (!f.problem.empty()) mgopt::apply_config_line(cfg, "problem", f.problem);
  if (!f.levels.empty()) mgopt::apply_config_line(cfg, "levels", f.levels);
  if (!f.nu.empty()) mgopt::apply_config_line(cfg, "nu", f.nu);
  if (!f.variant.empty()) mgopt::apply_config_line(cfg, "variant", f.variant);
  if (!f.out.empty()) mgopt::apply_config_line(cfg, "out", f.out);
  if (f.seed >= 0) cfg.seed = static_cast<std::uint64_t>(f.seed);
  if (f.niter >= 0) cfg.max_cycles = f.niter;
  if (f.ref_tol > 0.0) cfg.reference_tol = f.ref_tol;
  if (f.timing) cfg.timing = true;
  if (!f.smoother.empty()) {
    cfg.with_gsp = f.smoother.find("gsp") != std::string::npos;
    if (f.smoother == "gsp") cfg.nu_list.clear();
  }
  return cfg;
}

int finish_rows(const std::vector<mgopt::ResultRow>& rows) {
  bool any_failed = false;
  for (const auto& r : rows) {
    if (r.failed) {
      any_failed = true;
      std::fprintf(stderr, "row error: level %d %s: %s\n", r.level, r.smoother.c_str(),
                   r.message.c_str());
    }
  }
  return any_failed ? 2 : 0;
}

int cmd_table(const CommonFlags& flags) {
  mgopt::ExperimentConfig cfg = build_config(flags);
  cfg.validate();
  const auto rows = mgopt::run_table(cfg);
  if (!cfg.out_dir.empty()) {
    mgopt::emit_outputs(cfg, rows, nullptr, nullptr, nullptr);
  }
  std::fputs(mgopt::format_csv(rows).c_str(), stdout);
  return finish_rows(rows);
}

int cmd_curves(const CommonFlags& flags) {
  mgopt::ExperimentConfig cfg = build_config(flags);
  if (flags.levels.empty() && flags.config_file.empty()) {
    cfg.level_min = cfg.level_max = 6;
  }
  if (flags.nu.empty() && flags.config_file.empty()) cfg.nu_list = {5};
  cfg.validate();
  const auto curves = mgopt::run_truncation_comparison(cfg);
  if (!cfg.out_dir.empty()) {
    mgopt::emit_outputs(cfg, {}, &curves, nullptr, nullptr);
  }
  std::printf("# iter log10_err(truncated) log10_err(plain)\n");
  const std::size_t n =
      std::max(curves.truncated.log10_error.size(), curves.plain.log10_error.size());
  for (std::size_t i = 0; i < n; ++i) {
    std::printf("%zu", i);
    if (i < curves.truncated.log10_error.size())
      std::printf(" %.6f", curves.truncated.log10_error[i]);
    else
      std::printf(" -");
    if (i < curves.plain.log10_error.size())
      std::printf(" %.6f", curves.plain.log10_error[i]);
    else
      std::printf(" -");
    std::printf("\n");
  }
  std::printf("# rate truncated %.4f plain %.4f\n", curves.truncated.reported_rate,
              curves.plain.reported_rate);
  return 0;
}

int cmd_smoothing(const CommonFlags& flags, int iters) {
  mgopt::ExperimentConfig cfg = build_config(flags);
  const std::uint64_t seed = (flags.seed >= 0) ? static_cast<std::uint64_t>(flags.seed) : 42;
  const std::vector<mgopt::SmoothingMethod> methods = {
      mgopt::SmoothingMethod::SteepestDescentExact,
      mgopt::SmoothingMethod::SteepestDescentLineSearch,
      mgopt::SmoothingMethod::GaussSeidel,
  };
  std::vector<mgopt::SmoothingTrace> traces;
  for (auto m : methods) traces.push_back(mgopt::run_smoothing_experiment(iters, m, seed));
  if (!cfg.out_dir.empty()) {
    mgopt::emit_outputs(cfg, {}, nullptr, &traces, &methods);
  }
  for (std::size_t t = 0; t < traces.size(); ++t) {
    std::printf("# %s (condition estimate %.1f)\n", mgopt::to_string(methods[t]).c_str(),
                traces[t].condition_estimate);
    for (std::size_t i = 0; i < traces[t].splits.size(); ++i)
      std::printf("%zu %.6e %.6e\n", i, traces[t].splits[i].low, traces[t].splits[i].high);
  }
  return 0;
}

int cmd_solve(const CommonFlags& flags, bool with_rate) {
  mgopt::ExperimentConfig cfg = build_config(flags);
  cfg.validate();
  const int level = cfg.level_max;
  mgopt::GridHierarchy grid = mgopt::build_hierarchy(level);
  mgopt::ProblemSet ps = mgopt::make_problem(cfg.problem, grid);

  mgopt::VCycleConfig vc;
  vc.variant = cfg.effective_variant();
  vc.smoother = cfg.with_gsp ? mgopt::SmootherKind::ProjectedGaussSeidel
                             : mgopt::SmootherKind::GradientProjection;
  vc.pre_smooth = vc.post_smooth = cfg.nu_list.empty() ? 1 : cfg.nu_list.front();
  vc.max_cycles = cfg.max_cycles;
  vc.reference_rel_tol = cfg.rate_stop_rel;

  mgopt::VecX ref;
  const mgopt::VecX* ref_ptr = nullptr;
  if (with_rate) {
    ref = mgopt::compute_reference(ps, cfg.reference_tol, cfg.baseline_iteration_cap);
    ref_ptr = &ref;
  }
  const mgopt::SolveReport rep = mgopt::solve(ps, vc, ref_ptr);

  std::printf("problem      %s\n", cfg.problem.c_str());
  std::printf("level        %d (%d unknowns)\n", level, ps.at(level).objective->dim());
  std::printf("variant      %s, smoother %s, nu = (%d,%d)\n",
              mgopt::to_string(vc.variant).c_str(), mgopt::to_string(vc.smoother).c_str(),
              vc.pre_smooth, vc.post_smooth);
  std::printf("cycles       %d (%s)\n", rep.cycles, rep.stop_reason.c_str());
  if (!rep.objective_history.empty())
    std::printf("objective    %.12g\n", rep.objective_history.back());
  if (!rep.feasibility_violation_history.empty())
    std::printf("feasibility  max violation %.3e\n", rep.feasibility_violation_history.back());
  if (!rep.equality_residual_history.empty())
    std::printf("sum residual %.3e\n", rep.equality_residual_history.back());
  if (ref_ptr && !rep.error_history.empty()) {
    std::printf("final error  %.6e\n", rep.error_history.back());
    if (rep.error_history.size() >= 3)
      std::printf("rate         %.4f\n", mgopt::asymptotic_rate(rep.error_history).reported_rate);
  }
  std::printf("evals/level ");
  for (int k = 0; k < rep.evals.levels(); ++k)
    std::printf(" %lld", static_cast<long long>(rep.evals.combined(k)));
  std::printf("\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"first-order multigrid benchmarks for bound-constrained problems"};
  app.require_subcommand(1);

  CommonFlags table_flags, curve_flags, smooth_flags, solve_flags;
  int smoothing_iters = 10;
  bool with_rate = false;

  CLI::App* table = app.add_subcommand("table", "rate/eval table over levels and smoothers");
  add_common(table, table_flags);

  CLI::App* curves = app.add_subcommand("curves", "truncation vs no-truncation curves");
  add_common(curves, curve_flags);

  CLI::App* smoothing = app.add_subcommand("smoothing", "error-split smoothing study");
  add_common(smoothing, smooth_flags);
  smoothing->add_option("--iters", smoothing_iters, "iterations to trace");

  CLI::App* solve_cmd = app.add_subcommand("solve", "single multigrid run, prints a report");
  add_common(solve_cmd, solve_flags);
  solve_cmd->add_flag("--rate", with_rate, "also compute a reference and report the rate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 1;
  }

  try {
    if (table->parsed()) return cmd_table(table_flags);
    if (curves->parsed()) return cmd_curves(curve_flags);
    if (smoothing->parsed()) return cmd_smoothing(smooth_flags, smoothing_iters);
    if (solve_cmd->parsed()) return cmd_solve(solve_flags, with_rate);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
