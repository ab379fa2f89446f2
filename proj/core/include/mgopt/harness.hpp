#pragma once

#include "mgopt/analysis.hpp"
#include "mgopt/multigrid.hpp"
#include "mgopt/problem.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mgopt {

/// Everything a benchmark run needs; parsed from key=value files and
/// command-line overrides.
struct ExperimentConfig {
  std::string problem = "spiral";
  int level_min = 4;
  int level_max = 5;
  std::vector<int> nu_list = {1, 2, 3, 4, 5};  ///< pre = post = nu
  std::optional<CycleVariant> variant;         ///< default depends on the problem
  bool with_gsp = false;                       ///< add the projected Gauss-Seidel row
  bool with_gp_only = true;                    ///< add the single-level baseline row
  std::uint64_t seed = 0;
  std::string out_dir;
  double reference_tol = 1e-11;
  double rate_stop_rel = 1e-8;  ///< error-based outer stop for rate runs
  int max_cycles = 200;
  long baseline_iteration_cap = 2000000;
  bool timing = false;  ///< emit wall-clock seconds (breaks byte determinism)

  CycleVariant effective_variant() const;
  void validate() const;
};

struct ResultRow {
  int level = 0;
  int nvars = 0;
  std::string smoother;  ///< "GSP", "GP-3", "GP-only"
  double rate = 0.0;
  std::int64_t feval_top = 0;
  std::int64_t feval_all = 0;
  std::vector<std::int64_t> feval_per_level;
  double seconds = 0.0;
  bool failed = false;
  std::string message;
};

struct CurveSeries {
  std::string tag;
  std::vector<double> log10_error;  ///< entry 0 = initial error
  double reported_rate = 0.0;
};

struct TruncationComparison {
  CurveSeries truncated;
  CurveSeries plain;
};

/// High-accuracy first-order reference run for one problem family,
/// warm-started level by level. Pure gradient-projection (or the
/// projected backtracking solver when a sum constraint is present).
VecX compute_reference(const ProblemSet& problems, double tol, long iteration_cap = 2000000);

/// Runs the configured (level, smoother) grid and the baseline row per
/// level. Row failures are recorded in the row, not thrown.
std::vector<ResultRow> run_table(const ExperimentConfig& cfg);

/// Convergence curves of the truncated and untruncated cycles from the
/// same start. Uses the finest configured level and the last nu entry.
TruncationComparison run_truncation_comparison(const ExperimentConfig& cfg);

/// Writes table_<problem>.csv, curve_<tag>.dat, smoothing_<method>.dat
/// and a run.json manifest into cfg.out_dir. Returns the file names
/// written.
std::vector<std::string> emit_outputs(const ExperimentConfig& cfg,
                                      const std::vector<ResultRow>& rows,
                                      const TruncationComparison* curves,
                                      const std::vector<SmoothingTrace>* smoothing,
                                      const std::vector<SmoothingMethod>* smoothing_methods);

std::string format_csv(const std::vector<ResultRow>& rows);
std::vector<ResultRow> parse_csv(const std::string& text);

/// key=value configuration file; unknown keys are an error.
ExperimentConfig parse_config_file(const std::string& path);
void apply_config_line(ExperimentConfig& cfg, const std::string& key, const std::string& value);

}  // namespace mgopt
