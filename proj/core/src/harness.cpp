#include "mgopt/harness.hpp"

#include "json.hpp"

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace mgopt {

namespace {

using nlohmann::json;

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string fmt(const char* f, ...) {
  char buf[128];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return buf;
}

std::string rate_str(double rate) {
  if (!std::isfinite(rate)) return "nan";
  return fmt("%.4f", rate);
}

double rate_from_history(const std::vector<double>& errors) {
  if (errors.size() >= 3) return asymptotic_rate(errors).reported_rate;
  if (errors.size() == 2 && errors[0] > 0.0) return errors[1] / errors[0];
  return std::numeric_limits<double>::quiet_NaN();
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  const auto dots = text.find("..");
  if (dots != std::string::npos) {
    const int a = std::stoi(text.substr(0, dots));
    const int b = std::stoi(text.substr(dots + 2));
    if (b < a) throw std::invalid_argument("bad range '" + text + "'");
    for (int v = a; v <= b; ++v) out.push_back(v);
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoi(item));
  }
  if (out.empty()) throw std::invalid_argument("empty list '" + text + "'");
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "on") return true;
  if (v == "0" || v == "false" || v == "off") return false;
  throw std::invalid_argument("bad boolean '" + v + "'");
}

}  // namespace

CycleVariant ExperimentConfig::effective_variant() const {
  if (variant) return *variant;
  if (problem == "spiral") return CycleVariant::CsTruncated;
  if (problem == "equality") return CycleVariant::FasPlain;
  return CycleVariant::FasTruncated;
}

void ExperimentConfig::validate() const {
  if (problem != "spiral" && problem != "nonquad" && problem != "minsurf" &&
      problem != "equality")
    throw std::invalid_argument("unknown problem '" + problem + "'");
  if (level_min < 0 || level_max > 12 || level_min > level_max)
    throw std::invalid_argument("bad level range");
  for (int nu : nu_list)
    if (nu < 1) throw std::invalid_argument("smoothing counts must be >= 1");
  if (reference_tol <= 0.0 || rate_stop_rel <= 0.0)
    throw std::invalid_argument("tolerances must be positive");
  if (max_cycles < 0) throw std::invalid_argument("niter must be >= 0");
  if (with_gsp && effective_variant() != CycleVariant::CsTruncated)
    throw std::invalid_argument("the gsp smoother requires the cs-truncated cycle");
}

namespace {

// Gradient of the sum-constrained problem reduced to the current free
// set: active entries zeroed, the free-set mean removed. Steps along the
// negative reduced gradient keep the sum fixed, and a gradient-only
// search has no function-value noise floor, unlike the backtracking
// acceptance test.
class ReducedEqualityObjective final : public Objective {
 public:
  ReducedEqualityObjective(const Objective& base, Mask active)
      : base_(&base), active_(std::move(active)) {
    for (std::uint8_t a : active_) free_count_ += (a == 0);
  }
  int dim() const override { return base_->dim(); }
  double value(const VecX& x) const override { return base_->value(x); }
  VecX gradient(const VecX& x) const override {
    VecX g = base_->gradient(x);
    double mean = 0.0;
    for (int i = 0; i < g.size(); ++i) {
      if (active_[static_cast<std::size_t>(i)])
        g[i] = 0.0;
      else
        mean += g[i];
    }
    mean /= static_cast<double>(std::max<long>(free_count_, 1));
    for (int i = 0; i < g.size(); ++i)
      if (!active_[static_cast<std::size_t>(i)]) g[i] -= mean;
    return g;
  }

 private:
  const Objective* base_;
  Mask active_;
  long free_count_ = 0;
};

}  // namespace

VecX compute_reference(const ProblemSet& problems, double tol, long iteration_cap) {
  const GridHierarchy& grid = *problems.grid;
  EvalLog scratch;
  scratch.resize(problems.finest() + 1);
  VecX x;
  for (int k = 0; k <= problems.finest(); ++k) {
    const LevelProblem& lp = problems.at(k);
    VecX start = (k == 0) ? VecX::Zero(lp.objective->dim()) : grid.prolongate(k, x);
    ShiftedObjective F(*lp.objective, k, scratch);
    SmootherConfig cfg;
    cfg.tolerance = tol;
    cfg.max_iterations = 1;
    SmootherState state;
    long spent = 0;
    if (lp.equality_sum) {
      // backtracking run until its value-resolution floor, then a
      // gradient-only polish on the settled active set; the backtracking
      // acceptance cannot resolve decreases below the precision of the
      // function values
      x = project_box_hyperplane(start, lp.bounds, *lp.equality_sum);
      while (spent++ < iteration_cap) {
        const VecX prev = x;
        x = armijo_pg_solve(F, lp.bounds, *lp.equality_sum, std::move(x), cfg, state);
        if ((x - prev).norm() <= std::max(tol, 1e-10)) break;
      }
      const VecX fallback = x;
      const int n = lp.objective->dim();
      SmootherState polish_state;
      SmootherConfig polish_cfg;
      long polish_budget = std::max<long>(iteration_cap, 200000);
      for (int round = 0; round < 12 && polish_budget > 0; ++round) {
        // free wrongly pinned nodes: a lower-active node needs a
        // nonnegative multiplier g_i - mu
        Mask active = detect_active(x, lp.bounds).any_active();
        {
          const VecX g = lp.objective->gradient(x);
          double mu = 0.0;
          long free_cnt = 0;
          for (int i = 0; i < n; ++i)
            if (!active[static_cast<std::size_t>(i)]) {
              mu += g[i];
              ++free_cnt;
            }
          mu /= static_cast<double>(std::max<long>(free_cnt, 1));
          for (int i = 0; i < n; ++i)
            if (active[static_cast<std::size_t>(i)] && g[i] - mu < -1e-12)
              active[static_cast<std::size_t>(i)] = 0;
        }
        ReducedEqualityObjective reduced(*lp.objective, active);
        ShiftedObjective R(reduced, k, scratch);
        bool hit_bound = false;
        bool converged = false;
        while (polish_budget-- > 0) {
          const VecX g = R.gradient(x);
          if (g.norm() <= tol) {
            converged = true;
            break;
          }
          double step = line_search_unconstrained(R, x, g, polish_state, polish_cfg);
          // cap the move at the first bound crossing
          double cap = std::numeric_limits<double>::infinity();
          for (int i = 0; i < n; ++i) {
            if (active[static_cast<std::size_t>(i)] || g[i] <= 0.0) continue;
            if (lp.bounds.lower[i] > -std::numeric_limits<double>::infinity())
              cap = std::min(cap, (x[i] - lp.bounds.lower[i]) / g[i]);
          }
          if (cap <= step) {
            x -= cap * g;
            x = project_box_hyperplane(x, lp.bounds, *lp.equality_sum);
            hit_bound = true;
            break;
          }
          x -= step * g;
        }
        if (converged && !hit_bound) break;
      }
      x = project_box_hyperplane(x, lp.bounds, *lp.equality_sum);
      if (lp.objective->value(x) > lp.objective->value(fallback)) x = fallback;
    } else {
      x = project_box(start, lp.bounds);
      while (spent++ < iteration_cap) {
        if (kkt_residual(F, lp.bounds, x) <= tol) break;
        x = gp_solve(F, lp.bounds, std::move(x), cfg, state);
      }
    }
  }
  return x;
}

namespace {

ResultRow make_failed_row(int level, int nvars, const std::string& tag, const std::string& msg) {
  ResultRow row;
  row.level = level;
  row.nvars = nvars;
  row.smoother = tag;
  row.rate = std::numeric_limits<double>::quiet_NaN();
  row.failed = true;
  row.message = msg;
  return row;
}

ResultRow multigrid_row(const ExperimentConfig& cfg, const ProblemSet& ps, const VecX& ref,
                        SmootherKind kind, int nu, const std::string& tag) {
  const int level = ps.finest();
  ResultRow row;
  row.level = level;
  row.nvars = ps.at(level).objective->dim();
  row.smoother = tag;

  VCycleConfig vc;
  vc.variant = cfg.effective_variant();
  vc.smoother = kind;
  vc.pre_smooth = nu;
  vc.post_smooth = nu;
  vc.max_cycles = cfg.max_cycles;
  vc.reference_rel_tol = cfg.rate_stop_rel;

  const double t0 = now_seconds();
  const SolveReport rep = solve(ps, vc, &ref);
  const double t1 = now_seconds();

  row.rate = rate_from_history(rep.error_history);
  row.feval_top = rep.evals.combined(level);
  row.feval_all = rep.evals.combined_total();
  row.feval_per_level.resize(static_cast<std::size_t>(level) + 1);
  for (int k = 0; k <= level; ++k)
    row.feval_per_level[static_cast<std::size_t>(k)] = rep.evals.combined(k);
  row.seconds = cfg.timing ? (t1 - t0) : 0.0;
  return row;
}

ResultRow baseline_row(const ExperimentConfig& cfg, const ProblemSet& ps, const VecX& ref) {
  const int level = ps.finest();
  const LevelProblem& lp = ps.at(level);
  ResultRow row;
  row.level = level;
  row.nvars = lp.objective->dim();
  row.smoother = "GP-only";

  EvalLog log;
  log.resize(level + 1);
  ShiftedObjective F(*lp.objective, level, log);
  SmootherConfig sc;
  sc.tolerance = 0.0;
  sc.max_iterations = 1;
  SmootherState state;
  const double ref_norm = ref.norm();
  const double target = cfg.rate_stop_rel * std::max(ref_norm, 1e-300);

  const double t0 = now_seconds();
  VecX x = VecX::Zero(lp.objective->dim());
  std::vector<double> errors;
  double best = std::numeric_limits<double>::infinity();
  long best_at = 0;
  for (long it = 0; it < cfg.baseline_iteration_cap; ++it) {
    x = lp.equality_sum
            ? armijo_pg_solve(F, lp.bounds, *lp.equality_sum, std::move(x), sc, state)
            : gp_solve(F, lp.bounds, std::move(x), sc, state);
    const double err = (x - ref).norm();
    errors.push_back(err);
    if (err <= target) break;
    if (err < 0.999 * best) {
      best = err;
      best_at = it;
    } else if (it - best_at > 3000) {
      // resolution floor of the value-based acceptance test; drop the
      // stagnant tail so the rate reflects the productive phase
      errors.resize(static_cast<std::size_t>(best_at) + 1);
      break;
    }
  }
  const double t1 = now_seconds();

  row.rate = rate_from_history(errors);
  row.feval_top = log.combined(level);
  row.feval_all = log.combined_total();
  row.feval_per_level.assign(static_cast<std::size_t>(level) + 1, 0);
  row.feval_per_level.back() = row.feval_top;
  row.seconds = cfg.timing ? (t1 - t0) : 0.0;
  return row;
}

}  // namespace

std::vector<ResultRow> run_table(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<ResultRow> rows;
  for (int level = cfg.level_min; level <= cfg.level_max; ++level) {
    const int nvars = ((1 << (level + 1)) - 1) * ((1 << (level + 1)) - 1);
    GridHierarchy grid = build_hierarchy(level);
    ProblemSet ps;
    VecX ref;
    try {
      ps = make_problem(cfg.problem, grid);
      ref = compute_reference(ps, cfg.reference_tol, cfg.baseline_iteration_cap);
    } catch (const std::exception& e) {
      rows.push_back(make_failed_row(level, nvars, "setup", e.what()));
      continue;
    }
    if (cfg.with_gsp) {
      try {
        rows.push_back(multigrid_row(cfg, ps, ref, SmootherKind::ProjectedGaussSeidel, 1, "GSP"));
      } catch (const std::exception& e) {
        rows.push_back(make_failed_row(level, nvars, "GSP", e.what()));
      }
    }
    for (int nu : cfg.nu_list) {
      const std::string tag = "GP-" + std::to_string(nu);
      try {
        rows.push_back(multigrid_row(cfg, ps, ref, SmootherKind::GradientProjection, nu, tag));
      } catch (const std::exception& e) {
        rows.push_back(make_failed_row(level, nvars, tag, e.what()));
      }
    }
    if (cfg.with_gp_only) {
      try {
        rows.push_back(baseline_row(cfg, ps, ref));
      } catch (const std::exception& e) {
        rows.push_back(make_failed_row(level, nvars, "GP-only", e.what()));
      }
    }
  }
  return rows;
}

TruncationComparison run_truncation_comparison(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.problem != "spiral")
    throw std::invalid_argument("the truncation comparison runs on the spiral problem");
  const int level = cfg.level_max;
  const int nu = cfg.nu_list.back();
  GridHierarchy grid = build_hierarchy(level);
  ProblemSet ps = make_spiral(grid);
  const VecX ref = compute_reference(ps, cfg.reference_tol, cfg.baseline_iteration_cap);

  auto run_one = [&](CycleVariant variant, const std::string& tag) {
    VCycleConfig vc;
    vc.variant = variant;
    vc.smoother = SmootherKind::GradientProjection;
    vc.pre_smooth = nu;
    vc.post_smooth = nu;
    vc.max_cycles = cfg.max_cycles;
    vc.reference_rel_tol = cfg.rate_stop_rel;
    const SolveReport rep = solve(ps, vc, &ref);
    CurveSeries series;
    series.tag = tag;
    series.log10_error.push_back(std::log10(std::max(rep.initial_error, 1e-300)));
    for (double e : rep.error_history)
      series.log10_error.push_back(std::log10(std::max(e, 1e-300)));
    series.reported_rate = rate_from_history(rep.error_history);
    return series;
  };

  TruncationComparison out;
  out.truncated = run_one(CycleVariant::FasTruncated, "truncated");
  out.plain = run_one(CycleVariant::FasPlain, "plain");
  return out;
}

std::string format_csv(const std::vector<ResultRow>& rows) {
  std::string text = "level,nvars,smoother,rate,feval_top,feval_all_levels,seconds\n";
  for (const ResultRow& r : rows) {
    text += fmt("%d,%d,", r.level, r.nvars);
    text += r.smoother;
    text += ",";
    text += rate_str(r.rate);
    text += fmt(",%lld,%lld,%.3f\n", static_cast<long long>(r.feval_top),
                static_cast<long long>(r.feval_all), r.seconds);
  }
  return text;
}

std::vector<ResultRow> parse_csv(const std::string& text) {
  std::vector<ResultRow> rows;
  std::stringstream ss(text);
  std::string line;
  bool first = true;
  while (std::getline(ss, line)) {
    if (first) {
      first = false;
      if (line != "level,nvars,smoother,rate,feval_top,feval_all_levels,seconds")
        throw std::invalid_argument("parse_csv: unexpected header");
      continue;
    }
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string field;
    ResultRow r;
    std::getline(ls, field, ',');
    r.level = std::stoi(field);
    std::getline(ls, field, ',');
    r.nvars = std::stoi(field);
    std::getline(ls, r.smoother, ',');
    std::getline(ls, field, ',');
    r.rate = std::stod(field);
    std::getline(ls, field, ',');
    r.feval_top = std::stoll(field);
    std::getline(ls, field, ',');
    r.feval_all = std::stoll(field);
    std::getline(ls, field, ',');
    r.seconds = std::stod(field);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<std::string> emit_outputs(const ExperimentConfig& cfg,
                                      const std::vector<ResultRow>& rows,
                                      const TruncationComparison* curves,
                                      const std::vector<SmoothingTrace>* smoothing,
                                      const std::vector<SmoothingMethod>* smoothing_methods) {
  namespace fs = std::filesystem;
  if (cfg.out_dir.empty()) throw std::invalid_argument("emit_outputs: no output directory");
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw std::runtime_error("emit_outputs: cannot create '" + cfg.out_dir + "'");

  std::vector<std::string> written;
  auto write_file = [&](const std::string& name, const std::string& content) {
    const fs::path path = fs::path(cfg.out_dir) / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("emit_outputs: cannot write '" + path.string() + "'");
    out << content;
    written.push_back(name);
  };

  write_file("table_" + cfg.problem + ".csv", format_csv(rows));

  if (curves) {
    for (const CurveSeries* s : {&curves->truncated, &curves->plain}) {
      std::string content;
      for (std::size_t i = 0; i < s->log10_error.size(); ++i)
        content += fmt("%zu %.10f\n", i, s->log10_error[i]);
      write_file("curve_" + s->tag + ".dat", content);
    }
  }

  if (smoothing && smoothing_methods) {
    for (std::size_t t = 0; t < smoothing->size(); ++t) {
      std::string content;
      const SmoothingTrace& trace = (*smoothing)[t];
      for (std::size_t i = 0; i < trace.splits.size(); ++i)
        content += fmt("%zu %.10e %.10e\n", i, trace.splits[i].low, trace.splits[i].high);
      write_file("smoothing_" + to_string((*smoothing_methods)[t]) + ".dat", content);
    }
  }

  json manifest;
  manifest["problem"] = cfg.problem;
  manifest["levels"] = {cfg.level_min, cfg.level_max};
  manifest["nu"] = cfg.nu_list;
  manifest["variant"] = to_string(cfg.effective_variant());
  manifest["gsp"] = cfg.with_gsp;
  manifest["gp_only"] = cfg.with_gp_only;
  manifest["seed"] = cfg.seed;
  manifest["reference_tol"] = cfg.reference_tol;
  manifest["rate_stop_rel"] = cfg.rate_stop_rel;
  manifest["niter"] = cfg.max_cycles;
  manifest["timing"] = cfg.timing;
  json row_notes = json::array();
  for (const ResultRow& r : rows)
    if (r.failed) row_notes.push_back({{"level", r.level}, {"row", r.smoother}, {"error", r.message}});
  manifest["row_errors"] = row_notes;
  manifest["outputs"] = written;
  write_file("run.json", manifest.dump(2) + "\n");
  return written;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file '" + path + "'");
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key=value");
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    auto trim = [](std::string& s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      s = (a == std::string::npos) ? "" : s.substr(a, b - a + 1);
    };
    trim(key);
    trim(value);
    apply_config_line(cfg, key, value);
  }
  return cfg;
}

void apply_config_line(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "problem") {
    cfg.problem = value;
  } else if (key == "levels" || key == "level") {
    const std::vector<int> lv = parse_int_list(value);
    cfg.level_min = lv.front();
    cfg.level_max = lv.back();
  } else if (key == "nu") {
    cfg.nu_list = parse_int_list(value);
  } else if (key == "variant") {
    cfg.variant = variant_from_string(value);
  } else if (key == "gsp") {
    cfg.with_gsp = parse_bool(value);
  } else if (key == "gp_only") {
    cfg.with_gp_only = parse_bool(value);
  } else if (key == "seed") {
    cfg.seed = std::stoull(value);
  } else if (key == "out") {
    cfg.out_dir = value;
  } else if (key == "ref_tol") {
    cfg.reference_tol = std::stod(value);
  } else if (key == "rate_stop") {
    cfg.rate_stop_rel = std::stod(value);
  } else if (key == "niter") {
    cfg.max_cycles = std::stoi(value);
  } else if (key == "baseline_cap") {
    cfg.baseline_iteration_cap = std::stol(value);
  } else if (key == "timing") {
    cfg.timing = parse_bool(value);
  } else {
    throw std::invalid_argument("unknown config key '" + key + "'");
  }
}

}  // namespace mgopt
