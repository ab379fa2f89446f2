#include "mgopt/harness.hpp"

#include "doctest.h"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mgopt;
namespace fs = std::filesystem;

namespace {
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("mgopt_test_" + std::to_string(std::rand()) + std::to_string(std::rand()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.problem = "spiral";
  cfg.level_min = 2;
  cfg.level_max = 2;
  cfg.nu_list = {2};
  cfg.with_gsp = true;
  cfg.max_cycles = 40;
  return cfg;
}
}  // namespace

TEST_CASE("config parsing and overrides") {
  TempDir tmp;
  const fs::path file = tmp.path / "run.cfg";
  {
    std::ofstream out(file);
    out << "# benchmark setup\n"
        << "problem = nonquad\n"
        << "levels = 3..5\n"
        << "nu = 1,3\n"
        << "seed = 9\n"
        << "timing = 0\n";
  }
  ExperimentConfig cfg = parse_config_file(file.string());
  CHECK(cfg.problem == "nonquad");
  CHECK(cfg.level_min == 3);
  CHECK(cfg.level_max == 5);
  CHECK(cfg.nu_list == std::vector<int>({1, 3}));
  CHECK(cfg.seed == 9);

  apply_config_line(cfg, "levels", "4");
  CHECK(cfg.level_min == 4);
  CHECK(cfg.level_max == 4);
  CHECK_THROWS_AS(apply_config_line(cfg, "nope", "1"), std::invalid_argument);
  CHECK_THROWS_AS(apply_config_line(cfg, "variant", "w-cycle"), std::invalid_argument);

  cfg.problem = "turbo";
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("default cycle variants per problem") {
  ExperimentConfig cfg;
  cfg.problem = "spiral";
  CHECK(cfg.effective_variant() == CycleVariant::CsTruncated);
  cfg.problem = "nonquad";
  CHECK(cfg.effective_variant() == CycleVariant::FasTruncated);
  cfg.problem = "minsurf";
  CHECK(cfg.effective_variant() == CycleVariant::FasTruncated);
  cfg.problem = "equality";
  CHECK(cfg.effective_variant() == CycleVariant::FasPlain);
  cfg.variant = CycleVariant::FasPlain;
  cfg.problem = "spiral";
  CHECK(cfg.effective_variant() == CycleVariant::FasPlain);
}

TEST_CASE("csv round trip and empty tables") {
  SUBCASE("empty input keeps the header only") {
    const std::string text = format_csv({});
    CHECK(text == "level,nvars,smoother,rate,feval_top,feval_all_levels,seconds\n");
    CHECK(parse_csv(text).empty());
  }

  SUBCASE("formatted rows parse back to the same text") {
    ResultRow a;
    a.level = 4;
    a.nvars = 961;
    a.smoother = "GP-2";
    a.rate = 0.0712;
    a.feval_top = 93;
    a.feval_all = 240;
    ResultRow b;
    b.level = 5;
    b.nvars = 3969;
    b.smoother = "GP-only";
    b.rate = 0.999;
    b.feval_top = 2361;
    b.feval_all = 2361;
    const std::string text = format_csv({a, b});
    const auto parsed = parse_csv(text);
    REQUIRE(parsed.size() == 2);
    CHECK(format_csv(parsed) == text);
  }
}

TEST_CASE("table rows carry rates, eval counts and the baseline") {
  ExperimentConfig cfg = tiny_config();
  const auto rows = run_table(cfg);
  REQUIRE(rows.size() == 3);  // GSP, GP-2, GP-only
  CHECK(rows[0].smoother == "GSP");
  CHECK(rows[1].smoother == "GP-2");
  CHECK(rows[2].smoother == "GP-only");
  for (const auto& r : rows) {
    CHECK(!r.failed);
    CHECK(r.level == 2);
    CHECK(r.nvars == 49);
    CHECK(std::isfinite(r.rate));
    CHECK(r.rate < 1.0);
  }
  CHECK(rows[0].feval_top == 0);  // sweeps only, no counted evaluations
  CHECK(rows[1].feval_top > 0);
  CHECK(rows[2].feval_top > rows[1].feval_top);
  CHECK(rows[1].feval_all >= rows[1].feval_top);
  // multigrid beats the single-level baseline even at toy sizes
  CHECK(rows[1].feval_top < rows[2].feval_top);
}

TEST_CASE("emitted files are deterministic and complete") {
  TempDir tmp;
  ExperimentConfig cfg = tiny_config();
  cfg.out_dir = (tmp.path / "out1").string();
  const auto rows = run_table(cfg);
  const auto written = emit_outputs(cfg, rows, nullptr, nullptr, nullptr);
  CHECK(written.size() == 2);  // table + manifest
  const std::string csv1 = slurp(fs::path(cfg.out_dir) / "table_spiral.csv");

  ExperimentConfig cfg2 = tiny_config();
  cfg2.out_dir = (tmp.path / "out2").string();
  const auto rows2 = run_table(cfg2);
  emit_outputs(cfg2, rows2, nullptr, nullptr, nullptr);
  const std::string csv2 = slurp(fs::path(cfg2.out_dir) / "table_spiral.csv");
  CHECK(csv1 == csv2);

  const std::string manifest = slurp(fs::path(cfg.out_dir) / "run.json");
  CHECK(manifest.find("\"problem\": \"spiral\"") != std::string::npos);
}

TEST_CASE("truncation comparison produces matching curve lengths") {
  ExperimentConfig cfg = tiny_config();
  cfg.level_min = cfg.level_max = 3;
  cfg.nu_list = {3};
  cfg.max_cycles = 30;
  const TruncationComparison curves = run_truncation_comparison(cfg);

  SUBCASE("reruns are bit-identical") {
    const TruncationComparison again = run_truncation_comparison(cfg);
    REQUIRE(again.truncated.log10_error.size() == curves.truncated.log10_error.size());
    for (std::size_t i = 0; i < again.truncated.log10_error.size(); ++i)
      CHECK(again.truncated.log10_error[i] == curves.truncated.log10_error[i]);
    for (std::size_t i = 0; i < again.plain.log10_error.size(); ++i)
      CHECK(again.plain.log10_error[i] == curves.plain.log10_error[i]);
  }

  CHECK(curves.truncated.log10_error.size() >= 4);
  CHECK(curves.plain.log10_error.size() >= 4);
  // both runs start from the same zero vector, so the initial errors match
  CHECK(curves.truncated.log10_error[0] == doctest::Approx(curves.plain.log10_error[0]));
  // strictly decreasing after burn-in
  const auto& tr = curves.truncated.log10_error;
  for (std::size_t i = 2; i < tr.size(); ++i) CHECK(tr[i] < tr[i - 1]);

  TempDir tmp;
  cfg.out_dir = (tmp.path / "curves").string();
  emit_outputs(cfg, {}, &curves, nullptr, nullptr);
  const std::string dat = slurp(fs::path(cfg.out_dir) / "curve_truncated.dat");
  std::size_t lines = 0;
  for (char ch : dat) lines += (ch == '\n');
  CHECK(lines == curves.truncated.log10_error.size());
}

TEST_CASE("rate trend over levels stays controlled") {
  ExperimentConfig cfg;
  cfg.problem = "spiral";
  cfg.level_min = 3;
  cfg.level_max = 4;
  cfg.nu_list = {2};
  cfg.with_gp_only = false;
  const auto rows = run_table(cfg);
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].rate >= rows[0].rate - 0.05);
}

#ifdef MGOPT_CLI_PATH
TEST_CASE("command line interface exit codes") {
  TempDir tmp;
  const std::string quiet = " > " + (tmp.path / "stdout.txt").string() + " 2> " +
                            (tmp.path / "stderr.txt").string();

  SUBCASE("a valid tiny run exits zero") {
    const std::string cmd = std::string(MGOPT_CLI_PATH) +
                            " table --problem spiral --levels 2 --nu 1 --out " +
                            (tmp.path / "out").string() + quiet;
    CHECK(std::system(cmd.c_str()) == 0);
    CHECK(fs::exists(tmp.path / "out" / "table_spiral.csv"));
    CHECK(fs::exists(tmp.path / "out" / "run.json"));
  }

  SUBCASE("config errors exit with one") {
    const std::string cmd =
        std::string(MGOPT_CLI_PATH) + " table --problem nope --levels 2" + quiet;
    const int status = std::system(cmd.c_str());
    CHECK(WEXITSTATUS(status) == 1);
  }

  SUBCASE("solve prints a report") {
    const std::string cmd = std::string(MGOPT_CLI_PATH) +
                            " solve --problem spiral --level 3 --nu 2 --niter 5 > " +
                            (tmp.path / "solve.txt").string();
    CHECK(std::system(cmd.c_str()) == 0);
    const std::string out = slurp(tmp.path / "solve.txt");
    CHECK(out.find("cycles") != std::string::npos);
    CHECK(out.find("spiral") != std::string::npos);
  }
}
#endif
