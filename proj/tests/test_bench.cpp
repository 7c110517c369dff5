#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "fibm/bench.hpp"
#include "test_support.hpp"

namespace fibm {
namespace {

namespace fs = std::filesystem;
using bench::RunConfig;
using json = nlohmann::json;

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t line_count(const fs::path& path) {
  const std::string text = slurp(path);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

RunConfig chain_config(const fs::path& dir) {
  RunConfig cfg;
  cfg.graph = testing::write_file(dir / "chain.edges", "0 1\n1 2\n");
  cfg.directed = true;
  cfg.negative_seeds = "ids:0";
  cfg.k = 1;
  cfg.samples_per_root = 50;
  cfg.mc_runs = 100;
  cfg.repetitions = 1;
  cfg.out = (dir / "out").string();
  return cfg;
}

RunConfig karate_config(const fs::path& out) {
  RunConfig cfg;
  cfg.graph = testing::data_path("karate.edges");
  cfg.communities = testing::data_path("karate.communities");
  cfg.negative_seeds = "ids:33";
  cfg.k = 3;
  cfg.samples_per_root = 300;
  cfg.mc_runs = 200;
  cfg.repetitions = 2;
  cfg.beta_grid = bench::parse_grid("0:1:0.25");
  cfg.out = out.string();
  return cfg;
}

int run(const std::string& command, const RunConfig& cfg) {
  std::ostringstream log;
  const int code = bench::run_command(command, cfg, log);
  if (code != 0) std::cerr << log.str();
  return code;
}

TEST(BenchConfig, GridParsing) {
  const auto grid = bench::parse_grid("0:1:0.1");
  ASSERT_EQ(grid.size(), 11u);
  EXPECT_EQ(grid[3], 0.3);
  EXPECT_EQ(grid.back(), 1.0);
  EXPECT_EQ(bench::parse_grid("0:0:1"), std::vector<double>{0.0});
  EXPECT_EQ(bench::effective_grid(RunConfig{}).size(), 101u);
  EXPECT_THROW(bench::parse_grid("0:1"), ConfigError);
  EXPECT_THROW(bench::parse_grid("0:1:0"), ConfigError);
  EXPECT_THROW(bench::parse_grid("0.5:2:0.1"), ConfigError);
}

TEST(BenchConfig, FileAndErrors) {
  const auto dir = testing::scratch_dir("bench_config");
  const auto path = testing::write_file(dir / "run.cfg",
                                        "# comment\n"
                                        "graph = g.edges\n"
                                        "k = 7\n"
                                        "beta = 0.25   # inline\n"
                                        "vrr.samples_per_root = 42\n"
                                        "rng_seed = 9\n"
                                        "selector = celf\n"
                                        "optimize.kappa_budget = 0.5\n");
  const RunConfig cfg = bench::load_config(path);
  EXPECT_EQ(cfg.graph, "g.edges");
  EXPECT_EQ(cfg.k, 7u);
  EXPECT_EQ(cfg.beta, 0.25);
  EXPECT_EQ(cfg.samples_per_root, 42u);
  EXPECT_EQ(cfg.seed, 9u);
  EXPECT_EQ(cfg.selector, SelectorKind::celf);
  EXPECT_EQ(cfg.kappa_budget, 0.5);

  RunConfig c;
  EXPECT_THROW(bench::set_option(c, "nonsense", "1"), ConfigError);
  EXPECT_THROW(bench::set_option(c, "k", "-3"), ConfigError);
  EXPECT_THROW(bench::set_option(c, "selector", "random"), ConfigError);
  EXPECT_THROW(bench::set_option(c, "negative_seeds", "all"), ConfigError);
  const auto bad = testing::write_file(dir / "bad.cfg", "k = 1\nno equals sign\n");
  try {
    bench::load_config(bad);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos);
  }
  EXPECT_THROW(bench::load_config((dir / "missing.cfg").string()), IoError);
}

TEST(BenchConfig, RangeErrorsExitWithUsageCode) {
  const auto dir = testing::scratch_dir("bench_range");
  RunConfig cfg = chain_config(dir);
  cfg.alpha = 1.0;
  EXPECT_EQ(run("select", cfg), bench::kUsage);
  cfg = chain_config(dir);
  cfg.beta = -0.1;
  EXPECT_EQ(run("select", cfg), bench::kUsage);
  cfg = chain_config(dir);
  cfg.graph = (dir / "absent.edges").string();
  EXPECT_EQ(run("select", cfg), bench::kIo);
  cfg = chain_config(dir);
  cfg.negative_seeds = "ids:99";
  EXPECT_EQ(run("select", cfg), bench::kIo);
  EXPECT_EQ(run("transmogrify", chain_config(dir)), bench::kUsage);
}

TEST(BenchSelect, ChainPicksTheMiddleNode) {
  const auto dir = testing::scratch_dir("bench_chain");
  const RunConfig cfg = chain_config(dir);
  ASSERT_EQ(run("select", cfg), 0);
  const json j = bench::detail::read_json(fs::path(cfg.out) / "select_dp_celf-r_beta0.5.json");
  EXPECT_EQ(j["schema"], 1);
  const auto& rep = j["repetitions"][0];
  EXPECT_EQ(rep["seeds"], json::array({1}));
  EXPECT_DOUBLE_EQ(rep["F"].get<double>(), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(rep["monte_carlo"]["F"].get<double>(), 2.0 / 3.0);
  EXPECT_FALSE(rep.contains("wall_seconds"));
}

TEST(BenchSelect, ZeroBudgetGivesEmptySolution) {
  const auto dir = testing::scratch_dir("bench_k0");
  RunConfig cfg = chain_config(dir);
  cfg.k = 0;
  ASSERT_EQ(run("select", cfg), 0);
  const json j = bench::detail::read_json(fs::path(cfg.out) / "select_dp_celf-r_beta0.5.json");
  EXPECT_TRUE(j["repetitions"][0]["seeds"].empty());
  EXPECT_EQ(j["averages"]["F"], 0.0);
  EXPECT_EQ(j["averages"]["W"], 0.0);
}

TEST(BenchSelect, RecordTimeAddsWallTime) {
  const auto dir = testing::scratch_dir("bench_time");
  RunConfig cfg = chain_config(dir);
  cfg.record_time = true;
  ASSERT_EQ(run("select", cfg), 0);
  const auto avg = bench::read_select_averages(fs::path(cfg.out) / "select_dp_celf-r_beta0.5.json");
  ASSERT_TRUE(avg.wall_seconds.has_value());
  EXPECT_GE(*avg.wall_seconds, 0.0);
}

TEST(BenchSelect, FcAndCelfRAgreeAtBetaZero) {
  const auto dir = testing::scratch_dir("bench_fc");
  RunConfig cfg = karate_config(dir);
  cfg.beta = 0.0;
  cfg.mc_runs = 0;
  ASSERT_EQ(run("select", cfg), 0);
  cfg.selector = SelectorKind::fc;
  ASSERT_EQ(run("select", cfg), 0);
  const json a = bench::detail::read_json(dir / "select_dp_celf-r_beta0.json");
  const json b = bench::detail::read_json(dir / "select_dp_fc_beta0.json");
  for (std::size_t r = 0; r < 2; ++r) EXPECT_EQ(a["repetitions"][r]["seeds"], b["repetitions"][r]["seeds"]);
}

TEST(BenchSelect, ReportParsesBack) {
  const auto dir = testing::scratch_dir("bench_parse");
  RunConfig cfg = karate_config(dir);
  ASSERT_EQ(run("select", cfg), 0);
  const auto path = dir / "select_dp_celf-r_beta0.5.json";
  const json j = bench::detail::read_json(path);
  const auto avg = bench::read_select_averages(path);
  double F = 0.0;
  for (const auto& rep : j["repetitions"]) F += rep["F"].get<double>();
  EXPECT_EQ(avg.F, F / 2.0);
  EXPECT_EQ(j["config"]["k"], 3);
  EXPECT_EQ(j["config"]["negative_seeds"], "ids:33");
  EXPECT_EQ(line_count(dir / "select_dp_celf-r_beta0.5.csv"), 1u + 2u * 3u);
}

TEST(BenchSweep, KarateFrontHasSeveralPoints) {
  const auto dir = testing::scratch_dir("bench_sweep");
  RunConfig cfg = karate_config(dir);
  cfg.beta_grid = bench::parse_grid("0:1:0.1");
  cfg.repetitions = 1;
  ASSERT_EQ(run("sweep", cfg), 0);
  const json j = bench::detail::read_json(dir / "sweep_dp_celf-r.json");
  const auto& points = j["repetitions"][0]["points"];
  ASSERT_EQ(points.size(), 11u);
  std::set<std::pair<double, double>> distinct;
  for (const auto& p : points)
    if (!p["dominated"].get<bool>()) distinct.insert({p["F"].get<double>(), p["W"].get<double>()});
  EXPECT_GE(distinct.size(), 2u);
  EXPECT_TRUE(points[0]["feasible"].get<bool>());
  EXPECT_EQ(line_count(dir / "front_dp_celf-r.csv"), 12u);
  EXPECT_EQ(bench::read_sweep_averages(dir / "sweep_dp_celf-r.json").size(), 11u);
}

TEST(BenchSweep, ZeroGridAndZeroTolerance) {
  const auto dir = testing::scratch_dir("bench_sweep0");
  RunConfig cfg = karate_config(dir);
  cfg.beta_grid = {0.0};
  cfg.mu = 0.0;
  cfg.repetitions = 1;
  ASSERT_EQ(run("sweep", cfg), 0);
  const json j = bench::detail::read_json(dir / "sweep_dp_celf-r.json");
  const auto& points = j["repetitions"][0]["points"];
  ASSERT_EQ(points.size(), 1u);
  EXPECT_TRUE(points[0]["feasible"].get<bool>());
}

TEST(BenchValidate, ChainPassesWithZeroError) {
  const auto dir = testing::scratch_dir("bench_validate");
  const RunConfig cfg = chain_config(dir);
  ASSERT_EQ(run("validate", cfg), 0);
  const json j = bench::detail::read_json(fs::path(cfg.out) / "validate.json");
  EXPECT_EQ(j["failed"], 0);
  for (const auto& c : j["checks"]) {
    EXPECT_EQ(c["status"], "pass") << c["name"];
    EXPECT_EQ(c["error"], 0.0) << c["name"];
  }
}

TEST(BenchValidate, RandomSuiteAndKaratePass) {
  const auto dir = testing::scratch_dir("bench_validate_suite");
  RunConfig cfg;
  cfg.out = dir.string();
  cfg.mc_runs = 20000;
  EXPECT_EQ(run("validate", cfg), 0);
  EXPECT_EQ(run("validate", karate_config(dir)), 0);
}

TEST(BenchValidate, CorruptedIndexFails) {
  const auto dir = testing::scratch_dir("bench_corrupt");
  RunConfig cfg = chain_config(dir);
  cfg.corrupt_index = true;
  EXPECT_EQ(run("validate", cfg), bench::kValidation);
  const json j = bench::detail::read_json(fs::path(cfg.out) / "validate.json");
  EXPECT_GT(j["failed"].get<int>(), 0);
}

TEST(BenchReport, EmptyDirectoryIsAnError) {
  const auto dir = testing::scratch_dir("bench_report_empty");
  RunConfig cfg;
  cfg.out = dir.string();
  std::ostringstream log;
  EXPECT_EQ(bench::run_command("report", cfg, log), bench::kIo);
  EXPECT_NE(log.str().find("select_"), std::string::npos);
}

TEST(BenchReport, TablesFromSelectAndSweep) {
  const auto dir = testing::scratch_dir("bench_report");
  RunConfig cfg = karate_config(dir);
  cfg.repetitions = 1;
  ASSERT_EQ(run("select", cfg), 0);
  ASSERT_EQ(run("sweep", cfg), 0);
  ASSERT_EQ(run("report", cfg), 0);
  EXPECT_EQ(line_count(dir / "psi.csv"), 1u + 3u);
  EXPECT_EQ(line_count(dir / "evals.csv"), 1u + 3u);
  EXPECT_EQ(line_count(dir / "pareto.csv"), 1u + 5u + 1u);
}

TEST(BenchSample, IndexCacheRoundTrip) {
  const auto dir = testing::scratch_dir("bench_sample");
  RunConfig cfg = karate_config(dir);
  ASSERT_EQ(run("sample", cfg), 0);
  const auto first = slurp(dir / "index_0.vrr");
  ASSERT_FALSE(first.empty());
  ASSERT_TRUE(fs::exists(dir / "index_1.vrr"));
  ASSERT_EQ(run("sample", cfg), 0);
  EXPECT_EQ(slurp(dir / "index_0.vrr"), first);

  // Selection from the cached index equals selection from a fresh sample.
  ASSERT_EQ(run("select", cfg), 0);
  const auto cached = slurp(dir / "select_dp_celf-r_beta0.5.json");
  const auto fresh_dir = testing::scratch_dir("bench_sample_fresh");
  RunConfig fresh = cfg;
  fresh.out = fresh_dir.string();
  ASSERT_EQ(run("select", fresh), 0);
  json a = json::parse(cached), b = json::parse(slurp(fresh_dir / "select_dp_celf-r_beta0.5.json"));
  EXPECT_EQ(a["repetitions"], b["repetitions"]);

  // A different sample count misses the cache and is logged.
  RunConfig other = cfg;
  other.samples_per_root = 100;
  std::ostringstream log;
  ASSERT_EQ(bench::run_command("select", other, log), 0);
  EXPECT_NE(log.str().find("cache miss"), std::string::npos);
}

}  // namespace
}  // namespace fibm
