#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fibm/diffusion.hpp"
#include "fibm/error.hpp"
#include "fibm/graph.hpp"
#include "fibm/objectives.hpp"
#include "fibm/optimize.hpp"
#include "fibm/rng.hpp"
#include "fibm/synthetic.hpp"
#include "fibm/vrr_index.hpp"

namespace fibm::bench {

using json = nlohmann::ordered_json;

inline constexpr std::string_view kVersion = "fibm 0.3.0";
inline constexpr int kSchema = 1;

enum ExitCode { kOk = 0, kUsage = 1, kValidation = 2, kIo = 3 };

struct RunConfig {
  std::string graph;
  std::string communities;
  std::string out = "fibm_out";
  bool directed = false;
  WeightMode weights = WeightMode::uniform_in_degree;
  std::string negative_seeds = "top-degree:50";
  std::size_t k = 100;
  double mu = 0.1;
  double alpha = 0.5;
  double beta = 0.5;
  std::vector<double> beta_grid;  ///< empty means 0:1:0.01
  std::uint32_t samples_per_root = 1000;
  std::size_t mc_runs = 10000;
  std::uint64_t seed = 0;
  SelectorKind selector = SelectorKind::celf_r;
  ObjectiveKind objective = ObjectiveKind::dp;
  std::size_t repetitions = 5;
  std::size_t batch = 16;
  double kappa_budget = std::numeric_limits<double>::infinity();
  bool record_time = false;
  bool corrupt_index = false;  ///< test hook for the validate command
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
  const auto v = fibm::detail::parse_number<T>(text);
  if (!v) throw ConfigError("bad value '" + text + "' for " + key);
  return *v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("bad value '" + text + "' for " + key + " (expected true or false)");
}

/// Prints a double so it reads back to the same value.
inline std::string number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string short_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

inline json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

}  // namespace detail

/// Parses "A:B:STEP" into A, A + STEP, ... up to B (inclusive, with slack).
inline std::vector<double> parse_grid(const std::string& text) {
  const auto first = text.find(':');
  const auto second = first == std::string::npos ? std::string::npos : text.find(':', first + 1);
  if (second == std::string::npos) throw ConfigError("beta grid must look like A:B:STEP, got '" + text + "'");
  const double a = detail::parse_value<double>("beta_grid", text.substr(0, first));
  const double b = detail::parse_value<double>("beta_grid", text.substr(first + 1, second - first - 1));
  const double step = detail::parse_value<double>("beta_grid", text.substr(second + 1));
  if (!(step > 0.0)) throw ConfigError("beta grid step must be positive");
  if (!(a >= 0.0 && b <= 1.0 && a <= b)) throw ConfigError("beta grid must satisfy 0 <= A <= B <= 1");
  const auto count = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9)) + 1;
  std::vector<double> grid;
  for (std::size_t i = 0; i < count; ++i)
    grid.push_back(std::min(1.0, std::round((a + static_cast<double>(i) * step) * 1e12) / 1e12));
  return grid;
}

inline std::vector<double> effective_grid(const RunConfig& cfg) {
  return cfg.beta_grid.empty() ? parse_grid("0:1:0.01") : cfg.beta_grid;
}

/// Applies one "key = value" setting; the keys are those of the config file.
inline void set_option(RunConfig& cfg, const std::string& key, const std::string& raw) {
  const std::string value = detail::trim(raw);
  using detail::parse_value;
  if (key == "graph") cfg.graph = value;
  else if (key == "communities") cfg.communities = value;
  else if (key == "out") cfg.out = value;
  else if (key == "directed") cfg.directed = detail::parse_bool(key, value);
  else if (key == "weights") {
    if (value == "uniform") cfg.weights = WeightMode::uniform_in_degree;
    else if (value == "explicit") cfg.weights = WeightMode::explicit_column;
    else throw ConfigError("weights must be 'uniform' or 'explicit'");
  } else if (key == "negative_seeds") {
    if (value.rfind("top-degree:", 0) != 0 && value.rfind("ids:", 0) != 0)
      throw ConfigError("negative_seeds must be top-degree:N or ids:a,b,...");
    cfg.negative_seeds = value;
  } else if (key == "k") cfg.k = parse_value<std::size_t>(key, value);
  else if (key == "mu") cfg.mu = parse_value<double>(key, value);
  else if (key == "alpha") cfg.alpha = parse_value<double>(key, value);
  else if (key == "beta") cfg.beta = parse_value<double>(key, value);
  else if (key == "beta_grid") cfg.beta_grid = parse_grid(value);
  else if (key == "vrr.samples_per_root") cfg.samples_per_root = parse_value<std::uint32_t>(key, value);
  else if (key == "mc.runs") cfg.mc_runs = parse_value<std::size_t>(key, value);
  else if (key == "seed" || key == "rng_seed") cfg.seed = parse_value<std::uint64_t>(key, value);
  else if (key == "selector") {
    try {
      cfg.selector = parse_selector(value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  } else if (key == "objective") {
    try {
      cfg.objective = parse_objective(value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  } else if (key == "repetitions") cfg.repetitions = parse_value<std::size_t>(key, value);
  else if (key == "optimize.batch") cfg.batch = parse_value<std::size_t>(key, value);
  else if (key == "optimize.kappa_budget") cfg.kappa_budget = parse_value<double>(key, value);
  else if (key == "record_time") cfg.record_time = detail::parse_bool(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

/// Range checks shared by every command.
inline void check_config(const RunConfig& cfg) {
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw ConfigError("alpha must lie strictly inside (0,1)");
  if (!(cfg.beta >= 0.0 && cfg.beta <= 1.0)) throw ConfigError("beta must lie in [0,1]");
  if (!(cfg.mu >= 0.0 && cfg.mu <= 1.0)) throw ConfigError("mu must lie in [0,1]");
  if (cfg.samples_per_root == 0) throw ConfigError("vrr.samples_per_root must be at least 1");
  if (cfg.repetitions == 0) throw ConfigError("repetitions must be at least 1");
  if (cfg.batch == 0) throw ConfigError("optimize.batch must be at least 1");
  if (!(cfg.kappa_budget >= 0.0)) throw ConfigError("optimize.kappa_budget must be non-negative");
  if (cfg.out.empty()) throw ConfigError("no output directory");
}

/// Reads a flat "key = value" file; '#' starts a comment.
inline RunConfig load_config(const std::string& path, RunConfig cfg = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (detail::trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key = value");
    try {
      set_option(cfg, detail::trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

inline json to_json(const RunConfig& cfg) {
  json j;
  j["graph"] = cfg.graph;
  j["communities"] = cfg.communities;
  j["directed"] = cfg.directed;
  j["weights"] = cfg.weights == WeightMode::uniform_in_degree ? "uniform" : "explicit";
  j["negative_seeds"] = cfg.negative_seeds;
  j["k"] = cfg.k;
  j["mu"] = cfg.mu;
  j["alpha"] = cfg.alpha;
  j["beta"] = cfg.beta;
  j["beta_grid"] = effective_grid(cfg);
  j["vrr.samples_per_root"] = cfg.samples_per_root;
  j["mc.runs"] = cfg.mc_runs;
  j["seed"] = cfg.seed;
  j["selector"] = std::string(to_string(cfg.selector));
  j["objective"] = std::string(to_string(cfg.objective));
  j["repetitions"] = cfg.repetitions;
  j["optimize.batch"] = cfg.batch;
  j["optimize.kappa_budget"] = std::isinf(cfg.kappa_budget) ? json("inf") : json(cfg.kappa_budget);
  return j;
}

/// Graph, partition and negative seeds resolved from a config.
struct Inputs {
  std::shared_ptr<const Graph> graph;
  std::shared_ptr<const CommunityPartition> partition;
  std::vector<NodeId> negatives;
};

inline std::vector<NodeId> resolve_negative_seeds(const Graph& graph, const std::string& text) {
  if (text.rfind("top-degree:", 0) == 0) {
    const auto size = detail::parse_value<std::size_t>("negative_seeds", text.substr(11));
    if (size == 0 || size >= graph.node_count())
      throw ConfigError("top-degree size must be in [1, |V|)");
    return top_degree_seeds(graph, size);
  }
  if (text.rfind("ids:", 0) == 0) {
    std::vector<NodeId> out;
    std::stringstream list(text.substr(4));
    std::string item;
    while (std::getline(list, item, ',')) {
      const auto ext = detail::parse_value<ExternalId>("negative_seeds", detail::trim(item));
      const auto v = graph.internal_id(ext);
      if (!v) throw InputError("negative seed " + std::to_string(ext) + " is not in the graph");
      out.push_back(*v);
    }
    if (out.empty()) throw ConfigError("negative_seeds id list is empty");
    return normalized_set(out, graph.node_count());
  }
  throw ConfigError("negative_seeds must be top-degree:N or ids:a,b,...");
}

inline Inputs load_inputs(const RunConfig& cfg, std::ostream& log) {
  if (cfg.graph.empty()) throw ConfigError("no graph given");
  std::vector<std::string> warnings;
  Inputs in;
  auto graph = load_edge_list(cfg.graph, {cfg.directed, cfg.weights}, &warnings);
  for (const auto& w : warnings) log << "warning: " << w << "\n";
  in.graph = std::make_shared<const Graph>(std::move(graph));
  in.partition = std::make_shared<const CommunityPartition>(
      cfg.communities.empty() ? CommunityPartition::single(in.graph->node_count())
                              : load_communities(cfg.communities, *in.graph));
  in.negatives = resolve_negative_seeds(*in.graph, cfg.negative_seeds);
  return in;
}

inline std::uint64_t repetition_seed(const RunConfig& cfg, std::size_t rep) { return cfg.seed + rep; }

inline std::filesystem::path index_path(const RunConfig& cfg, std::uint64_t seed) {
  return std::filesystem::path(cfg.out) / ("index_" + std::to_string(seed) + ".vrr");
}

/// Loads the cached index for `seed` when its keys match, else samples a new one.
inline VrrIndex obtain_index(const Inputs& in, const RunConfig& cfg, std::uint64_t seed, std::ostream& log) {
  const auto path = index_path(cfg, seed);
  if (std::filesystem::exists(path)) {
    std::ifstream file(path);
    if (!file) throw IoError("cannot open " + path.string());
    auto loaded = VrrIndex::load(file, *in.graph, *in.partition, in.negatives, cfg.samples_per_root, seed);
    if (loaded) return std::move(*loaded);
    log << "index cache miss for " << path.string() << ", resampling\n";
  }
  return VrrIndex::sample(*in.graph, *in.partition, in.negatives, cfg.samples_per_root, seed);
}

inline ProblemInstance make_problem(const Inputs& in, const RunConfig& cfg, double beta) {
  ProblemInstance p;
  p.graph = in.graph;
  p.partition = in.partition;
  p.negative_seeds = in.negatives;
  p.budget = cfg.k;
  p.tolerance = cfg.mu;
  p.alpha = cfg.alpha;
  p.beta = beta;
  return p;
}

inline SelectorOptions selector_options(const RunConfig& cfg) {
  SelectorOptions o;
  o.objective = cfg.objective;
  o.batch = cfg.batch;
  o.kappa_budget = cfg.kappa_budget;
  return o;
}

inline json seeds_json(const Graph& graph, std::span<const NodeId> seeds) {
  json out = json::array();
  for (NodeId v : seeds) out.push_back(graph.external_id(v));
  return out;
}

inline std::string seeds_text(const Graph& graph, std::span<const NodeId> seeds) {
  std::string out;
  for (NodeId v : seeds) out += (out.empty() ? "" : ";") + std::to_string(graph.external_id(v));
  return out;
}

inline json solution_json(const Graph& graph, const Solution& s) {
  json j;
  j["seeds"] = seeds_json(graph, s.seeds);
  j["short_of_budget"] = s.short_of_budget;
  j["F"] = s.final_F();
  j["W"] = s.final_W();
  j["K"] = s.final_K();
  j["objective"] = s.final_objective();
  j["dp_gap"] = s.trace.empty() ? 0.0 : s.trace.back().dp_gap;
  j["epsilon_max"] = s.epsilon_max;
  j["psi"] = s.psi;
  j["evaluations"] = s.total_evaluations();
  j["compensation"] = {{"checks", s.compensation_checks},
                       {"violations", s.compensation_violations},
                       {"max_excess", s.max_compensation_excess}};
  json trace = json::array();
  for (std::size_t i = 0; i < s.trace.size(); ++i) {
    const auto& r = s.trace[i];
    trace.push_back({{"iteration", i + 1},
                     {"node", graph.external_id(r.node)},
                     {"gain", r.gain},
                     {"objective", r.objective},
                     {"K", r.K},
                     {"W", r.W},
                     {"F", r.F},
                     {"dp_gap", r.dp_gap},
                     {"epsilon", r.epsilon},
                     {"kappa", r.kappa},
                     {"evaluations", r.evaluations},
                     {"psi", empirical_psi(s.trace, i + 1)}});
  }
  j["trace"] = std::move(trace);
  return j;
}

/// Averaged metrics of a report, as written and as read back.
struct Averages {
  double F = 0.0, W = 0.0, K = 0.0, psi = 0.0, evaluations = 0.0, dp_gap = 0.0;
  std::optional<double> wall_seconds;

  friend bool operator==(const Averages&, const Averages&) = default;
};

inline json averages_json(const Averages& a) {
  json j = {{"F", a.F}, {"W", a.W}, {"K", a.K}, {"psi", a.psi}, {"evaluations", a.evaluations}, {"dp_gap", a.dp_gap}};
  if (a.wall_seconds) j["wall_seconds"] = *a.wall_seconds;
  return j;
}

inline Averages averages_from_json(const json& j) {
  Averages a;
  try {
    a.F = j.at("F").get<double>();
    a.W = j.at("W").get<double>();
    a.K = j.at("K").get<double>();
    a.psi = j.at("psi").get<double>();
    a.evaluations = j.at("evaluations").get<double>();
    a.dp_gap = j.at("dp_gap").get<double>();
    if (j.contains("wall_seconds")) a.wall_seconds = j.at("wall_seconds").get<double>();
  } catch (const json::exception& e) {
    throw InputError(std::string("report averages: ") + e.what());
  }
  return a;
}

/// Reads the averaged metrics back from a select report.
inline Averages read_select_averages(const std::filesystem::path& path) {
  const json j = detail::read_json(path);
  if (!j.contains("schema") || j["schema"] != kSchema) throw InputError(path.string() + ": unsupported schema");
  return averages_from_json(j.at("averages"));
}

/// Reads the per-beta averaged metrics back from a sweep report.
inline std::map<double, Averages> read_sweep_averages(const std::filesystem::path& path) {
  const json j = detail::read_json(path);
  if (!j.contains("schema") || j["schema"] != kSchema) throw InputError(path.string() + ": unsupported schema");
  std::map<double, Averages> out;
  for (const auto& p : j.at("averages")) out[p.at("beta").get<double>()] = averages_from_json(p);
  return out;
}

inline json report_header(const RunConfig& cfg, std::string_view command) {
  json j;
  j["schema"] = kSchema;
  j["version"] = std::string(kVersion);
  j["command"] = std::string(command);
  j["config"] = to_json(cfg);
  return j;
}

inline std::string run_name(const RunConfig& cfg) {
  return std::string(to_string(cfg.objective)) + "_" + std::string(to_string(cfg.selector));
}

// ---------------------------------------------------------------- commands

inline int cmd_sample(const RunConfig& cfg, std::ostream& log) {
  const Inputs in = load_inputs(cfg, log);
  std::filesystem::create_directories(cfg.out);
  for (std::size_t r = 0; r < cfg.repetitions; ++r) {
    const auto seed = repetition_seed(cfg, r);
    const auto index = VrrIndex::sample(*in.graph, *in.partition, in.negatives, cfg.samples_per_root, seed);
    std::ostringstream text;
    index.dump(text);
    detail::write_text(index_path(cfg, seed), text.str());
    log << "wrote " << index_path(cfg, seed).string() << " (" << index.path_count() << " paths)\n";
  }
  return kOk;
}

inline Solution empty_solution(const RunConfig& cfg, double beta) {
  Solution s;
  s.selector = cfg.selector;
  s.objective = cfg.objective;
  s.beta = beta;
  return s;
}

inline int cmd_select(const RunConfig& cfg, std::ostream& log) {
  const Inputs in = load_inputs(cfg, log);
  std::filesystem::create_directories(cfg.out);
  json report = report_header(cfg, "select");
  json reps = json::array();
  Averages avg;
  double wall_total = 0.0;
  std::string csv = "repetition,iteration,node,gain,objective,K,W,F,dp_gap,epsilon,kappa,evaluations,psi\n";
  for (std::size_t r = 0; r < cfg.repetitions; ++r) {
    const auto seed = repetition_seed(cfg, r);
    const auto start = std::chrono::steady_clock::now();
    VrrIndex index = obtain_index(in, cfg, seed, log);
    Solution s = empty_solution(cfg, cfg.beta);
    if (cfg.k > 0) s = select(cfg.selector, index, make_problem(in, cfg, cfg.beta), selector_options(cfg));
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    json j = {{"repetition", r}, {"rng_seed", seed}};
    j.update(solution_json(*in.graph, s));
    if (cfg.mc_runs > 0) {
      // Simulated blocking of the selected seeds, independent of the VRR estimate.
      const auto sim = blocked_spread(*in.graph, *in.partition, in.negatives, s.seeds, SpreadMethod::monte_carlo,
                                      cfg.mc_runs, derive_seed(seed, StreamTag::validation, 0));
      const auto base = lt_spread_mc(*in.graph, *in.partition, in.negatives, {}, cfg.mc_runs,
                                     derive_seed(seed, StreamTag::validation, 0));
      j["monte_carlo"] = {{"runs", cfg.mc_runs}, {"blocked", sim.total}, {"F", effectiveness_F(sim.total, base.total)}};
    }
    if (cfg.record_time) j["wall_seconds"] = wall;
    reps.push_back(std::move(j));

    avg.F += s.final_F();
    avg.W += s.final_W();
    avg.K += s.final_K();
    avg.psi += s.psi;
    avg.evaluations += static_cast<double>(s.total_evaluations());
    avg.dp_gap += s.trace.empty() ? 0.0 : s.trace.back().dp_gap;
    wall_total += wall;
    for (std::size_t i = 0; i < s.trace.size(); ++i) {
      const auto& t = s.trace[i];
      csv += std::to_string(r) + "," + std::to_string(i + 1) + "," + std::to_string(in.graph->external_id(t.node)) +
             "," + detail::number(t.gain) + "," + detail::number(t.objective) + "," + detail::number(t.K) + "," +
             detail::number(t.W) + "," + detail::number(t.F) + "," + detail::number(t.dp_gap) + "," +
             detail::number(t.epsilon) + "," + detail::number(t.kappa) + "," + std::to_string(t.evaluations) + "," +
             detail::number(empirical_psi(s.trace, i + 1)) + "\n";
    }
    log << "repetition " << r << ": " << s.seeds.size() << " seeds, K " << s.final_K() << ", F " << s.final_F()
        << ", W " << s.final_W() << ", evaluations " << s.total_evaluations() << "\n";
  }
  const double n = static_cast<double>(cfg.repetitions);
  for (double* field : {&avg.F, &avg.W, &avg.K, &avg.psi, &avg.evaluations, &avg.dp_gap}) *field /= n;
  if (cfg.record_time) avg.wall_seconds = wall_total / n;
  report["repetitions"] = std::move(reps);
  report["averages"] = averages_json(avg);

  const auto stem = std::filesystem::path(cfg.out) / ("select_" + run_name(cfg) + "_beta" + detail::short_number(cfg.beta));
  detail::write_text(stem.string() + ".json", report.dump(2) + "\n");
  detail::write_text(stem.string() + ".csv", csv);
  log << "wrote " << stem.string() << ".json\n";
  return kOk;
}

inline int cmd_sweep(const RunConfig& cfg, std::ostream& log) {
  const Inputs in = load_inputs(cfg, log);
  if (cfg.k == 0) throw ConfigError("sweep needs k >= 1");
  std::filesystem::create_directories(cfg.out);
  const auto grid = effective_grid(cfg);
  json report = report_header(cfg, "sweep");
  json reps = json::array();
  std::map<double, Averages> avg;
  std::string csv = "repetition,beta,F,W,dp_gap,feasible,dominated,seeds\n";
  for (std::size_t r = 0; r < cfg.repetitions; ++r) {
    const auto seed = repetition_seed(cfg, r);
    const auto start = std::chrono::steady_clock::now();
    VrrIndex index = obtain_index(in, cfg, seed, log);
    const auto front = sweep_beta(index, make_problem(in, cfg, 0.0), grid, cfg.selector, selector_options(cfg));
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json points = json::array();
    for (const auto& p : front.points) {
      const auto& s = p.solution;
      points.push_back({{"beta", p.beta},
                        {"F", p.F},
                        {"W", p.W},
                        {"K", s.final_K()},
                        {"dp_gap", p.dp_gap},
                        {"feasible", p.feasible},
                        {"dominated", p.dominated},
                        {"seeds", seeds_json(*in.graph, s.seeds)},
                        {"psi", s.psi},
                        {"epsilon_max", s.epsilon_max},
                        {"evaluations", s.total_evaluations()}});
      auto& a = avg[p.beta];
      a.F += p.F;
      a.W += p.W;
      a.K += s.final_K();
      a.psi += s.psi;
      a.evaluations += static_cast<double>(s.total_evaluations());
      a.dp_gap += p.dp_gap;
      csv += std::to_string(r) + "," + detail::number(p.beta) + "," + detail::number(p.F) + "," +
             detail::number(p.W) + "," + detail::number(p.dp_gap) + "," + (p.feasible ? "1" : "0") + "," +
             (p.dominated ? "1" : "0") + "," + seeds_text(*in.graph, s.seeds) + "\n";
    }
    json rep = {{"repetition", r}, {"rng_seed", seed}, {"reference_F", front.reference_F}, {"points", points}};
    if (cfg.record_time) rep["wall_seconds"] = wall;
    reps.push_back(std::move(rep));
    log << "repetition " << r << ": " << front.nondominated().size() << " of " << front.points.size()
        << " points non-dominated\n";
  }
  const double n = static_cast<double>(cfg.repetitions);
  json averages = json::array();
  for (auto& [beta, a] : avg) {
    for (double* field : {&a.F, &a.W, &a.K, &a.psi, &a.evaluations, &a.dp_gap}) *field /= n;
    json j = {{"beta", beta}};
    j.update(averages_json(a));
    averages.push_back(std::move(j));
  }
  report["repetitions"] = std::move(reps);
  report["averages"] = std::move(averages);
  const auto stem = std::filesystem::path(cfg.out) / ("sweep_" + run_name(cfg));
  detail::write_text(stem.string() + ".json", report.dump(2) + "\n");
  detail::write_text((std::filesystem::path(cfg.out) / ("front_" + run_name(cfg) + ".csv")).string(), csv);
  log << "wrote " << stem.string() << ".json\n";
  return kOk;
}

// ---------------------------------------------------------------- validate

struct CheckResult {
  CheckResult() = default;
  explicit CheckResult(std::string check) : name(std::move(check)) {}

  std::string name;
  bool pass = true;
  bool skipped = false;
  double error = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

namespace detail {

inline CheckResult ratio_check(std::string name, std::size_t ok, std::size_t total, std::size_t needed,
                               double worst, double tolerance) {
  CheckResult c{std::move(name)};
  c.pass = ok >= needed;
  c.error = worst;
  c.tolerance = tolerance;
  c.detail = std::to_string(ok) + "/" + std::to_string(total) + " within tolerance, need " + std::to_string(needed);
  return c;
}

/// Exhaustive (small) or sampled (large) check that blocked mass is a
/// monotone submodular coverage function on the index.
inline CheckResult coverage_check(const VrrIndex& index, std::uint64_t seed) {
  std::vector<NodeId> nodes;
  for (NodeId v = 0; v < index.node_count(); ++v)
    if (!index.is_negative(v) && index.initial_mass(v) > 0) nodes.push_back(v);
  auto mass = [&](const std::vector<NodeId>& set) {
    std::vector<bool> chosen(index.node_count(), false);
    for (NodeId v : set) chosen[v] = true;
    std::uint64_t total = 0;
    for (std::size_t p = 0; p < index.path_count(); ++p) {
      const auto path = index.path(p);
      if (std::any_of(path.nodes.begin(), path.nodes.end(), [&](NodeId w) { return chosen[w]; }))
        total += path.initial_multiplicity;
    }
    return static_cast<std::int64_t>(total);
  };
  std::size_t checks = 0, violations = 0;
  auto check = [&](const std::vector<NodeId>& x, const std::vector<NodeId>& y, NodeId v) {
    auto xv = x, yv = y;
    xv.push_back(v);
    yv.push_back(v);
    const auto fx = mass(x), fy = mass(y), fxv = mass(xv), fyv = mass(yv);
    ++checks;
    if (fxv < fx || fyv - fy > fxv - fx) ++violations;
  };
  if (nodes.size() <= 8) {
    const std::uint32_t full = (1U << nodes.size()) - 1;
    auto subset = [&](std::uint32_t m) {
      std::vector<NodeId> s;
      for (std::size_t b = 0; b < nodes.size(); ++b)
        if (m >> b & 1U) s.push_back(nodes[b]);
      return s;
    };
    for (std::uint32_t y = 0; y <= full; ++y)
      for (std::uint32_t x = y;; x = (x - 1) & y) {
        for (std::size_t b = 0; b < nodes.size(); ++b)
          if (!(y >> b & 1U)) check(subset(x), subset(y), nodes[b]);
        if (x == 0) break;
      }
  } else {
    Rng rng(seed, StreamTag::validation, 1);
    for (int t = 0; t < 200; ++t) {
      std::vector<NodeId> x, y;
      NodeId v = nodes[rng.below(nodes.size())];
      for (NodeId u : nodes) {
        if (u == v) continue;
        const double r = rng.uniform();
        if (r < 0.02) x.push_back(u);
        if (r < 0.06) y.push_back(u);
      }
      check(x, y, v);
    }
  }
  CheckResult c{"coverage_submodularity"};
  c.pass = violations == 0;
  c.error = static_cast<double>(violations);
  c.detail = std::to_string(violations) + " violations in " + std::to_string(checks) + " checks";
  return c;
}

inline CheckResult consistency_check(VrrIndex& index, std::size_t k) {
  CheckResult c{"index_consistency"};
  std::string problem = index.consistency_error();
  std::size_t mismatched = 0;
  std::size_t done = 0;
  for (NodeId v = 0; v < index.node_count() && done < k && problem.empty(); ++v) {
    if (index.is_negative(v) || index.initial_mass(v) == 0) continue;
    const std::vector<std::uint64_t> before(index.blocked_mass().begin(), index.blocked_mass().end());
    const auto delta = index.marginal_mass(v);
    index.invalidate(v);
    for (std::size_t cc = 0; cc < delta.size(); ++cc)
      if (index.blocked_mass()[cc] - before[cc] != delta[cc]) ++mismatched;
    problem = index.consistency_error();
    ++done;
  }
  c.pass = problem.empty() && mismatched == 0;
  c.error = static_cast<double>(mismatched);
  c.detail = !problem.empty() ? problem
                              : std::to_string(done) + " invalidations, " + std::to_string(mismatched) +
                                    " marginal/blocked mismatches";
  return c;
}

inline CheckResult w_invariant_check(std::uint64_t seed) {
  std::mt19937_64 gen(derive_seed(seed, StreamTag::validation, 2));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t failures = 0;
  auto simplex = [&](std::size_t size) {
    std::vector<double> v(size);
    double sum = 0.0;
    for (double& x : v) sum += x = 0.01 + u(gen);
    for (double& x : v) x /= sum;
    return v;
  };
  for (int t = 0; t < 1000; ++t) {
    const std::size_t size = 1 + gen() % 8;
    const auto n = simplex(size);
    const auto x = t % 2 ? n : simplex(size);
    const auto cfg = FairnessConfig::from_exposure(n, 0.01 + 0.98 * u(gen));
    const double w = fairness_W(x, cfg).W;
    double gap = 0.0;
    for (std::size_t c = 0; c < size; ++c) gap = std::max(gap, std::abs(x[c] - n[c]));
    if (!(w >= 0.0 && w <= 1.0 + 1e-12) || (std::abs(w - 1.0) <= 1e-12) != (gap < 1e-12)) ++failures;
  }
  CheckResult c{"w_invariants"};
  c.pass = failures == 0;
  c.error = static_cast<double>(failures);
  c.detail = std::to_string(failures) + " failures in 1000 random vectors";
  return c;
}

/// Standard error of the VRR spread estimate (sum of per-root Bernoulli means).
inline double vrr_std_error(const VrrIndex& index) {
  double var = 0.0;
  const double r = index.samples_per_root();
  for (NodeId v = 0; v < index.node_count(); ++v) {
    if (index.is_negative(v)) continue;
    const double p = static_cast<double>(index.valid_walks(v)) / r;
    var += p * (1.0 - p) / r;
  }
  return std::sqrt(var);
}

}  // namespace detail

/// Oracle cross-checks for one graph: exact enumeration where the guard
/// allows, Monte Carlo agreement, index consistency, coverage structure.
inline std::vector<CheckResult> validate_graph(const Inputs& in, const RunConfig& cfg, std::ostream& log) {
  std::vector<CheckResult> out;
  const Graph& g = *in.graph;
  const CommunityPartition& p = *in.partition;
  VrrIndex index = VrrIndex::sample(g, p, in.negatives, cfg.samples_per_root, cfg.seed);
  if (cfg.corrupt_index) {
    log << "corrupting index (test hook)\n";
    index.corrupt_for_testing();
  }
  const double vrr = index.negative_spread().total;
  const std::size_t runs = std::max<std::size_t>(cfg.mc_runs, 1);
  const auto mc = lt_spread_mc(g, p, in.negatives, {}, runs, derive_seed(cfg.seed, StreamTag::validation, 3));
  {
    CheckResult c{"vrr_vs_monte_carlo"};
    const double se = std::sqrt(mc.std_error * mc.std_error + std::pow(detail::vrr_std_error(index), 2));
    c.error = std::abs(vrr - mc.total);
    c.tolerance = 4.0 * se;
    c.pass = c.error <= c.tolerance + 1e-12;
    c.detail = "sigma vrr " + detail::number(vrr) + ", mc " + detail::number(mc.total);
    out.push_back(c);
  }

  // Two highest-degree non-seed nodes as a fixed blocking set.
  std::vector<NodeId> positives;
  const auto negative = membership(in.negatives, g.node_count());
  for (NodeId v : top_degree_seeds(g, g.node_count()))
    if (!negative[v] && positives.size() < 2) positives.push_back(v);

  if (live_edge_configuration_count(g) <= kMaxExactConfigurations) {
    const auto exact = lt_spread_exact(g, p, in.negatives, {});
    CheckResult mc_check{"monte_carlo_vs_exact"};
    mc_check.error = std::abs(mc.total - exact.total);
    mc_check.tolerance = 4.0 * mc.std_error;
    mc_check.pass = mc_check.error <= mc_check.tolerance + 1e-12;
    out.push_back(mc_check);
    CheckResult vrr_check{"vrr_spread_vs_exact"};
    vrr_check.error = std::abs(vrr - exact.total);
    vrr_check.tolerance = 0.05 * exact.total;
    vrr_check.pass = vrr_check.error <= vrr_check.tolerance + 1e-12;
    out.push_back(vrr_check);
    if (!positives.empty()) {
      VrrIndex copy = index;
      for (NodeId u : positives) copy.invalidate(u);
      const auto blocked_exact = blocked_spread(g, p, in.negatives, positives, SpreadMethod::exact).total;
      CheckResult b{"vrr_blocked_vs_exact"};
      b.error = std::abs(copy.blocked_estimate().total - blocked_exact);
      b.tolerance = 0.07 * exact.total;
      b.pass = b.error <= b.tolerance + 1e-12;
      out.push_back(b);
    }
  } else {
    CheckResult skipped{"exact_oracle"};
    skipped.skipped = true;
    skipped.detail = "graph exceeds the exact enumeration guard";
    out.push_back(skipped);
  }
  out.push_back(detail::consistency_check(index, std::max<std::size_t>(cfg.k, 1)));
  out.push_back(detail::coverage_check(index, cfg.seed));
  return out;
}

/// The 20 random 6-node graph suite.
inline std::vector<CheckResult> validate_random_suite(const RunConfig& cfg, std::ostream& log) {
  std::size_t mc_ok = 0, spread_ok = 0, blocked_ok = 0, consistent = 0, coverage_ok = 0;
  double worst_mc = 0.0, worst_spread = 0.0, worst_blocked = 0.0;
  const std::size_t runs = std::max<std::size_t>(cfg.mc_runs, 1);
  for (std::size_t i = 0; i < 20; ++i) {
    const auto inst = synthetic::random_lt_instance(6, 0.5, 2, derive_seed(cfg.seed, StreamTag::validation, 100 + i));
    const std::vector<NodeId> neg{static_cast<NodeId>(i % 6)};
    const std::vector<NodeId> pos{static_cast<NodeId>((i + 1) % 6), static_cast<NodeId>((i + 3) % 6)};
    const auto exact = lt_spread_exact(inst.graph, inst.partition, neg, {});
    const auto mc = lt_spread_mc(inst.graph, inst.partition, neg, {}, runs, derive_seed(cfg.seed, StreamTag::validation, 200 + i));
    const double mc_err = std::abs(mc.total - exact.total);
    worst_mc = std::max(worst_mc, mc.std_error > 0 ? mc_err / mc.std_error : (mc_err > 0 ? INFINITY : 0.0));
    if (mc_err <= 4.0 * mc.std_error + 1e-12) ++mc_ok;

    auto index = VrrIndex::sample(inst.graph, inst.partition, neg, cfg.samples_per_root, cfg.seed + i);
    if (cfg.corrupt_index && i == 0) index.corrupt_for_testing();
    const double spread_err = std::abs(index.negative_spread().total - exact.total) / exact.total;
    worst_spread = std::max(worst_spread, spread_err);
    if (spread_err <= 0.05) ++spread_ok;
    if (detail::coverage_check(index, cfg.seed).pass) ++coverage_ok;
    for (NodeId u : pos) index.invalidate(u);
    if (index.consistency_error().empty()) ++consistent;
    const double blocked_exact = blocked_spread(inst.graph, inst.partition, neg, pos, SpreadMethod::exact).total;
    const double blocked_err = std::abs(index.blocked_estimate().total - blocked_exact) / exact.total;
    worst_blocked = std::max(worst_blocked, blocked_err);
    if (blocked_err <= 0.07) ++blocked_ok;
  }
  log << "random suite: 20 graphs with 6 nodes\n";
  std::vector<CheckResult> out;
  out.push_back(detail::ratio_check("monte_carlo_vs_exact", mc_ok, 20, 19, worst_mc, 4.0));
  out.push_back(detail::ratio_check("vrr_spread_vs_exact", spread_ok, 20, 18, worst_spread, 0.05));
  out.push_back(detail::ratio_check("vrr_blocked_vs_exact", blocked_ok, 20, 20, worst_blocked, 0.07));
  out.push_back(detail::ratio_check("index_consistency", consistent, 20, 20, 0.0, 0.0));
  out.push_back(detail::ratio_check("coverage_submodularity", coverage_ok, 20, 20, 0.0, 0.0));
  return out;
}

inline int cmd_validate(const RunConfig& cfg, std::ostream& log) {
  std::vector<CheckResult> checks;
  if (cfg.graph.empty()) {
    checks = validate_random_suite(cfg, log);
  } else {
    checks = validate_graph(load_inputs(cfg, log), cfg, log);
  }
  checks.push_back(detail::w_invariant_check(cfg.seed));

  json report = report_header(cfg, "validate");
  json list = json::array();
  std::size_t failed = 0;
  for (const auto& c : checks) {
    const char* status = c.skipped ? "skipped" : (c.pass ? "pass" : "fail");
    if (!c.skipped && !c.pass) ++failed;
    list.push_back({{"name", c.name}, {"status", status}, {"error", c.error}, {"tolerance", c.tolerance},
                    {"detail", c.detail}});
    log << status << "  " << c.name << "  error " << c.error << " tolerance " << c.tolerance
        << (c.detail.empty() ? "" : "  (" + c.detail + ")") << "\n";
  }
  report["checks"] = std::move(list);
  report["failed"] = failed;
  std::filesystem::create_directories(cfg.out);
  detail::write_text(std::filesystem::path(cfg.out) / "validate.json", report.dump(2) + "\n");
  if (failed > 0) throw ValidationFailure(std::to_string(failed) + " validation check(s) failed");
  return kOk;
}

// ---------------------------------------------------------------- report

inline int cmd_report(const RunConfig& cfg, std::ostream& log) {
  namespace fs = std::filesystem;
  std::vector<fs::path> selects, sweeps;
  if (fs::is_directory(cfg.out)) {
    for (const auto& e : fs::directory_iterator(cfg.out)) {
      const auto name = e.path().filename().string();
      if (e.path().extension() != ".json") continue;
      if (name.rfind("select_", 0) == 0) selects.push_back(e.path());
      if (name.rfind("sweep_", 0) == 0) sweeps.push_back(e.path());
    }
  }
  if (selects.empty() && sweeps.empty())
    throw IoError("no run artifacts in '" + cfg.out +
                  "': expected select_<objective>_<selector>_beta<B>.json and/or sweep_<objective>_<selector>.json "
                  "(written by the select and sweep commands)");
  std::sort(selects.begin(), selects.end());
  std::sort(sweeps.begin(), sweeps.end());

  std::string pareto = "method,beta,F,W,dp_gap,feasible,dominated\n";
  for (const auto& path : sweeps) {
    const json j = detail::read_json(path);
    const auto& c = j.at("config");
    const std::string method = c.at("objective").get<std::string>() + "/" + c.at("selector").get<std::string>();
    const double mu = c.at("mu").get<double>();
    std::vector<FrontPoint> coords;
    std::vector<json> rows;
    double reference = 0.0;
    for (const auto& a : j.at("averages")) {
      if (a.at("beta").get<double>() == 0.0) reference = a.at("F").get<double>();
      coords.push_back({a.at("F").get<double>(), a.at("W").get<double>()});
      rows.push_back(a);
    }
    std::vector<bool> dominated(coords.size(), true);
    for (std::size_t i : nondominated_sort(coords)) dominated[i] = false;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double F = coords[i].F;
      const bool feasible = reference <= 0.0 || 1.0 - F / reference <= mu;
      pareto += method + "," + detail::number(rows[i].at("beta").get<double>()) + "," + detail::number(F) + "," +
                detail::number(coords[i].W) + "," + detail::number(rows[i].at("dp_gap").get<double>()) + "," +
                (feasible ? "1" : "0") + "," + (dominated[i] ? "1" : "0") + "\n";
    }
  }
  std::string evals = "selector,objective,beta,repetition,iteration,evaluations\n";
  std::string psi = "selector,objective,beta,repetition,k,psi\n";
  for (const auto& path : selects) {
    const json j = detail::read_json(path);
    const auto& c = j.at("config");
    const std::string prefix = c.at("selector").get<std::string>() + "," + c.at("objective").get<std::string>() + "," +
                               detail::number(c.at("beta").get<double>()) + ",";
    const auto& avg = j.at("averages");
    pareto += c.at("objective").get<std::string>() + "/" + c.at("selector").get<std::string>() + "," +
              detail::number(c.at("beta").get<double>()) + "," + detail::number(avg.at("F").get<double>()) + "," +
              detail::number(avg.at("W").get<double>()) + "," + detail::number(avg.at("dp_gap").get<double>()) +
              ",,\n";
    for (const auto& rep : j.at("repetitions")) {
      const std::string r = std::to_string(rep.at("repetition").get<std::size_t>());
      for (const auto& t : rep.at("trace")) {
        const std::string i = std::to_string(t.at("iteration").get<std::size_t>());
        evals += prefix + r + "," + i + "," + std::to_string(t.at("evaluations").get<std::size_t>()) + "\n";
        psi += prefix + r + "," + i + "," + detail::number(t.at("psi").get<double>()) + "\n";
      }
    }
  }
  const fs::path dir(cfg.out);
  detail::write_text(dir / "pareto.csv", pareto);
  detail::write_text(dir / "evals.csv", evals);
  detail::write_text(dir / "psi.csv", psi);
  log << "wrote pareto.csv, evals.csv, psi.csv from " << selects.size() << " select and " << sweeps.size()
      << " sweep report(s)\n";
  return kOk;
}

/// Runs a command and maps failures to exit codes; messages go to `log`.
inline int run_command(std::string_view command, const RunConfig& cfg, std::ostream& log) {
  try {
    check_config(cfg);
    if (command == "sample") return cmd_sample(cfg, log);
    if (command == "select") return cmd_select(cfg, log);
    if (command == "sweep") return cmd_sweep(cfg, log);
    if (command == "validate") return cmd_validate(cfg, log);
    if (command == "report") return cmd_report(cfg, log);
    log << "error: unknown command '" << command << "'\n";
    return kUsage;
  } catch (const ValidationFailure& e) {
    log << "validation failed: " << e.what() << "\n";
    return kValidation;
  } catch (const InputError& e) {
    log << "input error: " << e.what() << "\n";
    return kIo;
  } catch (const IoError& e) {
    log << "io error: " << e.what() << "\n";
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    log << "io error: " << e.what() << "\n";
    return kIo;
  } catch (const std::invalid_argument& e) {
    log << "error: " << e.what() << "\n";
    return kUsage;
  }
}

}  // namespace fibm::bench
