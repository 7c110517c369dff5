#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fibm/graph.hpp"
#include "fibm/objectives.hpp"
#include "fibm/parallel.hpp"
#include "fibm/vrr_index.hpp"

namespace fibm {

enum class SelectorKind { celf_r, celf, fc };

inline std::string_view to_string(SelectorKind kind) {
  switch (kind) {
    case SelectorKind::celf_r: return "celf-r";
    case SelectorKind::celf: return "celf";
    case SelectorKind::fc: return "fc";
  }
  return "?";
}

inline SelectorKind parse_selector(std::string_view text) {
  for (SelectorKind k : {SelectorKind::celf_r, SelectorKind::celf, SelectorKind::fc})
    if (to_string(k) == text) return k;
  throw std::invalid_argument("unknown selector '" + std::string(text) + "'");
}

struct SelectorOptions {
  ObjectiveKind objective = ObjectiveKind::dp;
  /// Lazy candidates recomputed speculatively per round. Only changes the
  /// evaluation order; the selected seeds and counts are those of batch = 1.
  std::size_t batch = 16;
  /// Stop early when the best marginal gain falls below -kappa_budget.
  double kappa_budget = std::numeric_limits<double>::infinity();
};

/// Objective of a seed set expressed through the blocked walk counts of a VRR index.
class MassObjective {
 public:
  /// Current blocked mass with its cached fairness and effectiveness terms.
  struct State {
    std::vector<std::uint64_t> mass;
    std::uint64_t total = 0;
    double W = 0.0;
    double value = 0.0;
  };

  MassObjective(const VrrIndex& index, ObjectiveKind kind, double alpha, double beta)
      : kind_(kind), beta_(beta), samples_(static_cast<double>(index.samples_per_root())) {
    if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("beta must lie in [0,1]");
    const NegativeSpread spread = index.negative_spread();
    baseline_ = spread.per_community;
    baseline_total_ = spread.total;
    fairness_ = FairnessConfig::from_exposure(baseline_, alpha);
  }

  ObjectiveKind kind() const noexcept { return kind_; }
  double beta() const noexcept { return beta_; }
  const FairnessConfig& fairness() const noexcept { return fairness_; }
  std::span<const double> baseline() const noexcept { return baseline_; }
  double baseline_total() const noexcept { return baseline_total_; }

  State state(std::span<const std::uint64_t> mass) const {
    State s;
    s.mass.assign(mass.begin(), mass.end());
    for (auto m : mass) s.total += m;
    s.W = fairness_from_mass(s.mass, s.total);
    s.value = value_of(s.mass, s.total, s.W);
    return s;
  }

  /// Objective(S + u) - Objective(S), where `delta` is u's marginal mass.
  /// The effectiveness term is computed from delta alone so that it is
  /// exactly non-increasing as paths get invalidated.
  double gain(const State& base, std::span<const std::uint64_t> delta, std::vector<std::uint64_t>& scratch) const {
    scratch.resize(base.mass.size());
    std::uint64_t added = 0;
    for (std::size_t c = 0; c < scratch.size(); ++c) {
      scratch[c] = base.mass[c] + delta[c];
      added += delta[c];
    }
    const std::uint64_t total = base.total + added;
    if (kind_ == ObjectiveKind::dp) {
      const double effectiveness_gain = static_cast<double>(added) / (samples_ * baseline_total_);
      if (beta_ == 0.0) return effectiveness_gain;
      const double fairness_gain = fairness_from_mass(scratch, total) - base.W;
      return beta_ * fairness_gain + (1.0 - beta_) * effectiveness_gain;
    }
    return value_of(scratch, total, 0.0) - base.value;
  }

  ObjectiveValue evaluate(std::span<const std::uint64_t> mass) const {
    std::vector<double> blocked(mass.size());
    for (std::size_t c = 0; c < mass.size(); ++c) blocked[c] = static_cast<double>(mass[c]) / samples_;
    return evaluate_objectives(blocked, baseline_, fairness_, beta_);
  }

 private:
  double fairness_from_mass(std::span<const std::uint64_t> mass, std::uint64_t total) const {
    if (total == 0) return 0.0;
    double w = 0.0;
    const double t = static_cast<double>(total);
    for (std::size_t c = 0; c < mass.size(); ++c)
      if (fairness_.targets[c] > 0.0)
        w += fairness_.weights[c] * concave_power(static_cast<double>(mass[c]) / t, fairness_.alpha);
    return w;
  }

  double value_of(std::span<const std::uint64_t> mass, std::uint64_t total, double W) const {
    if (kind_ == ObjectiveKind::dp) {
      const double F = std::min(1.0, static_cast<double>(total) / (samples_ * baseline_total_));
      return beta_ * W + (1.0 - beta_) * F;
    }
    std::vector<double> blocked(mass.size());
    for (std::size_t c = 0; c < mass.size(); ++c) blocked[c] = static_cast<double>(mass[c]) / samples_;
    return baseline_objective(baseline_kind(kind_), blocked, baseline_);
  }

  ObjectiveKind kind_;
  double beta_;
  double samples_;
  std::vector<double> baseline_;
  double baseline_total_ = 0.0;
  FairnessConfig fairness_;
};

/// One greedy iteration.
struct IterationRecord {
  NodeId node = 0;
  double gain = 0.0;       ///< recomputed marginal gain of the winner
  double objective = 0.0;  ///< selected objective after adding the winner
  double K = 0.0;
  double W = 0.0;
  double F = 0.0;
  double dp_gap = 0.0;
  double epsilon = 0.0;  ///< largest observed decay of a marginal gain this iteration
  double kappa = 0.0;    ///< max(0, -gain)
  std::size_t evaluations = 0;
};

struct Solution {
  SelectorKind selector = SelectorKind::celf_r;
  ObjectiveKind objective = ObjectiveKind::dp;
  double beta = 0.0;
  std::vector<NodeId> seeds;
  std::vector<IterationRecord> trace;
  double epsilon_max = 0.0;
  double psi = 0.0;
  /// Fewer than k seeds were selected.
  bool short_of_budget = false;
  /// Recomputations of a stale cached gain, and how many exceeded cached + epsilon_max.
  std::size_t compensation_checks = 0;
  std::size_t compensation_violations = 0;
  double max_compensation_excess = 0.0;

  std::size_t total_evaluations() const {
    std::size_t total = 0;
    for (const auto& r : trace) total += r.evaluations;
    return total;
  }
  double final_F() const { return trace.empty() ? 0.0 : trace.back().F; }
  double final_W() const { return trace.empty() ? 0.0 : trace.back().W; }
  double final_K() const { return trace.empty() ? 0.0 : trace.back().K; }
  double final_objective() const { return trace.empty() ? 0.0 : trace.back().objective; }
};

/// psi_k = (1 - 1/e) * sum_{i <= k} (epsilon_i + kappa_i).
inline double empirical_psi(std::span<const IterationRecord> trace, std::size_t k) {
  double sum = 0.0;
  for (std::size_t i = 0; i < std::min(k, trace.size()); ++i) sum += trace[i].epsilon + trace[i].kappa;
  return (1.0 - 1.0 / std::numbers::e) * sum;
}

namespace detail {

inline void check_index_matches(const VrrIndex& index, const ProblemInstance& problem) {
  problem.validate();
  if (index.node_count() != problem.graph->node_count())
    throw std::invalid_argument("index and problem disagree on the node count");
  if (index.community_count() != problem.partition->community_count())
    throw std::invalid_argument("index and problem disagree on the community count");
  const auto seeds = normalized_set(problem.negative_seeds, problem.graph->node_count());
  if (!std::equal(seeds.begin(), seeds.end(), index.negative_seeds().begin(), index.negative_seeds().end()))
    throw std::invalid_argument("index was sampled for a different negative seed set");
}

struct EngineMode {
  bool lazy;
  bool compensate;
  bool track_epsilon;
};

/// Greedy selection over the VRR index. Lazy modes follow the cached-gain
/// loop with per-iteration `updated` flags; the initial evaluation of every
/// candidate counts as the first iteration's recomputation. Ties go to the
/// lower node id. Leaves `index` in the post-selection state.
inline Solution run_greedy(VrrIndex& index, const ProblemInstance& problem, const SelectorOptions& options,
                           SelectorKind selector, EngineMode mode) {
  check_index_matches(index, problem);
  const MassObjective objective(index, options.objective, problem.alpha, problem.beta);
  const std::size_t n = index.node_count();
  const std::size_t communities = index.community_count();

  Solution solution;
  solution.selector = selector;
  solution.objective = options.objective;
  solution.beta = problem.beta;

  // Nodes on no valid path never change the objective.
  std::vector<NodeId> pool;
  for (std::size_t u = 0; u < n; ++u)
    if (!index.is_negative(static_cast<NodeId>(u)) && index.initial_mass(static_cast<NodeId>(u)) > 0)
      pool.push_back(static_cast<NodeId>(u));

  constexpr std::int64_t kNever = -1;
  std::vector<double> cached(n, 0.0), last_gain(n, 0.0), speculative(n, 0.0);
  std::vector<std::int64_t> last_state(n, kNever), speculative_state(n, kNever);
  std::vector<bool> selected(n, false);
  std::vector<std::uint64_t> delta(communities), scratch;

  MassObjective::State state = objective.state(index.blocked_mass());
  auto compute_gain = [&](NodeId u, std::vector<std::uint64_t>& d, std::vector<std::uint64_t>& s) {
    std::fill(d.begin(), d.end(), 0);
    index.accumulate_marginal_mass(u, d);
    return objective.gain(state, d, s);
  };
  auto compute_many = [&](std::span<const NodeId> nodes, std::span<double> out) {
    parallel_for(nodes.size(), [&](std::size_t i) {
      thread_local std::vector<std::uint64_t> d, s;
      d.resize(communities);
      out[i] = compute_gain(nodes[i], d, s);
    });
  };

  struct Entry {
    double value;
    NodeId node;
    bool operator<(const Entry& o) const { return value < o.value || (value == o.value && node > o.node); }
  };
  std::priority_queue<Entry> heap;
  auto clean_top = [&]() -> std::optional<NodeId> {
    while (!heap.empty()) {
      const Entry e = heap.top();
      if (!selected[e.node] && e.value == cached[e.node]) return e.node;
      heap.pop();
    }
    return std::nullopt;
  };

  // State 0: evaluate everything once.
  {
    std::vector<double> gains(pool.size());
    compute_many(pool, gains);
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const NodeId u = pool[i];
      cached[u] = last_gain[u] = gains[i];
      last_state[u] = 0;
      if (mode.lazy) heap.push({gains[i], u});
    }
  }
  std::size_t remaining = pool.size();
  double epsilon_max = 0.0;

  for (std::size_t i = 1; i <= problem.budget; ++i) {
    if (remaining == 0) break;
    const std::int64_t current = static_cast<std::int64_t>(i) - 1;
    IterationRecord record;
    record.evaluations = (i == 1) ? pool.size() : 0;

    auto observe = [&](NodeId u, double g) {
      if (mode.track_epsilon && i > 2 && last_state[u] == current - 1) {
        // Decay of u's gain across the two previous states, clamped at 0.
        const double decay = std::max(0.0, last_gain[u] - g);
        record.epsilon = std::max(record.epsilon, decay);
        epsilon_max = std::max(epsilon_max, decay);
      }
      last_gain[u] = g;
      last_state[u] = current;
      cached[u] = g;
    };

    NodeId winner = 0;
    if (!mode.lazy) {
      std::vector<NodeId> live;
      live.reserve(remaining);
      for (NodeId u : pool)
        if (!selected[u]) live.push_back(u);
      if (i > 1) {
        std::vector<double> gains(live.size());
        compute_many(live, gains);
        record.evaluations = live.size();
        for (std::size_t j = 0; j < live.size(); ++j) observe(live[j], gains[j]);
      }
      winner = live.front();
      for (NodeId u : live)
        if (cached[u] > cached[winner]) winner = u;
    } else {
      while (true) {
        const NodeId u = *clean_top();
        if (last_state[u] == current) {
          winner = u;
          break;
        }
        if (options.batch > 1 && speculative_state[u] != current) {
          // Pre-compute the next few stale candidates in heap order.
          std::vector<Entry> taken;
          std::vector<NodeId> batch;
          while (batch.size() < options.batch) {
            auto top = clean_top();
            if (!top) break;
            taken.push_back(heap.top());
            heap.pop();
            if (last_state[*top] != current && speculative_state[*top] != current &&
                std::find(batch.begin(), batch.end(), *top) == batch.end())
              batch.push_back(*top);
          }
          for (const Entry& e : taken) heap.push(e);
          std::vector<double> gains(batch.size());
          compute_many(batch, gains);
          for (std::size_t j = 0; j < batch.size(); ++j) {
            speculative[batch[j]] = gains[j];
            speculative_state[batch[j]] = current;
          }
        }
        const double g = speculative_state[u] == current ? speculative[u] : compute_gain(u, delta, scratch);
        ++record.evaluations;
        ++solution.compensation_checks;
        const double excess = g - (cached[u] + epsilon_max);
        if (excess > 1e-12) {
          ++solution.compensation_violations;
          solution.max_compensation_excess = std::max(solution.max_compensation_excess, excess);
        }
        observe(u, g);
        heap.push({g, u});
      }
    }

    const double gain = cached[winner];
    if (gain < -options.kappa_budget) break;

    if (mode.lazy && mode.compensate && epsilon_max > 0.0) {
      for (NodeId v : pool) {
        if (selected[v] || v == winner || last_state[v] == current) continue;
        cached[v] += epsilon_max;
        heap.push({cached[v], v});
      }
    }

    index.invalidate(winner);
    selected[winner] = true;
    --remaining;
    solution.seeds.push_back(winner);
    state = objective.state(index.blocked_mass());

    const ObjectiveValue value = objective.evaluate(index.blocked_mass());
    record.node = winner;
    record.gain = gain;
    record.objective = state.value;
    record.K = value.K;
    record.W = value.W;
    record.F = value.F;
    record.dp_gap = value.dp_gap;
    record.kappa = std::max(0.0, -gain);
    solution.trace.push_back(record);
  }

  solution.epsilon_max = epsilon_max;
  solution.psi = empirical_psi(solution.trace, solution.trace.size());
  solution.short_of_budget = solution.seeds.size() < problem.budget;
  return solution;
}

}  // namespace detail

/// Lazy greedy that compensates stale gains by the largest observed decay
/// of a marginal gain between consecutive states.
inline Solution select_celf_r(VrrIndex& index, const ProblemInstance& problem, const SelectorOptions& options = {}) {
  return detail::run_greedy(index, problem, options, SelectorKind::celf_r, {true, true, true});
}

/// Classic lazy greedy; assumes exact submodularity.
inline Solution select_celf(VrrIndex& index, const ProblemInstance& problem, const SelectorOptions& options = {}) {
  return detail::run_greedy(index, problem, options, SelectorKind::celf, {true, false, false});
}

/// Full computation: every remaining candidate is evaluated every iteration.
inline Solution select_fc(VrrIndex& index, const ProblemInstance& problem, const SelectorOptions& options = {}) {
  return detail::run_greedy(index, problem, options, SelectorKind::fc, {false, false, true});
}

inline Solution select(SelectorKind kind, VrrIndex& index, const ProblemInstance& problem,
                       const SelectorOptions& options = {}) {
  switch (kind) {
    case SelectorKind::celf_r: return select_celf_r(index, problem, options);
    case SelectorKind::celf: return select_celf(index, problem, options);
    case SelectorKind::fc: return select_fc(index, problem, options);
  }
  throw std::invalid_argument("unknown selector");
}

struct FrontPoint {
  double F = 0.0;
  double W = 0.0;
};

/// Indices of the points no other point dominates (>= in both coordinates,
/// > in at least one). Equal points are all kept.
inline std::vector<std::size_t> nondominated_sort(std::span<const FrontPoint> points) {
  std::vector<std::size_t> front;
  for (std::size_t i = 0; i < points.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < points.size() && !dominated; ++j) {
      const auto& a = points[j];
      const auto& b = points[i];
      dominated = a.F >= b.F && a.W >= b.W && (a.F > b.F || a.W > b.W);
    }
    if (!dominated) front.push_back(i);
  }
  return front;
}

struct ParetoPoint {
  double beta = 0.0;
  Solution solution;
  double F = 0.0;
  double W = 0.0;
  double dp_gap = 0.0;
  bool feasible = false;
  bool dominated = false;
};

struct ParetoFront {
  std::vector<ParetoPoint> points;  ///< ascending beta; points[0] is the beta = 0 reference
  double reference_F = 0.0;
  double tolerance = 0.0;

  std::vector<const ParetoPoint*> nondominated() const {
    std::vector<const ParetoPoint*> out;
    for (const auto& p : points)
      if (!p.dominated) out.push_back(&p);
    return out;
  }
};

/// Runs the selector once per beta from the same sampled index, restoring it
/// between runs. beta = 0 is always included and serves as the effectiveness
/// reference for the mu-feasibility flag 1 - F / F_ref <= mu.
inline ParetoFront sweep_beta(VrrIndex& index, const ProblemInstance& problem, std::span<const double> grid,
                              SelectorKind kind, const SelectorOptions& options = {}) {
  if (grid.empty()) throw std::invalid_argument("beta grid is empty");
  std::vector<double> betas(grid.begin(), grid.end());
  for (double b : betas)
    if (!(b >= 0.0 && b <= 1.0)) throw std::invalid_argument("beta grid values must lie in [0,1]");
  betas.push_back(0.0);
  std::sort(betas.begin(), betas.end());
  betas.erase(std::unique(betas.begin(), betas.end()), betas.end());

  ParetoFront front;
  front.tolerance = problem.tolerance;
  const auto snapshot = index.snapshot();
  for (double beta : betas) {
    index.restore(snapshot);
    ProblemInstance run = problem;
    run.beta = beta;
    ParetoPoint point;
    point.beta = beta;
    point.solution = select(kind, index, run, options);
    const MassObjective objective(index, ObjectiveKind::dp, problem.alpha, beta);
    const ObjectiveValue value = objective.evaluate(index.blocked_mass());
    point.F = value.F;
    point.W = value.W;
    point.dp_gap = value.dp_gap;
    front.points.push_back(std::move(point));
  }
  index.restore(snapshot);

  front.reference_F = front.points.front().F;
  std::vector<FrontPoint> coords;
  for (auto& p : front.points) {
    p.feasible = front.reference_F <= 0.0 || 1.0 - p.F / front.reference_F <= problem.tolerance;
    coords.push_back({p.F, p.W});
  }
  for (auto& p : front.points) p.dominated = true;
  for (std::size_t i : nondominated_sort(coords)) front.points[i].dominated = false;
  return front;
}

}  // namespace fibm
