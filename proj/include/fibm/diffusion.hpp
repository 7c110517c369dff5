#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "fibm/graph.hpp"
#include "fibm/parallel.hpp"
#include "fibm/rng.hpp"

namespace fibm {

/// Expected number of activated nodes, seeds included.
struct SpreadResult {
  double total = 0.0;
  std::vector<double> per_community;
  double std_error = 0.0;  ///< 0 for exact enumeration
};

struct BlockedSpread {
  double total = 0.0;
  std::vector<double> per_community;
};

enum class SpreadMethod { monte_carlo, exact };

/// Largest number of live-edge configurations lt_spread_exact will enumerate.
inline constexpr double kMaxExactConfigurations = 1e7;

namespace detail {

inline constexpr std::uint32_t kNoParent = std::numeric_limits<std::uint32_t>::max();

/// Picks the live in-arc of v: arc i with probability w_i, none with the
/// residual probability. Returns the source node or kNoParent.
inline NodeId draw_live_parent(const Graph& graph, NodeId v, double r) {
  double cumulative = 0.0;
  for (const Arc& a : graph.in_arcs(v)) {
    cumulative += a.weight;
    if (r < cumulative) return a.source;
  }
  return kNoParent;
}

/// Counts nodes reached from the seeds in a live-edge configuration where
/// every node has at most one live parent. Removed nodes neither activate nor relay.
class LiveEdgeReach {
 public:
  LiveEdgeReach(std::size_t n, std::span<const NodeId> seeds, std::span<const NodeId> removed)
      : base_(n, kUnknown), state_(n), stack_() {
    for (NodeId v : removed) base_[v] = kInactive;
    for (NodeId s : seeds) base_[s] = kActive;
  }

  /// Adds 1 to counts[community(v)] for each active v; returns the total.
  std::size_t count(std::span<const NodeId> parent, const CommunityPartition& partition,
                    std::span<std::uint64_t> counts) {
    state_ = base_;
    std::size_t total = 0;
    for (std::size_t v = 0; v < state_.size(); ++v) {
      if (resolve(static_cast<NodeId>(v), parent) == kActive) {
        ++total;
        ++counts[partition.community_of(static_cast<NodeId>(v))];
      }
    }
    return total;
  }

 private:
  static constexpr std::uint8_t kUnknown = 0, kActive = 1, kInactive = 2, kOnStack = 3;

  std::uint8_t resolve(NodeId v, std::span<const NodeId> parent) {
    if (state_[v] == kActive || state_[v] == kInactive) return state_[v];
    stack_.clear();
    NodeId w = v;
    std::uint8_t outcome = kInactive;
    while (true) {
      if (state_[w] == kActive || state_[w] == kInactive) {
        outcome = state_[w];
        break;
      }
      if (state_[w] == kOnStack) break;  // cycle without a seed
      state_[w] = kOnStack;
      stack_.push_back(w);
      if (parent[w] == kNoParent) break;
      w = parent[w];
    }
    for (NodeId u : stack_) state_[u] = outcome;
    return outcome;
  }

  std::vector<std::uint8_t> base_;
  std::vector<std::uint8_t> state_;
  std::vector<NodeId> stack_;
};

inline void check_disjoint(const Graph& graph, std::span<const NodeId> seeds, std::span<const NodeId> removed) {
  const auto seed_mask = membership(seeds, graph.node_count());
  for (NodeId v : removed) {
    if (v >= graph.node_count()) throw std::out_of_range("removed node out of range");
    if (seed_mask[v]) throw std::invalid_argument("seed set and removed set overlap");
  }
}

}  // namespace detail

/// Monte Carlo estimate of LT spread on G minus `removed`.
///
/// Each run samples a live-edge configuration from its own substream
/// (rng_seed, run index); node draws happen in node order, so two calls with
/// the same seed see the same configurations whatever the removed set.
inline SpreadResult lt_spread_mc(const Graph& graph, const CommunityPartition& partition,
                                 std::span<const NodeId> seeds, std::span<const NodeId> removed,
                                 std::size_t runs, std::uint64_t rng_seed) {
  if (runs == 0) throw std::invalid_argument("Monte Carlo needs at least one run");
  detail::check_disjoint(graph, seeds, removed);
  const std::size_t n = graph.node_count();
  const std::size_t communities = partition.community_count();

  constexpr std::size_t kChunk = 1024;
  const std::size_t chunks = (runs + kChunk - 1) / kChunk;
  struct Partial {
    std::uint64_t sum = 0, sum_sq = 0;
    std::vector<std::uint64_t> per_community;
  };
  std::vector<Partial> partials(chunks);
  parallel_for(chunks, [&](std::size_t chunk) {
    Partial& p = partials[chunk];
    p.per_community.assign(communities, 0);
    detail::LiveEdgeReach reach(n, seeds, removed);
    std::vector<NodeId> parent(n);
    const std::size_t end = std::min(runs, (chunk + 1) * kChunk);
    for (std::size_t run = chunk * kChunk; run < end; ++run) {
      Rng rng(rng_seed, StreamTag::monte_carlo, run);
      for (std::size_t v = 0; v < n; ++v)
        parent[v] = detail::draw_live_parent(graph, static_cast<NodeId>(v), rng.uniform());
      const std::uint64_t active = reach.count(parent, partition, p.per_community);
      p.sum += active;
      p.sum_sq += active * active;
    }
  });

  // Integer accumulators make the merge order irrelevant.
  std::uint64_t sum = 0, sum_sq = 0;
  std::vector<std::uint64_t> per_community(communities, 0);
  for (const Partial& p : partials) {
    sum += p.sum;
    sum_sq += p.sum_sq;
    for (std::size_t c = 0; c < communities; ++c) per_community[c] += p.per_community[c];
  }
  SpreadResult result;
  const double r = static_cast<double>(runs);
  result.total = static_cast<double>(sum) / r;
  result.per_community.resize(communities);
  for (std::size_t c = 0; c < communities; ++c) result.per_community[c] = static_cast<double>(per_community[c]) / r;
  if (runs > 1) {
    const double variance =
        std::max(0.0, (static_cast<double>(sum_sq) - r * result.total * result.total) / (r - 1.0));
    result.std_error = std::sqrt(variance / r);
  }
  return result;
}

/// Number of live-edge configurations, prod_v (in_degree(v) + 1).
inline double live_edge_configuration_count(const Graph& graph) {
  double count = 1.0;
  for (std::size_t v = 0; v < graph.node_count(); ++v)
    count *= static_cast<double>(graph.in_degree(static_cast<NodeId>(v)) + 1);
  return count;
}

/// Exact expected LT spread by enumerating every live-edge configuration.
inline SpreadResult lt_spread_exact(const Graph& graph, const CommunityPartition& partition,
                                    std::span<const NodeId> seeds, std::span<const NodeId> removed) {
  detail::check_disjoint(graph, seeds, removed);
  const double configurations = live_edge_configuration_count(graph);
  if (configurations > kMaxExactConfigurations)
    throw std::invalid_argument("graph has " + std::to_string(configurations) +
                                " live-edge configurations, above the enumeration limit");
  const std::size_t n = graph.node_count();
  const std::size_t communities = partition.community_count();

  // choice[v] == in_degree(v) means "no live in-arc".
  std::vector<std::size_t> choice(n, 0);
  std::vector<NodeId> parent(n);
  std::vector<double> choice_probability(n);
  auto refresh = [&](std::size_t v) {
    const auto in = graph.in_arcs(static_cast<NodeId>(v));
    if (choice[v] < in.size()) {
      parent[v] = in[choice[v]].source;
      choice_probability[v] = in[choice[v]].weight;
    } else {
      parent[v] = detail::kNoParent;
      choice_probability[v] = std::max(0.0, 1.0 - graph.in_weight(static_cast<NodeId>(v)));
    }
  };
  for (std::size_t v = 0; v < n; ++v) refresh(v);

  detail::LiveEdgeReach reach(n, seeds, removed);
  std::vector<std::uint64_t> counts(communities);
  SpreadResult result;
  result.per_community.assign(communities, 0.0);
  while (true) {
    double probability = 1.0;
    for (std::size_t v = 0; v < n && probability > 0.0; ++v) probability *= choice_probability[v];
    if (probability > 0.0) {
      std::fill(counts.begin(), counts.end(), 0);
      const std::size_t active = reach.count(parent, partition, counts);
      result.total += probability * static_cast<double>(active);
      for (std::size_t c = 0; c < communities; ++c)
        result.per_community[c] += probability * static_cast<double>(counts[c]);
    }
    std::size_t v = 0;
    for (; v < n; ++v) {
      if (++choice[v] <= graph.in_degree(static_cast<NodeId>(v))) {
        refresh(v);
        break;
      }
      choice[v] = 0;
      refresh(v);
    }
    if (v == n) break;
  }
  return result;
}

/// Blocking effectiveness sigma(S_N, G) - sigma(S_N, G \ S_P), in total and
/// per community. The Monte Carlo variant uses common random numbers.
inline BlockedSpread blocked_spread(const Graph& graph, const CommunityPartition& partition,
                                    std::span<const NodeId> negative_seeds, std::span<const NodeId> positive_seeds,
                                    SpreadMethod method, std::size_t runs = 10000, std::uint64_t rng_seed = 0) {
  detail::check_disjoint(graph, negative_seeds, positive_seeds);
  const std::vector<NodeId> none;
  auto spread = [&](std::span<const NodeId> removed) {
    return method == SpreadMethod::exact ? lt_spread_exact(graph, partition, negative_seeds, removed)
                                         : lt_spread_mc(graph, partition, negative_seeds, removed, runs, rng_seed);
  };
  const SpreadResult before = spread(none);
  const SpreadResult after = spread(positive_seeds);
  BlockedSpread out;
  out.total = before.total - after.total;
  out.per_community.resize(before.per_community.size());
  for (std::size_t c = 0; c < out.per_community.size(); ++c)
    out.per_community[c] = before.per_community[c] - after.per_community[c];
  return out;
}

}  // namespace fibm
