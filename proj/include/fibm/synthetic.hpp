#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <unordered_set>
#include <vector>

#include "fibm/graph.hpp"
#include "fibm/rng.hpp"

namespace fibm::synthetic {

struct Instance {
  Graph graph;
  CommunityPartition partition;
};

/// Small directed graph with LT-admissible random weights. Each ordered pair
/// becomes an arc with probability `density`; the in-weights of every node are
/// random positive numbers scaled to a total drawn from [0.3, 1].
inline Instance random_lt_instance(std::size_t nodes, double density, std::size_t communities, std::uint64_t seed) {
  Rng rng(seed, StreamTag::synthetic, nodes);
  std::vector<Arc> arcs;
  for (NodeId v = 0; v < nodes; ++v) {
    std::vector<Arc> incoming;
    for (NodeId u = 0; u < nodes; ++u)
      if (u != v && rng.uniform() < density) incoming.push_back({u, v, 0.05 + rng.uniform()});
    double sum = 0.0;
    for (const Arc& a : incoming) sum += a.weight;
    const double budget = 0.3 + 0.7 * rng.uniform();
    for (Arc& a : incoming) {
      a.weight = a.weight / sum * budget;
      arcs.push_back(a);
    }
  }
  std::vector<CommunityId> assignment(nodes);
  for (std::size_t v = 0; v < nodes; ++v)
    assignment[v] = static_cast<CommunityId>(v < communities ? v : rng.below(communities));
  return {Graph(nodes, std::move(arcs)), CommunityPartition(std::move(assignment))};
}

/// Undirected graph with planted communities of uneven size and heavy-tailed
/// degrees, weighted p(u,v) = 1 / in_degree(v).
///
/// Community c gets a share proportional to 1/(c+1). Endpoints are drawn
/// proportionally to a Pareto(1.5) activity; with probability `mixing` the
/// second endpoint ignores community membership.
inline Instance community_graph(std::size_t nodes, std::size_t communities, double mean_degree, double mixing,
                                std::uint64_t seed) {
  Rng rng(seed, StreamTag::synthetic, 0x5eedULL);
  std::vector<double> share(communities);
  double share_sum = 0.0;
  for (std::size_t c = 0; c < communities; ++c) share_sum += share[c] = 1.0 / static_cast<double>(c + 1);
  std::vector<CommunityId> assignment(nodes);
  {
    std::size_t v = 0;
    for (std::size_t c = 0; c < communities; ++c) {
      const std::size_t size = c + 1 == communities
                                   ? nodes - v
                                   : std::max<std::size_t>(2, static_cast<std::size_t>(std::round(
                                                                  share[c] / share_sum * static_cast<double>(nodes))));
      for (std::size_t i = 0; i < size && v < nodes; ++i) assignment[v++] = static_cast<CommunityId>(c);
    }
  }
  CommunityPartition partition(assignment);

  std::vector<double> activity(nodes);
  for (double& a : activity) a = std::pow(1.0 - rng.uniform(), -1.0 / 1.5);
  auto cumulative = [&](std::span<const NodeId> members) {
    std::vector<double> cdf(members.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < members.size(); ++i) cdf[i] = sum += activity[members[i]];
    return cdf;
  };
  std::vector<NodeId> everyone(nodes);
  for (std::size_t v = 0; v < nodes; ++v) everyone[v] = static_cast<NodeId>(v);
  const auto global_cdf = cumulative(everyone);
  std::vector<std::vector<double>> community_cdf;
  for (std::size_t c = 0; c < communities; ++c) community_cdf.push_back(cumulative(partition.members(c)));
  auto draw = [&rng](std::span<const NodeId> members, const std::vector<double>& cdf) {
    const double r = rng.uniform() * cdf.back();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), r);
    return members[std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), members.size() - 1)];
  };

  const auto edges = static_cast<std::size_t>(mean_degree * static_cast<double>(nodes) / 2.0);
  std::unordered_set<std::uint64_t> seen;
  std::vector<std::pair<NodeId, NodeId>> pairs;
  std::size_t attempts = 0;
  while (pairs.size() < edges && attempts++ < edges * 20) {
    const NodeId u = draw(everyone, global_cdf);
    const CommunityId c = partition.community_of(u);
    const NodeId v = rng.uniform() < mixing ? draw(everyone, global_cdf) : draw(partition.members(c), community_cdf[c]);
    if (u == v) continue;
    const auto key = (static_cast<std::uint64_t>(std::min(u, v)) << 32) | std::max(u, v);
    if (!seen.insert(key).second) continue;
    pairs.emplace_back(u, v);
  }
  // Attach isolated nodes so every node can be reached.
  std::vector<std::size_t> degree(nodes, 0);
  for (auto [u, v] : pairs) ++degree[u], ++degree[v];
  for (std::size_t v = 0; v < nodes; ++v) {
    if (degree[v] > 0) continue;
    const auto members = partition.members(partition.community_of(static_cast<NodeId>(v)));
    NodeId u = draw(members, community_cdf[partition.community_of(static_cast<NodeId>(v))]);
    if (u == v) u = static_cast<NodeId>((v + 1) % nodes);
    pairs.emplace_back(u, static_cast<NodeId>(v));
    ++degree[u], ++degree[v];
  }

  std::vector<Arc> arcs;
  for (auto [u, v] : pairs) {
    arcs.push_back({u, v, 0.0});
    arcs.push_back({v, u, 0.0});
  }
  std::vector<std::size_t> in_degree(nodes, 0);
  for (const Arc& a : arcs) ++in_degree[a.target];
  for (Arc& a : arcs) a.weight = 1.0 / static_cast<double>(in_degree[a.target]);
  return {Graph(nodes, std::move(arcs)), std::move(partition)};
}

}  // namespace fibm::synthetic
