#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "fibm/error.hpp"

namespace fibm {

using NodeId = std::uint32_t;
using CommunityId = std::uint32_t;
using ExternalId = std::int64_t;

/// Slack allowed on the linear-threshold weight budget of a node.
inline constexpr double kAdmissibilityTolerance = 1e-9;

struct Arc {
  NodeId source;
  NodeId target;
  double weight;

  friend bool operator==(const Arc&, const Arc&) = default;
};

/// Directed, weighted, immutable graph with forward and reverse CSR adjacency.
///
/// Every node v satisfies sum of in-arc weights <= 1 (+1e-9), which makes the
/// weights a valid linear-threshold parameterization. External ids from the
/// input file are retained so reports can be written in the caller's ids.
class Graph {
 public:
  Graph(std::size_t node_count, std::vector<Arc> arcs,
        std::vector<ExternalId> external_ids = {})
      : node_count_(node_count), arcs_(std::move(arcs)), external_ids_(std::move(external_ids)) {
    if (external_ids_.empty()) {
      external_ids_.resize(node_count_);
      for (std::size_t v = 0; v < node_count_; ++v) external_ids_[v] = static_cast<ExternalId>(v);
    }
    if (external_ids_.size() != node_count_)
      throw std::invalid_argument("external id table size differs from node count");
    for (std::size_t v = 0; v < node_count_; ++v) {
      if (!lookup_.emplace(external_ids_[v], static_cast<NodeId>(v)).second)
        throw std::invalid_argument("duplicate external id " + std::to_string(external_ids_[v]));
    }

    std::unordered_set<std::uint64_t> seen;
    seen.reserve(arcs_.size());
    for (const Arc& a : arcs_) {
      if (a.source >= node_count_ || a.target >= node_count_)
        throw std::invalid_argument("arc endpoint out of range");
      if (a.source == a.target) throw std::invalid_argument("self-loop on node " + ext(a.source));
      if (!(a.weight >= 0.0 && a.weight <= 1.0))
        throw std::invalid_argument("arc weight outside [0,1] on " + ext(a.source) + "->" + ext(a.target));
      if (!seen.insert(pair_key(a.source, a.target)).second)
        throw std::invalid_argument("duplicate arc " + ext(a.source) + "->" + ext(a.target));
    }

    build_csr(out_offsets_, out_arcs_, [](const Arc& a) { return a.source; });
    build_csr(in_offsets_, in_arcs_, [](const Arc& a) { return a.target; });

    in_weight_.assign(node_count_, 0.0);
    for (const Arc& a : in_arcs_) in_weight_[a.target] += a.weight;
    for (std::size_t v = 0; v < node_count_; ++v) {
      if (in_weight_[v] > 1.0 + kAdmissibilityTolerance)
        throw std::invalid_argument("in-weights of node " + ext(static_cast<NodeId>(v)) +
                                    " sum to " + std::to_string(in_weight_[v]) + " > 1");
    }
  }

  std::size_t node_count() const noexcept { return node_count_; }
  std::size_t arc_count() const noexcept { return arcs_.size(); }
  std::span<const Arc> arcs() const noexcept { return arcs_; }

  std::span<const Arc> out_arcs(NodeId v) const {
    return std::span<const Arc>(out_arcs_).subspan(out_offsets_[v], out_offsets_[v + 1] - out_offsets_[v]);
  }
  std::span<const Arc> in_arcs(NodeId v) const {
    return std::span<const Arc>(in_arcs_).subspan(in_offsets_[v], in_offsets_[v + 1] - in_offsets_[v]);
  }
  std::size_t out_degree(NodeId v) const { return out_offsets_[v + 1] - out_offsets_[v]; }
  std::size_t in_degree(NodeId v) const { return in_offsets_[v + 1] - in_offsets_[v]; }
  double in_weight(NodeId v) const { return in_weight_[v]; }

  ExternalId external_id(NodeId v) const { return external_ids_.at(v); }
  std::span<const ExternalId> external_ids() const noexcept { return external_ids_; }
  std::optional<NodeId> internal_id(ExternalId id) const {
    auto it = lookup_.find(id);
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
  }

  /// FNV-1a over the node table and arcs; keys cached index dumps.
  std::uint64_t fingerprint() const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](std::uint64_t word) {
      for (int i = 0; i < 8; ++i) {
        h ^= (word >> (8 * i)) & 0xffU;
        h *= 0x100000001b3ULL;
      }
    };
    feed(node_count_);
    for (ExternalId id : external_ids_) feed(static_cast<std::uint64_t>(id));
    for (const Arc& a : arcs_) {
      feed(a.source);
      feed(a.target);
      feed(std::bit_cast<std::uint64_t>(a.weight));
    }
    return h;
  }

  friend bool operator==(const Graph& a, const Graph& b) {
    return a.node_count_ == b.node_count_ && a.arcs_ == b.arcs_ && a.external_ids_ == b.external_ids_;
  }

 private:
  static std::uint64_t pair_key(NodeId u, NodeId v) {
    return (static_cast<std::uint64_t>(u) << 32) | v;
  }

  std::string ext(NodeId v) const { return std::to_string(external_ids_[v]); }

  template <typename KeyFn>
  void build_csr(std::vector<std::size_t>& offsets, std::vector<Arc>& out, KeyFn key) const {
    offsets.assign(node_count_ + 1, 0);
    for (const Arc& a : arcs_) ++offsets[key(a) + 1];
    for (std::size_t v = 0; v < node_count_; ++v) offsets[v + 1] += offsets[v];
    out.resize(arcs_.size());
    std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
    for (const Arc& a : arcs_) out[cursor[key(a)]++] = a;
  }

  std::size_t node_count_;
  std::vector<Arc> arcs_;
  std::vector<ExternalId> external_ids_;
  std::unordered_map<ExternalId, NodeId> lookup_;
  std::vector<std::size_t> out_offsets_, in_offsets_;
  std::vector<Arc> out_arcs_, in_arcs_;
  std::vector<double> in_weight_;
};

/// Disjoint cover of the node set by communities 0..count-1.
class CommunityPartition {
 public:
  CommunityPartition() = default;

  /// `assignment[v]` is the community of node v. Ids must be contiguous from 0.
  explicit CommunityPartition(std::vector<CommunityId> assignment) : assignment_(std::move(assignment)) {
    CommunityId max_id = 0;
    for (CommunityId c : assignment_) max_id = std::max(max_id, c);
    members_.assign(assignment_.empty() ? 0 : max_id + 1, {});
    for (std::size_t v = 0; v < assignment_.size(); ++v)
      members_[assignment_[v]].push_back(static_cast<NodeId>(v));
    for (std::size_t c = 0; c < members_.size(); ++c) {
      if (members_[c].empty())
        throw std::invalid_argument("community ids are not contiguous: " + std::to_string(c) + " is empty");
    }
  }

  /// Every node in one community.
  static CommunityPartition single(std::size_t node_count) {
    return CommunityPartition(std::vector<CommunityId>(node_count, 0));
  }

  std::size_t community_count() const noexcept { return members_.size(); }
  std::size_t node_count() const noexcept { return assignment_.size(); }
  CommunityId community_of(NodeId v) const { return assignment_.at(v); }
  std::span<const CommunityId> assignment() const noexcept { return assignment_; }
  std::span<const NodeId> members(CommunityId c) const { return members_.at(c); }

  friend bool operator==(const CommunityPartition&, const CommunityPartition&) = default;

 private:
  std::vector<CommunityId> assignment_;
  std::vector<std::vector<NodeId>> members_;
};

/// One instance of fair influence blocking: who spreads, how many nodes may
/// be immunized, and the fairness/effectiveness knobs.
struct ProblemInstance {
  std::shared_ptr<const Graph> graph;
  std::shared_ptr<const CommunityPartition> partition;
  std::vector<NodeId> negative_seeds;
  std::size_t budget = 0;
  double tolerance = 0.1;  ///< allowed relative loss of blocking effectiveness
  double alpha = 0.5;      ///< fairness concavity, strictly inside (0,1)
  double beta = 0.0;       ///< weight of fairness in the scalarized objective

  void validate() const {
    if (!graph || !partition) throw std::invalid_argument("problem has no graph or partition");
    if (partition->node_count() != graph->node_count())
      throw std::invalid_argument("partition does not cover the graph");
    if (negative_seeds.empty()) throw std::invalid_argument("negative seed set is empty");
    std::vector<bool> seen(graph->node_count(), false);
    for (NodeId s : negative_seeds) {
      if (s >= graph->node_count()) throw std::invalid_argument("negative seed out of range");
      if (seen[s]) throw std::invalid_argument("duplicate negative seed");
      seen[s] = true;
    }
    if (budget > graph->node_count() - negative_seeds.size())
      throw std::invalid_argument("budget k exceeds |V| - |S_N|");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie strictly inside (0,1)");
    if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("beta must lie in [0,1]");
    if (!(tolerance >= 0.0 && tolerance <= 1.0)) throw std::invalid_argument("mu must lie in [0,1]");
  }
};

enum class WeightMode { uniform_in_degree, explicit_column };

struct EdgeListOptions {
  bool directed = false;
  WeightMode weights = WeightMode::uniform_in_degree;
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) fields.push_back(line.substr(i, j - i));
    i = j;
  }
  return fields;
}

inline bool is_skippable(const std::vector<std::string_view>& fields) {
  return fields.empty() || fields.front().front() == '#';
}

template <typename T>
std::optional<T> parse_number(std::string_view text) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return in;
}

}  // namespace detail

/// Reads a whitespace separated "u v [w]" edge list.
///
/// Node ids are integers and are remapped to 0..n-1 in ascending order of
/// their external value. Undirected input yields one arc per direction. Self
/// loops and repeated (u,v) arcs are dropped with a warning; the first
/// occurrence of a repeated arc wins.
inline Graph load_edge_list(const std::string& path, const EdgeListOptions& options = {},
                            std::vector<std::string>* warnings = nullptr) {
  auto in = detail::open_input(path);
  struct RawEdge {
    ExternalId u, v;
    double w;
    std::size_t line;
  };
  std::vector<RawEdge> raw;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = detail::split_fields(line);
    if (detail::is_skippable(fields)) continue;
    const bool want_weight = options.weights == WeightMode::explicit_column;
    if (fields.size() < 2 || fields.size() > 3 || (want_weight && fields.size() != 3))
      throw InputError(path + ":" + std::to_string(line_no) + ": malformed line '" + line + "'");
    auto u = detail::parse_number<ExternalId>(fields[0]);
    auto v = detail::parse_number<ExternalId>(fields[1]);
    if (!u || !v) throw InputError(path + ":" + std::to_string(line_no) + ": malformed node id");
    double w = 0.0;
    if (want_weight) {
      auto parsed = detail::parse_number<double>(fields[2]);
      if (!parsed) throw InputError(path + ":" + std::to_string(line_no) + ": malformed weight");
      w = *parsed;
      if (!(w >= 0.0 && w <= 1.0))
        throw InputError(path + ":" + std::to_string(line_no) + ": weight " + std::string(fields[2]) +
                         " outside [0,1]");
    }
    raw.push_back({*u, *v, w, line_no});
  }
  if (raw.empty()) throw InputError(path + ": no arcs");

  std::vector<ExternalId> ids;
  ids.reserve(raw.size() * 2);
  for (const auto& e : raw) {
    ids.push_back(e.u);
    ids.push_back(e.v);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  auto index_of = [&ids](ExternalId id) {
    return static_cast<NodeId>(std::lower_bound(ids.begin(), ids.end(), id) - ids.begin());
  };

  std::vector<Arc> arcs;
  std::unordered_set<std::uint64_t> seen;
  auto warn = [warnings](std::string message) {
    if (warnings) warnings->push_back(std::move(message));
  };
  auto add = [&](NodeId s, NodeId t, double w, const RawEdge& e) {
    const std::uint64_t key = (static_cast<std::uint64_t>(s) << 32) | t;
    if (!seen.insert(key).second) {
      warn(path + ":" + std::to_string(e.line) + ": duplicate arc " + std::to_string(ids[s]) + "->" +
           std::to_string(ids[t]) + " ignored");
      return;
    }
    arcs.push_back({s, t, w});
  };
  for (const auto& e : raw) {
    if (e.u == e.v) {
      warn(path + ":" + std::to_string(e.line) + ": self-loop on " + std::to_string(e.u) + " dropped");
      continue;
    }
    const NodeId s = index_of(e.u), t = index_of(e.v);
    add(s, t, e.w, e);
    if (!options.directed) add(t, s, e.w, e);
  }
  if (arcs.empty()) throw InputError(path + ": no arcs");

  if (options.weights == WeightMode::uniform_in_degree) {
    std::vector<std::size_t> in_degree(ids.size(), 0);
    for (const Arc& a : arcs) ++in_degree[a.target];
    for (Arc& a : arcs) a.weight = 1.0 / static_cast<double>(in_degree[a.target]);
  } else {
    std::vector<double> in_weight(ids.size(), 0.0);
    for (const Arc& a : arcs) in_weight[a.target] += a.weight;
    for (std::size_t v = 0; v < ids.size(); ++v) {
      if (in_weight[v] > 1.0 + kAdmissibilityTolerance)
        throw InputError(path + ": in-weights of node " + std::to_string(ids[v]) + " sum to " +
                         std::to_string(in_weight[v]) + " > 1 (LT admissibility)");
    }
  }
  const std::size_t node_count = ids.size();
  return Graph(node_count, std::move(arcs), std::move(ids));
}

/// Reads "node_id label" lines. Community ids are assigned in order of each
/// community's smallest node, so the numbering does not depend on line order.
inline CommunityPartition load_communities(const std::string& path, const Graph& graph) {
  auto in = detail::open_input(path);
  constexpr CommunityId kUnset = std::numeric_limits<CommunityId>::max();
  std::vector<std::string> label_of(graph.node_count());
  std::vector<bool> assigned(graph.node_count(), false);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = detail::split_fields(line);
    if (detail::is_skippable(fields)) continue;
    if (fields.size() != 2)
      throw InputError(path + ":" + std::to_string(line_no) + ": malformed line '" + line + "'");
    auto id = detail::parse_number<ExternalId>(fields[0]);
    if (!id) throw InputError(path + ":" + std::to_string(line_no) + ": malformed node id");
    auto v = graph.internal_id(*id);
    if (!v) throw InputError(path + ":" + std::to_string(line_no) + ": unknown node " + std::to_string(*id));
    if (assigned[*v])
      throw InputError(path + ":" + std::to_string(line_no) + ": duplicate node " + std::to_string(*id));
    assigned[*v] = true;
    label_of[*v] = std::string(fields[1]);
  }
  for (std::size_t v = 0; v < graph.node_count(); ++v) {
    if (!assigned[v])
      throw InputError(path + ": missing node " + std::to_string(graph.external_id(static_cast<NodeId>(v))));
  }
  std::map<std::string, CommunityId> ids;
  std::vector<CommunityId> assignment(graph.node_count(), kUnset);
  for (std::size_t v = 0; v < graph.node_count(); ++v) {
    auto [it, inserted] = ids.emplace(label_of[v], static_cast<CommunityId>(ids.size()));
    assignment[v] = it->second;
  }
  return CommunityPartition(std::move(assignment));
}

/// The `size` nodes with the largest in+out degree, ties to the lower id.
/// Returned in ascending id order.
inline std::vector<NodeId> top_degree_seeds(const Graph& graph, std::size_t size) {
  if (size > graph.node_count())
    throw std::invalid_argument("requested " + std::to_string(size) + " seeds from a graph with " +
                                std::to_string(graph.node_count()) + " nodes");
  std::vector<NodeId> order(graph.node_count());
  for (std::size_t v = 0; v < order.size(); ++v) order[v] = static_cast<NodeId>(v);
  auto degree = [&graph](NodeId v) { return graph.in_degree(v) + graph.out_degree(v); };
  std::stable_sort(order.begin(), order.end(),
                   [&](NodeId a, NodeId b) { return degree(a) > degree(b); });
  order.resize(size);
  std::sort(order.begin(), order.end());
  return order;
}

/// Sorted, duplicate-free copy of a node list, range-checked against `node_count`.
inline std::vector<NodeId> normalized_set(std::span<const NodeId> nodes, std::size_t node_count) {
  std::vector<NodeId> out(nodes.begin(), nodes.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (!out.empty() && out.back() >= node_count) throw std::out_of_range("node id out of range");
  return out;
}

inline std::vector<bool> membership(std::span<const NodeId> nodes, std::size_t node_count) {
  std::vector<bool> mask(node_count, false);
  for (NodeId v : nodes) {
    if (v >= node_count) throw std::out_of_range("node id out of range");
    mask[v] = true;
  }
  return mask;
}

inline std::uint64_t fingerprint(std::span<const NodeId> nodes) {
  std::vector<NodeId> sorted(nodes.begin(), nodes.end());
  std::sort(sorted.begin(), sorted.end());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (NodeId v : sorted) {
    for (int i = 0; i < 4; ++i) {
      h ^= (v >> (8 * i)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace fibm
