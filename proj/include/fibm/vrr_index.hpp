#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "fibm/error.hpp"
#include "fibm/graph.hpp"
#include "fibm/parallel.hpp"
#include "fibm/rng.hpp"

namespace fibm {

/// A distinct valid reverse walk: root first, then the nodes walked through
/// before the walk hit a negative seed. Negative seeds are never stored.
struct VrrPathView {
  NodeId root;
  std::span<const NodeId> nodes;
  std::uint64_t initial_multiplicity;
};

/// Estimated negative spread sigma(S_N, G), seeds included.
struct NegativeSpread {
  double total = 0.0;
  std::vector<double> per_community;
};

/// Estimated blocking effectiveness of the nodes invalidated so far.
///
/// `blocked_mass` counts invalidated walks per community; dividing by the
/// per-root sample count gives the estimate. Integer masses make equality
/// checks between code paths exact.
struct BlockEstimate {
  double total = 0.0;
  std::vector<double> per_community;
  std::vector<std::uint64_t> blocked_mass;
  NegativeSpread baseline;
};

/// Identifies the inputs an index was sampled from.
struct IndexKey {
  std::uint64_t graph_hash = 0;
  std::uint64_t seeds_hash = 0;
  std::uint32_t samples_per_root = 0;
  std::uint64_t rng_seed = 0;

  friend bool operator==(const IndexKey&, const IndexKey&) = default;
};

/// Naive VRR path index (M, D, L) over a fixed negative seed set.
///
/// The path store and the path lists D are immutable after construction. The
/// multiplicities L, the per-node root counters M, and the blocked totals
/// change under invalidate() and can be rolled back with snapshot/restore.
class VrrIndex {
 public:
  /// Mutable state captured by snapshot(); tied to the index that produced it.
  class Snapshot {
   private:
    friend class VrrIndex;
    std::uint64_t build_id_ = 0;
    std::vector<std::uint64_t> live_;
    std::vector<std::uint64_t> m_counts_;
    std::vector<std::uint64_t> remaining_;
    std::vector<std::uint64_t> blocked_;
  };

  /// Runs `samples_per_root` reverse walks from every node outside S_N.
  ///
  /// A walk at w picks in-arc (u, w) with probability p(u, w) and stops with
  /// the residual probability. It is valid when it reaches S_N and invalid on
  /// a stop, a dead end, or a revisit. Roots use independent substreams and
  /// are merged in root order, so the result does not depend on threading.
  static VrrIndex sample(const Graph& graph, const CommunityPartition& partition,
                         std::span<const NodeId> negative_seeds, std::uint32_t samples_per_root,
                         std::uint64_t rng_seed) {
    if (samples_per_root == 0) throw std::invalid_argument("samples_per_root must be at least 1");
    VrrIndex index(graph, partition, negative_seeds, samples_per_root, rng_seed);
    const std::size_t n = graph.node_count();

    struct RootPaths {
      std::vector<std::vector<NodeId>> paths;
      std::vector<std::uint64_t> counts;
    };
    std::vector<RootPaths> per_root(n);
    parallel_for(n, [&](std::size_t v) {
      if (index.negative_[v]) return;
      RootPaths& out = per_root[v];
      std::unordered_map<std::string, std::size_t> seen;
      std::vector<NodeId> walk;
      // Epoch stamps per worker thread; a node is on the walk iff its stamp is current.
      thread_local std::vector<std::uint64_t> visited_at;
      thread_local std::uint64_t epoch = 0;
      if (visited_at.size() < n) visited_at.assign(n, 0);
      Rng rng(rng_seed, StreamTag::vrr_walk, v);
      for (std::uint32_t s = 0; s < samples_per_root; ++s) {
        walk.clear();
        NodeId w = static_cast<NodeId>(v);
        walk.push_back(w);
        visited_at[w] = ++epoch;
        bool valid = false;
        while (true) {
          const double r = rng.uniform();
          NodeId parent = std::numeric_limits<NodeId>::max();
          double cumulative = 0.0;
          for (const Arc& a : graph.in_arcs(w)) {
            cumulative += a.weight;
            if (r < cumulative) {
              parent = a.source;
              break;
            }
          }
          if (parent == std::numeric_limits<NodeId>::max()) break;
          if (index.negative_[parent]) {
            valid = true;
            break;
          }
          if (visited_at[parent] == epoch) break;
          visited_at[parent] = epoch;
          walk.push_back(parent);
          w = parent;
        }
        if (!valid) continue;
        std::string key(reinterpret_cast<const char*>(walk.data()), walk.size() * sizeof(NodeId));
        auto [it, inserted] = seen.emplace(std::move(key), out.paths.size());
        if (inserted) {
          out.paths.push_back(walk);
          out.counts.push_back(1);
        } else {
          ++out.counts[it->second];
        }
      }
    });

    for (std::size_t v = 0; v < n; ++v) {
      for (std::size_t p = 0; p < per_root[v].paths.size(); ++p)
        index.append_path(static_cast<NodeId>(v), per_root[v].paths[p], per_root[v].counts[p]);
    }
    index.finalize();
    return index;
  }

  std::size_t node_count() const noexcept { return negative_.size(); }
  std::size_t community_count() const noexcept { return community_count_; }
  std::uint32_t samples_per_root() const noexcept { return samples_per_root_; }
  /// theta_v: walks sampled from v (valid and invalid); 0 for negative seeds.
  std::uint32_t theta(NodeId v) const { return negative_.at(v) ? 0 : samples_per_root_; }
  std::span<const NodeId> negative_seeds() const noexcept { return negative_seeds_; }
  bool is_negative(NodeId v) const { return negative_.at(v); }
  CommunityId community_of(NodeId v) const { return community_[v]; }
  const IndexKey& key() const noexcept { return key_; }

  std::size_t path_count() const noexcept { return path_root_.size(); }
  VrrPathView path(std::size_t p) const {
    return {path_root_[p],
            std::span<const NodeId>(path_nodes_).subspan(path_offsets_[p], path_offsets_[p + 1] - path_offsets_[p]),
            initial_[p]};
  }
  /// Current multiplicity L[P].
  std::uint64_t live_multiplicity(std::size_t p) const { return live_[p]; }
  /// D[u]: ids of the paths that contain u.
  std::span<const std::uint32_t> paths_through(NodeId u) const {
    return std::span<const std::uint32_t>(d_paths_).subspan(d_offsets_[u], d_offsets_[u + 1] - d_offsets_[u]);
  }
  /// M[u][v] for the current state.
  std::uint64_t root_count(NodeId u, NodeId v) const {
    const auto roots = m_roots(u);
    auto it = std::lower_bound(roots.begin(), roots.end(), v);
    if (it == roots.end() || *it != v) return 0;
    return m_counts_[m_offsets_[u] + static_cast<std::size_t>(it - roots.begin())];
  }
  /// Sum over roots of M[u][v] at construction time.
  std::uint64_t initial_mass(NodeId u) const { return initial_mass_[u]; }
  /// Valid walks sampled from v at construction time.
  std::uint64_t valid_walks(NodeId v) const { return valid_[v]; }

  /// sigma(S_N, G) estimate: |S_N| + sum_v valid_v / theta_v.
  NegativeSpread negative_spread() const {
    NegativeSpread out;
    out.per_community.assign(community_count_, 0.0);
    const double r = samples_per_root_;
    for (std::size_t c = 0; c < community_count_; ++c)
      out.per_community[c] = static_cast<double>(negative_per_community_[c]) +
                             static_cast<double>(valid_per_community_[c]) / r;
    out.total = static_cast<double>(negative_seeds_.size()) + static_cast<double>(valid_total_) / r;
    return out;
  }

  BlockEstimate blocked_estimate() const {
    BlockEstimate out;
    out.blocked_mass = blocked_;
    out.per_community.resize(community_count_);
    const double r = samples_per_root_;
    std::uint64_t total = 0;
    for (std::size_t c = 0; c < community_count_; ++c) {
      out.per_community[c] = static_cast<double>(blocked_[c]) / r;
      total += blocked_[c];
    }
    out.total = static_cast<double>(total) / r;
    out.baseline = negative_spread();
    return out;
  }

  std::span<const std::uint64_t> blocked_mass() const noexcept { return blocked_; }
  std::span<const std::uint64_t> valid_mass() const noexcept { return valid_per_community_; }
  std::span<const std::uint64_t> negative_count() const noexcept { return negative_per_community_; }

  /// Adds, per community, the walks that invalidate(u) would block now.
  /// Read-only; safe to call concurrently between writes.
  void accumulate_marginal_mass(NodeId u, std::span<std::uint64_t> out) const {
    check_candidate(u);
    const std::size_t begin = m_offsets_[u], end = m_offsets_[u + 1];
    for (std::size_t i = begin; i < end; ++i) out[community_[m_root_[i]]] += m_counts_[i];
  }

  std::vector<std::uint64_t> marginal_mass(NodeId u) const {
    std::vector<std::uint64_t> out(community_count_, 0);
    accumulate_marginal_mass(u, out);
    return out;
  }

  /// Increase of the blocked estimate per community if u were selected.
  std::vector<double> marginal_delta(NodeId u) const {
    const auto mass = marginal_mass(u);
    std::vector<double> out(mass.size());
    for (std::size_t c = 0; c < mass.size(); ++c)
      out[c] = static_cast<double>(mass[c]) / static_cast<double>(samples_per_root_);
    return out;
  }

  /// Zeroes every path through u and removes its multiplicity from M.
  /// Idempotent.
  void invalidate(NodeId u) {
    check_candidate(u);
    for (std::uint32_t p : paths_through(u)) {
      const std::uint64_t amount = live_[p];
      if (amount == 0) continue;
      const NodeId root = path_root_[p];
      for (std::size_t i = path_offsets_[p]; i < path_offsets_[p + 1]; ++i)
        m_counts_[m_slot(path_nodes_[i], root)] -= amount;
      remaining_[root] -= amount;
      blocked_[community_[root]] += amount;
      live_[p] = 0;
    }
  }

  Snapshot snapshot() const {
    Snapshot s;
    s.build_id_ = build_id_;
    s.live_ = live_;
    s.m_counts_ = m_counts_;
    s.remaining_ = remaining_;
    s.blocked_ = blocked_;
    return s;
  }

  void restore(const Snapshot& s) {
    if (s.build_id_ != build_id_) throw std::logic_error("snapshot belongs to a different index build");
    live_ = s.live_;
    m_counts_ = s.m_counts_;
    remaining_ = s.remaining_;
    blocked_ = s.blocked_;
  }

  /// Recounts M, the per-root remainders and the blocked totals from L.
  /// Returns an empty string when consistent, else a description.
  std::string consistency_error() const {
    std::vector<std::uint64_t> expect(m_counts_.size(), 0);
    std::vector<std::uint64_t> remaining(node_count(), 0);
    std::vector<std::uint64_t> blocked(community_count_, 0);
    for (std::size_t p = 0; p < path_count(); ++p) {
      if (live_[p] > initial_[p]) return "L exceeds initial multiplicity on path " + std::to_string(p);
      const NodeId root = path_root_[p];
      for (std::size_t i = path_offsets_[p]; i < path_offsets_[p + 1]; ++i)
        expect[m_slot(path_nodes_[i], root)] += live_[p];
      remaining[root] += live_[p];
      blocked[community_[root]] += initial_[p] - live_[p];
    }
    for (std::size_t u = 0; u < node_count(); ++u) {
      for (std::size_t i = m_offsets_[u]; i < m_offsets_[u + 1]; ++i) {
        if (expect[i] != m_counts_[i])
          return "M[" + std::to_string(u) + "][" + std::to_string(m_root_[i]) + "] is " +
                 std::to_string(m_counts_[i]) + ", recount gives " + std::to_string(expect[i]);
      }
    }
    if (remaining != remaining_) return "per-root remaining mass disagrees with L";
    if (blocked != blocked_) return "blocked mass disagrees with L";
    return {};
  }

  /// Test hook: corrupts one M counter so consistency checks can be exercised.
  void corrupt_for_testing() {
    if (!m_counts_.empty()) m_counts_.front() += 1;
  }

  /// Writes the header keys, then one "root multiplicity length nodes..." line per path.
  void dump(std::ostream& out) const {
    out << "fibm-vrr 1\n"
        << "graph_hash " << std::hex << key_.graph_hash << "\n"
        << "seeds_hash " << key_.seeds_hash << std::dec << "\n"
        << "samples_per_root " << key_.samples_per_root << "\n"
        << "rng_seed " << key_.rng_seed << "\n"
        << "nodes " << node_count() << "\n"
        << "paths " << path_count() << "\n";
    for (std::size_t p = 0; p < path_count(); ++p) {
      const auto view = path(p);
      out << view.root << ' ' << view.initial_multiplicity << ' ' << view.nodes.size();
      for (NodeId w : view.nodes) out << ' ' << w;
      out << '\n';
    }
  }

  /// Reads a dump. Returns nullopt when its header keys differ from the
  /// inputs (a cache miss); throws InputError on a malformed dump.
  static std::optional<VrrIndex> load(std::istream& in, const Graph& graph, const CommunityPartition& partition,
                                      std::span<const NodeId> negative_seeds, std::uint32_t samples_per_root,
                                      std::uint64_t rng_seed) {
    const IndexKey expected{graph.fingerprint(), fingerprint(negative_seeds), samples_per_root, rng_seed};
    std::string tag;
    int version = 0;
    if (!(in >> tag >> version) || tag != "fibm-vrr" || version != 1) throw InputError("not a VRR index dump");
    IndexKey found;
    std::size_t nodes = 0, paths = 0;
    auto field = [&in](const char* name, auto& value, bool hex = false) {
      std::string label;
      if (!(in >> label) || label != name) throw InputError(std::string("index dump: expected ") + name);
      if (hex) in >> std::hex;
      in >> value;
      in >> std::dec;
      if (!in) throw InputError(std::string("index dump: bad value for ") + name);
    };
    field("graph_hash", found.graph_hash, true);
    field("seeds_hash", found.seeds_hash, true);
    field("samples_per_root", found.samples_per_root);
    field("rng_seed", found.rng_seed);
    field("nodes", nodes);
    field("paths", paths);
    if (!(found == expected) || nodes != graph.node_count()) return std::nullopt;

    VrrIndex index(graph, partition, negative_seeds, samples_per_root, rng_seed);
    std::vector<NodeId> walk;
    NodeId previous_root = 0;
    for (std::size_t p = 0; p < paths; ++p) {
      NodeId root = 0;
      std::uint64_t multiplicity = 0;
      std::size_t length = 0;
      if (!(in >> root >> multiplicity >> length) || length == 0 || root >= nodes)
        throw InputError("index dump: bad path record " + std::to_string(p));
      walk.resize(length);
      for (auto& w : walk) {
        if (!(in >> w) || w >= nodes || index.negative_[w]) throw InputError("index dump: bad node on path");
      }
      if (walk.front() != root) throw InputError("index dump: path does not start at its root");
      if (root < previous_root) throw InputError("index dump: path records are not sorted by root");
      previous_root = root;
      index.append_path(root, walk, multiplicity);
    }
    index.finalize();
    return index;
  }

  /// Same paths and same mutable state; build identity is ignored.
  friend bool operator==(const VrrIndex& a, const VrrIndex& b) {
    return a.key_ == b.key_ && a.negative_ == b.negative_ && a.community_ == b.community_ &&
           a.path_root_ == b.path_root_ && a.path_offsets_ == b.path_offsets_ && a.path_nodes_ == b.path_nodes_ &&
           a.initial_ == b.initial_ && a.live_ == b.live_ && a.m_counts_ == b.m_counts_ &&
           a.m_root_ == b.m_root_ && a.blocked_ == b.blocked_;
  }

 private:
  VrrIndex(const Graph& graph, const CommunityPartition& partition, std::span<const NodeId> negative_seeds,
           std::uint32_t samples_per_root, std::uint64_t rng_seed)
      : samples_per_root_(samples_per_root),
        community_count_(partition.community_count()),
        community_(partition.assignment().begin(), partition.assignment().end()),
        build_id_(next_build_id()) {
    if (partition.node_count() != graph.node_count())
      throw std::invalid_argument("partition does not cover the graph");
    if (negative_seeds.empty()) throw std::invalid_argument("negative seed set is empty");
    negative_seeds_ = normalized_set(negative_seeds, graph.node_count());
    negative_ = membership(negative_seeds_, graph.node_count());
    key_ = {graph.fingerprint(), fingerprint(negative_seeds_), samples_per_root, rng_seed};
    negative_per_community_.assign(community_count_, 0);
    for (NodeId s : negative_seeds_) ++negative_per_community_[community_[s]];
    path_offsets_.push_back(0);
  }

  static std::uint64_t next_build_id() {
    static std::atomic<std::uint64_t> counter{0};
    return ++counter;
  }

  void check_candidate(NodeId u) const {
    if (u >= node_count()) throw std::out_of_range("node id out of range");
    if (negative_[u]) throw std::invalid_argument("negative seeds cannot be immunized");
  }

  std::span<const NodeId> m_roots(NodeId u) const {
    return std::span<const NodeId>(m_root_).subspan(m_offsets_[u], m_offsets_[u + 1] - m_offsets_[u]);
  }

  std::size_t m_slot(NodeId u, NodeId root) const {
    const auto roots = m_roots(u);
    return m_offsets_[u] + static_cast<std::size_t>(std::lower_bound(roots.begin(), roots.end(), root) - roots.begin());
  }

  void append_path(NodeId root, std::span<const NodeId> nodes, std::uint64_t multiplicity) {
    path_root_.push_back(root);
    path_nodes_.insert(path_nodes_.end(), nodes.begin(), nodes.end());
    path_offsets_.push_back(path_nodes_.size());
    initial_.push_back(multiplicity);
  }

  /// Derives M, D and the aggregate counters from the path store.
  void finalize() {
    const std::size_t n = node_count();
    live_ = initial_;
    valid_.assign(n, 0);
    for (std::size_t p = 0; p < path_count(); ++p) valid_[path_root_[p]] += initial_[p];
    remaining_ = valid_;
    valid_per_community_.assign(community_count_, 0);
    valid_total_ = 0;
    for (std::size_t v = 0; v < n; ++v) {
      valid_per_community_[community_[v]] += valid_[v];
      valid_total_ += valid_[v];
    }
    blocked_.assign(community_count_, 0);

    // D: paths per node, ascending path id.
    d_offsets_.assign(n + 1, 0);
    for (NodeId w : path_nodes_) ++d_offsets_[w + 1];
    for (std::size_t u = 0; u < n; ++u) d_offsets_[u + 1] += d_offsets_[u];
    d_paths_.resize(path_nodes_.size());
    std::vector<std::size_t> cursor(d_offsets_.begin(), d_offsets_.end() - 1);
    for (std::size_t p = 0; p < path_count(); ++p)
      for (std::size_t i = path_offsets_[p]; i < path_offsets_[p + 1]; ++i)
        d_paths_[cursor[path_nodes_[i]]++] = static_cast<std::uint32_t>(p);

    // M: per node, sorted distinct roots with summed multiplicity. Paths are
    // simple, so each path adds its multiplicity once per node.
    m_offsets_.assign(n + 1, 0);
    m_root_.clear();
    m_counts_.clear();
    initial_mass_.assign(n, 0);
    for (std::size_t u = 0; u < n; ++u) {
      for (std::uint32_t p : paths_through(static_cast<NodeId>(u))) {
        const NodeId root = path_root_[p];
        if (m_root_.size() > m_offsets_[u] && m_root_.back() == root) {
          m_counts_.back() += initial_[p];
        } else {
          m_root_.push_back(root);
          m_counts_.push_back(initial_[p]);
        }
        initial_mass_[u] += initial_[p];
      }
      m_offsets_[u + 1] = m_root_.size();
    }
  }

  std::uint32_t samples_per_root_;
  std::size_t community_count_;
  std::vector<CommunityId> community_;
  std::vector<NodeId> negative_seeds_;
  std::vector<bool> negative_;
  std::vector<std::uint64_t> negative_per_community_;
  IndexKey key_;
  std::uint64_t build_id_;

  // Immutable path store.
  std::vector<NodeId> path_root_;
  std::vector<std::size_t> path_offsets_;
  std::vector<NodeId> path_nodes_;
  std::vector<std::uint64_t> initial_;
  std::vector<std::size_t> d_offsets_;
  std::vector<std::uint32_t> d_paths_;
  std::vector<std::size_t> m_offsets_;
  std::vector<NodeId> m_root_;
  std::vector<std::uint64_t> valid_;
  std::vector<std::uint64_t> valid_per_community_;
  std::uint64_t valid_total_ = 0;
  std::vector<std::uint64_t> initial_mass_;

  // Mutable state.
  std::vector<std::uint64_t> live_;
  std::vector<std::uint64_t> m_counts_;
  std::vector<std::uint64_t> remaining_;
  std::vector<std::uint64_t> blocked_;
};

}  // namespace fibm
