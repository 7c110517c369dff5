#include <gtest/gtest.h>

#include <cmath>

#include "fibm/diffusion.hpp"
#include "fibm/synthetic.hpp"
#include "test_support.hpp"

namespace fibm {
namespace {

const std::vector<NodeId> kNone;

TEST(LtSpread, DeterministicChain) {
  const Graph g = testing::chain3();
  const auto p = CommunityPartition::single(3);
  const std::vector<NodeId> a{0}, b{1};
  EXPECT_DOUBLE_EQ(lt_spread_mc(g, p, a, kNone, 50, 1).total, 3.0);
  EXPECT_DOUBLE_EQ(lt_spread_mc(g, p, a, b, 50, 1).total, 1.0);
  EXPECT_DOUBLE_EQ(lt_spread_exact(g, p, a, kNone).total, 3.0);
  EXPECT_DOUBLE_EQ(lt_spread_mc(g, p, a, kNone, 50, 1).std_error, 0.0);
}

TEST(LtSpread, CoinFlipArc) {
  const Graph g(2, {{0, 1, 0.5}});
  const auto p = CommunityPartition::single(2);
  const std::vector<NodeId> a{0};
  EXPECT_DOUBLE_EQ(lt_spread_exact(g, p, a, kNone).total, 1.5);
  const auto mc = lt_spread_mc(g, p, a, kNone, 100000, 7);
  EXPECT_NEAR(mc.total, 1.5, 0.01);
  EXPECT_NEAR(mc.std_error, 0.5 / std::sqrt(100000.0), 1e-4);
}

TEST(LtSpread, TriangleWithRemovedNode) {
  const Graph g(3, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 0, 1.0}});
  const auto p = CommunityPartition::single(3);
  const std::vector<NodeId> seeds{0}, removed{1};
  EXPECT_DOUBLE_EQ(lt_spread_exact(g, p, seeds, removed).total, 1.0);
}

TEST(LtSpread, PreconditionErrors) {
  const Graph g = testing::chain3();
  const auto p = CommunityPartition::single(3);
  const std::vector<NodeId> a{0};
  EXPECT_THROW(lt_spread_mc(g, p, a, a, 10, 1), std::invalid_argument);
  EXPECT_THROW(lt_spread_mc(g, p, a, kNone, 0, 1), std::invalid_argument);
  EXPECT_THROW(lt_spread_exact(g, p, a, a), std::invalid_argument);
}

TEST(LtSpread, EnumerationGuard) {
  // 12 nodes with in-degree 5: 6^12 configurations.
  std::vector<Arc> arcs;
  for (NodeId v = 0; v < 12; ++v)
    for (NodeId d = 1; d <= 5; ++d) arcs.push_back({static_cast<NodeId>((v + d) % 12), v, 0.1});
  const Graph g(12, arcs);
  const auto p = CommunityPartition::single(12);
  const std::vector<NodeId> a{0};
  EXPECT_THROW(lt_spread_exact(g, p, a, kNone), std::invalid_argument);
}

TEST(LtSpread, PerCommunitySumsToTotal) {
  const auto inst = synthetic::random_lt_instance(6, 0.5, 3, 11);
  const std::vector<NodeId> seeds{0};
  for (const auto& r : {lt_spread_exact(inst.graph, inst.partition, seeds, kNone),
                        lt_spread_mc(inst.graph, inst.partition, seeds, kNone, 2000, 3)}) {
    double sum = 0.0;
    for (double x : r.per_community) sum += x;
    EXPECT_NEAR(sum, r.total, 1e-9);
    EXPECT_GE(r.total, 1.0);
  }
}

TEST(LtSpread, SameSeedIsBitIdentical) {
  const auto inst = synthetic::random_lt_instance(6, 0.6, 2, 5);
  const std::vector<NodeId> seeds{1}, removed{3};
  const auto a = lt_spread_mc(inst.graph, inst.partition, seeds, removed, 5000, 99);
  const auto b = lt_spread_mc(inst.graph, inst.partition, seeds, removed, 5000, 99);
  EXPECT_EQ(a.total, b.total);
  EXPECT_EQ(a.std_error, b.std_error);
  EXPECT_EQ(a.per_community, b.per_community);
}

TEST(BlockedSpread, ChainAndIdentity) {
  const Graph g = testing::chain3();
  const auto p = CommunityPartition::single(3);
  const std::vector<NodeId> neg{0}, pos{1};
  EXPECT_DOUBLE_EQ(blocked_spread(g, p, neg, pos, SpreadMethod::exact).total, 2.0);
  EXPECT_DOUBLE_EQ(blocked_spread(g, p, neg, pos, SpreadMethod::monte_carlo, 100, 1).total, 2.0);
  EXPECT_DOUBLE_EQ(blocked_spread(g, p, neg, kNone, SpreadMethod::exact).total, 0.0);
  EXPECT_DOUBLE_EQ(blocked_spread(g, p, neg, kNone, SpreadMethod::monte_carlo, 1000, 4).total, 0.0);
  EXPECT_THROW(blocked_spread(g, p, neg, neg, SpreadMethod::exact), std::invalid_argument);
}

// Exhaustive over small graphs: immunizing never raises spread, and blocking
// is monotone in the immunized set.
TEST(BlockedSpread, MonotoneOnSmallGraphs) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto inst = synthetic::random_lt_instance(5, 0.5, 2, seed);
    const std::vector<NodeId> neg{0};
    const double base = lt_spread_exact(inst.graph, inst.partition, neg, kNone).total;
    for (std::uint32_t mask = 0; mask < 16; ++mask) {
      std::vector<NodeId> pos;
      for (NodeId b = 0; b < 4; ++b)
        if (mask >> b & 1U) pos.push_back(b + 1);
      const double blocked = blocked_spread(inst.graph, inst.partition, neg, pos, SpreadMethod::exact).total;
      EXPECT_LE(lt_spread_exact(inst.graph, inst.partition, neg, pos).total, base + 1e-12);
      for (NodeId extra = 1; extra < 5; ++extra) {
        if (mask >> (extra - 1) & 1U) continue;
        auto bigger = pos;
        bigger.push_back(extra);
        EXPECT_LE(blocked, blocked_spread(inst.graph, inst.partition, neg, bigger, SpreadMethod::exact).total + 1e-12);
      }
    }
  }
}

TEST(LtSpread, MonteCarloConvergesToExact) {
  int within = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto inst = synthetic::random_lt_instance(5, 0.5, 2, 1000 + seed);
    const std::vector<NodeId> neg{static_cast<NodeId>(seed % 5)};
    const auto exact = lt_spread_exact(inst.graph, inst.partition, neg, kNone);
    const auto mc = lt_spread_mc(inst.graph, inst.partition, neg, kNone, 4000, seed);
    if (std::abs(mc.total - exact.total) <= 4.0 * mc.std_error + 1e-12) ++within;
  }
  EXPECT_GE(within, 95);
}

}  // namespace
}  // namespace fibm
