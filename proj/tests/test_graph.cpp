#include <gtest/gtest.h>

#include <cmath>

#include "fibm/graph.hpp"
#include "test_support.hpp"

namespace fibm {
namespace {

using testing::scratch_dir;
using testing::write_file;

TEST(LoadEdgeList, UniformInDegreeWeights) {
  const auto dir = scratch_dir("uniform");
  const auto path = write_file(dir / "g.txt", "0 1\n1 2\n0 2\n");
  const Graph g = load_edge_list(path, {.directed = true});
  ASSERT_EQ(g.node_count(), 3u);
  ASSERT_EQ(g.arc_count(), 3u);
  EXPECT_EQ(g.arcs()[0], (Arc{0, 1, 1.0}));
  EXPECT_EQ(g.arcs()[1], (Arc{1, 2, 0.5}));
  EXPECT_EQ(g.arcs()[2], (Arc{0, 2, 0.5}));
}

TEST(LoadEdgeList, EmptyFileHasNoArcs) {
  const auto dir = scratch_dir("empty");
  const auto path = write_file(dir / "g.txt", "# only a comment\n\n");
  try {
    load_edge_list(path);
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("no arcs"), std::string::npos);
  }
}

TEST(LoadEdgeList, KarateClubSymmetrized) {
  const Graph g = load_edge_list(testing::data_path("karate.edges"));
  EXPECT_EQ(g.node_count(), 34u);
  EXPECT_EQ(g.arc_count(), 156u);
  for (NodeId v = 0; v < g.node_count(); ++v) EXPECT_NEAR(g.in_weight(v), 1.0, 1e-12);
}

TEST(LoadEdgeList, MalformedLineReportsLineNumber) {
  const auto dir = scratch_dir("malformed");
  const auto path = write_file(dir / "g.txt", "0 1\n# c\n1 x\n");
  try {
    load_edge_list(path);
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
  }
}

TEST(LoadEdgeList, ExplicitWeightErrors) {
  const auto dir = scratch_dir("explicit");
  const EdgeListOptions explicit_directed{.directed = true, .weights = WeightMode::explicit_column};
  EXPECT_THROW(load_edge_list(write_file(dir / "a.txt", "0 1 1.5\n"), explicit_directed), InputError);
  EXPECT_THROW(load_edge_list(write_file(dir / "b.txt", "0 2 0.6\n1 2 0.6\n"), explicit_directed), InputError);
  EXPECT_THROW(load_edge_list(write_file(dir / "c.txt", "0 2\n"), explicit_directed), InputError);
  const Graph ok = load_edge_list(write_file(dir / "d.txt", "0 2 0.4\n1 2 0.6\n"), explicit_directed);
  EXPECT_DOUBLE_EQ(ok.in_weight(2), 1.0);
}

TEST(LoadEdgeList, DuplicatesAndSelfLoopsWarn) {
  const auto dir = scratch_dir("dups");
  const auto path = write_file(dir / "g.txt", "0 1 0.3\n0 1 0.9\n2 2 0.1\n1 0 0.2\n");
  std::vector<std::string> warnings;
  const Graph g = load_edge_list(path, {.directed = true, .weights = WeightMode::explicit_column}, &warnings);
  ASSERT_EQ(g.arc_count(), 2u);
  EXPECT_DOUBLE_EQ(g.arcs()[0].weight, 0.3);
  EXPECT_EQ(warnings.size(), 2u);
  EXPECT_EQ(g.node_count(), 3u);  // node 2 survives as an isolated node
}

TEST(LoadEdgeList, RemapsSparseIdsAndIsIdempotent) {
  const auto dir = scratch_dir("remap");
  const auto path = write_file(dir / "g.txt", "100 7\n7 -3\n");
  const Graph a = load_edge_list(path);
  const Graph b = load_edge_list(path);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.fingerprint(), b.fingerprint());
  ASSERT_EQ(a.node_count(), 3u);
  EXPECT_EQ(a.external_id(0), -3);
  EXPECT_EQ(a.external_id(1), 7);
  EXPECT_EQ(a.external_id(2), 100);
  for (NodeId v = 0; v < 3; ++v) EXPECT_EQ(*a.internal_id(a.external_id(v)), v);
}

TEST(LoadCommunities, LabelsBecomeContiguousIds) {
  const auto dir = scratch_dir("comm");
  const Graph g(4, {{0, 1, 1.0}, {2, 3, 1.0}});
  const auto p = load_communities(write_file(dir / "c.txt", "3 b\n0 a\n1 a\n2 b\n"), g);
  EXPECT_EQ(p.community_count(), 2u);
  EXPECT_EQ(p.members(0).size(), 2u);
  EXPECT_EQ(p.members(1).size(), 2u);
  EXPECT_EQ(p.community_of(0), 0u);
  EXPECT_EQ(p.community_of(3), 1u);
}

TEST(LoadCommunities, Errors) {
  const auto dir = scratch_dir("comm_err");
  const Graph g(4, {{0, 1, 1.0}, {2, 3, 1.0}});
  try {
    load_communities(write_file(dir / "missing.txt", "0 a\n1 a\n2 b\n"), g);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("missing node 3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(load_communities(write_file(dir / "dup.txt", "0 a\n0 a\n1 a\n2 b\n3 b\n"), g), InputError);
  EXPECT_THROW(load_communities(write_file(dir / "unknown.txt", "0 a\n1 a\n2 b\n3 b\n9 b\n"), g), InputError);
  const auto single = load_communities(write_file(dir / "one.txt", "0 x\n1 x\n2 x\n3 x\n"), g);
  EXPECT_EQ(single.community_count(), 1u);
}

TEST(TopDegreeSeeds, KarateHighestDegreeIsNode33) {
  const Graph g = load_edge_list(testing::data_path("karate.edges"));
  const auto seeds = top_degree_seeds(g, 1);
  ASSERT_EQ(seeds.size(), 1u);
  EXPECT_EQ(g.external_id(seeds[0]), 33);
}

TEST(TopDegreeSeeds, StarCenterAndFullSet) {
  std::vector<Arc> arcs;
  for (NodeId leaf = 1; leaf <= 5; ++leaf) {
    arcs.push_back({0, leaf, 1.0});
    arcs.push_back({leaf, 0, 0.2});
  }
  const Graph star(6, arcs);
  EXPECT_EQ(top_degree_seeds(star, 1), std::vector<NodeId>{0});
  EXPECT_EQ(top_degree_seeds(star, 6).size(), 6u);
  EXPECT_EQ(top_degree_seeds(star, 2), (std::vector<NodeId>{0, 1}));  // tie broken by lower id
  EXPECT_THROW(top_degree_seeds(star, 7), std::invalid_argument);
}

TEST(Graph, RejectsInadmissibleWeights) {
  EXPECT_THROW(Graph(3, {{0, 2, 0.7}, {1, 2, 0.7}}), std::invalid_argument);
  EXPECT_THROW(Graph(2, {{0, 0, 0.5}}), std::invalid_argument);
  EXPECT_THROW(Graph(2, {{0, 1, 0.5}, {0, 1, 0.2}}), std::invalid_argument);
  EXPECT_NO_THROW(Graph(3, {{0, 2, 0.5}, {1, 2, 0.5 + 1e-10}}));
}

TEST(ProblemInstance, Validation) {
  auto g = testing::share(testing::chain3());
  auto p = testing::share(CommunityPartition::single(3));
  auto problem = testing::make_problem(g, p, {0}, 2, 0.5);
  EXPECT_NO_THROW(problem.validate());
  problem.budget = 3;
  EXPECT_THROW(problem.validate(), std::invalid_argument);
  problem.budget = 1;
  problem.alpha = 1.0;
  EXPECT_THROW(problem.validate(), std::invalid_argument);
  problem.alpha = 0.5;
  problem.negative_seeds.clear();
  EXPECT_THROW(problem.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace fibm
