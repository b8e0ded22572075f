#include "cfgsentry/isomorphism.h"

#include <gtest/gtest.h>

#include "oracles.h"

namespace cfgsentry {
namespace {

Digraph path(int n) {
  Digraph g(std::vector<Label>(n, 0));
  for (int i = 0; i + 1 < n; ++i) g.add_edge(i, i + 1);
  return g;
}

Digraph cycle(int n) {
  Digraph g = path(n);
  g.add_edge(n - 1, 0);
  return g;
}

TEST(IsSubgraph, PathInCycle) {
  EXPECT_TRUE(is_subgraph(path(3), cycle(3)));
  EXPECT_FALSE(is_subgraph(cycle(3), path(3)));
}

TEST(IsSubgraph, DirectionMatters) {
  Digraph fwd(std::vector<Label>{0, 1});
  fwd.add_edge(0, 1);
  Digraph back(std::vector<Label>{0, 1});
  back.add_edge(1, 0);
  EXPECT_FALSE(is_subgraph(fwd, back));
  EXPECT_TRUE(is_subgraph(fwd, fwd));
}

TEST(IsSubgraph, NonInducedAllowsExtraHostEdges) {
  Digraph host = cycle(3);
  host.add_edge(0, 2);
  EXPECT_TRUE(is_subgraph(path(3), host));
}

TEST(IsSubgraph, SelfLoops) {
  Digraph loop(std::vector<Label>{0});
  loop.add_edge(0, 0);
  EXPECT_FALSE(is_subgraph(loop, path(3)));
  Digraph host = path(3);
  host.add_edge(2, 2);
  EXPECT_TRUE(is_subgraph(loop, host));
}

TEST(IsSubgraph, PatternLargerThanHost) {
  EXPECT_FALSE(is_subgraph(path(4), cycle(3)));
}

TEST(IsSubgraph, LabelSensitivity) {
  Digraph p = path(3);
  EXPECT_TRUE(is_subgraph(p, cycle(3)));
  p.set_label(1, 7);
  EXPECT_FALSE(is_subgraph(p, cycle(3)));
}

TEST(MatchCount, SingleNode) {
  Digraph p(std::vector<Label>{2});
  Digraph h(std::vector<Label>{2, 0, 2, 2, 1});
  EXPECT_EQ(match_count(p, h, 100), 3u);
  EXPECT_EQ(match_count(p, h, 2), 2u);
}

TEST(MatchCount, CycleRotations) {
  EXPECT_EQ(match_count(cycle(3), cycle(3), 100), 3u);
}

TEST(IsSubgraph, AgreesWithExhaustiveSearch) {
  Rng rng(11);
  int disagreements = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    int pn = rng.range(1, 5);
    int hn = rng.range(pn, 9);
    int labels = rng.range(1, 3);
    Digraph p = oracle::random_connected(rng, pn, 0.15, labels, 0.1);
    Digraph h = oracle::random_digraph(rng, hn, rng.uniform(0.1, 0.5), labels, 0.1);
    disagreements += is_subgraph(p, h) != oracle::brute_is_subgraph(p, h);
    ASSERT_EQ(match_count(p, h, 1000), oracle::brute_match_count(p, h, 1000))
        << "trial " << trial;
  }
  EXPECT_EQ(disagreements, 0);
}

TEST(IsSubgraph, ReflexiveAndTransitive) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    Digraph h2 = oracle::random_digraph(rng, 9, 0.35, 2, 0.1);
    // Carve a subgraph then a sub-subgraph by deleting nodes and edges.
    auto carve = [&](const Digraph &g) {
      std::vector<int> keep;
      for (int v = 0; v < g.size(); ++v)
        if (rng.bernoulli(0.75)) keep.push_back(v);
      if (keep.empty()) keep.push_back(0);
      std::vector<int> local(g.size(), -1);
      std::vector<Label> labels;
      for (int v : keep) {
        local[v] = static_cast<int>(labels.size());
        labels.push_back(g.label(v));
      }
      Digraph sub(labels);
      for (auto [u, v] : g.edges())
        if (local[u] >= 0 && local[v] >= 0 && rng.bernoulli(0.8)) sub.add_edge(local[u], local[v]);
      return sub;
    };
    Digraph h1 = carve(h2);
    Digraph p = carve(h1);
    EXPECT_TRUE(is_subgraph(h2, h2));
    EXPECT_TRUE(is_subgraph(h1, h2));
    EXPECT_TRUE(is_subgraph(p, h1));
    EXPECT_TRUE(is_subgraph(p, h2));
  }
}

}  // namespace
}  // namespace cfgsentry
