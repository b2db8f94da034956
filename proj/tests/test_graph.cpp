#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "pfr/graph.hpp"
#include "pfr/random.hpp"

using pfr::GraphRole;
using pfr::Matrix;
using pfr::SimilarityGraph;

namespace {

Matrix random_points(std::size_t n, std::size_t m, std::uint64_t seed) {
  pfr::Rng rng(seed);
  Matrix x(n, m);
  for (double& v : x.data()) v = rng.normal();
  return x;
}

SimilarityGraph random_graph(std::size_t n, double density, std::uint64_t seed) {
  pfr::Rng rng(seed);
  Matrix w(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.uniform() < density) w(i, j) = w(j, i) = rng.uniform(0.1, 2.0);
  return SimilarityGraph(w, GraphRole::kDataSimilarity);
}

// Sorted neighbour list of i by (distance, index), computed without the
// library's distance matrix.
std::vector<std::size_t> brute_neighbours(const Matrix& x, std::size_t i, std::size_t p) {
  std::vector<std::pair<double, std::size_t>> d;
  for (std::size_t j = 0; j < x.rows(); ++j) {
    if (j == i) continue;
    double s = 0.0;
    for (std::size_t k = 0; k < x.cols(); ++k) s += (x(i, k) - x(j, k)) * (x(i, k) - x(j, k));
    d.emplace_back(s, j);
  }
  std::sort(d.begin(), d.end());
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < p; ++k) out.push_back(d[k].second);
  return out;
}

}  // namespace

TEST(SimilarityGraph, RejectsInvalidWeights) {
  EXPECT_THROW(SimilarityGraph(Matrix{{0, 1}, {2, 0}}, GraphRole::kFairness), pfr::InputError);
  EXPECT_THROW(SimilarityGraph(Matrix{{1, 0}, {0, 0}}, GraphRole::kFairness), pfr::InputError);
  EXPECT_THROW(SimilarityGraph(Matrix{{0, -1}, {-1, 0}}, GraphRole::kFairness), pfr::InputError);
  EXPECT_THROW(SimilarityGraph(Matrix{{0, NAN}, {NAN, 0}}, GraphRole::kFairness), pfr::InputError);
  EXPECT_THROW(SimilarityGraph::empty(pfr::kMaxGraphNodes + 1, GraphRole::kFairness), pfr::ParameterError);
}

TEST(SimilarityGraph, InducedSubgraphReindexes) {
  const std::vector<pfr::Edge> edges{{0, 1}, {1, 2}, {2, 3}};
  const auto g = SimilarityGraph::from_edges(4, edges, GraphRole::kFairness);
  const std::vector<std::size_t> nodes{3, 2, 0};
  const auto sub = g.induced(nodes);
  EXPECT_EQ(sub.size(), 3u);
  EXPECT_EQ(sub.edge_count(), 1u);
  EXPECT_EQ(sub(0, 1), 1.0);
  EXPECT_EQ(sub(1, 2), 0.0);
}

TEST(KnnHeatGraph, IdenticalRecordsGetUnitWeight) {
  const Matrix x{{0.5, 1.0}, {0.5, 1.0}};
  const auto g = pfr::knn_heat_graph(x, 1, 3.0).graph;
  EXPECT_EQ(g(0, 1), 1.0);
}

TEST(KnnHeatGraph, CollinearPointsFollowOrRule) {
  const Matrix x{{0.0}, {1.0}, {10.0}};
  const auto g = pfr::knn_heat_graph(x, 1, 1.0).graph;
  EXPECT_DOUBLE_EQ(g(0, 1), std::exp(-1.0));
  EXPECT_DOUBLE_EQ(g(1, 2), std::exp(-81.0));
  EXPECT_EQ(g(0, 2), 0.0);
  EXPECT_EQ(g.edge_count(), 2u);
}

TEST(KnnHeatGraph, MatchesBruteForceNeighbours) {
  const std::size_t n = 50;
  const std::size_t p = 5;
  const Matrix x = random_points(n, 3, 11);
  const auto result = pfr::knn_heat_graph(x, p, 2.0);
  std::set<std::pair<std::size_t, std::size_t>> expected;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j : brute_neighbours(x, i, p)) expected.emplace(std::min(i, j), std::max(i, j));
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t nonzero = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const bool want = i != j && expected.count({std::min(i, j), std::max(i, j)});
      EXPECT_EQ(result.graph(i, j) > 0.0, want) << i << "," << j;
      if (result.graph(i, j) > 0.0) ++nonzero;
    }
    EXPECT_GE(nonzero, p);
    EXPECT_LE(nonzero, n - 1);
  }
}

TEST(KnnHeatGraph, TiesResolveToLowerIndex) {
  // Records 1 and 2 are equidistant from record 0.
  const Matrix x{{0.0}, {1.0}, {-1.0}, {5.0}};
  const auto g = pfr::knn_heat_graph(x, 1, 1.0).graph;
  EXPECT_GT(g(0, 1), 0.0);
  EXPECT_GT(g(2, 0), 0.0);  // record 2's own nearest is 0
  EXPECT_EQ(g(1, 2), 0.0);
}

TEST(KnnHeatGraph, DefaultScaleIsMeanSquaredEdgeDistance) {
  const Matrix x = random_points(30, 2, 5);
  const auto result = pfr::knn_heat_graph(x, 4);
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& [i, j] : result.graph.edges()) {
    sum += pfr::squared_distance(x.row(i), x.row(j));
    ++count;
  }
  EXPECT_NEAR(result.scale, sum / count, 1e-12);
  for (const auto& [i, j] : result.graph.edges())
    EXPECT_NEAR(result.graph(i, j), std::exp(-pfr::squared_distance(x.row(i), x.row(j)) / result.scale), 1e-15);
}

TEST(KnnHeatGraph, RejectsBadParameters) {
  const Matrix x = random_points(5, 2, 1);
  EXPECT_THROW(pfr::knn_heat_graph(x, 5), pfr::ParameterError);
  EXPECT_THROW(pfr::knn_heat_graph(x, 0), pfr::ParameterError);
  EXPECT_THROW(pfr::knn_heat_graph(x, 2, 0.0), pfr::ParameterError);
  EXPECT_THROW(pfr::knn_heat_graph(x, 2, -1.0), pfr::ParameterError);
}

TEST(EquivalenceGraph, LinksSameClassOnly) {
  const std::vector<std::optional<std::int64_t>> classes{1, 1, 2};
  const auto g = pfr::equivalence_graph(classes);
  EXPECT_EQ(g.edges(), (std::vector<pfr::Edge>{{0, 1}}));
}

TEST(EquivalenceGraph, SingleClassIsComplete) {
  const std::vector<std::optional<std::int64_t>> classes(9, 4);
  EXPECT_EQ(pfr::equivalence_graph(classes).edge_count(), 36u);
}

TEST(EquivalenceGraph, UnlabeledRecordsIsolatedAndEmptyFlagged) {
  const std::vector<std::optional<std::int64_t>> classes{std::nullopt, 3, std::nullopt, 3};
  const auto g = pfr::equivalence_graph(classes);
  EXPECT_EQ(g.edges(), (std::vector<pfr::Edge>{{1, 3}}));
  const std::vector<std::optional<std::int64_t>> none(4);
  EXPECT_TRUE(pfr::equivalence_graph(none).is_empty());
}

TEST(EquivalenceGraph, CliqueCountOracle) {
  // Ten records binned into three half-star classes.
  const std::vector<std::optional<std::int64_t>> classes{9, 8, 9, 4, 8, 9, 4, 9, 8, 9};
  std::map<std::int64_t, std::size_t> sizes;
  for (const auto& c : classes) ++sizes[*c];
  std::size_t expected = 0;
  for (const auto& [_, s] : sizes) expected += s * (s - 1) / 2;
  EXPECT_EQ(sizes.size(), 3u);
  EXPECT_EQ(pfr::equivalence_graph(classes).edge_count(), expected);
}

TEST(QuantileAssign, EvenSplit) {
  const std::vector<int> groups(4, 0);
  const std::vector<double> scores{1, 2, 3, 4};
  EXPECT_EQ(pfr::quantile_assign(groups, scores, 2).quantiles, (std::vector<int>{1, 1, 2, 2}));
}

TEST(QuantileAssign, TiesBreakByIndex) {
  const std::vector<int> groups(3, 0);
  const std::vector<double> scores{5, 5, 5};
  EXPECT_EQ(pfr::quantile_assign(groups, scores, 3).quantiles, (std::vector<int>{1, 2, 3}));
}

TEST(QuantileAssign, PerGroupDecilesMatchSortOracle) {
  pfr::Rng rng(17);
  std::vector<int> groups;
  std::vector<double> scores;
  for (int g = 0; g < 2; ++g)
    for (int k = 0; k < 10; ++k) {
      groups.push_back(g);
      scores.push_back(rng.uniform());
    }
  const auto qa = pfr::quantile_assign(groups, scores, 10);
  for (int g = 0; g < 2; ++g) {
    std::vector<std::pair<double, std::size_t>> sorted;
    for (std::size_t i = 0; i < groups.size(); ++i)
      if (groups[i] == g) sorted.emplace_back(scores[i], i);
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t r = 0; r < sorted.size(); ++r) EXPECT_EQ(qa.quantiles[sorted[r].second], static_cast<int>(r + 1));
  }
}

TEST(QuantileAssign, BucketSizesDifferByAtMostOne) {
  for (std::size_t n : {7u, 23u, 100u, 101u}) {
    pfr::Rng rng(n);
    std::vector<int> groups(n, 0);
    std::vector<double> scores(n);
    for (double& s : scores) s = rng.normal();
    const auto qa = pfr::quantile_assign(groups, scores, 6);
    std::map<int, std::size_t> sizes;
    for (int q : qa.quantiles) ++sizes[q];
    std::size_t lo = n;
    std::size_t hi = 0;
    for (const auto& [_, s] : sizes) {
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    EXPECT_LE(hi - lo, 1u);
  }
}

TEST(QuantileAssign, RejectsBadK) {
  const std::vector<int> groups{0};
  const std::vector<double> scores{1.0};
  EXPECT_THROW(pfr::quantile_assign(groups, scores, 0), pfr::ParameterError);
}

TEST(BetweenGroupQuantileGraph, DefinitionExample) {
  pfr::QuantileAssignment qa{{0, 1, 1}, {1, 1, 2}, 2};
  EXPECT_EQ(pfr::between_group_quantile_graph(qa).edges(), (std::vector<pfr::Edge>{{0, 1}}));
}

TEST(BetweenGroupQuantileGraph, SingleQuantileIsCompleteBipartite) {
  pfr::QuantileAssignment qa{{0, 0, 0, 0, 0, 1, 1, 1, 1, 1}, std::vector<int>(10, 1), 1};
  EXPECT_EQ(pfr::between_group_quantile_graph(qa).edge_count(), 25u);
}

TEST(BetweenGroupQuantileGraph, BalancedDecilesMatchPairEnumeration) {
  pfr::Rng rng(3);
  std::vector<int> groups;
  std::vector<double> scores;
  for (int g = 0; g < 2; ++g)
    for (int k = 0; k < 100; ++k) {
      groups.push_back(g);
      scores.push_back(rng.normal());
    }
  const auto qa = pfr::quantile_assign(groups, scores, 10);
  const auto g = pfr::between_group_quantile_graph(qa);
  std::size_t brute = 0;
  for (std::size_t i = 0; i < 200; ++i)
    for (std::size_t j = i + 1; j < 200; ++j) {
      const bool link = groups[i] != groups[j] && qa.quantiles[i] == qa.quantiles[j];
      EXPECT_EQ(g(i, j) > 0.0, link);
      if (link) ++brute;
    }
  EXPECT_EQ(brute, 1000u);
  EXPECT_EQ(g.edge_count(), 1000u);
}

TEST(BetweenGroupQuantileGraph, NeverLinksSameGroup) {
  pfr::Rng rng(8);
  std::vector<int> groups(60);
  std::vector<double> scores(60);
  for (std::size_t i = 0; i < 60; ++i) {
    groups[i] = static_cast<int>(rng.below(3));
    scores[i] = rng.uniform();
  }
  const auto g = pfr::between_group_quantile_graph(pfr::quantile_assign(groups, scores, 4));
  for (const auto& [i, j] : g.edges()) EXPECT_NE(groups[i], groups[j]);
}

TEST(BetweenGroupQuantileGraph, SingleGroupRejected) {
  pfr::QuantileAssignment qa{{0, 0}, {1, 1}, 1};
  EXPECT_THROW(pfr::between_group_quantile_graph(qa), pfr::ParameterError);
}

TEST(BetweenGroupQuantileGraph, EdgeCapBoundsDegreeDeterministically) {
  pfr::QuantileAssignment qa{std::vector<int>(40, 0), std::vector<int>(40, 1), 1};
  for (std::size_t i = 20; i < 40; ++i) qa.groups[i] = 1;
  const pfr::EdgeCap cap{3, 99};
  const auto g1 = pfr::between_group_quantile_graph(qa, cap);
  const auto g2 = pfr::between_group_quantile_graph(qa, cap);
  EXPECT_EQ(g1.weights(), g2.weights());
  for (std::size_t i = 0; i < 40; ++i) {
    std::size_t deg = 0;
    for (std::size_t j = 0; j < 40; ++j) deg += g1(i, j) > 0.0;
    EXPECT_LE(deg, 3u);
  }
  EXPECT_GT(g1.edge_count(), 0u);
}

TEST(Laplacian, ZeroAndTwoNodeCases) {
  EXPECT_EQ(pfr::laplacian(SimilarityGraph::empty(3, GraphRole::kFairness)).entries(), Matrix(3, 3));
  const std::vector<pfr::Edge> edge{{0, 1}};
  const auto l = pfr::laplacian(SimilarityGraph::from_edges(2, edge, GraphRole::kFairness));
  EXPECT_EQ(l.entries(), (Matrix{{1, -1}, {-1, 1}}));
}

TEST(Laplacian, RowSumsZeroAndPsd) {
  const auto g = random_graph(25, 0.3, 4);
  const auto l = pfr::laplacian(g);
  for (std::size_t i = 0; i < 25; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 25; ++j) s += l(i, j);
    EXPECT_NEAR(s, 0.0, 1e-10);
  }
  pfr::Rng rng(2);
  for (int probe = 0; probe < 50; ++probe) {
    std::vector<double> x(25);
    double norm = 0.0;
    for (double& v : x) {
      v = rng.normal();
      norm += v * v;
    }
    const auto lx = pfr::multiply(l.entries(), x);
    double q = 0.0;
    for (std::size_t i = 0; i < 25; ++i) q += x[i] * lx[i];
    EXPECT_GE(q, -1e-10 * norm);
  }
}

TEST(Laplacian, QuadraticFormMatchesDoubleSum) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = random_graph(10, 0.5, seed);
    const Matrix z = random_points(10, 3, seed + 50);
    double direct = 0.0;
    for (std::size_t i = 0; i < 10; ++i)
      for (std::size_t j = 0; j < 10; ++j) {
        double d = 0.0;
        for (std::size_t k = 0; k < 3; ++k) d += (z(i, k) - z(j, k)) * (z(i, k) - z(j, k));
        direct += d * g(i, j);
      }
    const double trace_form = 2.0 * pfr::laplacian_trace(z, pfr::laplacian(g));
    EXPECT_NEAR(trace_form, direct, 1e-8 * std::abs(direct));
    EXPECT_NEAR(pfr::pairwise_loss(z, g), direct, 1e-10 * std::abs(direct));
  }
}
