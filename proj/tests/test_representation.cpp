#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "pfr/data.hpp"
#include "pfr/representation.hpp"
#include "test_util.hpp"

using pfr::GraphRole;
using pfr::Matrix;
using pfr::SimilarityGraph;
using testutil::max_principal_angle;
using testutil::random_matrix;

namespace {

SimilarityGraph random_graph(std::size_t n, double density, std::uint64_t seed, GraphRole role) {
  pfr::Rng rng(seed);
  Matrix w(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.uniform() < density) w(i, j) = w(j, i) = role == GraphRole::kFairness ? 1.0 : rng.uniform(0.1, 1.0);
  return SimilarityGraph(w, role);
}

// D - W written out independently of pfr::laplacian.
Matrix hand_laplacian(const SimilarityGraph& g) {
  const std::size_t n = g.size();
  Matrix l(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      l(i, j) -= g(i, j);
      l(i, i) += g(i, j);
    }
  return l;
}

struct Fixture {
  Matrix x;
  SimilarityGraph wx;
  SimilarityGraph wf;
};

Fixture fixture(std::size_t n, std::size_t m, std::uint64_t seed) {
  Matrix x = random_matrix(n, m, seed);
  return {x, pfr::knn_heat_graph(x, 4).graph, random_graph(n, 0.15, seed + 1, GraphRole::kFairness)};
}

double mean_edge_distance(const Matrix& z, const SimilarityGraph& g) {
  double s = 0.0;
  std::size_t c = 0;
  for (const auto& [i, j] : g.edges()) {
    s += std::sqrt(pfr::squared_distance(z.row(i), z.row(j)));
    ++c;
  }
  return s / static_cast<double>(c);
}

double mean_pair_distance(const Matrix& z) {
  double s = 0.0;
  std::size_t c = 0;
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t j = i + 1; j < z.rows(); ++j) {
      s += std::sqrt(pfr::squared_distance(z.row(i), z.row(j)));
      ++c;
    }
  return s / static_cast<double>(c);
}

}  // namespace

TEST(FitLinear, GammaZeroMatchesDataGraphOnlyProblem) {
  const auto f = fixture(40, 6, 1);
  const auto model = pfr::fit_linear(f.x, f.wx, f.wf, 0.0, 3);
  const Matrix m0 = pfr::transpose(f.x) * (hand_laplacian(f.wx) * f.x);
  const auto reference = pfr::eigh_smallest(pfr::SymmetricMatrix(m0), 3);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(model.eigenvalues[k], reference.values[k], 1e-10);
  EXPECT_LE(max_principal_angle(model.basis, reference.vectors), 1e-6);
}

TEST(FitLinear, BasisIsOrthonormal) {
  const auto f = fixture(30, 8, 2);
  const auto model = pfr::fit_linear(f.x, f.wx, f.wf, 0.6, 4);
  const Matrix g = pfr::transpose(model.basis) * model.basis;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(g(i, j), i == j ? 1.0 : 0.0, 1e-6);
}

TEST(FitLinear, IdenticalLinkedRecordsEmbedIdentically) {
  const Matrix x{{0.3, -1.2, 2.0}, {0.3, -1.2, 2.0}};
  const std::vector<pfr::Edge> edge{{0, 1}};
  const auto wf = SimilarityGraph::from_edges(2, edge, GraphRole::kFairness);
  const auto wx = pfr::knn_heat_graph(x, 1).graph;
  for (double gamma : {0.0, 0.5, 1.0}) {
    const auto model = pfr::fit_linear(x, wx, wf, gamma, 2);
    const Matrix z = pfr::transform(model, x);
    EXPECT_EQ(z.row(0)[0], z.row(1)[0]);
    EXPECT_EQ(z.row(0)[1], z.row(1)[1]);
    EXPECT_EQ(model.loss_f, 0.0);
  }
}

TEST(FitLinear, OptimalityCertificateBeatsRandomBases) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto f = fixture(35, 7, 10 + seed);
    const double gamma = 0.2 * static_cast<double>(seed);
    const auto model = pfr::fit_linear(f.x, f.wx, f.wf, gamma, 3);
    const Matrix m = pfr::objective_matrix(f.x, f.wx, f.wf, gamma).entries();
    const double best = testutil::trace_quadratic(model.basis, m);
    double eig_sum = 0.0;
    for (double v : model.eigenvalues) eig_sum += v;
    EXPECT_NEAR(best, eig_sum, 1e-8 * std::max(1.0, std::abs(eig_sum)));
    for (std::uint64_t r = 0; r < 20; ++r) {
      const Matrix v = testutil::random_orthonormal(7, 3, 1000 * seed + r);
      EXPECT_LE(best, testutil::trace_quadratic(v, m) + 1e-8);
    }
  }
}

TEST(FitLinear, FairnessLossNonIncreasingInGamma) {
  const auto f = fixture(50, 6, 21);
  double previous = INFINITY;
  for (int k = 0; k <= 10; ++k) {
    const auto model = pfr::fit_linear(f.x, f.wx, f.wf, k / 10.0, 2);
    EXPECT_LE(model.loss_f, previous + 1e-6);
    previous = model.loss_f;
  }
}

TEST(FitLinear, RecordedLossesMatchRecomputation) {
  const auto f = fixture(30, 5, 4);
  const auto model = pfr::fit_linear(f.x, f.wx, f.wf, 0.4, 2);
  const Matrix z = pfr::transform(model, f.x);
  EXPECT_NEAR(pfr::pairwise_loss(z, f.wx), model.loss_x, 1e-10 * (1 + model.loss_x));
  EXPECT_NEAR(pfr::pairwise_loss(z, f.wf), model.loss_f, 1e-10 * (1 + model.loss_f));
  for (std::size_t i = 0; i < f.x.rows(); ++i) {
    const auto zi = pfr::transform(model, f.x.row(i));
    for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(zi[k], z(i, k), 1e-10);
  }
}

TEST(FitLinear, Errors) {
  const auto f = fixture(20, 4, 5);
  EXPECT_THROW(pfr::fit_linear(f.x, f.wx, f.wf, -0.1, 2), pfr::ParameterError);
  EXPECT_THROW(pfr::fit_linear(f.x, f.wx, f.wf, 1.1, 2), pfr::ParameterError);
  EXPECT_THROW(pfr::fit_linear(f.x, f.wx, f.wf, 0.5, 5), pfr::DimensionError);
  EXPECT_THROW(pfr::fit_linear(f.x, f.wx, f.wf, 0.5, 0), pfr::DimensionError);
  const auto empty = SimilarityGraph::empty(20, GraphRole::kFairness);
  EXPECT_THROW(pfr::fit_linear(f.x, f.wx, empty, 1.0, 2), pfr::DegenerateObjectiveError);
  const auto small = SimilarityGraph::empty(19, GraphRole::kFairness);
  EXPECT_THROW(pfr::fit_linear(f.x, f.wx, small, 0.5, 2), pfr::DimensionError);
  const auto model = pfr::fit_linear(f.x, f.wx, empty, 0.5, 2);
  ASSERT_EQ(model.warnings.size(), 1u);
}

TEST(FitLinear, ZeroSpectrumIsFlagged) {
  // Only edge links two identical records, so the gamma = 1 objective is 0.
  Matrix x = random_matrix(6, 3, 8);
  for (std::size_t k = 0; k < 3; ++k) x(1, k) = x(0, k);
  const std::vector<pfr::Edge> edge{{0, 1}};
  const auto wf = SimilarityGraph::from_edges(6, edge, GraphRole::kFairness);
  const auto model = pfr::fit_linear(x, pfr::knn_heat_graph(x, 2).graph, wf, 1.0, 2);
  bool flagged = false;
  for (const auto& w : model.warnings) flagged |= w.find("eigenvalues are zero") != std::string::npos;
  EXPECT_TRUE(flagged);
}

TEST(Transform, IsLinear) {
  const auto f = fixture(25, 5, 6);
  const auto model = pfr::fit_linear(f.x, f.wx, f.wf, 0.5, 3);
  const std::vector<double> zero(5, 0.0);
  for (double v : pfr::transform(model, zero)) EXPECT_EQ(v, 0.0);
  pfr::Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> a(5);
    std::vector<double> b(5);
    std::vector<double> ab(5);
    for (std::size_t k = 0; k < 5; ++k) {
      a[k] = rng.normal();
      b[k] = rng.normal();
      ab[k] = a[k] + b[k];
    }
    const auto za = pfr::transform(model, a);
    const auto zb = pfr::transform(model, b);
    const auto zab = pfr::transform(model, ab);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(zab[k], za[k] + zb[k], 1e-10);
  }
  EXPECT_THROW(pfr::transform(model, std::vector<double>(4)), pfr::DimensionError);
}

TEST(FitLinear, SyntheticEmbeddingPullsFairPairsTogether) {
  pfr::SyntheticOptions opts;
  opts.seed = 77;
  opts.variant = pfr::SyntheticVariant::kLowDimension;
  const auto [train, test] = pfr::generate_synthetic(opts);
  Matrix raw(train.size(), 3);
  for (std::size_t i = 0; i < train.size(); ++i) {
    raw(i, 0) = train.features(i, 0);
    raw(i, 1) = train.features(i, 1);
    raw(i, 2) = train.groups[i];
  }
  const auto params = pfr::standardize_fit(raw);
  const Matrix x = pfr::standardize_apply(params, raw);
  Matrix masked(x.rows(), 2);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    masked(i, 0) = x(i, 0);
    masked(i, 1) = x(i, 1);
  }
  const auto oracle = pfr::oracle_fit(train);
  const auto q = pfr::oracle_quantiles(oracle, train);
  std::vector<pfr::Edge> edges;
  for (const auto& [a, b] : pfr::sample_pairs(train.size(), 5538, 5))
    if (q[a] == q[b] && train.groups[a] != train.groups[b]) edges.emplace_back(a, b);
  ASSERT_FALSE(edges.empty());
  const auto wf = SimilarityGraph::from_edges(train.size(), edges, GraphRole::kFairness);
  const auto model = pfr::fit_linear(x, pfr::knn_heat_graph(masked, 10).graph, wf, 0.9, 2);
  const Matrix z = pfr::transform(model, x);
  const double embedded = mean_edge_distance(z, wf) / mean_pair_distance(z);
  const double input = mean_edge_distance(x, wf) / mean_pair_distance(x);
  EXPECT_LT(embedded, input);
}

TEST(FitKernel, LinearKernelMatchesLinearSubspaceOnWhitenedData) {
  // Square X with orthogonal columns of equal norm.
  const Matrix x = 2.5 * testutil::random_orthonormal(12, 12, 31);
  const auto wx = pfr::knn_heat_graph(x, 3).graph;
  const auto wf = random_graph(12, 0.2, 32, GraphRole::kFairness);
  for (double gamma : {0.0, 0.5, 0.9}) {
    const auto linear = pfr::fit_linear(x, wx, wf, gamma, 3);
    const auto kernel = pfr::fit_kernel(x, wx, wf, gamma, 3, pfr::Kernel::linear());
    EXPECT_LE(max_principal_angle(pfr::transform(linear, x), pfr::transform_kernel(kernel, x)), 1e-6);
  }
}

TEST(FitKernel, GammaZeroIsKernelEigenmapOfDataGraph) {
  const auto f = fixture(20, 3, 40);
  const auto kernel = pfr::default_rbf_kernel(f.x);
  const auto model = pfr::fit_kernel(f.x, f.wx, f.wf, 0.0, 2, kernel);
  Matrix k(20, 20);
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t j = 0; j < 20; ++j)
      k(i, j) = std::exp(-pfr::squared_distance(f.x.row(i), f.x.row(j)) / kernel.sigma_sq);
  const auto reference = pfr::eigh_smallest(pfr::SymmetricMatrix(k * (hand_laplacian(f.wx) * k)), 2);
  for (std::size_t c = 0; c < 2; ++c) EXPECT_NEAR(model.eigenvalues[c], reference.values[c], 1e-10);
  EXPECT_LE(max_principal_angle(model.coefficients, reference.vectors), 1e-6);
}

TEST(FitKernel, IdenticalRecordsGiveFiniteCoefficients) {
  const Matrix x{{1.0, 2.0}, {1.0, 2.0}};
  const auto wx = pfr::knn_heat_graph(x, 1).graph;
  const auto wf = SimilarityGraph::empty(2, GraphRole::kFairness);
  const auto model = pfr::fit_kernel(x, wx, wf, 0.3, 1, pfr::Kernel::rbf(1.0));
  for (double v : model.coefficients.data()) EXPECT_TRUE(std::isfinite(v));
  const Matrix z = pfr::transform_kernel(model, x);
  EXPECT_EQ(z(0, 0), z(1, 0));
}

TEST(FitKernel, TrainingTransformMatchesGramProduct) {
  const auto f = fixture(15, 3, 50);
  const auto kernel = pfr::Kernel::rbf(2.0);
  const auto model = pfr::fit_kernel(f.x, f.wx, f.wf, 0.5, 3, kernel);
  const Matrix kz = pfr::gram_matrix(kernel, f.x) * model.coefficients;
  const Matrix z = pfr::transform_kernel(model, f.x);
  for (std::size_t i = 0; i < 15; ++i)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(z(i, c), kz(i, c), 1e-12);
}

TEST(FitKernel, WideBandwidthCollapsesEmbedding) {
  const auto f = fixture(15, 3, 60);
  const auto model = pfr::fit_kernel(f.x, f.wx, f.wf, 0.5, 2, pfr::Kernel::rbf(1e6));
  const Matrix z = pfr::transform_kernel(model, f.x);
  for (std::size_t i = 1; i < 15; ++i)
    for (std::size_t c = 0; c < 2; ++c) EXPECT_NEAR(z(i, c), z(0, c), 1e-3);
}

TEST(FitKernel, FarRecordsMapToZero) {
  const auto f = fixture(15, 3, 70);
  const auto model = pfr::fit_kernel(f.x, f.wx, f.wf, 0.5, 2, pfr::Kernel::rbf(1.0));
  const std::vector<double> far{100.0, -100.0, 100.0};
  for (double v : pfr::transform_kernel(model, far)) EXPECT_NEAR(v, 0.0, 1e-6);
  EXPECT_THROW(pfr::transform_kernel(model, std::vector<double>{1.0}), pfr::DimensionError);
}

TEST(FitKernel, Errors) {
  const auto f = fixture(10, 3, 80);
  EXPECT_THROW(pfr::fit_kernel(f.x, f.wx, f.wf, 0.5, 11, pfr::Kernel::linear()), pfr::DimensionError);
  EXPECT_THROW(pfr::fit_kernel(f.x, f.wx, f.wf, 2.0, 2, pfr::Kernel::linear()), pfr::ParameterError);
  EXPECT_THROW(pfr::Kernel::rbf(0.0), pfr::ParameterError);
  const auto empty = SimilarityGraph::empty(10, GraphRole::kFairness);
  EXPECT_THROW(pfr::fit_kernel(f.x, f.wx, empty, 1.0, 2, pfr::Kernel::linear()), pfr::DegenerateObjectiveError);
}
