#pragma once

// Similarity graphs over record indices: the kNN heat-kernel data graph and
// the fairness graphs (equivalence classes, between-group quantiles), plus
// their Laplacians.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pfr/errors.hpp"
#include "pfr/linalg.hpp"
#include "pfr/random.hpp"

namespace pfr {

enum class GraphRole { kDataSimilarity, kFairness };

inline const char* to_string(GraphRole role) {
  return role == GraphRole::kDataSimilarity ? "data-similarity" : "fairness";
}

/// Largest record count a dense graph is built for.
inline constexpr std::size_t kMaxGraphNodes = 5000;

using Edge = std::pair<std::size_t, std::size_t>;

/// Symmetric nonnegative adjacency with zero diagonal. Invariants are checked
/// on construction.
class SimilarityGraph {
 public:
  SimilarityGraph(Matrix weights, GraphRole role) : weights_(std::move(weights)), role_(role) {
    validate();
  }

  static SimilarityGraph empty(std::size_t n, GraphRole role) {
    check_size(n);
    return SimilarityGraph(Matrix(n, n), role);
  }

  /// Unit-weight graph from undirected edges; duplicates collapse.
  static SimilarityGraph from_edges(std::size_t n, std::span<const Edge> edges, GraphRole role) {
    check_size(n);
    Matrix w(n, n);
    for (const auto& [i, j] : edges) {
      if (i >= n || j >= n) throw ParameterError("edge endpoint out of range");
      if (i == j) continue;
      w(i, j) = 1.0;
      w(j, i) = 1.0;
    }
    return SimilarityGraph(std::move(w), role);
  }

  std::size_t size() const noexcept { return weights_.rows(); }
  GraphRole role() const noexcept { return role_; }
  const Matrix& weights() const noexcept { return weights_; }
  double operator()(std::size_t i, std::size_t j) const { return weights_(i, j); }

  /// Number of unordered pairs with positive weight.
  std::size_t edge_count() const {
    std::size_t count = 0;
    for (std::size_t i = 0; i < size(); ++i)
      for (std::size_t j = i + 1; j < size(); ++j)
        if (weights_(i, j) > 0.0) ++count;
    return count;
  }

  /// Sum over ordered pairs.
  double total_weight() const {
    double s = 0.0;
    for (double v : weights_.data()) s += v;
    return s;
  }

  /// Warning-level status: true when the graph carries no edges.
  bool is_empty() const {
    return std::all_of(weights_.data().begin(), weights_.data().end(),
                       [](double v) { return v == 0.0; });
  }

  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    for (std::size_t i = 0; i < size(); ++i)
      for (std::size_t j = i + 1; j < size(); ++j)
        if (weights_(i, j) > 0.0) out.emplace_back(i, j);
    return out;
  }

  /// Graph restricted to `nodes`, reindexed in the given order.
  SimilarityGraph induced(std::span<const std::size_t> nodes) const {
    Matrix w(nodes.size(), nodes.size());
    for (std::size_t a = 0; a < nodes.size(); ++a)
      for (std::size_t b = 0; b < nodes.size(); ++b)
        w(a, b) = a == b ? 0.0 : weights_(nodes[a], nodes[b]);
    return SimilarityGraph(std::move(w), role_);
  }

 private:
  static void check_size(std::size_t n) {
    if (n > kMaxGraphNodes) {
      throw ParameterError("graph over " + std::to_string(n) + " records exceeds the dense cap of " +
                           std::to_string(kMaxGraphNodes));
    }
  }

  void validate() const {
    const std::size_t n = weights_.rows();
    if (weights_.cols() != n) throw DimensionError("similarity graph weights must be square");
    check_size(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (weights_(i, i) != 0.0) throw InputError("similarity graph has a nonzero diagonal");
      for (std::size_t j = i + 1; j < n; ++j) {
        const double w = weights_(i, j);
        if (!std::isfinite(w) || w < 0.0) throw InputError("similarity graph weight must be finite and >= 0");
        if (w != weights_(j, i)) throw InputError("similarity graph weights must be symmetric");
      }
    }
  }

  Matrix weights_;
  GraphRole role_;
};

/// L = D - W with D the diagonal of row sums.
class LaplacianMatrix {
 public:
  explicit LaplacianMatrix(Matrix entries) : entries_(std::move(entries)) {}
  std::size_t size() const noexcept { return entries_.rows(); }
  const Matrix& entries() const noexcept { return entries_; }
  double operator()(std::size_t i, std::size_t j) const { return entries_(i, j); }

 private:
  Matrix entries_;
};

inline LaplacianMatrix laplacian(const SimilarityGraph& graph) {
  const std::size_t n = graph.size();
  Matrix l(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double degree = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double w = graph(i, j);
      degree += w;
      l(i, j) = -w;
    }
    l(i, i) = degree;
  }
  return LaplacianMatrix(std::move(l));
}

/// sum_{i,j} |z_i - z_j|^2 W_ij over ordered pairs; rows of `embedding` are
/// records.
inline double pairwise_loss(const Matrix& embedding, const SimilarityGraph& graph) {
  if (embedding.rows() != graph.size()) throw DimensionError("pairwise_loss: record count mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < graph.size(); ++i) {
    for (std::size_t j = i + 1; j < graph.size(); ++j) {
      const double w = graph(i, j);
      if (w == 0.0) continue;
      loss += 2.0 * w * squared_distance(embedding.row(i), embedding.row(j));
    }
  }
  return loss;
}

/// Tr(Z^T L Z) for a row-record embedding Z (n x d).
inline double laplacian_trace(const Matrix& embedding, const LaplacianMatrix& lap) {
  if (embedding.rows() != lap.size()) throw DimensionError("laplacian_trace: record count mismatch");
  const Matrix lz = lap.entries() * embedding;
  double s = 0.0;
  for (std::size_t i = 0; i < embedding.rows(); ++i)
    for (std::size_t k = 0; k < embedding.cols(); ++k) s += embedding(i, k) * lz(i, k);
  return s;
}

struct KnnGraphResult {
  SimilarityGraph graph;
  /// Heat-kernel scale actually used.
  double scale;
};

/// W_ij = exp(-|x_i - x_j|^2 / t) when j is among the p nearest neighbours of
/// i or i among those of j. Distance ties resolve to the lower index. Without
/// an explicit `scale`, t is the mean squared distance over the selected
/// edges.
inline KnnGraphResult knn_heat_graph(const Matrix& features, std::size_t neighbors,
                                     std::optional<double> scale = std::nullopt) {
  const std::size_t n = features.rows();
  if (neighbors < 1 || neighbors >= n) {
    throw ParameterError("knn_heat_graph: neighbour count " + std::to_string(neighbors) +
                         " must lie in [1, " + std::to_string(n) + ")");
  }
  if (scale && !(*scale > 0.0 && std::isfinite(*scale))) {
    throw ParameterError("knn_heat_graph: heat-kernel scale must be positive");
  }
  if (n > kMaxGraphNodes) {
    throw ParameterError("knn_heat_graph: " + std::to_string(n) + " records exceed the dense cap");
  }

  Matrix dist(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = squared_distance(features.row(i), features.row(j));
      dist(i, j) = d;
      dist(j, i) = d;
    }

  std::vector<std::uint8_t> linked(n * n, 0);
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < n; ++i) {
    candidates.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) candidates.push_back(j);
    const auto closer = [&](std::size_t a, std::size_t b) {
      return dist(i, a) < dist(i, b) || (dist(i, a) == dist(i, b) && a < b);
    };
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(neighbors),
                      candidates.end(), closer);
    for (std::size_t k = 0; k < neighbors; ++k) {
      const std::size_t j = candidates[k];
      linked[i * n + j] = 1;
      linked[j * n + i] = 1;
    }
  }

  double t = 1.0;
  if (scale) {
    t = *scale;
  } else {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (linked[i * n + j]) {
          sum += dist(i, j);
          ++count;
        }
    if (count > 0 && sum > 0.0) t = sum / static_cast<double>(count);
  }

  Matrix w(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (linked[i * n + j]) w(i, j) = std::exp(-dist(i, j) / t);
  return {SimilarityGraph(std::move(w), GraphRole::kDataSimilarity), t};
}

/// Clique graph over records sharing an equivalence class; records without
/// a class (nullopt) stay isolated.
inline SimilarityGraph equivalence_graph(std::span<const std::optional<std::int64_t>> classes) {
  const std::size_t n = classes.size();
  if (n > kMaxGraphNodes) throw ParameterError("equivalence_graph: too many records for a dense graph");
  Matrix w(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!classes[i]) continue;
    for (std::size_t j = i + 1; j < n; ++j) {
      if (classes[j] && *classes[j] == *classes[i]) {
        w(i, j) = 1.0;
        w(j, i) = 1.0;
      }
    }
  }
  return SimilarityGraph(std::move(w), GraphRole::kFairness);
}

/// Per-record group code and quantile index (1..K). Quantile 0 marks a record
/// without a score.
struct QuantileAssignment {
  std::vector<int> groups;
  std::vector<int> quantiles;
  int quantile_count = 0;

  std::size_t size() const noexcept { return groups.size(); }
  bool labeled(std::size_t i) const { return quantiles[i] > 0; }
};

/// Within each group, scored records are ranked ascending (ties by record
/// index) and placed in quantile ceil(rank * K / group_size).
inline QuantileAssignment quantile_assign(std::span<const int> groups,
                                          std::span<const std::optional<double>> scores, int quantile_count) {
  if (quantile_count < 1) throw ParameterError("quantile_assign: K must be >= 1");
  if (groups.size() != scores.size()) throw DimensionError("quantile_assign: groups/scores length mismatch");
  QuantileAssignment qa;
  qa.groups.assign(groups.begin(), groups.end());
  qa.quantiles.assign(groups.size(), 0);
  qa.quantile_count = quantile_count;

  std::vector<int> distinct(groups.begin(), groups.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  std::vector<std::size_t> members;
  for (int g : distinct) {
    members.clear();
    for (std::size_t i = 0; i < groups.size(); ++i)
      if (groups[i] == g && scores[i]) {
        if (!std::isfinite(*scores[i])) throw InputError("quantile_assign: non-finite score");
        members.push_back(i);
      }
    std::stable_sort(members.begin(), members.end(),
                     [&](std::size_t a, std::size_t b) { return *scores[a] < *scores[b]; });
    const auto size = static_cast<long long>(members.size());
    for (long long rank = 1; rank <= size; ++rank) {
      const long long q = (rank * quantile_count + size - 1) / size;
      qa.quantiles[members[static_cast<std::size_t>(rank - 1)]] = static_cast<int>(q);
    }
  }
  return qa;
}

inline QuantileAssignment quantile_assign(std::span<const int> groups, std::span<const double> scores,
                                          int quantile_count) {
  std::vector<std::optional<double>> wrapped(scores.begin(), scores.end());
  return quantile_assign(groups, std::span<const std::optional<double>>(wrapped), quantile_count);
}

struct EdgeCap {
  std::size_t max_edges_per_node;
  std::uint64_t seed;
};

/// Links records of different groups that sit in the same quantile. With an
/// edge cap, candidate edges are visited in a seeded uniform order and kept
/// while both endpoints have spare degree.
inline SimilarityGraph between_group_quantile_graph(const QuantileAssignment& qa,
                                                    std::optional<EdgeCap> cap = std::nullopt) {
  const std::size_t n = qa.size();
  if (n > kMaxGraphNodes) throw ParameterError("between_group_quantile_graph: too many records");
  std::vector<int> present;
  for (std::size_t i = 0; i < n; ++i)
    if (qa.labeled(i)) present.push_back(qa.groups[i]);
  std::sort(present.begin(), present.end());
  present.erase(std::unique(present.begin(), present.end()), present.end());
  if (present.size() < 2) {
    throw ParameterError("between_group_quantile_graph needs at least two groups with scores");
  }

  Matrix w(n, n);
  if (!cap) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!qa.labeled(i)) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (qa.labeled(j) && qa.groups[i] != qa.groups[j] && qa.quantiles[i] == qa.quantiles[j]) {
          w(i, j) = 1.0;
          w(j, i) = 1.0;
        }
      }
    }
    return SimilarityGraph(std::move(w), GraphRole::kFairness);
  }

  std::vector<Edge> candidates;
  for (std::size_t i = 0; i < n; ++i) {
    if (!qa.labeled(i)) continue;
    for (std::size_t j = i + 1; j < n; ++j)
      if (qa.labeled(j) && qa.groups[i] != qa.groups[j] && qa.quantiles[i] == qa.quantiles[j])
        candidates.emplace_back(i, j);
  }
  Rng rng(cap->seed);
  rng.shuffle(candidates);
  std::vector<std::size_t> degree(n, 0);
  for (const auto& [i, j] : candidates) {
    if (degree[i] >= cap->max_edges_per_node || degree[j] >= cap->max_edges_per_node) continue;
    ++degree[i];
    ++degree[j];
    w(i, j) = 1.0;
    w(j, i) = 1.0;
  }
  return SimilarityGraph(std::move(w), GraphRole::kFairness);
}

}  // namespace pfr
