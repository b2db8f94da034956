#pragma once

// Pairwise fair representations: a projection that keeps kNN neighbourhoods
// of the data graph W^X close while pulling fairness-graph W^F neighbours
// together.
//
// Records are stored row-major (X is n x m, one record per row). In
// column-record notation the fitted matrix is X_c ((1-g) L^X + g L^F) X_c^T
// with X_c = X^T, which is X^T ((1-g) L^X + g L^F) X here, and the embedding
// Z_c = V^T X_c becomes Z = X V.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pfr/errors.hpp"
#include "pfr/graph.hpp"
#include "pfr/linalg.hpp"
#include "pfr/preprocess.hpp"

namespace pfr {

struct PfrModel {
  /// m x d, orthonormal columns.
  Matrix basis;
  double gamma = 0.0;
  std::vector<double> eigenvalues;
  /// Loss in W^X and in W^F of the training embedding.
  double loss_x = 0.0;
  double loss_f = 0.0;
  std::optional<StandardizationParams> standardization;
  std::vector<std::string> warnings;

  std::size_t input_dim() const noexcept { return basis.rows(); }
  std::size_t latent_dim() const noexcept { return basis.cols(); }
};

namespace detail {

inline void check_fit_inputs(const Matrix& x, const SimilarityGraph& wx, const SimilarityGraph& wf,
                             double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw ParameterError("gamma must lie in [0, 1], got " + std::to_string(gamma));
  }
  if (wx.size() != x.rows() || wf.size() != x.rows()) {
    throw DimensionError("W^X, W^F and X must cover the same " + std::to_string(x.rows()) + " records");
  }
  if (!all_finite(x)) throw InputError("feature matrix has non-finite entries");
  if (gamma == 1.0 && wf.is_empty()) {
    throw DegenerateObjectiveError("gamma = 1 with an empty fairness graph leaves no objective");
  }
}

/// (1 - gamma) L^X + gamma L^F
inline Matrix combined_laplacian(const SimilarityGraph& wx, const SimilarityGraph& wf, double gamma) {
  return (1.0 - gamma) * laplacian(wx).entries() + gamma * laplacian(wf).entries();
}

inline bool spectrum_is_degenerate(std::span<const double> values, const Matrix& m) {
  const double scale = 1e-12 * (1.0 + frobenius_norm(m));
  return std::all_of(values.begin(), values.end(), [&](double v) { return std::abs(v) <= scale; });
}

}  // namespace detail

/// The m x m matrix whose smallest eigenvectors form the PFR basis.
inline SymmetricMatrix objective_matrix(const Matrix& x, const SimilarityGraph& wx,
                                        const SimilarityGraph& wf, double gamma) {
  detail::check_fit_inputs(x, wx, wf, gamma);
  const Matrix l = detail::combined_laplacian(wx, wf, gamma);
  return SymmetricMatrix(transpose(x) * (l * x));
}

/// Z = X V for a batch of standardized records.
inline Matrix transform(const PfrModel& model, const Matrix& x) {
  if (x.cols() != model.input_dim()) {
    throw DimensionError("transform: expected " + std::to_string(model.input_dim()) + " features, got " +
                         std::to_string(x.cols()));
  }
  return x * model.basis;
}

/// z = V^T x for one standardized record.
inline std::vector<double> transform(const PfrModel& model, std::span<const double> x) {
  if (x.size() != model.input_dim()) {
    throw DimensionError("transform: expected " + std::to_string(model.input_dim()) + " features, got " +
                         std::to_string(x.size()));
  }
  return multiply_transposed(model.basis, x);
}

inline PfrModel fit_linear(const Matrix& x, const SimilarityGraph& wx, const SimilarityGraph& wf,
                           double gamma, std::size_t latent_dim) {
  if (latent_dim < 1 || latent_dim > x.cols()) {
    throw DimensionError("latent dimension " + std::to_string(latent_dim) + " must lie in [1, " +
                         std::to_string(x.cols()) + "]");
  }
  const SymmetricMatrix m = objective_matrix(x, wx, wf, gamma);
  EigenPairs pairs = eigh_smallest(m, latent_dim);

  PfrModel model;
  model.basis = std::move(pairs.vectors);
  model.gamma = gamma;
  model.eigenvalues = std::move(pairs.values);
  const Matrix z = transform(model, x);
  model.loss_x = pairwise_loss(z, wx);
  model.loss_f = pairwise_loss(z, wf);
  if (wf.is_empty()) model.warnings.push_back("fairness graph W^F has no edges");
  if (detail::spectrum_is_degenerate(model.eigenvalues, m.entries())) {
    model.warnings.push_back("all retained eigenvalues are zero; basis is the sign-convention basis");
  }
  return model;
}

struct Kernel {
  enum class Family { kLinear, kRbf };
  Family family = Family::kRbf;
  /// RBF bandwidth: k(x, y) = exp(-|x - y|^2 / sigma_sq).
  double sigma_sq = 1.0;

  double operator()(std::span<const double> a, std::span<const double> b) const {
    if (family == Family::kLinear) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
      return s;
    }
    return std::exp(-squared_distance(a, b) / sigma_sq);
  }

  static Kernel linear() { return {Family::kLinear, 1.0}; }
  static Kernel rbf(double sigma_sq) {
    if (!(sigma_sq > 0.0 && std::isfinite(sigma_sq))) throw ParameterError("RBF bandwidth must be positive");
    return {Family::kRbf, sigma_sq};
  }
};

inline const char* to_string(Kernel::Family family) {
  return family == Kernel::Family::kLinear ? "linear" : "rbf";
}

/// RBF kernel with sigma^2 set to the median squared pairwise distance.
inline Kernel default_rbf_kernel(const Matrix& x) {
  std::vector<double> d;
  d.reserve(x.rows() * (x.rows() - (x.rows() > 0)) / 2);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = i + 1; j < x.rows(); ++j) d.push_back(squared_distance(x.row(i), x.row(j)));
  if (d.empty()) return Kernel::rbf(1.0);
  const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  double median = *mid;
  if (d.size() % 2 == 0) median = 0.5 * (median + *std::max_element(d.begin(), mid));
  return Kernel::rbf(median > 0.0 ? median : 1.0);
}

inline Matrix gram_matrix(const Kernel& kernel, const Matrix& x) {
  Matrix k(x.rows(), x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = i; j < x.rows(); ++j) {
      const double v = kernel(x.row(i), x.row(j));
      k(i, j) = v;
      k(j, i) = v;
    }
  return k;
}

struct KernelPfrModel {
  /// n_train x d
  Matrix coefficients;
  Kernel kernel;
  Matrix training;
  double gamma = 0.0;
  std::vector<double> eigenvalues;
  double loss_x = 0.0;
  double loss_f = 0.0;
  std::optional<StandardizationParams> standardization;
  std::vector<std::string> warnings;

  std::size_t input_dim() const noexcept { return training.cols(); }
  std::size_t latent_dim() const noexcept { return coefficients.cols(); }
};

/// z = A^T k(X_train, x)
inline std::vector<double> transform_kernel(const KernelPfrModel& model, std::span<const double> x) {
  if (x.size() != model.input_dim()) {
    throw DimensionError("transform_kernel: expected " + std::to_string(model.input_dim()) +
                         " features, got " + std::to_string(x.size()));
  }
  std::vector<double> kx(model.training.rows());
  for (std::size_t i = 0; i < kx.size(); ++i) kx[i] = model.kernel(model.training.row(i), x);
  return multiply_transposed(model.coefficients, kx);
}

inline Matrix transform_kernel(const KernelPfrModel& model, const Matrix& x) {
  Matrix z(x.rows(), model.latent_dim());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto zi = transform_kernel(model, x.row(i));
    std::copy(zi.begin(), zi.end(), z.row(i).begin());
  }
  return z;
}

/// Solves K ((1-g) L^X + g L^F) K a = lambda a for the d smallest pairs. The
/// Gram matrix is used uncentered.
inline KernelPfrModel fit_kernel(const Matrix& x, const SimilarityGraph& wx, const SimilarityGraph& wf,
                                 double gamma, std::size_t latent_dim, const Kernel& kernel) {
  detail::check_fit_inputs(x, wx, wf, gamma);
  if (latent_dim < 1 || latent_dim > x.rows()) {
    throw DimensionError("kernel latent dimension " + std::to_string(latent_dim) + " must lie in [1, " +
                         std::to_string(x.rows()) + "]");
  }
  const Matrix k = gram_matrix(kernel, x);
  const SymmetricMatrix gram(k);
  const double min_eig = eigh_smallest(gram, 1).values.front();
  if (min_eig < -1e-8 * frobenius_norm(k)) {
    throw KernelError("Gram matrix is not positive semidefinite (smallest eigenvalue " +
                      std::to_string(min_eig) + ")");
  }
  const Matrix l = detail::combined_laplacian(wx, wf, gamma);
  const SymmetricMatrix m(k * (l * k));
  EigenPairs pairs = eigh_smallest(m, latent_dim);

  KernelPfrModel model;
  model.coefficients = std::move(pairs.vectors);
  model.kernel = kernel;
  model.training = x;
  model.gamma = gamma;
  model.eigenvalues = std::move(pairs.values);
  const Matrix z = k * model.coefficients;
  model.loss_x = pairwise_loss(z, wx);
  model.loss_f = pairwise_loss(z, wf);
  if (wf.is_empty()) model.warnings.push_back("fairness graph W^F has no edges");
  if (detail::spectrum_is_degenerate(model.eigenvalues, m.entries())) {
    model.warnings.push_back("all retained eigenvalues are zero; basis is the sign-convention basis");
  }
  return model;
}

}  // namespace pfr
