#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "pfr/errors.hpp"
#include "pfr/linalg.hpp"

namespace pfr {

/// Per-feature z-score parameters fit on a training split. Constant columns
/// are dropped; `kept` lists the surviving source columns in order.
struct StandardizationParams {
  std::size_t source_columns = 0;
  /// Names of the source columns, when known.
  std::vector<std::string> source_names;
  std::vector<std::size_t> kept;
  std::vector<double> mean;
  std::vector<double> stddev;
  std::vector<std::string> notes;

  std::size_t output_columns() const noexcept { return kept.size(); }
};

/// Population mean and standard deviation per column.
inline StandardizationParams standardize_fit(const Matrix& features,
                                             const std::vector<std::string>& names = {}) {
  if (features.rows() == 0) throw DataError("standardize_fit: no records");
  const auto n = static_cast<double>(features.rows());
  StandardizationParams params;
  params.source_columns = features.cols();
  params.source_names = names;
  for (std::size_t j = 0; j < features.cols(); ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < features.rows(); ++i) mean += features(i, j);
    mean /= n;
    double var = 0.0;
    for (std::size_t i = 0; i < features.rows(); ++i) {
      const double d = features(i, j) - mean;
      var += d * d;
    }
    const double sd = std::sqrt(var / n);
    if (!(sd > 1e-12 * (1.0 + std::abs(mean)))) {
      const std::string name = j < names.size() ? names[j] : "column " + std::to_string(j);
      params.notes.push_back("dropped constant feature '" + name + "'");
      continue;
    }
    params.kept.push_back(j);
    params.mean.push_back(mean);
    params.stddev.push_back(sd);
  }
  return params;
}

inline Matrix standardize_apply(const StandardizationParams& params, const Matrix& features) {
  if (features.cols() != params.source_columns) {
    throw DimensionError("standardize_apply: expected " + std::to_string(params.source_columns) +
                         " columns, got " + std::to_string(features.cols()));
  }
  Matrix out(features.rows(), params.kept.size());
  for (std::size_t i = 0; i < features.rows(); ++i)
    for (std::size_t k = 0; k < params.kept.size(); ++k)
      out(i, k) = (features(i, params.kept[k]) - params.mean[k]) / params.stddev[k];
  return out;
}

inline std::vector<double> standardize_apply(const StandardizationParams& params,
                                             std::span<const double> x) {
  if (x.size() != params.source_columns) throw DimensionError("standardize_apply: feature length mismatch");
  std::vector<double> out(params.kept.size());
  for (std::size_t k = 0; k < params.kept.size(); ++k)
    out[k] = (x[params.kept[k]] - params.mean[k]) / params.stddev[k];
  return out;
}

}  // namespace pfr
