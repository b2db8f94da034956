#pragma once

// Self-describing JSON persistence for fitted models. Doubles are written in
// shortest round-trip form, so a reloaded model reproduces transforms
// exactly.

#include <fstream>
#include <string>
#include <variant>

#include <nlohmann/json.hpp>

#include "pfr/errors.hpp"
#include "pfr/linalg.hpp"
#include "pfr/preprocess.hpp"
#include "pfr/representation.hpp"

namespace pfr {

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto r = m.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j, std::size_t rows, std::size_t cols, const char* what) {
  if (!j.is_array() || j.size() != rows) throw DataError(std::string("model field '") + what + "' has wrong row count");
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto& r = j[i];
    if (!r.is_array() || r.size() != cols) {
      throw DataError(std::string("model field '") + what + "' has wrong column count");
    }
    for (std::size_t k = 0; k < cols; ++k) m(i, k) = r[k].get<double>();
  }
  return m;
}

}  // namespace detail

inline nlohmann::json to_json(const StandardizationParams& p) {
  return {{"source_columns", p.source_columns}, {"source_names", p.source_names}, {"kept", p.kept},
          {"mean", p.mean},                     {"stddev", p.stddev},             {"notes", p.notes}};
}

inline StandardizationParams standardization_from_json(const nlohmann::json& j) {
  StandardizationParams p;
  p.source_columns = j.at("source_columns").get<std::size_t>();
  p.source_names = j.value("source_names", std::vector<std::string>{});
  p.kept = j.at("kept").get<std::vector<std::size_t>>();
  p.mean = j.at("mean").get<std::vector<double>>();
  p.stddev = j.at("stddev").get<std::vector<double>>();
  p.notes = j.value("notes", std::vector<std::string>{});
  if (p.mean.size() != p.kept.size() || p.stddev.size() != p.kept.size()) {
    throw DataError("standardization parameters have inconsistent lengths");
  }
  for (std::size_t k : p.kept)
    if (k >= p.source_columns) throw DataError("standardization keeps an out-of-range column");
  return p;
}

namespace detail {

inline void write_common(nlohmann::json& j, const char* kind, double gamma, const std::vector<double>& eigenvalues,
                         double loss_x, double loss_f, const std::optional<StandardizationParams>& standardization,
                         const std::vector<std::string>& warnings) {
  j["format"] = "pfr-model";
  j["format_version"] = kModelFormatVersion;
  j["kind"] = kind;
  j["gamma"] = gamma;
  j["eigenvalues"] = eigenvalues;
  j["loss_x"] = loss_x;
  j["loss_f"] = loss_f;
  j["standardization"] = standardization ? to_json(*standardization) : nlohmann::json(nullptr);
  j["warnings"] = warnings;
}

inline void check_header(const nlohmann::json& j, const char* kind) {
  if (j.value("format", "") != "pfr-model") throw DataError("not a pfr-model document");
  if (j.value("format_version", -1) != kModelFormatVersion) {
    throw DataError("unsupported pfr-model format_version " + j.value("format_version", nlohmann::json(-1)).dump());
  }
  if (j.value("kind", "") != kind) throw DataError(std::string("expected a ") + kind + " pfr-model");
}

inline std::optional<StandardizationParams> read_standardization(const nlohmann::json& j) {
  if (!j.contains("standardization") || j["standardization"].is_null()) return std::nullopt;
  return standardization_from_json(j["standardization"]);
}

}  // namespace detail

inline nlohmann::json to_json(const PfrModel& model) {
  nlohmann::json j;
  detail::write_common(j, "linear", model.gamma, model.eigenvalues, model.loss_x, model.loss_f,
                       model.standardization, model.warnings);
  j["orientation"] = {{"records", "rows"},
                      {"basis", "input_dim x latent_dim, row-major; z = basis^T x for a standardized record x"}};
  j["input_dim"] = model.input_dim();
  j["latent_dim"] = model.latent_dim();
  j["basis"] = detail::matrix_to_json(model.basis);
  return j;
}

inline PfrModel pfr_model_from_json(const nlohmann::json& j) {
  try {
    detail::check_header(j, "linear");
    PfrModel model;
    const auto m = j.at("input_dim").get<std::size_t>();
    const auto d = j.at("latent_dim").get<std::size_t>();
    model.basis = detail::matrix_from_json(j.at("basis"), m, d, "basis");
    model.gamma = j.at("gamma").get<double>();
    model.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
    model.loss_x = j.value("loss_x", 0.0);
    model.loss_f = j.value("loss_f", 0.0);
    model.standardization = detail::read_standardization(j);
    model.warnings = j.value("warnings", std::vector<std::string>{});
    if (model.standardization && model.standardization->output_columns() != m) {
      throw DataError("standardization output width does not match the basis");
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed pfr-model: ") + e.what());
  }
}

inline nlohmann::json to_json(const KernelPfrModel& model) {
  nlohmann::json j;
  detail::write_common(j, "kernel", model.gamma, model.eigenvalues, model.loss_x, model.loss_f,
                       model.standardization, model.warnings);
  j["orientation"] = {{"records", "rows"},
                      {"coefficients", "n_train x latent_dim, row-major; z = coefficients^T k(training, x)"}};
  j["kernel"] = {{"family", to_string(model.kernel.family)}, {"sigma_sq", model.kernel.sigma_sq}};
  j["n_train"] = model.training.rows();
  j["input_dim"] = model.input_dim();
  j["latent_dim"] = model.latent_dim();
  j["training"] = detail::matrix_to_json(model.training);
  j["coefficients"] = detail::matrix_to_json(model.coefficients);
  return j;
}

inline KernelPfrModel kernel_model_from_json(const nlohmann::json& j) {
  try {
    detail::check_header(j, "kernel");
    KernelPfrModel model;
    const auto n = j.at("n_train").get<std::size_t>();
    const auto m = j.at("input_dim").get<std::size_t>();
    const auto d = j.at("latent_dim").get<std::size_t>();
    const auto family = j.at("kernel").at("family").get<std::string>();
    if (family == "linear") {
      model.kernel = Kernel::linear();
    } else if (family == "rbf") {
      model.kernel = Kernel::rbf(j.at("kernel").at("sigma_sq").get<double>());
    } else {
      throw DataError("unknown kernel family '" + family + "'");
    }
    model.training = detail::matrix_from_json(j.at("training"), n, m, "training");
    model.coefficients = detail::matrix_from_json(j.at("coefficients"), n, d, "coefficients");
    model.gamma = j.at("gamma").get<double>();
    model.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
    model.loss_x = j.value("loss_x", 0.0);
    model.loss_f = j.value("loss_f", 0.0);
    model.standardization = detail::read_standardization(j);
    model.warnings = j.value("warnings", std::vector<std::string>{});
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed pfr-model: ") + e.what());
  }
}

using AnyModel = std::variant<PfrModel, KernelPfrModel>;

inline AnyModel model_from_json(const nlohmann::json& j) {
  if (j.value("kind", "") == "kernel") return kernel_model_from_json(j);
  return pfr_model_from_json(j);
}

inline void save_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

inline nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace pfr
