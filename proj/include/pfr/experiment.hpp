#pragma once

// Experiment harness: configuration, seeded train/test runs with grid-search
// cross-validation, the Original baseline, gamma and label-budget sweeps, and
// report emission (report.json, runs.csv, grid.csv, sweep.csv).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "pfr/data.hpp"
#include "pfr/downstream.hpp"
#include "pfr/errors.hpp"
#include "pfr/graph.hpp"
#include "pfr/preprocess.hpp"
#include "pfr/random.hpp"
#include "pfr/representation.hpp"

namespace pfr {

// ---------------------------------------------------------------------------
// Configuration

struct DatasetConfig {
  enum class Source { kSynthetic, kCsv };
  Source source = Source::kSynthetic;
  SyntheticVariant variant = SyntheticVariant::kLowDimension;
  std::size_t n_train = 600;
  std::size_t n_test = 400;
  /// CSV source: a single file split per run, or a fixed test file.
  std::string path;
  std::string test_path;
  CsvSchema schema;
  double train_fraction = 0.6;
  /// Append group indicator columns to the PFR inputs. kNN graphs and the
  /// Original baseline always use the masked features.
  bool group_feature = true;
};

struct FairnessConfig {
  enum class Source { kOraclePairs, kPairs, kEquivalence, kScores };
  Source source = Source::kOraclePairs;
  std::string path;
  /// Oracle pair budget; unset means ceil(N log2 N) for N training records.
  std::optional<std::uint64_t> budget;
  /// Equivalence file holds star ratings, binned to half-star classes.
  bool ratings = false;
};

struct GraphConfig {
  std::optional<double> heat_scale;
  int quantiles = 10;
  std::optional<std::size_t> edge_cap;
};

struct GridConfig {
  std::vector<double> gamma;
  /// Empty means {2, ceil(m/4), ceil(m/2)} restricted to [1, m].
  std::vector<std::size_t> latent_dim;
  std::vector<std::size_t> neighbors;
};

struct ModelConfig {
  double gamma = 0.9;
  std::size_t latent_dim = 2;
  std::size_t neighbors = 10;
};

struct SplitConfig {
  std::size_t folds = 5;
  std::size_t runs = 10;
};

struct SelectionConfig {
  double auc_weight = 1.0;
  double consistency_weight = 1.0;
};

struct EvaluationConfig {
  std::size_t neighbors = 10;
  double threshold = 0.5;
  bool probability_consistency = false;
};

struct SweepConfig {
  std::vector<double> gamma;
  /// Pair budgets for oracle labels; empty means the default ladder.
  std::vector<std::uint64_t> budgets;
  /// Fractions of labeled training records for file label sources.
  std::vector<double> fractions;
};

struct ExperimentConfig {
  std::uint64_t seed = 2019;
  std::string output_dir = "pfr-out";
  DatasetConfig dataset;
  FairnessConfig fairness;
  GraphConfig graph;
  GridConfig grid;
  ModelConfig model;
  LogisticOptions classifier;
  SplitConfig split;
  SelectionConfig selection;
  EvaluationConfig evaluation;
  SweepConfig sweep;
};

namespace detail {

inline std::vector<double> unit_steps() {
  std::vector<double> v;
  for (int k = 0; k <= 10; ++k) v.push_back(k / 10.0);
  return v;
}

inline std::vector<double> tenths_from_one_tenth() {
  std::vector<double> v;
  for (int k = 1; k <= 10; ++k) v.push_back(k / 10.0);
  return v;
}

inline void reject_unknown(const nlohmann::json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError("'" + where + "' must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::find_if(keys.begin(), keys.end(), [&](const char* k) { return key == k; }) == keys.end()) {
      throw ConfigError("unknown key '" + where + "." + key + "'");
    }
  }
}

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key) || j[key].is_null()) return;
  try {
    out = j[key].get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("'" + where + "." + key + "' has the wrong type");
  }
}

template <typename T>
void read_optional(const nlohmann::json& j, const char* key, std::optional<T>& out, const std::string& where) {
  if (!j.contains(key) || j[key].is_null()) return;
  T value{};
  read_field(j, key, value, where);
  out = value;
}

template <typename T>
nlohmann::json optional_value(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline const char* to_string(DatasetConfig::Source s) { return s == DatasetConfig::Source::kSynthetic ? "synthetic" : "csv"; }

inline const char* to_string(FairnessConfig::Source s) {
  switch (s) {
    case FairnessConfig::Source::kOraclePairs: return "oracle_pairs";
    case FairnessConfig::Source::kPairs: return "pairs";
    case FairnessConfig::Source::kEquivalence: return "equivalence";
    case FairnessConfig::Source::kScores: return "scores";
  }
  return "?";
}

}  // namespace detail

inline void validate(const ExperimentConfig& c) {
  const auto fail = [](const std::string& m) { throw ConfigError(m); };
  const auto& d = c.dataset;
  if (d.source == DatasetConfig::Source::kSynthetic) {
    if (d.n_train < 10 || d.n_test < 10) fail("dataset.n_train and dataset.n_test must be >= 10");
  } else {
    if (d.path.empty()) fail("dataset.path is required for csv sources");
    if (!(d.train_fraction > 0.0 && d.train_fraction < 1.0)) fail("dataset.train_fraction must lie in (0, 1)");
  }
  if (c.fairness.source != FairnessConfig::Source::kOraclePairs) {
    if (c.fairness.path.empty()) fail("fairness.path is required for file label sources");
  } else if (d.source != DatasetConfig::Source::kSynthetic) {
    fail("fairness.source 'oracle_pairs' needs the synthetic dataset");
  }
  if (c.graph.quantiles < 1) fail("graph.quantiles must be >= 1");
  if (c.graph.heat_scale && !(*c.graph.heat_scale > 0.0)) fail("graph.heat_scale must be positive");
  if (c.graph.edge_cap && *c.graph.edge_cap == 0) fail("graph.edge_cap must be positive");
  if (c.grid.gamma.empty() || c.grid.neighbors.empty()) fail("grid.gamma and grid.neighbors must be non-empty");
  for (double g : c.grid.gamma)
    if (!(g >= 0.0 && g <= 1.0)) fail("grid.gamma values must lie in [0, 1]");
  for (auto v : c.grid.latent_dim)
    if (v < 1) fail("grid.latent_dim values must be >= 1");
  for (auto v : c.grid.neighbors)
    if (v < 1) fail("grid.neighbors values must be >= 1");
  if (!(c.model.gamma >= 0.0 && c.model.gamma <= 1.0)) fail("model.gamma must lie in [0, 1]");
  if (c.model.latent_dim < 1 || c.model.neighbors < 1) fail("model.latent_dim and model.neighbors must be >= 1");
  if (!(c.classifier.reg >= 0.0) || !(c.classifier.tol > 0.0) || c.classifier.max_iters == 0) {
    fail("classifier settings must have reg >= 0, tol > 0 and max_iters > 0");
  }
  if (c.split.folds < 2) fail("split.folds must be >= 2");
  if (c.split.runs < 1) fail("split.runs must be >= 1");
  if (!(c.selection.auc_weight >= 0.0) || !(c.selection.consistency_weight >= 0.0)) {
    fail("selection weights must be nonnegative");
  }
  if (c.evaluation.neighbors < 1) fail("evaluation.neighbors must be >= 1");
  if (!(c.evaluation.threshold > 0.0 && c.evaluation.threshold < 1.0)) fail("evaluation.threshold must lie in (0, 1)");
  if (c.sweep.gamma.empty()) fail("sweep.gamma must be non-empty");
  for (double g : c.sweep.gamma)
    if (!(g >= 0.0 && g <= 1.0)) fail("sweep.gamma values must lie in [0, 1]");
  if (c.sweep.fractions.empty()) fail("sweep.fractions must be non-empty");
  for (double f : c.sweep.fractions)
    if (!(f > 0.0 && f <= 1.0)) fail("sweep.fractions values must lie in (0, 1]");
}

inline ExperimentConfig default_config() {
  ExperimentConfig c;
  c.grid.gamma = detail::unit_steps();
  c.grid.neighbors = {5, 10, 15};
  c.sweep.gamma = detail::unit_steps();
  c.sweep.fractions = detail::tenths_from_one_tenth();
  return c;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  using detail::read_field;
  using detail::read_optional;
  using detail::reject_unknown;
  ExperimentConfig c = default_config();
  reject_unknown(j, "config",
                 {"seed", "output_dir", "dataset", "fairness", "graph", "grid", "model", "classifier", "split",
                  "selection", "evaluation", "sweep"});
  read_field(j, "seed", c.seed, "config");
  read_field(j, "output_dir", c.output_dir, "config");

  if (j.contains("dataset")) {
    const auto& d = j["dataset"];
    reject_unknown(d, "dataset",
                   {"source", "variant", "n_train", "n_test", "path", "test_path", "label_column", "group_column",
                    "id_column", "categorical_columns", "ignored_columns", "train_fraction", "group_feature"});
    std::string source = "synthetic";
    read_field(d, "source", source, "dataset");
    if (source == "synthetic") {
      c.dataset.source = DatasetConfig::Source::kSynthetic;
    } else if (source == "csv") {
      c.dataset.source = DatasetConfig::Source::kCsv;
      c.dataset.group_feature = false;
    } else {
      throw ConfigError("dataset.source must be 'synthetic' or 'csv'");
    }
    std::string variant = "low";
    read_field(d, "variant", variant, "dataset");
    if (variant == "low") {
      c.dataset.variant = SyntheticVariant::kLowDimension;
    } else if (variant == "full") {
      c.dataset.variant = SyntheticVariant::kFull;
    } else {
      throw ConfigError("dataset.variant must be 'low' or 'full'");
    }
    read_field(d, "n_train", c.dataset.n_train, "dataset");
    read_field(d, "n_test", c.dataset.n_test, "dataset");
    read_field(d, "path", c.dataset.path, "dataset");
    read_field(d, "test_path", c.dataset.test_path, "dataset");
    read_field(d, "label_column", c.dataset.schema.label_column, "dataset");
    read_field(d, "group_column", c.dataset.schema.group_column, "dataset");
    if (d.contains("id_column")) {
      if (d["id_column"].is_null()) {
        c.dataset.schema.id_column.reset();
      } else {
        std::string id;
        read_field(d, "id_column", id, "dataset");
        c.dataset.schema.id_column = id;
      }
    }
    read_field(d, "categorical_columns", c.dataset.schema.categorical_columns, "dataset");
    read_field(d, "ignored_columns", c.dataset.schema.ignored_columns, "dataset");
    read_field(d, "train_fraction", c.dataset.train_fraction, "dataset");
    read_field(d, "group_feature", c.dataset.group_feature, "dataset");
  }

  if (j.contains("fairness")) {
    const auto& f = j["fairness"];
    reject_unknown(f, "fairness", {"source", "path", "budget", "ratings"});
    std::string source = "oracle_pairs";
    read_field(f, "source", source, "fairness");
    if (source == "oracle_pairs") {
      c.fairness.source = FairnessConfig::Source::kOraclePairs;
    } else if (source == "pairs") {
      c.fairness.source = FairnessConfig::Source::kPairs;
    } else if (source == "equivalence") {
      c.fairness.source = FairnessConfig::Source::kEquivalence;
    } else if (source == "scores") {
      c.fairness.source = FairnessConfig::Source::kScores;
    } else {
      throw ConfigError("fairness.source must be oracle_pairs, pairs, equivalence or scores");
    }
    read_field(f, "path", c.fairness.path, "fairness");
    read_optional(f, "budget", c.fairness.budget, "fairness");
    read_field(f, "ratings", c.fairness.ratings, "fairness");
  }

  if (j.contains("graph")) {
    const auto& g = j["graph"];
    reject_unknown(g, "graph", {"heat_scale", "quantiles", "edge_cap"});
    read_optional(g, "heat_scale", c.graph.heat_scale, "graph");
    read_field(g, "quantiles", c.graph.quantiles, "graph");
    read_optional(g, "edge_cap", c.graph.edge_cap, "graph");
  }
  if (j.contains("grid")) {
    const auto& g = j["grid"];
    reject_unknown(g, "grid", {"gamma", "latent_dim", "neighbors"});
    read_field(g, "gamma", c.grid.gamma, "grid");
    read_field(g, "latent_dim", c.grid.latent_dim, "grid");
    read_field(g, "neighbors", c.grid.neighbors, "grid");
  }
  if (j.contains("model")) {
    const auto& m = j["model"];
    reject_unknown(m, "model", {"gamma", "latent_dim", "neighbors"});
    read_field(m, "gamma", c.model.gamma, "model");
    read_field(m, "latent_dim", c.model.latent_dim, "model");
    read_field(m, "neighbors", c.model.neighbors, "model");
  }
  if (j.contains("classifier")) {
    const auto& m = j["classifier"];
    reject_unknown(m, "classifier", {"reg", "max_iters", "tol", "solver"});
    read_field(m, "reg", c.classifier.reg, "classifier");
    read_field(m, "max_iters", c.classifier.max_iters, "classifier");
    read_field(m, "tol", c.classifier.tol, "classifier");
    std::string solver = "newton";
    read_field(m, "solver", solver, "classifier");
    if (solver == "newton") {
      c.classifier.solver = LogisticSolver::kNewton;
    } else if (solver == "gd") {
      c.classifier.solver = LogisticSolver::kGradientDescent;
    } else {
      throw ConfigError("classifier.solver must be 'newton' or 'gd'");
    }
  }
  if (j.contains("split")) {
    const auto& s = j["split"];
    reject_unknown(s, "split", {"folds", "runs"});
    read_field(s, "folds", c.split.folds, "split");
    read_field(s, "runs", c.split.runs, "split");
  }
  if (j.contains("selection")) {
    const auto& s = j["selection"];
    reject_unknown(s, "selection", {"auc_weight", "consistency_weight"});
    read_field(s, "auc_weight", c.selection.auc_weight, "selection");
    read_field(s, "consistency_weight", c.selection.consistency_weight, "selection");
  }
  if (j.contains("evaluation")) {
    const auto& e = j["evaluation"];
    reject_unknown(e, "evaluation", {"neighbors", "threshold", "probability_consistency"});
    read_field(e, "neighbors", c.evaluation.neighbors, "evaluation");
    read_field(e, "threshold", c.evaluation.threshold, "evaluation");
    read_field(e, "probability_consistency", c.evaluation.probability_consistency, "evaluation");
  }
  if (j.contains("sweep")) {
    const auto& s = j["sweep"];
    reject_unknown(s, "sweep", {"gamma", "budgets", "fractions"});
    read_field(s, "gamma", c.sweep.gamma, "sweep");
    read_field(s, "budgets", c.sweep.budgets, "sweep");
    read_field(s, "fractions", c.sweep.fractions, "sweep");
  }
  validate(c);
  return c;
}

/// The fully resolved configuration, readable back by config_from_json.
inline nlohmann::json to_json(const ExperimentConfig& c) {
  using detail::optional_value;
  nlohmann::json j;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["dataset"] = {{"source", detail::to_string(c.dataset.source)},
                  {"variant", c.dataset.variant == SyntheticVariant::kFull ? "full" : "low"},
                  {"n_train", c.dataset.n_train},
                  {"n_test", c.dataset.n_test},
                  {"path", c.dataset.path},
                  {"test_path", c.dataset.test_path},
                  {"label_column", c.dataset.schema.label_column},
                  {"group_column", c.dataset.schema.group_column},
                  {"id_column", optional_value(c.dataset.schema.id_column)},
                  {"categorical_columns", c.dataset.schema.categorical_columns},
                  {"ignored_columns", c.dataset.schema.ignored_columns},
                  {"train_fraction", c.dataset.train_fraction},
                  {"group_feature", c.dataset.group_feature}};
  j["fairness"] = {{"source", detail::to_string(c.fairness.source)},
                   {"path", c.fairness.path},
                   {"budget", optional_value(c.fairness.budget)},
                   {"ratings", c.fairness.ratings}};
  j["graph"] = {{"heat_scale", optional_value(c.graph.heat_scale)},
                {"quantiles", c.graph.quantiles},
                {"edge_cap", optional_value(c.graph.edge_cap)}};
  j["grid"] = {{"gamma", c.grid.gamma}, {"latent_dim", c.grid.latent_dim}, {"neighbors", c.grid.neighbors}};
  j["model"] = {{"gamma", c.model.gamma}, {"latent_dim", c.model.latent_dim}, {"neighbors", c.model.neighbors}};
  j["classifier"] = {{"reg", c.classifier.reg},
                     {"max_iters", c.classifier.max_iters},
                     {"tol", c.classifier.tol},
                     {"solver", c.classifier.solver == LogisticSolver::kNewton ? "newton" : "gd"}};
  j["split"] = {{"folds", c.split.folds}, {"runs", c.split.runs}};
  j["selection"] = {{"auc_weight", c.selection.auc_weight}, {"consistency_weight", c.selection.consistency_weight}};
  j["evaluation"] = {{"neighbors", c.evaluation.neighbors},
                     {"threshold", c.evaluation.threshold},
                     {"probability_consistency", c.evaluation.probability_consistency}};
  j["sweep"] = {{"gamma", c.sweep.gamma}, {"budgets", c.sweep.budgets}, {"fractions", c.sweep.fractions}};
  return j;
}

// ---------------------------------------------------------------------------
// Provenance

inline constexpr const char* kStageOracleFit = "oracle_fit";
inline constexpr const char* kStageFairnessGraph = "fairness_graph";
inline constexpr const char* kStageStandardization = "standardization";
inline constexpr const char* kStageGridSearch = "grid_search";
inline constexpr const char* kStageModelFit = "model_fit";
inline constexpr const char* kStageClassifierFit = "classifier_fit";

/// Records which record ids reach each training-only stage and throws the
/// moment a test id does.
class Provenance {
 public:
  void mark_test(const std::vector<std::string>& ids) { test_ids_.insert(ids.begin(), ids.end()); }

  template <typename Ids>
  void touch(const std::string& stage, const Ids& ids) {
    auto& seen = touched_[stage];
    for (const auto& id : ids) {
      if (test_ids_.count(id)) throw std::logic_error("test record '" + id + "' reached stage " + stage);
      seen.insert(id);
    }
  }

  const std::map<std::string, std::set<std::string>>& touched() const noexcept { return touched_; }
  const std::unordered_set<std::string>& test_ids() const noexcept { return test_ids_; }

 private:
  std::unordered_set<std::string> test_ids_;
  std::map<std::string, std::set<std::string>> touched_;
};

// ---------------------------------------------------------------------------
// Per-run data

/// Features plus, optionally, one indicator column per non-reference group.
inline Matrix model_inputs(const Dataset& ds, bool group_feature, std::vector<std::string>* names = nullptr) {
  const std::size_t extra = group_feature && ds.group_values.size() > 1 ? ds.group_values.size() - 1 : 0;
  Matrix out(ds.size(), ds.feature_count() + extra);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto src = ds.features.row(i);
    auto dst = out.row(i);
    std::copy(src.begin(), src.end(), dst.begin());
    for (std::size_t g = 1; g <= extra; ++g) dst[ds.feature_count() + g - 1] = ds.groups[i] == static_cast<int>(g);
  }
  if (names) {
    *names = ds.feature_names;
    for (std::size_t g = 1; g <= extra; ++g) names->push_back(ds.group_attribute + "=" + ds.group_values[g]);
  }
  return out;
}

inline Matrix select_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto src = m.row(rows[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

/// Columns of a standardized matrix that came from the first `masked`
/// source columns.
inline Matrix masked_columns(const Matrix& standardized, const StandardizationParams& params, std::size_t masked) {
  std::vector<std::size_t> keep;
  for (std::size_t k = 0; k < params.kept.size(); ++k)
    if (params.kept[k] < masked) keep.push_back(k);
  Matrix out(standardized.rows(), keep.size());
  for (std::size_t i = 0; i < standardized.rows(); ++i)
    for (std::size_t k = 0; k < keep.size(); ++k) out(i, k) = standardized(i, keep[k]);
  return out;
}

/// Fairness labels loaded once from a file source.
struct LabelStore {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::map<std::string, std::string> classes;
  std::vector<ScoredRecord> scores;
};

inline LabelStore load_labels(const FairnessConfig& f) {
  LabelStore store;
  switch (f.source) {
    case FairnessConfig::Source::kOraclePairs:
      break;
    case FairnessConfig::Source::kPairs:
      store.pairs = read_pairs_csv(f.path);
      break;
    case FairnessConfig::Source::kEquivalence:
      store.classes = read_equivalence_csv(f.path);
      if (f.ratings) {
        for (auto& [id, value] : store.classes) {
          const auto r = csv::parse_double(value);
          if (!r) throw DataError(f.path + ": rating '" + value + "' for id '" + id + "' is not numeric");
          value = std::to_string(half_star_class(*r));
        }
      }
      break;
    case FairnessConfig::Source::kScores:
      store.scores = read_scores_csv(f.path);
      break;
  }
  return store;
}

struct PreparedRun {
  std::size_t run = 0;
  std::uint64_t seed = 0;
  Dataset train;
  Dataset test;
  Matrix train_inputs;
  Matrix test_inputs;
  std::vector<std::string> input_names;
  /// Leading input columns that are ordinary (non-protected) features.
  std::size_t masked = 0;
  /// Oracle quantiles, synthetic source only.
  std::vector<int> train_quantiles;
  std::vector<int> test_quantiles;
  Provenance provenance;
};

namespace detail {

inline std::uint64_t stream(std::uint64_t run_seed, std::uint64_t k) { return derive_seed(run_seed, k); }
enum : std::uint64_t { kStreamData = 1, kStreamPairs, kStreamFolds, kStreamEdgeCap, kStreamSplit, kStreamSparsity };

}  // namespace detail

inline std::uint64_t run_seed(const ExperimentConfig& c, std::size_t run) { return derive_seed(c.seed, run); }

/// Shared across runs for CSV sources.
struct SourceData {
  std::optional<Dataset> all;
  std::optional<Dataset> fixed_test;
  LabelStore labels;
};

inline SourceData load_source(const ExperimentConfig& c) {
  SourceData s;
  if (c.dataset.source == DatasetConfig::Source::kCsv) {
    s.all = load_csv(c.dataset.path, c.dataset.schema);
    if (!c.dataset.test_path.empty()) s.fixed_test = load_csv(c.dataset.test_path, c.dataset.schema);
  }
  s.labels = load_labels(c.fairness);
  return s;
}

inline PreparedRun prepare_run(const ExperimentConfig& c, const SourceData& source, std::size_t run) {
  PreparedRun p;
  p.run = run;
  p.seed = run_seed(c, run);
  if (c.dataset.source == DatasetConfig::Source::kSynthetic) {
    SyntheticOptions opts;
    opts.n_train = c.dataset.n_train;
    opts.n_test = c.dataset.n_test;
    opts.seed = detail::stream(p.seed, detail::kStreamData);
    opts.variant = c.dataset.variant;
    std::tie(p.train, p.test) = generate_synthetic(opts);
  } else if (source.fixed_test) {
    p.train = *source.all;
    p.test = *source.fixed_test;
    if (p.train.group_values != p.test.group_values) throw DataError("train and test files have different group values");
  } else {
    const Dataset& all = *source.all;
    std::vector<std::size_t> order(all.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(detail::stream(p.seed, detail::kStreamSplit));
    rng.shuffle(order);
    const auto n_train = static_cast<std::size_t>(std::llround(c.dataset.train_fraction * all.size()));
    if (n_train < 2 || n_train + 2 > all.size()) throw DataError("train_fraction leaves an empty split");
    std::vector<std::size_t> tr(order.begin(), order.begin() + n_train);
    std::vector<std::size_t> te(order.begin() + n_train, order.end());
    std::sort(tr.begin(), tr.end());
    std::sort(te.begin(), te.end());
    p.train = all.subset(tr);
    p.test = all.subset(te);
  }
  p.train.validate(true);
  p.test.validate(true);
  p.provenance.mark_test(p.test.ids);

  p.train_inputs = model_inputs(p.train, c.dataset.group_feature, &p.input_names);
  p.test_inputs = model_inputs(p.test, c.dataset.group_feature);
  p.masked = p.train.feature_count();

  if (c.fairness.source == FairnessConfig::Source::kOraclePairs) {
    p.provenance.touch(kStageOracleFit, p.train.ids);
    const FairnessOracle oracle = oracle_fit(p.train, c.graph.quantiles, c.classifier);
    p.train_quantiles = oracle_quantiles(oracle, p.train);
    p.test_quantiles = oracle_quantiles(oracle, p.test);
  }
  return p;
}

/// Training-label subsampling for the sparsity sweep.
struct PairBudget {
  std::uint64_t budget;
};
struct RecordFraction {
  double fraction;
};
using LabelSubsample = std::variant<std::monostate, PairBudget, RecordFraction>;

inline std::uint64_t default_pair_budget(std::size_t n) {
  return static_cast<std::uint64_t>(std::ceil(static_cast<double>(n) * std::log2(static_cast<double>(n))));
}

/// [log2 N, N/5, 2N/5, 3N/5, 4N/5, N, N log2 N, N^2], the last capped at the
/// number of distinct unordered pairs.
inline std::vector<std::uint64_t> budget_ladder(std::size_t n) {
  const auto nn = static_cast<std::uint64_t>(n);
  std::vector<std::uint64_t> out = {static_cast<std::uint64_t>(std::floor(std::log2(static_cast<double>(n))))};
  for (std::uint64_t k = 1; k <= 5; ++k) out.push_back(k * nn / 5);
  out.push_back(default_pair_budget(n));
  out.push_back(std::min(nn * nn, unordered_pair_count(n)));
  for (auto& b : out) b = std::min(b, unordered_pair_count(n));
  return out;
}

namespace detail {

/// Every unordered pair of n records in a seeded uniform order; prefixes are
/// uniform samples without replacement and nest as the budget grows.
inline std::vector<Edge> shuffled_pairs(std::size_t n, std::uint64_t seed) {
  std::vector<Edge> all;
  all.reserve(static_cast<std::size_t>(unordered_pair_count(n)));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) all.emplace_back(i, j);
  Rng rng(seed);
  rng.shuffle(all);
  return all;
}

inline std::size_t fraction_count(double fraction, std::size_t n) {
  return std::min(n, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))));
}

/// The first `count` records of a seeded shuffle of 0..n-1.
inline std::vector<bool> kept_records(std::size_t n, std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<bool> keep(n, false);
  for (std::size_t k = 0; k < count; ++k) keep[order[k]] = true;
  return keep;
}

inline SimilarityGraph quantile_graph_over(const std::vector<std::string>& ids, const std::vector<ScoredRecord>& scores,
                                           const std::vector<bool>* keep, const GraphConfig& g, std::uint64_t seed) {
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < ids.size(); ++i) pos.emplace(ids[i], i);
  std::vector<ScoredRecord> subset;
  for (const auto& r : scores) {
    const auto it = pos.find(r.id);
    if (it == pos.end() || (keep && !(*keep)[it->second])) continue;
    subset.push_back(r);
  }
  if (subset.empty()) return SimilarityGraph::empty(ids.size(), GraphRole::kFairness);
  std::set<std::string> groups;
  for (const auto& r : subset) groups.insert(r.group);
  if (groups.size() < 2) return SimilarityGraph::empty(ids.size(), GraphRole::kFairness);
  const GroupRanking ranking = scores_to_group_rankings(subset, g.quantiles);
  const QuantileAssignment qa = align_ranking(ids, ranking);
  std::optional<EdgeCap> cap;
  if (g.edge_cap) cap = EdgeCap{*g.edge_cap, seed};
  return between_group_quantile_graph(qa, cap);
}

}  // namespace detail

/// W^F over the training records, built from training labels only.
inline SimilarityGraph train_fairness_graph(const ExperimentConfig& c, const SourceData& source, PreparedRun& p,
                                            const LabelSubsample& subsample = {}) {
  const std::size_t n = p.train.size();
  p.provenance.touch(kStageFairnessGraph, p.train.ids);
  const std::uint64_t sparsity_seed = detail::stream(p.seed, detail::kStreamSparsity);
  std::optional<std::vector<bool>> keep;
  if (const auto* rf = std::get_if<RecordFraction>(&subsample)) {
    keep = detail::kept_records(n, detail::fraction_count(rf->fraction, n), sparsity_seed);
  }

  switch (c.fairness.source) {
    case FairnessConfig::Source::kOraclePairs: {
      std::vector<Edge> pairs;
      if (const auto* pb = std::get_if<PairBudget>(&subsample)) {
        if (pb->budget > unordered_pair_count(n)) throw ParameterError("pair budget exceeds the number of pairs");
        auto all = detail::shuffled_pairs(n, sparsity_seed);
        pairs.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(pb->budget));
      } else {
        const std::uint64_t budget = c.fairness.budget.value_or(default_pair_budget(n));
        pairs = sample_pairs(n, budget, detail::stream(p.seed, detail::kStreamPairs));
      }
      std::vector<Edge> edges;
      for (const auto& [a, b] : pairs)
        if (p.train_quantiles[a] == p.train_quantiles[b]) edges.emplace_back(a, b);
      return SimilarityGraph::from_edges(n, edges, GraphRole::kFairness);
    }
    case FairnessConfig::Source::kPairs: {
      auto edges = edges_from_id_pairs(p.train.ids, source.labels.pairs);
      if (const auto* rf = std::get_if<RecordFraction>(&subsample)) {
        Rng rng(sparsity_seed);
        rng.shuffle(edges);
        edges.resize(detail::fraction_count(rf->fraction, edges.size()));
      }
      return SimilarityGraph::from_edges(n, edges, GraphRole::kFairness);
    }
    case FairnessConfig::Source::kEquivalence: {
      auto classes = align_classes(p.train.ids, source.labels.classes);
      if (keep)
        for (std::size_t i = 0; i < n; ++i)
          if (!(*keep)[i]) classes[i].reset();
      return equivalence_graph(classes);
    }
    case FairnessConfig::Source::kScores:
      return detail::quantile_graph_over(p.train.ids, source.labels.scores, keep ? &*keep : nullptr, c.graph,
                                         detail::stream(p.seed, detail::kStreamEdgeCap));
  }
  throw ConfigError("unknown fairness source");
}

/// Held-out W^F over the test records: the oracle's judgment of every test
/// pair, or the label file restricted to test records.
inline SimilarityGraph test_fairness_graph(const ExperimentConfig& c, const SourceData& source, const PreparedRun& p) {
  const std::size_t n = p.test.size();
  switch (c.fairness.source) {
    case FairnessConfig::Source::kOraclePairs: {
      std::vector<std::optional<std::int64_t>> classes(p.test_quantiles.begin(), p.test_quantiles.end());
      return equivalence_graph(classes);
    }
    case FairnessConfig::Source::kPairs:
      return SimilarityGraph::from_edges(n, edges_from_id_pairs(p.test.ids, source.labels.pairs), GraphRole::kFairness);
    case FairnessConfig::Source::kEquivalence:
      return equivalence_graph(align_classes(p.test.ids, source.labels.classes));
    case FairnessConfig::Source::kScores:
      return detail::quantile_graph_over(p.test.ids, source.labels.scores, nullptr, c.graph,
                                         detail::stream(p.seed, detail::kStreamEdgeCap) + 1);
  }
  throw ConfigError("unknown fairness source");
}

// ---------------------------------------------------------------------------
// Pipeline pieces

struct CellKey {
  std::size_t neighbors = 0;
  double gamma = 0.0;
  std::size_t latent_dim = 0;
  auto operator<=>(const CellKey&) const = default;
};

struct GridCell {
  std::size_t run = 0;
  CellKey key;
  std::size_t folds_scored = 0;
  double val_auc = 0.0;
  std::optional<double> val_consistency_wf;
  double score = -std::numeric_limits<double>::infinity();
  std::string status = "ok";
  bool selected = false;
};

struct MethodResult {
  EvaluationReport report;
  nlohmann::json flat;
};

struct RunResult {
  std::size_t run = 0;
  std::uint64_t seed = 0;
  CellKey selected;
  double heat_scale = 0.0;
  std::size_t wf_train_edges = 0;
  std::size_t wf_test_edges = 0;
  MethodResult pfr;
  MethodResult original;
  std::vector<std::string> warnings;
  std::map<std::string, std::size_t> provenance;
};

struct FieldStat {
  double mean = 0.0;
  double std = 0.0;
  std::size_t count = 0;
};

using Aggregate = std::map<std::string, FieldStat>;

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<RunResult> runs;
  std::vector<GridCell> grid;
  Aggregate pfr;
  Aggregate original;
};

/// Mean and sample standard deviation (0 for a single value) of every
/// numeric field across `rows`; null entries are skipped.
inline Aggregate aggregate(const std::vector<nlohmann::json>& rows) {
  std::map<std::string, std::vector<double>> values;
  for (const auto& row : rows)
    for (const auto& [key, v] : row.items())
      if (v.is_number()) values[key].push_back(v.get<double>());
  Aggregate out;
  for (const auto& [key, vs] : values) {
    FieldStat s;
    s.count = vs.size();
    for (double v : vs) s.mean += v;
    s.mean /= static_cast<double>(vs.size());
    if (vs.size() > 1) {
      double ss = 0.0;
      for (double v : vs) ss += (v - s.mean) * (v - s.mean);
      s.std = std::sqrt(ss / static_cast<double>(vs.size() - 1));
    }
    out[key] = s;
  }
  return out;
}

inline EvaluationOptions evaluation_options(const ExperimentConfig& c) {
  EvaluationOptions o;
  o.threshold = c.evaluation.threshold;
  o.probability_consistency = c.evaluation.probability_consistency;
  return o;
}

namespace detail {

inline MethodResult classify_and_evaluate(const ExperimentConfig& c, const Matrix& z_train, const Dataset& train,
                                          const Matrix& z_test, const Dataset& test, const SimilarityGraph& wx_test,
                                          const SimilarityGraph& wf_test) {
  const LogisticModel lr = fit_logreg(z_train, train.labels, c.classifier);
  const auto proba = predict_proba(lr, z_test);
  MethodResult r;
  r.report = evaluate_predictions(proba, test.labels, test.groups, &wx_test, &wf_test, evaluation_options(c));
  r.flat = to_json(r.report);
  return r;
}

inline void check_fold(const Dataset& train, std::span<const std::size_t> rows, const char* what) {
  bool pos = false;
  bool neg = false;
  for (std::size_t i : rows) (train.labels[i] ? pos : neg) = true;
  if (!pos || !neg) throw DataError(std::string("degenerate cross-validation fold: single-class ") + what + " split");
}

}  // namespace detail

/// Standardization fit on train only, plus the derived matrices every
/// downstream step uses.
struct StandardizedRun {
  StandardizationParams params;
  Matrix train;
  Matrix test;
  Matrix train_masked;
  Matrix test_masked;
};

inline StandardizedRun standardize_run(PreparedRun& p) {
  p.provenance.touch(kStageStandardization, p.train.ids);
  StandardizedRun s;
  s.params = standardize_fit(p.train_inputs, p.input_names);
  s.train = standardize_apply(s.params, p.train_inputs);
  s.test = standardize_apply(s.params, p.test_inputs);
  s.train_masked = masked_columns(s.train, s.params, p.masked);
  s.test_masked = masked_columns(s.test, s.params, p.masked);
  if (s.train_masked.cols() == 0) throw DataError("no non-constant unprotected features");
  return s;
}

inline std::vector<std::size_t> default_latent_dims(std::size_t m) {
  std::set<std::size_t> dims;
  for (std::size_t d : {std::size_t{2}, (m + 3) / 4, (m + 1) / 2})
    if (d >= 1 && d <= m) dims.insert(d);
  if (dims.empty()) dims.insert(1);
  return {dims.begin(), dims.end()};
}

/// Grid cells of one run in (neighbors, gamma, latent_dim) order; the
/// selected cell has the highest score, earliest winning ties.
inline std::vector<GridCell> grid_search(const ExperimentConfig& c, PreparedRun& p, const SimilarityGraph& wf_train) {
  const std::size_t n = p.train.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(detail::stream(p.seed, detail::kStreamFolds));
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> fold_val(c.split.folds);
  for (std::size_t k = 0; k < n; ++k) fold_val[k % c.split.folds].push_back(order[k]);

  const std::vector<std::size_t> dims =
      c.grid.latent_dim.empty() ? default_latent_dims(p.train_inputs.cols()) : c.grid.latent_dim;
  std::vector<CellKey> keys;
  for (auto nb : c.grid.neighbors)
    for (double g : c.grid.gamma)
      for (auto d : dims) keys.push_back({nb, g, d});
  std::vector<GridCell> cells(keys.size());
  std::vector<double> sum_score(keys.size(), 0.0);
  std::vector<double> sum_auc(keys.size(), 0.0);
  std::vector<double> sum_cons(keys.size(), 0.0);
  std::vector<std::size_t> cons_folds(keys.size(), 0);
  for (std::size_t k = 0; k < keys.size(); ++k) {
    cells[k].run = p.run;
    cells[k].key = keys[k];
  }

  for (std::size_t f = 0; f < c.split.folds; ++f) {
    std::vector<std::size_t> val = fold_val[f];
    std::sort(val.begin(), val.end());
    std::vector<std::size_t> fit;
    {
      std::vector<bool> in_val(n, false);
      for (std::size_t i : val) in_val[i] = true;
      for (std::size_t i = 0; i < n; ++i)
        if (!in_val[i]) fit.push_back(i);
    }
    detail::check_fold(p.train, fit, "training");
    detail::check_fold(p.train, val, "validation");
    const Dataset fit_ds = p.train.subset(fit);
    const Dataset val_ds = p.train.subset(val);
    p.provenance.touch(kStageGridSearch, fit_ds.ids);
    p.provenance.touch(kStageGridSearch, val_ds.ids);

    const StandardizationParams params = standardize_fit(select_rows(p.train_inputs, fit), p.input_names);
    const Matrix x_fit = standardize_apply(params, select_rows(p.train_inputs, fit));
    const Matrix x_val = standardize_apply(params, select_rows(p.train_inputs, val));
    const Matrix masked_fit = masked_columns(x_fit, params, p.masked);
    const SimilarityGraph wf_fit = wf_train.induced(fit);
    const SimilarityGraph wf_val = wf_train.induced(val);

    std::map<std::size_t, SimilarityGraph> wx_by_p;
    for (std::size_t k = 0; k < keys.size(); ++k) {
      GridCell& cell = cells[k];
      if (cell.status != "ok") continue;
      try {
        auto it = wx_by_p.find(keys[k].neighbors);
        if (it == wx_by_p.end()) {
          it = wx_by_p.emplace(keys[k].neighbors, knn_heat_graph(masked_fit, keys[k].neighbors, c.graph.heat_scale).graph)
                   .first;
        }
        const PfrModel model = fit_linear(x_fit, it->second, wf_fit, keys[k].gamma, keys[k].latent_dim);
        const LogisticModel lr = fit_logreg(transform(model, x_fit), fit_ds.labels, c.classifier);
        const auto proba = predict_proba(lr, transform(model, x_val));
        const double a = auc(proba, val_ds.labels);
        double score = c.selection.auc_weight * a;
        if (!wf_val.is_empty()) {
          const auto yhat = threshold_predictions(proba, c.evaluation.threshold);
          const double cons = c.evaluation.probability_consistency ? consistency(proba, wf_val)
                                                                   : consistency(std::span<const int>(yhat), wf_val);
          score += c.selection.consistency_weight * cons;
          sum_cons[k] += cons;
          ++cons_folds[k];
        }
        sum_auc[k] += a;
        sum_score[k] += score;
        ++cell.folds_scored;
      } catch (const Error& e) {
        cell.status = e.what();
      }
    }
  }

  std::optional<std::size_t> best;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    GridCell& cell = cells[k];
    if (cell.status != "ok") continue;
    const auto folds = static_cast<double>(cell.folds_scored);
    cell.score = sum_score[k] / folds;
    cell.val_auc = sum_auc[k] / folds;
    if (cons_folds[k] > 0) cell.val_consistency_wf = sum_cons[k] / static_cast<double>(cons_folds[k]);
    if (!best || cell.score > cells[*best].score) best = k;
  }
  if (!best) throw NumericalError("every grid cell failed in run " + std::to_string(p.run));
  cells[*best].selected = true;
  return cells;
}

/// Final PFR fit on the full training split, with its test evaluation.
struct PfrFit {
  PfrModel model;
  double heat_scale = 0.0;
  MethodResult result;
};

inline PfrFit fit_and_evaluate_pfr(const ExperimentConfig& c, PreparedRun& p, const StandardizedRun& s,
                                   const SimilarityGraph& wf_train, const CellKey& key,
                                   const SimilarityGraph& wx_test, const SimilarityGraph& wf_test) {
  p.provenance.touch(kStageModelFit, p.train.ids);
  const KnnGraphResult wx = knn_heat_graph(s.train_masked, key.neighbors, c.graph.heat_scale);
  PfrFit out;
  out.heat_scale = wx.scale;
  out.model = fit_linear(s.train, wx.graph, wf_train, key.gamma, key.latent_dim);
  out.model.standardization = s.params;
  p.provenance.touch(kStageClassifierFit, p.train.ids);
  out.result = detail::classify_and_evaluate(c, transform(out.model, s.train), p.train, transform(out.model, s.test),
                                             p.test, wx_test, wf_test);
  return out;
}

inline MethodResult evaluate_original(const ExperimentConfig& c, PreparedRun& p, const StandardizedRun& s,
                                      const SimilarityGraph& wx_test, const SimilarityGraph& wf_test) {
  p.provenance.touch(kStageClassifierFit, p.train.ids);
  return detail::classify_and_evaluate(c, s.train_masked, p.train, s.test_masked, p.test, wx_test, wf_test);
}

inline SimilarityGraph test_similarity_graph(const ExperimentConfig& c, const StandardizedRun& s) {
  return knn_heat_graph(s.test_masked, c.evaluation.neighbors, c.graph.heat_scale).graph;
}

inline std::map<std::string, std::size_t> provenance_counts(const Provenance& prov) {
  std::map<std::string, std::size_t> out;
  for (const auto& [stage, ids] : prov.touched()) out[stage] = ids.size();
  return out;
}

// ---------------------------------------------------------------------------
// Experiment

inline ExperimentResult run_experiment(const ExperimentConfig& config) {
  validate(config);
  ExperimentResult result;
  result.config = config;
  const SourceData source = load_source(config);
  std::vector<nlohmann::json> pfr_rows;
  std::vector<nlohmann::json> original_rows;

  for (std::size_t run = 0; run < config.split.runs; ++run) {
    PreparedRun p = prepare_run(config, source, run);
    const SimilarityGraph wf_train = train_fairness_graph(config, source, p);
    const SimilarityGraph wf_test = test_fairness_graph(config, source, p);

    RunResult r;
    r.run = run;
    r.seed = p.seed;
    r.wf_train_edges = wf_train.edge_count();
    r.wf_test_edges = wf_test.edge_count();
    if (wf_train.is_empty()) r.warnings.push_back("training fairness graph W^F has no edges");
    if (wf_test.is_empty()) r.warnings.push_back("held-out fairness graph W^F has no edges");

    auto cells = grid_search(config, p, wf_train);
    const auto chosen = std::find_if(cells.begin(), cells.end(), [](const GridCell& g) { return g.selected; });
    r.selected = chosen->key;

    const StandardizedRun s = standardize_run(p);
    const SimilarityGraph wx_test = test_similarity_graph(config, s);
    const PfrFit fit = fit_and_evaluate_pfr(config, p, s, wf_train, r.selected, wx_test, wf_test);
    r.heat_scale = fit.heat_scale;
    r.pfr = fit.result;
    for (const auto& w : fit.model.warnings) r.warnings.push_back(w);
    r.original = evaluate_original(config, p, s, wx_test, wf_test);
    r.provenance = provenance_counts(p.provenance);

    pfr_rows.push_back(r.pfr.flat);
    original_rows.push_back(r.original.flat);
    result.grid.insert(result.grid.end(), cells.begin(), cells.end());
    result.runs.push_back(std::move(r));
  }
  result.pfr = aggregate(pfr_rows);
  result.original = aggregate(original_rows);
  return result;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepRow {
  double value = 0.0;
  Aggregate fields;
  std::size_t runs_ok = 0;
  std::vector<std::string> warnings;
};

struct SweepResult {
  std::string parameter;
  ExperimentConfig config;
  std::vector<SweepRow> rows;
};

/// One PFR fit and test evaluation per gamma per run, other settings from
/// `config.model`.
inline SweepResult sweep_gamma(const ExperimentConfig& config, const std::vector<double>& gammas) {
  validate(config);
  if (gammas.empty()) throw ConfigError("gamma sweep needs at least one value");
  for (double g : gammas)
    if (!(g >= 0.0 && g <= 1.0)) throw ConfigError("gamma sweep values must lie in [0, 1]");
  SweepResult out;
  out.parameter = "gamma";
  out.config = config;
  out.config.sweep.gamma = gammas;
  const SourceData source = load_source(config);
  std::vector<std::vector<nlohmann::json>> per_value(gammas.size());
  std::vector<std::vector<std::string>> warnings(gammas.size());

  for (std::size_t run = 0; run < config.split.runs; ++run) {
    PreparedRun p = prepare_run(config, source, run);
    const SimilarityGraph wf_train = train_fairness_graph(config, source, p);
    const SimilarityGraph wf_test = test_fairness_graph(config, source, p);
    const StandardizedRun s = standardize_run(p);
    const SimilarityGraph wx_test = test_similarity_graph(config, s);
    for (std::size_t k = 0; k < gammas.size(); ++k) {
      try {
        const CellKey key{config.model.neighbors, gammas[k], config.model.latent_dim};
        per_value[k].push_back(fit_and_evaluate_pfr(config, p, s, wf_train, key, wx_test, wf_test).result.flat);
      } catch (const NumericalError& e) {
        warnings[k].push_back("run " + std::to_string(run) + ": " + e.what());
      }
    }
  }
  for (std::size_t k = 0; k < gammas.size(); ++k) {
    SweepRow row;
    row.value = gammas[k];
    row.fields = aggregate(per_value[k]);
    row.runs_ok = per_value[k].size();
    row.warnings = warnings[k];
    out.rows.push_back(std::move(row));
  }
  return out;
}

/// Label-budget sweep. Oracle pair sources sweep pair budgets (nested
/// prefixes of one seeded pair order per run); file sources sweep the
/// fraction of training records whose labels are kept. Evaluation always
/// uses the full held-out W^F.
inline SweepResult sweep_sparsity(const ExperimentConfig& config, std::vector<double> values = {}) {
  validate(config);
  const bool pairs = config.fairness.source == FairnessConfig::Source::kOraclePairs;
  SweepResult out;
  out.parameter = pairs ? "pair_budget" : "label_fraction";
  out.config = config;
  const SourceData source = load_source(config);

  if (values.empty()) {
    if (pairs) {
      const auto budgets = config.sweep.budgets.empty() ? budget_ladder(config.dataset.n_train) : config.sweep.budgets;
      values.assign(budgets.begin(), budgets.end());
    } else {
      values = config.sweep.fractions;
    }
  }
  for (double v : values) {
    if (pairs && !(v >= 0.0 && v == std::floor(v))) throw ConfigError("pair budgets must be nonnegative integers");
    if (!pairs && !(v > 0.0 && v <= 1.0)) throw ConfigError("label fractions must lie in (0, 1]");
  }
  if (pairs) {
    out.config.sweep.budgets.clear();
    for (double v : values) out.config.sweep.budgets.push_back(static_cast<std::uint64_t>(v));
  } else {
    out.config.sweep.fractions = values;
  }

  std::vector<std::vector<nlohmann::json>> per_value(values.size());
  std::vector<std::vector<std::string>> warnings(values.size());
  for (std::size_t run = 0; run < config.split.runs; ++run) {
    PreparedRun p = prepare_run(config, source, run);
    const SimilarityGraph wf_test = test_fairness_graph(config, source, p);
    const StandardizedRun s = standardize_run(p);
    const SimilarityGraph wx_test = test_similarity_graph(config, s);
    for (std::size_t k = 0; k < values.size(); ++k) {
      LabelSubsample sub;
      if (pairs) {
        sub = PairBudget{static_cast<std::uint64_t>(values[k])};
      } else {
        sub = RecordFraction{values[k]};
      }
      const SimilarityGraph wf_train = train_fairness_graph(config, source, p, sub);
      if (wf_train.is_empty()) warnings[k].push_back("run " + std::to_string(run) + ": training W^F has no edges");
      try {
        const CellKey key{config.model.neighbors, config.model.gamma, config.model.latent_dim};
        auto fit = fit_and_evaluate_pfr(config, p, s, wf_train, key, wx_test, wf_test);
        fit.result.flat["wf_train_edges"] = wf_train.edge_count();
        per_value[k].push_back(fit.result.flat);
      } catch (const NumericalError& e) {
        warnings[k].push_back("run " + std::to_string(run) + ": " + e.what());
      }
    }
  }
  for (std::size_t k = 0; k < values.size(); ++k) {
    SweepRow row;
    row.value = values[k];
    row.fields = aggregate(per_value[k]);
    row.runs_ok = per_value[k].size();
    row.warnings = warnings[k];
    out.rows.push_back(std::move(row));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports

namespace detail {

inline std::string fixed6(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(6) << v;
  return os.str();
}

inline std::string csv_cell(const nlohmann::json& v) {
  if (v.is_number_float()) return fixed6(v.get<double>());
  if (v.is_number()) return v.dump();
  if (v.is_string()) return csv::quote(v.get<std::string>());
  return "";
}

inline nlohmann::json to_json(const Aggregate& a) {
  nlohmann::json mean;
  nlohmann::json stddev;
  nlohmann::json count;
  for (const auto& [key, s] : a) {
    mean[key] = s.mean;
    stddev[key] = s.std;
    count[key] = s.count;
  }
  return {{"mean", mean}, {"std", stddev}, {"count", count}};
}

inline nlohmann::json to_json(const CellKey& k) {
  return {{"neighbors", k.neighbors}, {"gamma", k.gamma}, {"latent_dim", k.latent_dim}};
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
}

inline std::filesystem::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory '" + dir + "': " + ec.message());
  return dir;
}

inline nlohmann::json report_notes() {
  return {{"validation_consistency",
           "consistency_wf on validation folds uses the subgraph of W^F induced by the validation records; folds "
           "whose induced subgraph is empty contribute AUC only"},
          {"selection", "score = auc_weight * AUC + consistency_weight * consistency_wf, mean over folds"},
          {"std", "sample standard deviation across runs"}};
}

}  // namespace detail

inline nlohmann::json to_json(const ExperimentResult& r) {
  nlohmann::json j;
  j["config"] = to_json(r.config);
  j["seed"] = r.config.seed;
  j["notes"] = detail::report_notes();
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& run : r.runs) {
    runs.push_back({{"run", run.run},
                    {"seed", run.seed},
                    {"selected", detail::to_json(run.selected)},
                    {"heat_scale", run.heat_scale},
                    {"wf_train_edges", run.wf_train_edges},
                    {"wf_test_edges", run.wf_test_edges},
                    {"pfr", run.pfr.flat},
                    {"original", run.original.flat},
                    {"warnings", run.warnings},
                    {"provenance", run.provenance}});
  }
  j["runs"] = runs;
  j["aggregate"] = {{"pfr", detail::to_json(r.pfr)}, {"original", detail::to_json(r.original)}};
  return j;
}

inline std::string runs_csv(const ExperimentResult& r) {
  std::set<std::string> keys;
  for (const auto& run : r.runs)
    for (const auto* flat : {&run.pfr.flat, &run.original.flat})
      for (const auto& [k, _] : flat->items()) keys.insert(k);
  std::ostringstream os;
  os << "run,method,neighbors,gamma,latent_dim";
  for (const auto& k : keys) os << ',' << k;
  os << '\n';
  for (const auto& run : r.runs) {
    for (const auto& [method, flat] : {std::pair{"pfr", &run.pfr.flat}, std::pair{"original", &run.original.flat}}) {
      os << run.run << ',' << method;
      if (std::string(method) == "pfr") {
        os << ',' << run.selected.neighbors << ',' << detail::fixed6(run.selected.gamma) << ','
           << run.selected.latent_dim;
      } else {
        os << ",,,";
      }
      for (const auto& k : keys) os << ',' << (flat->contains(k) ? detail::csv_cell((*flat)[k]) : "");
      os << '\n';
    }
  }
  return os.str();
}

inline std::string grid_csv(const ExperimentResult& r) {
  std::vector<GridCell> cells = r.grid;
  std::stable_sort(cells.begin(), cells.end(),
                   [](const GridCell& a, const GridCell& b) { return std::tie(a.run, a.key) < std::tie(b.run, b.key); });
  std::ostringstream os;
  os << "run,neighbors,gamma,latent_dim,folds_scored,val_auc,val_consistency_wf,score,selected,status\n";
  for (const auto& c : cells) {
    const bool ok = c.status == "ok";
    os << c.run << ',' << c.key.neighbors << ',' << detail::fixed6(c.key.gamma) << ',' << c.key.latent_dim << ','
       << c.folds_scored << ',' << (ok ? detail::fixed6(c.val_auc) : "") << ','
       << (c.val_consistency_wf ? detail::fixed6(*c.val_consistency_wf) : "") << ','
       << (ok ? detail::fixed6(c.score) : "") << ',' << (c.selected ? 1 : 0) << ',' << csv::quote(c.status) << '\n';
  }
  return os.str();
}

inline nlohmann::json to_json(const SweepResult& s) {
  nlohmann::json j;
  j["config"] = to_json(s.config);
  j["seed"] = s.config.seed;
  j["parameter"] = s.parameter;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : s.rows) {
    auto agg = detail::to_json(row.fields);
    rows.push_back({{"value", row.value},
                    {"runs_ok", row.runs_ok},
                    {"warnings", row.warnings},
                    {"mean", agg["mean"]},
                    {"std", agg["std"]},
                    {"count", agg["count"]}});
  }
  j["rows"] = rows;
  return j;
}

inline std::string sweep_csv(const SweepResult& s) {
  std::set<std::string> keys;
  for (const auto& row : s.rows)
    for (const auto& [k, _] : row.fields) keys.insert(k);
  std::ostringstream os;
  os << s.parameter << ",runs_ok";
  for (const auto& k : keys) os << ',' << k << "_mean," << k << "_std";
  os << ",warnings\n";
  for (const auto& row : s.rows) {
    os << (s.parameter == "pair_budget" ? std::to_string(static_cast<std::uint64_t>(row.value)) : detail::fixed6(row.value))
       << ',' << row.runs_ok;
    for (const auto& k : keys) {
      const auto it = row.fields.find(k);
      if (it == row.fields.end()) {
        os << ",,";
      } else {
        os << ',' << detail::fixed6(it->second.mean) << ',' << detail::fixed6(it->second.std);
      }
    }
    os << ',' << row.warnings.size() << '\n';
  }
  return os.str();
}

inline void write_outputs(const ExperimentResult& r, const std::string& dir) {
  const auto root = detail::prepare_dir(dir);
  detail::write_text(root / "report.json", to_json(r).dump(2) + "\n");
  detail::write_text(root / "runs.csv", runs_csv(r));
  detail::write_text(root / "grid.csv", grid_csv(r));
}

inline void write_outputs(const SweepResult& s, const std::string& dir) {
  const auto root = detail::prepare_dir(dir);
  detail::write_text(root / "report.json", to_json(s).dump(2) + "\n");
  detail::write_text(root / "sweep.csv", sweep_csv(s));
}

}  // namespace pfr
