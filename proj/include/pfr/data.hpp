#pragma once

// Datasets, CSV ingestion, the synthetic admissions generator with its
// fairness oracle, and conversion of elicited fairness labels into graph
// inputs.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "pfr/downstream.hpp"
#include "pfr/errors.hpp"
#include "pfr/graph.hpp"
#include "pfr/linalg.hpp"
#include "pfr/preprocess.hpp"
#include "pfr/random.hpp"

namespace pfr {

/// Records with protected attributes held apart from the features. Group
/// values are coded 0..|S|-1 in lexicographic order of their raw values.
struct Dataset {
  std::vector<std::string> ids;
  Matrix features;
  std::vector<int> labels;
  std::vector<int> groups;
  std::vector<std::string> group_values;
  std::vector<std::string> feature_names;
  std::string group_attribute = "group";

  std::size_t size() const noexcept { return ids.size(); }
  std::size_t feature_count() const noexcept { return features.cols(); }

  Dataset subset(std::span<const std::size_t> rows) const {
    Dataset out;
    out.features = Matrix(rows.size(), features.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const std::size_t i = rows[r];
      out.ids.push_back(ids[i]);
      out.labels.push_back(labels[i]);
      out.groups.push_back(groups[i]);
      std::copy(features.row(i).begin(), features.row(i).end(), out.features.row(r).begin());
    }
    out.group_values = group_values;
    out.feature_names = feature_names;
    out.group_attribute = group_attribute;
    return out;
  }

  std::unordered_map<std::string, std::size_t> index_by_id() const {
    std::unordered_map<std::string, std::size_t> map;
    for (std::size_t i = 0; i < ids.size(); ++i) map.emplace(ids[i], i);
    return map;
  }

  /// Throws DataError when lengths disagree, a feature is non-finite, or
  /// (with `require_both_labels`) one label value is missing.
  void validate(bool require_both_labels = true) const {
    const std::size_t n = ids.size();
    if (features.rows() != n || labels.size() != n || groups.size() != n) {
      throw DataError("dataset columns have inconsistent lengths");
    }
    if (feature_names.size() != features.cols()) throw DataError("feature names do not match feature count");
    if (!all_finite(features)) throw DataError("dataset features must be finite");
    if (require_both_labels) {
      const bool pos = std::find(labels.begin(), labels.end(), 1) != labels.end();
      const bool neg = std::find(labels.begin(), labels.end(), 0) != labels.end();
      if (!pos || !neg) throw DataError("dataset labels contain a single class");
    }
  }
};

// ---------------------------------------------------------------------------
// CSV

namespace csv {

/// Splits one CSV line; double quotes group fields, "" escapes a quote.
inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

inline std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

inline std::optional<double> parse_double(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty()) return std::nullopt;
  double value = 0.0;
  const auto* first = t.data();
  const auto* last = t.data() + t.size();
  const auto result = std::from_chars(first, last, value);
  if (result.ec != std::errc() || result.ptr != last || !std::isfinite(value)) return std::nullopt;
  return value;
}

inline std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

struct Table {
  std::vector<std::string> header;
  /// Data rows with their 1-based file line numbers.
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;

  std::optional<std::size_t> column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  }
};

inline Table read_table(std::istream& in, const std::string& source) {
  Table table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    auto fields = split_line(line);
    for (auto& f : fields) f = trim(f);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw DataError(source + ": line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                      " fields, header has " + std::to_string(table.header.size()));
    }
    table.rows.emplace_back(line_no, std::move(fields));
  }
  if (!have_header) throw DataError(source + ": empty file");
  return table;
}

inline Table read_table_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_table(in, path);
}

}  // namespace csv

struct CsvSchema {
  std::string label_column = "label";
  std::string group_column = "group";
  /// Record identifier column; absent means ids are data-row numbers.
  std::optional<std::string> id_column = std::string("id");
  std::vector<std::string> categorical_columns;
  /// Extra columns to leave out of the features entirely.
  std::vector<std::string> ignored_columns;
};

/// Parses a headed CSV into a Dataset. Categorical columns are one-hot
/// encoded ("column=level", levels sorted); the group column never becomes a
/// feature.
inline Dataset load_csv(std::istream& in, const CsvSchema& schema, const std::string& source = "<csv>") {
  const csv::Table table = csv::read_table(in, source);
  if (table.rows.empty()) throw DataError(source + ": no data rows");

  const auto require = [&](const std::string& name) {
    const auto idx = table.column(name);
    if (!idx) throw DataError(source + ": missing column '" + name + "'");
    return *idx;
  };
  const std::size_t label_idx = require(schema.label_column);
  const std::size_t group_idx = require(schema.group_column);
  std::optional<std::size_t> id_idx;
  if (schema.id_column) id_idx = table.column(*schema.id_column);

  std::set<std::size_t> categorical;
  for (const auto& c : schema.categorical_columns) categorical.insert(require(c));
  std::set<std::size_t> ignored;
  for (const auto& c : schema.ignored_columns) ignored.insert(require(c));

  struct FeatureColumn {
    std::size_t source;
    std::optional<std::string> level;
  };
  std::vector<FeatureColumn> columns;
  Dataset ds;
  ds.group_attribute = schema.group_column;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c == label_idx || c == group_idx || (id_idx && c == *id_idx) || ignored.count(c)) continue;
    if (categorical.count(c)) {
      std::set<std::string> levels;
      for (const auto& [line, fields] : table.rows) levels.insert(fields[c]);
      for (const auto& level : levels) {
        columns.push_back({c, level});
        ds.feature_names.push_back(table.header[c] + "=" + level);
      }
    } else {
      columns.push_back({c, std::nullopt});
      ds.feature_names.push_back(table.header[c]);
    }
  }

  std::set<std::string> group_levels;
  for (const auto& [line, fields] : table.rows) group_levels.insert(fields[group_idx]);
  ds.group_values.assign(group_levels.begin(), group_levels.end());
  std::map<std::string, int> group_code;
  for (std::size_t g = 0; g < ds.group_values.size(); ++g) group_code[ds.group_values[g]] = static_cast<int>(g);

  ds.features = Matrix(table.rows.size(), columns.size());
  std::unordered_set<std::string> seen_ids;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& [line, fields] = table.rows[r];
    const auto where = [&, line = line](const std::string& column) {
      return source + ": line " + std::to_string(line) + ", column '" + column + "'";
    };
    const auto label = csv::parse_double(fields[label_idx]);
    if (!label || (*label != 0.0 && *label != 1.0)) {
      throw DataError(where(schema.label_column) + ": label must be 0 or 1, got '" + fields[label_idx] + "'");
    }
    ds.labels.push_back(static_cast<int>(*label));
    ds.groups.push_back(group_code.at(fields[group_idx]));
    std::string id = id_idx ? fields[*id_idx] : std::to_string(r);
    if (!seen_ids.insert(id).second) throw DataError(where(id_idx ? table.header[*id_idx] : "id") + ": duplicate id '" + id + "'");
    ds.ids.push_back(std::move(id));
    for (std::size_t k = 0; k < columns.size(); ++k) {
      const auto& col = columns[k];
      if (col.level) {
        ds.features(r, k) = fields[col.source] == *col.level ? 1.0 : 0.0;
      } else {
        const auto v = csv::parse_double(fields[col.source]);
        if (!v) {
          throw DataError(where(table.header[col.source]) + ": cannot parse '" + fields[col.source] +
                          "' as a number");
        }
        ds.features(r, k) = *v;
      }
    }
  }
  ds.validate(true);
  return ds;
}

inline Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return load_csv(in, schema, path);
}

/// Writes columns id, group, label, then the features, in the schema
/// load_csv reads by default.
inline void write_csv(const Dataset& ds, std::ostream& out) {
  out << "id," << csv::quote(ds.group_attribute) << ",label";
  for (const auto& name : ds.feature_names) out << ',' << csv::quote(name);
  out << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << csv::quote(ds.ids[i]) << ',' << csv::quote(ds.group_values.at(static_cast<std::size_t>(ds.groups[i])))
        << ',' << ds.labels[i];
    for (double v : ds.features.row(i)) out << ',' << csv::format_double(v);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Synthetic admissions data

enum class SyntheticVariant {
  /// academic, supplementary, 100 academic-related, 100 supplementary-related.
  kFull,
  /// academic and supplementary only.
  kLowDimension,
};

struct SyntheticOptions {
  std::size_t n_train = 600;
  std::size_t n_test = 400;
  std::uint64_t seed = 0;
  SyntheticVariant variant = SyntheticVariant::kFull;
};

inline constexpr double kBaseCorrelation = 0.3;
inline constexpr std::size_t kRelatedFeatures = 100;

/// Two equal-size groups; s = 0 is the non-protected group whose
/// supplementary-related features sit one standard deviation higher. Labels:
/// positive iff academic + supplementary >= 0 (s = 1) or >= 1 (s = 0).
/// Returns (train, test) with the first n_train records as training.
inline std::pair<Dataset, Dataset> generate_synthetic(const SyntheticOptions& options) {
  const std::size_t n = options.n_train + options.n_test;
  Rng rng(options.seed);

  std::vector<double> rho_academic(kRelatedFeatures);
  std::vector<double> rho_supplementary(kRelatedFeatures);
  for (double& r : rho_academic) r = rng.uniform(0.75, 1.0);
  for (double& r : rho_supplementary) r = rng.uniform(0.75, 1.0);

  std::vector<int> groups(n);
  for (std::size_t i = 0; i < n; ++i) groups[i] = i < n / 2 ? 0 : 1;
  rng.shuffle(groups);

  const bool full = options.variant == SyntheticVariant::kFull;
  const std::size_t m = full ? 2 + 2 * kRelatedFeatures : 2;
  Dataset all;
  all.features = Matrix(n, m);
  all.group_values = {"0", "1"};
  all.group_attribute = "group";
  all.feature_names = {"academic", "supplementary"};
  if (full) {
    for (std::size_t k = 0; k < kRelatedFeatures; ++k) {
      std::ostringstream name;
      name << "academic_rel_" << std::setw(3) << std::setfill('0') << k;
      all.feature_names.push_back(name.str());
    }
    for (std::size_t k = 0; k < kRelatedFeatures; ++k) {
      std::ostringstream name;
      name << "supplementary_rel_" << std::setw(3) << std::setfill('0') << k;
      all.feature_names.push_back(name.str());
    }
  }

  const double residual = std::sqrt(1.0 - kBaseCorrelation * kBaseCorrelation);
  for (std::size_t i = 0; i < n; ++i) {
    const double shift = groups[i] == 0 ? 1.0 : 0.0;
    const double academic = rng.normal();
    const double supplementary = kBaseCorrelation * academic + residual * rng.normal();
    auto row = all.features.row(i);
    row[0] = academic;
    row[1] = supplementary + shift;
    // Related features are drawn even for the low-dimension variant so both
    // variants share base features under the same seed.
    for (std::size_t k = 0; k < kRelatedFeatures; ++k) {
      const double rho = rho_academic[k];
      const double v = rho * academic + std::sqrt(1.0 - rho * rho) * rng.normal();
      if (full) row[2 + k] = v;
    }
    for (std::size_t k = 0; k < kRelatedFeatures; ++k) {
      const double rho = rho_supplementary[k];
      const double v = rho * supplementary + std::sqrt(1.0 - rho * rho) * rng.normal() + shift;
      if (full) row[2 + kRelatedFeatures + k] = v;
    }
    const double threshold = groups[i] == 0 ? 1.0 : 0.0;
    all.labels.push_back(row[0] + row[1] >= threshold ? 1 : 0);
    all.groups.push_back(groups[i]);
    std::ostringstream id;
    id << 'r' << std::setw(5) << std::setfill('0') << i;
    all.ids.push_back(id.str());
  }

  std::vector<std::size_t> train_rows(options.n_train);
  std::vector<std::size_t> test_rows(options.n_test);
  std::iota(train_rows.begin(), train_rows.end(), std::size_t{0});
  std::iota(test_rows.begin(), test_rows.end(), options.n_train);
  return {all.subset(train_rows), all.subset(test_rows)};
}

// ---------------------------------------------------------------------------
// Fairness oracle

/// Per-group logistic models whose logits are bucketed into K per-group
/// quantiles of the training records. Two records are judged equally
/// deserving when they land in the same quantile of their own group.
struct FairnessOracle {
  StandardizationParams standardization;
  std::map<int, LogisticModel> models;
  /// Per group: (upper logit edge, quantile index) for each non-empty bucket,
  /// ascending.
  std::map<int, std::vector<std::pair<double, int>>> edges;
  int quantile_count = 10;
};

inline double oracle_score(const FairnessOracle& oracle, std::span<const double> x, int group) {
  const auto it = oracle.models.find(group);
  if (it == oracle.models.end()) throw DataError("fairness oracle has no model for group " + std::to_string(group));
  const auto z = standardize_apply(oracle.standardization, x);
  return detail::affine_score(it->second.weights, z);
}

inline int oracle_quantile(const FairnessOracle& oracle, std::span<const double> x, int group) {
  const double score = oracle_score(oracle, x, group);
  const auto& e = oracle.edges.at(group);
  for (const auto& [upper, q] : e)
    if (score <= upper) return q;
  return e.back().second;
}

/// Ranks by logit rather than probability: the two orders agree, but
/// probabilities saturate on well-separated groups.
inline FairnessOracle oracle_fit(const Dataset& train, int quantile_count = 10, const LogisticOptions& options = {}) {
  if (quantile_count < 1) throw ParameterError("oracle quantile count must be >= 1");
  std::set<int> present(train.groups.begin(), train.groups.end());
  if (present.size() < 2) throw DataError("fairness oracle needs at least two groups in the training data");

  FairnessOracle oracle;
  oracle.quantile_count = quantile_count;
  oracle.standardization = standardize_fit(train.features, train.feature_names);
  const Matrix z = standardize_apply(oracle.standardization, train.features);
  for (int g : present) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < train.size(); ++i)
      if (train.groups[i] == g) rows.push_back(i);
    Matrix zg(rows.size(), z.cols());
    std::vector<int> yg;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      std::copy(z.row(rows[r]).begin(), z.row(rows[r]).end(), zg.row(r).begin());
      yg.push_back(train.labels[rows[r]]);
    }
    LogisticModel model;
    try {
      model = fit_logreg(zg, yg, options);
    } catch (const TrainingError& e) {
      throw DataError("fairness oracle for group " + std::to_string(g) + ": " + e.what());
    }
    std::vector<double> scores(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) scores[r] = detail::affine_score(model.weights, zg.row(r));
    const std::vector<int> same(rows.size(), g);
    const auto qa = quantile_assign(same, std::span<const double>(scores), quantile_count);
    std::map<int, double> upper;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const int q = qa.quantiles[r];
      const auto it = upper.find(q);
      if (it == upper.end() || scores[r] > it->second) upper[q] = scores[r];
    }
    auto& e = oracle.edges[g];
    for (const auto& [q, u] : upper) e.emplace_back(u, q);
    oracle.models.emplace(g, std::move(model));
  }
  return oracle;
}

inline bool oracle_judge(const FairnessOracle& oracle, std::span<const double> xa, int group_a,
                         std::span<const double> xb, int group_b) {
  return oracle_quantile(oracle, xa, group_a) == oracle_quantile(oracle, xb, group_b);
}

inline bool oracle_judge(const FairnessOracle& oracle, const Dataset& ds, std::size_t i, std::size_t j) {
  return oracle_judge(oracle, ds.features.row(i), ds.groups[i], ds.features.row(j), ds.groups[j]);
}

/// Oracle quantile of every record in `ds`.
inline std::vector<int> oracle_quantiles(const FairnessOracle& oracle, const Dataset& ds) {
  std::vector<int> q(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) q[i] = oracle_quantile(oracle, ds.features.row(i), ds.groups[i]);
  return q;
}

// ---------------------------------------------------------------------------
// Pair sampling and label conversion

inline std::uint64_t unordered_pair_count(std::size_t n) {
  return n < 2 ? 0 : static_cast<std::uint64_t>(n) * (n - 1) / 2;
}

/// Uniform sample of `budget` distinct unordered pairs (i < j) without
/// replacement (Floyd's algorithm), returned in lexicographic order.
inline std::vector<Edge> sample_pairs(std::size_t n, std::uint64_t budget, std::uint64_t seed) {
  const std::uint64_t total = unordered_pair_count(n);
  if (budget > total) {
    throw ParameterError("pair budget " + std::to_string(budget) + " exceeds the " + std::to_string(total) +
                         " unordered pairs of " + std::to_string(n) + " records");
  }
  Rng rng(seed);
  std::unordered_set<std::uint64_t> chosen;
  chosen.reserve(static_cast<std::size_t>(budget) * 2);
  for (std::uint64_t j = total - budget; j < total; ++j) {
    const std::uint64_t t = rng.below(j + 1);
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  std::vector<std::uint64_t> linear(chosen.begin(), chosen.end());
  std::sort(linear.begin(), linear.end());

  std::vector<Edge> pairs;
  pairs.reserve(linear.size());
  std::size_t row = 0;
  std::uint64_t row_start = 0;
  for (const std::uint64_t k : linear) {
    while (k >= row_start + (n - 1 - row)) {
      row_start += n - 1 - row;
      ++row;
    }
    pairs.emplace_back(row, row + 1 + static_cast<std::size_t>(k - row_start));
  }
  return pairs;
}

/// Equivalence class of a star rating in [1, 5]: the count of half stars
/// after rounding to the nearest half star, midpoints upward (4.25 -> 9,
/// i.e. 4.5 stars).
inline std::int64_t half_star_class(double rating) {
  if (!(rating >= 1.0 && rating <= 5.0)) {
    throw DataError("star rating " + std::to_string(rating) + " outside [1, 5]");
  }
  return static_cast<std::int64_t>(std::floor(2.0 * rating + 0.5));
}

inline double half_star_value(std::int64_t cls) { return static_cast<double>(cls) / 2.0; }

inline std::map<std::string, std::int64_t> ratings_to_equivalence(const std::map<std::string, double>& ratings) {
  std::map<std::string, std::int64_t> out;
  for (const auto& [id, r] : ratings) out.emplace(id, half_star_class(r));
  return out;
}

/// Per-record class aligned with `ids`; ids without a class are nullopt.
template <typename Class>
std::vector<std::optional<std::int64_t>> align_classes(const std::vector<std::string>& ids,
                                                       const std::map<std::string, Class>& classes) {
  std::map<Class, std::int64_t> code;
  for (const auto& [id, c] : classes) code.emplace(c, static_cast<std::int64_t>(code.size()));
  std::vector<std::optional<std::int64_t>> out(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto it = classes.find(ids[i]);
    if (it != classes.end()) out[i] = code.at(it->second);
  }
  return out;
}

struct ScoredRecord {
  std::string id;
  std::string group;
  double score = 0.0;
};

/// Records in canonical id order with group codes (lexicographic over group
/// values) and within-group quantiles. Sorting by id first makes the
/// quantile tie-break (lower record index) a tie-break by id.
struct GroupRanking {
  std::vector<std::string> ids;
  std::vector<std::string> group_values;
  QuantileAssignment assignment;
};

inline GroupRanking scores_to_group_rankings(std::vector<ScoredRecord> records, int quantile_count) {
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < records.size(); ++i)
    if (records[i].id == records[i - 1].id) throw DataError("duplicate id '" + records[i].id + "' in scores");
  std::set<std::string> levels;
  for (const auto& r : records) levels.insert(r.group);
  if (levels.size() < 2) throw ParameterError("per-group rankings need at least two groups");

  GroupRanking out;
  out.group_values.assign(levels.begin(), levels.end());
  std::map<std::string, int> code;
  for (std::size_t g = 0; g < out.group_values.size(); ++g) code[out.group_values[g]] = static_cast<int>(g);
  std::vector<int> groups;
  std::vector<double> scores;
  for (const auto& r : records) {
    if (!std::isfinite(r.score)) throw DataError("non-finite score for id '" + r.id + "'");
    out.ids.push_back(r.id);
    groups.push_back(code.at(r.group));
    scores.push_back(r.score);
  }
  out.assignment = quantile_assign(groups, std::span<const double>(scores), quantile_count);
  return out;
}

/// Quantile assignment over `ids` (unscored ids unlabeled) using the group
/// codes of the ranking.
inline QuantileAssignment align_ranking(const std::vector<std::string>& ids, const GroupRanking& ranking) {
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < ranking.ids.size(); ++i) pos.emplace(ranking.ids[i], i);
  QuantileAssignment qa;
  qa.quantile_count = ranking.assignment.quantile_count;
  for (const auto& id : ids) {
    const auto it = pos.find(id);
    if (it == pos.end()) {
      qa.groups.push_back(-1);
      qa.quantiles.push_back(0);
    } else {
      qa.groups.push_back(ranking.assignment.groups[it->second]);
      qa.quantiles.push_back(ranking.assignment.quantiles[it->second]);
    }
  }
  return qa;
}

// ---------------------------------------------------------------------------
// Fairness label files

namespace detail {
inline std::vector<std::vector<std::string>> read_label_rows(const std::string& path,
                                                             const std::vector<std::string>& expected) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (csv::trim(line).empty()) continue;
    auto fields = csv::split_line(line);
    for (auto& f : fields) f = csv::trim(f);
    if (rows.empty() && line_no == 1 && fields == expected) continue;
    if (fields.size() != expected.size()) {
      throw DataError(path + ": line " + std::to_string(line_no) + " should have " +
                      std::to_string(expected.size()) + " fields");
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}
}  // namespace detail

/// CSV `id_a,id_b`; undirected, deduplicated, self-pairs dropped.
inline std::vector<std::pair<std::string, std::string>> read_pairs_csv(const std::string& path) {
  std::set<std::pair<std::string, std::string>> unique;
  for (auto& row : detail::read_label_rows(path, {"id_a", "id_b"})) {
    if (row[0] == row[1]) continue;
    if (row[1] < row[0]) std::swap(row[0], row[1]);
    unique.emplace(row[0], row[1]);
  }
  return {unique.begin(), unique.end()};
}

/// CSV `id,class_label`.
inline std::map<std::string, std::string> read_equivalence_csv(const std::string& path) {
  std::map<std::string, std::string> out;
  for (auto& row : detail::read_label_rows(path, {"id", "class_label"})) {
    if (!out.emplace(row[0], row[1]).second) throw DataError(path + ": duplicate id '" + row[0] + "'");
  }
  return out;
}

/// CSV `id,group,score`.
inline std::vector<ScoredRecord> read_scores_csv(const std::string& path) {
  std::vector<ScoredRecord> out;
  for (auto& row : detail::read_label_rows(path, {"id", "group", "score"})) {
    const auto v = csv::parse_double(row[2]);
    if (!v) throw DataError(path + ": cannot parse score '" + row[2] + "' for id '" + row[0] + "'");
    out.push_back({row[0], row[1], *v});
  }
  return out;
}

inline void write_pairs_csv(const std::vector<std::pair<std::string, std::string>>& pairs, std::ostream& out) {
  out << "id_a,id_b\n";
  for (const auto& [a, b] : pairs) out << csv::quote(a) << ',' << csv::quote(b) << '\n';
}

/// Edges between records of `ids` named by id pairs; pairs touching ids
/// outside `ids` are skipped.
inline std::vector<Edge> edges_from_id_pairs(const std::vector<std::string>& ids,
                                             const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < ids.size(); ++i) pos.emplace(ids[i], i);
  std::vector<Edge> edges;
  for (const auto& [a, b] : pairs) {
    const auto ia = pos.find(a);
    const auto ib = pos.find(b);
    if (ia == pos.end() || ib == pos.end()) continue;
    edges.emplace_back(std::min(ia->second, ib->second), std::max(ia->second, ib->second));
  }
  return edges;
}

}  // namespace pfr
