// pfr: command-line front end for the PFR library.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pfr/data.hpp"
#include "pfr/experiment.hpp"
#include "pfr/serialize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool quiet = false;
};

pfr::ExperimentConfig load_config(const Common& common) {
  pfr::ExperimentConfig c = pfr::default_config();
  if (!common.config_path.empty()) {
    std::ifstream in(common.config_path);
    if (!in) throw pfr::ConfigError("cannot open config '" + common.config_path + "'");
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw pfr::ConfigError(common.config_path + ": " + e.what());
    }
    c = pfr::config_from_json(j);
  }
  if (common.seed) c.seed = *common.seed;
  if (!common.out.empty()) c.output_dir = common.out;
  return c;
}

std::string out_dir(const Common& common, const std::string& fallback) {
  const std::string dir = common.out.empty() ? fallback : common.out;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw pfr::DataError("cannot create output directory '" + dir + "'");
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw pfr::DataError("cannot write '" + path.string() + "'");
  return out;
}

void write_graph(const pfr::SimilarityGraph& g, const std::vector<std::string>& ids, const fs::path& path) {
  auto out = open_out(path);
  out << "id_a,id_b,weight\n";
  for (const auto& [a, b] : g.edges())
    out << pfr::csv::quote(ids[a]) << ',' << pfr::csv::quote(ids[b]) << ',' << pfr::csv::format_double(g(a, b))
        << '\n';
}

/// `id_a,id_b[,weight]` with weight 1 when absent.
pfr::SimilarityGraph read_graph(const std::string& path, const std::vector<std::string>& ids, pfr::GraphRole role) {
  const pfr::csv::Table table = pfr::csv::read_table_file(path);
  const auto a = table.column("id_a");
  const auto b = table.column("id_b");
  const auto w = table.column("weight");
  if (!a || !b) throw pfr::DataError(path + ": graph files need id_a and id_b columns");
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < ids.size(); ++i) pos.emplace(ids[i], i);
  pfr::Matrix weights(ids.size(), ids.size());
  for (const auto& [line, fields] : table.rows) {
    const auto ia = pos.find(fields[*a]);
    const auto ib = pos.find(fields[*b]);
    if (ia == pos.end() || ib == pos.end() || ia->second == ib->second) continue;
    double value = 1.0;
    if (w) {
      const auto v = pfr::csv::parse_double(fields[*w]);
      if (!v) throw pfr::DataError(path + ": line " + std::to_string(line) + " has a non-numeric weight");
      value = *v;
    }
    weights(ia->second, ib->second) = value;
    weights(ib->second, ia->second) = value;
  }
  return pfr::SimilarityGraph(std::move(weights), role);
}

pfr::Dataset load_data(const std::string& path, const pfr::ExperimentConfig& c) {
  return pfr::load_csv(path, c.dataset.schema);
}

/// Standardized masked features for kNN graphs.
pfr::Matrix masked_standardized(const pfr::Dataset& ds) {
  const auto params = pfr::standardize_fit(ds.features, ds.feature_names);
  return pfr::standardize_apply(params, ds.features);
}

/// Whether a model was fit on group indicator columns appended to `ds`.
bool model_uses_group(const pfr::StandardizationParams& params, const pfr::Dataset& ds) {
  if (params.source_columns == ds.feature_count()) return false;
  if (params.source_columns == ds.feature_count() + ds.group_values.size() - 1) return true;
  throw pfr::DimensionError("model expects " + std::to_string(params.source_columns) + " input columns but the data has " +
                            std::to_string(ds.feature_count()) + " features");
}

pfr::Matrix embed(const pfr::AnyModel& model, const pfr::Dataset& ds) {
  const auto& params = std::visit([](const auto& m) -> const std::optional<pfr::StandardizationParams>& {
    return m.standardization;
  }, model);
  if (!params) throw pfr::DataError("model has no standardization parameters");
  const pfr::Matrix x = pfr::standardize_apply(*params, pfr::model_inputs(ds, model_uses_group(*params, ds)));
  if (const auto* linear = std::get_if<pfr::PfrModel>(&model)) return pfr::transform(*linear, x);
  return pfr::transform_kernel(std::get<pfr::KernelPfrModel>(model), x);
}

void say(const Common& common, const std::string& text) {
  if (!common.quiet) std::cout << text << '\n';
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << v;
  return os.str();
}

std::string summary(const pfr::Aggregate& a, const char* key) {
  const auto it = a.find(key);
  return it == a.end() ? "n/a" : fmt(it->second.mean) + " +/- " + fmt(it->second.std);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pairwise Fair Representations: fit, transform, evaluate and run experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--config", common.config_path, "ExperimentConfig JSON document");
  app.add_option("--seed", common.seed, "Override the configured seed");
  app.add_option("--out", common.out, "Output directory");
  app.add_flag("--quiet", common.quiet, "Suppress progress output");

  // synth
  auto* synth = app.add_subcommand("synth", "Write synthetic train/test CSVs and oracle fairness pairs");
  std::string variant = "low";
  std::size_t n_train = 600;
  std::size_t n_test = 400;
  std::optional<std::uint64_t> pair_budget;
  synth->add_option("--variant", variant, "low | full")->check(CLI::IsMember({"low", "full"}));
  synth->add_option("--n-train", n_train);
  synth->add_option("--n-test", n_test);
  synth->add_option("--pairs", pair_budget, "Oracle pair budget over training records (default N log2 N)");

  // build-graph
  auto* build = app.add_subcommand("build-graph", "Build W^X or W^F over a CSV dataset");
  std::string data_path;
  std::string kind = "knn";
  std::string labels_path;
  std::size_t neighbors = 10;
  std::optional<double> heat_scale;
  std::optional<std::size_t> edge_cap;
  int quantiles = 10;
  bool ratings = false;
  build->add_option("--data", data_path)->required();
  build->add_option("--kind", kind)->check(CLI::IsMember({"knn", "pairs", "equivalence", "scores"}));
  build->add_option("--labels", labels_path, "Fairness label file for pairs/equivalence/scores");
  build->add_option("--neighbors", neighbors);
  build->add_option("--heat-scale", heat_scale);
  build->add_option("--quantiles", quantiles);
  build->add_option("--edge-cap", edge_cap);
  build->add_flag("--ratings", ratings, "Equivalence labels are star ratings binned to half stars");

  // fit
  auto* fit = app.add_subcommand("fit", "Fit a PFR model on a training CSV and a fairness graph");
  std::string wf_path;
  double gamma = 0.9;
  std::size_t latent_dim = 2;
  std::string kernel = "none";
  std::optional<double> sigma_sq;
  bool group_feature = false;
  fit->add_option("--data", data_path)->required();
  fit->add_option("--wf", wf_path, "Fairness graph CSV (id_a,id_b[,weight]); empty graph when omitted");
  fit->add_option("--gamma", gamma)->check(CLI::Range(0.0, 1.0));
  fit->add_option("--dim", latent_dim);
  fit->add_option("--neighbors", neighbors);
  fit->add_option("--heat-scale", heat_scale);
  fit->add_option("--kernel", kernel, "none | linear | rbf")->check(CLI::IsMember({"none", "linear", "rbf"}));
  fit->add_option("--sigma-sq", sigma_sq, "RBF bandwidth (default: median squared distance)");
  fit->add_flag("--group-feature", group_feature, "Append group indicator columns to the inputs");

  // transform
  auto* tr = app.add_subcommand("transform", "Project a CSV with a saved model");
  std::string model_path;
  tr->add_option("--model", model_path)->required();
  tr->add_option("--data", data_path)->required();

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Train logistic regression on embeddings and score a test CSV");
  std::string train_path;
  std::string test_path;
  ev->add_option("--model", model_path)->required();
  ev->add_option("--train", train_path)->required();
  ev->add_option("--test", test_path)->required();
  ev->add_option("--wf", wf_path, "Held-out fairness graph over the test records");
  ev->add_option("--neighbors", neighbors, "kNN size for the test W^X");

  auto* experiment = app.add_subcommand("experiment", "Grid-searched PFR versus Original over seeded runs");
  auto* sweep_g = app.add_subcommand("sweep-gamma", "PFR metrics across the gamma sweep");
  auto* sweep_s = app.add_subcommand("sweep-sparsity", "PFR metrics across fairness-label budgets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) {
      pfr::SyntheticOptions opts;
      opts.n_train = n_train;
      opts.n_test = n_test;
      opts.seed = load_config(common).seed;
      opts.variant = variant == "full" ? pfr::SyntheticVariant::kFull : pfr::SyntheticVariant::kLowDimension;
      const auto [train, test] = pfr::generate_synthetic(opts);
      const fs::path dir = out_dir(common, ".");
      auto tout = open_out(dir / "train.csv");
      pfr::write_csv(train, tout);
      auto sout = open_out(dir / "test.csv");
      pfr::write_csv(test, sout);

      const pfr::FairnessOracle oracle = pfr::oracle_fit(train);
      const auto q_train = pfr::oracle_quantiles(oracle, train);
      const auto q_test = pfr::oracle_quantiles(oracle, test);
      const auto budget = pair_budget.value_or(pfr::default_pair_budget(train.size()));
      std::vector<std::pair<std::string, std::string>> similar;
      for (const auto& [a, b] : pfr::sample_pairs(train.size(), budget, pfr::derive_seed(opts.seed, 1)))
        if (q_train[a] == q_train[b]) similar.emplace_back(train.ids[a], train.ids[b]);
      auto pout = open_out(dir / "fairness_train.csv");
      pfr::write_pairs_csv(similar, pout);
      std::vector<std::pair<std::string, std::string>> held_out;
      for (std::size_t a = 0; a < test.size(); ++a)
        for (std::size_t b = a + 1; b < test.size(); ++b)
          if (q_test[a] == q_test[b]) held_out.emplace_back(test.ids[a], test.ids[b]);
      auto hout = open_out(dir / "fairness_test.csv");
      pfr::write_pairs_csv(held_out, hout);
      say(common, "wrote " + std::to_string(train.size()) + " training and " + std::to_string(test.size()) +
                      " test records; " + std::to_string(similar.size()) + " of " + std::to_string(budget) +
                      " sampled pairs judged similar");
    } else if (build->parsed()) {
      const auto config = load_config(common);
      const pfr::Dataset ds = load_data(data_path, config);
      pfr::SimilarityGraph g = pfr::SimilarityGraph::empty(ds.size(), pfr::GraphRole::kFairness);
      if (kind == "knn") {
        const auto result = pfr::knn_heat_graph(masked_standardized(ds), neighbors, heat_scale);
        g = result.graph;
        say(common, "heat-kernel scale t = " + pfr::csv::format_double(result.scale));
      } else {
        if (labels_path.empty()) throw pfr::ConfigError("--labels is required for --kind " + kind);
        if (kind == "pairs") {
          g = pfr::SimilarityGraph::from_edges(ds.size(), pfr::edges_from_id_pairs(ds.ids, pfr::read_pairs_csv(labels_path)),
                                               pfr::GraphRole::kFairness);
        } else if (kind == "equivalence") {
          pfr::FairnessConfig f;
          f.source = pfr::FairnessConfig::Source::kEquivalence;
          f.path = labels_path;
          f.ratings = ratings;
          g = pfr::equivalence_graph(pfr::align_classes(ds.ids, pfr::load_labels(f).classes));
        } else {
          pfr::GraphConfig gc;
          gc.quantiles = quantiles;
          gc.edge_cap = edge_cap;
          g = pfr::detail::quantile_graph_over(ds.ids, pfr::read_scores_csv(labels_path), nullptr, gc, config.seed);
        }
      }
      const fs::path dir = out_dir(common, ".");
      write_graph(g, ds.ids, dir / "graph.csv");
      say(common, "graph over " + std::to_string(ds.size()) + " records with " + std::to_string(g.edge_count()) +
                      " edges");
    } else if (fit->parsed()) {
      const auto config = load_config(common);
      const pfr::Dataset ds = load_data(data_path, config);
      std::vector<std::string> names;
      const pfr::Matrix inputs = pfr::model_inputs(ds, group_feature, &names);
      const auto params = pfr::standardize_fit(inputs, names);
      const pfr::Matrix x = pfr::standardize_apply(params, inputs);
      const auto wx = pfr::knn_heat_graph(pfr::masked_columns(x, params, ds.feature_count()), neighbors, heat_scale);
      const pfr::SimilarityGraph wf = wf_path.empty()
                                          ? pfr::SimilarityGraph::empty(ds.size(), pfr::GraphRole::kFairness)
                                          : read_graph(wf_path, ds.ids, pfr::GraphRole::kFairness);
      json doc;
      std::vector<std::string> warnings;
      if (kernel == "none") {
        pfr::PfrModel model = pfr::fit_linear(x, wx.graph, wf, gamma, latent_dim);
        model.standardization = params;
        warnings = model.warnings;
        doc = pfr::to_json(model);
      } else {
        const pfr::Kernel k = kernel == "linear" ? pfr::Kernel::linear()
                              : sigma_sq         ? pfr::Kernel::rbf(*sigma_sq)
                                                 : pfr::default_rbf_kernel(x);
        pfr::KernelPfrModel model = pfr::fit_kernel(x, wx.graph, wf, gamma, latent_dim, k);
        model.standardization = params;
        warnings = model.warnings;
        doc = pfr::to_json(model);
      }
      const fs::path dir = out_dir(common, ".");
      pfr::save_json(doc, (dir / "model.json").string());
      for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
      say(common, "fit " + doc["kind"].get<std::string>() + " model: " + std::to_string(latent_dim) +
                      " latent dimensions, W^F edges " + std::to_string(wf.edge_count()));
    } else if (tr->parsed()) {
      const auto config = load_config(common);
      const pfr::AnyModel model = pfr::model_from_json(pfr::load_json(model_path));
      const pfr::Dataset ds = load_data(data_path, config);
      const pfr::Matrix z = embed(model, ds);
      const fs::path dir = out_dir(common, ".");
      auto out = open_out(dir / "embedding.csv");
      out << "id";
      for (std::size_t k = 0; k < z.cols(); ++k) out << ",z" << k;
      out << '\n';
      for (std::size_t i = 0; i < z.rows(); ++i) {
        out << pfr::csv::quote(ds.ids[i]);
        for (double v : z.row(i)) out << ',' << pfr::csv::format_double(v);
        out << '\n';
      }
      say(common, "projected " + std::to_string(z.rows()) + " records to " + std::to_string(z.cols()) + " dimensions");
    } else if (ev->parsed()) {
      const auto config = load_config(common);
      const pfr::AnyModel model = pfr::model_from_json(pfr::load_json(model_path));
      const pfr::Dataset train = load_data(train_path, config);
      const pfr::Dataset test = load_data(test_path, config);
      const pfr::LogisticModel lr = pfr::fit_logreg(embed(model, train), train.labels, config.classifier);
      const auto proba = pfr::predict_proba(lr, embed(model, test));

      const auto params = pfr::standardize_fit(train.features, train.feature_names);
      const auto wx = pfr::knn_heat_graph(pfr::standardize_apply(params, test.features), neighbors).graph;
      std::optional<pfr::SimilarityGraph> wf;
      if (!wf_path.empty()) wf = read_graph(wf_path, test.ids, pfr::GraphRole::kFairness);
      const auto report = pfr::evaluate_predictions(proba, test.labels, test.groups, &wx, wf ? &*wf : nullptr,
                                                    pfr::evaluation_options(config));
      json doc = pfr::to_json(report);
      const fs::path dir = out_dir(common, ".");
      pfr::save_json(doc, (dir / "evaluation.json").string());
      say(common, "test AUC " + fmt(report.auc) +
                      (report.consistency_wf ? ", consistency_wf " + fmt(*report.consistency_wf) : std::string()));
    } else if (experiment->parsed()) {
      const auto config = load_config(common);
      const auto result = pfr::run_experiment(config);
      pfr::write_outputs(result, config.output_dir);
      for (const char* key : {"auc", "consistency_wf", "gap_fpr", "gap_fnr", "gap_ppr"}) {
        say(common, std::string(key) + ": PFR " + summary(result.pfr, key) + " | Original " +
                        summary(result.original, key));
      }
      say(common, "wrote " + config.output_dir + "/report.json, runs.csv, grid.csv");
    } else if (sweep_g->parsed()) {
      const auto config = load_config(common);
      const auto result = pfr::sweep_gamma(config, config.sweep.gamma);
      pfr::write_outputs(result, config.output_dir);
      for (const auto& row : result.rows) {
        say(common, "gamma " + fmt(row.value) + ": auc " + summary(row.fields, "auc") + ", consistency_wf " +
                        summary(row.fields, "consistency_wf"));
      }
      say(common, "wrote " + config.output_dir + "/report.json, sweep.csv");
    } else if (sweep_s->parsed()) {
      const auto config = load_config(common);
      const auto result = pfr::sweep_sparsity(config);
      pfr::write_outputs(result, config.output_dir);
      for (const auto& row : result.rows) {
        say(common, result.parameter + " " + pfr::csv::format_double(row.value) + ": auc " +
                        summary(row.fields, "auc") + ", consistency_wf " + summary(row.fields, "consistency_wf") +
                        (row.warnings.empty() ? "" : " (" + std::to_string(row.warnings.size()) + " warnings)"));
      }
      say(common, "wrote " + config.output_dir + "/report.json, sweep.csv");
    }
  } catch (const pfr::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
  return 0;
}
