#pragma once

// Downstream logistic regression and the utility / individual-fairness /
// group-fairness measures computed on its predictions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pfr/errors.hpp"
#include "pfr/graph.hpp"
#include "pfr/linalg.hpp"

namespace pfr {

enum class LogisticSolver {
  /// Damped Newton direction (Cholesky on the regularized Hessian).
  kNewton,
  kGradientDescent,
};

struct LogisticOptions {
  double reg = 1e-4;
  std::size_t max_iters = 5000;
  double tol = 1e-8;
  LogisticSolver solver = LogisticSolver::kNewton;
};

struct LogisticModel {
  /// d feature weights followed by the bias.
  std::vector<double> weights;
  double reg = 0.0;
  std::size_t iterations = 0;
  double final_loss = 0.0;
  bool converged = false;
  /// Objective at every accepted iterate, starting from w = 0.
  std::vector<double> loss_history;

  std::size_t input_dim() const noexcept { return weights.empty() ? 0 : weights.size() - 1; }
};

inline double sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

namespace detail {

inline double softplus(double s) { return s > 0.0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s)); }

inline double affine_score(std::span<const double> w, std::span<const double> z) {
  double s = w.back();
  for (std::size_t k = 0; k < z.size(); ++k) s += w[k] * z[k];
  return s;
}

inline void check_training_data(const Matrix& z, std::span<const int> y) {
  if (z.rows() != y.size()) throw DimensionError("logistic regression: features/labels length mismatch");
  if (z.rows() < 2) throw TrainingError("logistic regression needs at least two records");
  bool pos = false;
  bool neg = false;
  for (int label : y) {
    if (label != 0 && label != 1) throw DataError("logistic regression labels must be 0 or 1");
    (label == 1 ? pos : neg) = true;
  }
  if (!pos || !neg) throw TrainingError("logistic regression needs both classes present");
}

}  // namespace detail

/// (1/n) sum_i [softplus(s_i) - y_i s_i] + (reg/2) |w|^2, bias unpenalized.
inline double logistic_loss(std::span<const double> weights, const Matrix& z, std::span<const int> y,
                            double reg) {
  double loss = 0.0;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    const double s = detail::affine_score(weights, z.row(i));
    loss += detail::softplus(s) - (y[i] ? s : 0.0);
  }
  loss /= static_cast<double>(z.rows());
  double penalty = 0.0;
  for (std::size_t k = 0; k + 1 < weights.size(); ++k) penalty += weights[k] * weights[k];
  return loss + 0.5 * reg * penalty;
}

inline std::vector<double> logistic_gradient(std::span<const double> weights, const Matrix& z,
                                             std::span<const int> y, double reg) {
  const std::size_t d = z.cols();
  std::vector<double> grad(d + 1, 0.0);
  for (std::size_t i = 0; i < z.rows(); ++i) {
    const auto zi = z.row(i);
    const double r = sigmoid(detail::affine_score(weights, zi)) - y[i];
    for (std::size_t k = 0; k < d; ++k) grad[k] += r * zi[k];
    grad[d] += r;
  }
  const double inv_n = 1.0 / static_cast<double>(z.rows());
  for (double& g : grad) g *= inv_n;
  for (std::size_t k = 0; k < d; ++k) grad[k] += reg * weights[k];
  return grad;
}

/// (1/n) sum_i p_i (1 - p_i) [z_i 1][z_i 1]^T + reg on the weight diagonal.
inline Matrix logistic_hessian(std::span<const double> weights, const Matrix& z, double reg) {
  const std::size_t d = z.cols();
  Matrix h(d + 1, d + 1);
  std::vector<double> zt(d + 1, 1.0);
  for (std::size_t i = 0; i < z.rows(); ++i) {
    const auto zi = z.row(i);
    std::copy(zi.begin(), zi.end(), zt.begin());
    const double p = sigmoid(detail::affine_score(weights, zi));
    const double w = p * (1.0 - p);
    if (w == 0.0) continue;
    for (std::size_t a = 0; a <= d; ++a)
      for (std::size_t b = 0; b <= a; ++b) h(a, b) += w * zt[a] * zt[b];
  }
  const double inv_n = 1.0 / static_cast<double>(z.rows());
  for (std::size_t a = 0; a <= d; ++a)
    for (std::size_t b = 0; b <= a; ++b) {
      h(a, b) *= inv_n;
      h(b, a) = h(a, b);
    }
  for (std::size_t k = 0; k < d; ++k) h(k, k) += reg;
  return h;
}

/// Minimizes the regularized logistic loss from w = 0 with a full-batch
/// descent direction and Armijo backtracking; stops when |grad| <= tol.
inline LogisticModel fit_logreg(const Matrix& z, std::span<const int> y, const LogisticOptions& options = {}) {
  detail::check_training_data(z, y);
  if (!(options.reg >= 0.0)) throw ParameterError("logistic regularization must be >= 0");
  const std::size_t dim = z.cols() + 1;

  LogisticModel model;
  model.reg = options.reg;
  model.weights.assign(dim, 0.0);
  double loss = logistic_loss(model.weights, z, y, options.reg);
  model.loss_history.push_back(loss);

  double gd_step = 1.0;
  std::vector<double> direction(dim);
  std::vector<double> candidate(dim);
  for (std::size_t iter = 0; iter < options.max_iters; ++iter) {
    const auto grad = logistic_gradient(model.weights, z, y, options.reg);
    double grad_sq = 0.0;
    for (double g : grad) grad_sq += g * g;
    if (std::sqrt(grad_sq) <= options.tol) {
      model.converged = true;
      break;
    }

    double step = 1.0;
    bool newton = false;
    if (options.solver == LogisticSolver::kNewton) {
      Matrix h = logistic_hessian(model.weights, z, options.reg);
      // Tiny ridge keeps the bias row solvable once predictions saturate.
      for (std::size_t k = 0; k < dim; ++k) h(k, k) += 1e-12;
      if (auto delta = solve_spd(h, grad)) {
        for (std::size_t k = 0; k < dim; ++k) direction[k] = -(*delta)[k];
        newton = true;
      }
    }
    if (!newton) {
      for (std::size_t k = 0; k < dim; ++k) direction[k] = -grad[k];
      gd_step = std::min(gd_step * 2.0, 1e6);
      step = gd_step;
    }
    double slope = 0.0;
    for (std::size_t k = 0; k < dim; ++k) slope += grad[k] * direction[k];

    bool accepted = false;
    for (int halvings = 0; halvings < 60; ++halvings) {
      for (std::size_t k = 0; k < dim; ++k) candidate[k] = model.weights[k] + step * direction[k];
      const double trial = logistic_loss(candidate, z, y, options.reg);
      if (trial <= loss + 1e-4 * step * slope) {
        model.weights.swap(candidate);
        loss = trial;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!newton) gd_step = step;
    model.iterations = iter + 1;
    if (!accepted) break;  // no representable decrease left
    model.loss_history.push_back(loss);
  }
  model.final_loss = loss;
  for (double w : model.weights)
    if (!std::isfinite(w)) throw TrainingError("logistic regression diverged");
  return model;
}

inline double predict_proba(const LogisticModel& model, std::span<const double> z) {
  if (z.size() != model.input_dim()) {
    throw DimensionError("predict_proba: expected " + std::to_string(model.input_dim()) + " features, got " +
                         std::to_string(z.size()));
  }
  return sigmoid(detail::affine_score(model.weights, z));
}

inline std::vector<double> predict_proba(const LogisticModel& model, const Matrix& z) {
  std::vector<double> out(z.rows());
  for (std::size_t i = 0; i < z.rows(); ++i) out[i] = predict_proba(model, z.row(i));
  return out;
}

inline std::vector<int> threshold_predictions(std::span<const double> proba, double threshold = 0.5) {
  std::vector<int> out(proba.size());
  for (std::size_t i = 0; i < proba.size(); ++i) out[i] = proba[i] >= threshold ? 1 : 0;
  return out;
}

/// Mann-Whitney AUC: (concordant + ties / 2) / (positives * negatives).
inline double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DimensionError("auc: scores/labels length mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  std::uint64_t positives = 0;
  std::uint64_t negatives_below = 0;
  std::uint64_t concordant = 0;
  std::uint64_t tied = 0;
  for (std::size_t start = 0; start < order.size();) {
    std::size_t end = start;
    std::uint64_t pos = 0;
    std::uint64_t neg = 0;
    while (end < order.size() && scores[order[end]] == scores[order[start]]) {
      (labels[order[end]] == 1 ? pos : neg) += 1;
      ++end;
    }
    concordant += pos * negatives_below;
    tied += pos * neg;
    negatives_below += neg;
    positives += pos;
    start = end;
  }
  if (positives == 0 || negatives_below == 0) throw MetricError("auc is undefined with a single class");
  return (static_cast<double>(concordant) + 0.5 * static_cast<double>(tied)) /
         (static_cast<double>(positives) * static_cast<double>(negatives_below));
}

/// 1 - sum_{i != j} |yhat_i - yhat_j| W_ij / sum_{i != j} W_ij
inline double consistency(std::span<const double> predictions, const SimilarityGraph& graph) {
  if (predictions.size() != graph.size()) throw DimensionError("consistency: prediction/graph size mismatch");
  double disagreement = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < graph.size(); ++i) {
    for (std::size_t j = i + 1; j < graph.size(); ++j) {
      const double w = graph(i, j);
      if (w == 0.0) continue;
      disagreement += std::abs(predictions[i] - predictions[j]) * w;
      total += w;
    }
  }
  if (total <= 0.0) throw MetricError("consistency is undefined on an empty graph");
  return 1.0 - disagreement / total;
}

inline double consistency(std::span<const int> predictions, const SimilarityGraph& graph) {
  std::vector<double> as_real(predictions.begin(), predictions.end());
  return consistency(std::span<const double>(as_real), graph);
}

struct GroupStats {
  int group = 0;
  std::size_t count = 0;
  std::size_t true_positive = 0;
  std::size_t false_positive = 0;
  std::size_t true_negative = 0;
  std::size_t false_negative = 0;
  /// Undefined when the group has no negatives (FPR) or no positives (FNR).
  std::optional<double> fpr;
  std::optional<double> fnr;
  double positive_rate = 0.0;
};

struct PairwiseGap {
  int group_a = 0;
  int group_b = 0;
  std::optional<double> fpr;
  std::optional<double> fnr;
  double ppr = 0.0;
};

struct GroupRates {
  /// Sorted by group code.
  std::vector<GroupStats> groups;
  std::vector<PairwiseGap> pairwise;
  /// Largest pairwise gap over the defined rates.
  std::optional<double> gap_fpr;
  std::optional<double> gap_fnr;
  double gap_ppr = 0.0;
  std::vector<std::string> warnings;
};

inline GroupRates group_rates(std::span<const int> predictions, std::span<const int> labels,
                              std::span<const int> groups) {
  if (predictions.size() != labels.size() || labels.size() != groups.size()) {
    throw DimensionError("group_rates: length mismatch");
  }
  std::map<int, GroupStats> by_group;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& g = by_group[groups[i]];
    g.group = groups[i];
    ++g.count;
    const bool yhat = predictions[i] == 1;
    const bool y = labels[i] == 1;
    if (yhat && y) ++g.true_positive;
    if (yhat && !y) ++g.false_positive;
    if (!yhat && !y) ++g.true_negative;
    if (!yhat && y) ++g.false_negative;
  }

  GroupRates out;
  for (auto& [code, g] : by_group) {
    const std::size_t negatives = g.false_positive + g.true_negative;
    const std::size_t positives = g.false_negative + g.true_positive;
    if (negatives > 0) {
      g.fpr = static_cast<double>(g.false_positive) / static_cast<double>(negatives);
    } else {
      out.warnings.push_back("FPR undefined for group " + std::to_string(code) + " (no negatives)");
    }
    if (positives > 0) {
      g.fnr = static_cast<double>(g.false_negative) / static_cast<double>(positives);
    } else {
      out.warnings.push_back("FNR undefined for group " + std::to_string(code) + " (no positives)");
    }
    g.positive_rate = static_cast<double>(g.true_positive + g.false_positive) / static_cast<double>(g.count);
    out.groups.push_back(g);
  }

  const auto gap = [](const std::optional<double>& a, const std::optional<double>& b) -> std::optional<double> {
    if (!a || !b) return std::nullopt;
    return std::abs(*a - *b);
  };
  const auto keep_max = [](std::optional<double>& acc, const std::optional<double>& v) {
    if (v && (!acc || *v > *acc)) acc = v;
  };
  for (std::size_t a = 0; a < out.groups.size(); ++a) {
    for (std::size_t b = a + 1; b < out.groups.size(); ++b) {
      PairwiseGap p;
      p.group_a = out.groups[a].group;
      p.group_b = out.groups[b].group;
      p.fpr = gap(out.groups[a].fpr, out.groups[b].fpr);
      p.fnr = gap(out.groups[a].fnr, out.groups[b].fnr);
      p.ppr = std::abs(out.groups[a].positive_rate - out.groups[b].positive_rate);
      keep_max(out.gap_fpr, p.fpr);
      keep_max(out.gap_fnr, p.fnr);
      out.gap_ppr = std::max(out.gap_ppr, p.ppr);
      out.pairwise.push_back(p);
    }
  }
  return out;
}

struct EvaluationReport {
  double auc = 0.0;
  std::optional<double> consistency_wx;
  std::optional<double> consistency_wf;
  GroupRates rates;
  /// AUC within each group, aligned with `rates.groups`; undefined for a
  /// single-class group.
  std::vector<std::optional<double>> auc_by_group;
};

struct EvaluationOptions {
  double threshold = 0.5;
  /// Use probabilities rather than thresholded predictions in consistency.
  bool probability_consistency = false;
};

/// Scores predicted probabilities against labels, groups, and the optional
/// graphs over the same records. An empty graph leaves its consistency unset.
inline EvaluationReport evaluate_predictions(std::span<const double> proba, std::span<const int> labels,
                                             std::span<const int> groups, const SimilarityGraph* wx,
                                             const SimilarityGraph* wf, const EvaluationOptions& options = {}) {
  EvaluationReport report;
  report.auc = auc(proba, labels);
  const auto yhat = threshold_predictions(proba, options.threshold);
  const auto consistency_of = [&](const SimilarityGraph* g) -> std::optional<double> {
    if (g == nullptr || g->is_empty()) return std::nullopt;
    if (options.probability_consistency) return consistency(proba, *g);
    return consistency(std::span<const int>(yhat), *g);
  };
  report.consistency_wx = consistency_of(wx);
  report.consistency_wf = consistency_of(wf);
  report.rates = group_rates(yhat, labels, groups);
  for (const auto& g : report.rates.groups) {
    std::vector<double> s;
    std::vector<int> y;
    for (std::size_t i = 0; i < groups.size(); ++i)
      if (groups[i] == g.group) {
        s.push_back(proba[i]);
        y.push_back(labels[i]);
      }
    const bool both = std::find(y.begin(), y.end(), 0) != y.end() && std::find(y.begin(), y.end(), 1) != y.end();
    report.auc_by_group.push_back(both ? std::optional<double>(auc(s, y)) : std::nullopt);
  }
  return report;
}

namespace detail {
inline nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}
}  // namespace detail

/// Flat JSON object. Per-group keys are suffixed with the group code
/// (fpr_g0, fpr_g1, ...); gap_* hold the largest pairwise gap, and with more
/// than two groups each pair is also listed as gap_<rate>_<a>_<b>.
inline nlohmann::json to_json(const EvaluationReport& report) {
  using detail::optional_json;
  nlohmann::json j;
  j["auc"] = report.auc;
  j["consistency_wx"] = optional_json(report.consistency_wx);
  j["consistency_wf"] = optional_json(report.consistency_wf);
  for (std::size_t k = 0; k < report.rates.groups.size(); ++k) {
    const auto& g = report.rates.groups[k];
    const std::string suffix = "_g" + std::to_string(g.group);
    j["fpr" + suffix] = optional_json(g.fpr);
    j["fnr" + suffix] = optional_json(g.fnr);
    j["ppr" + suffix] = g.positive_rate;
    if (k < report.auc_by_group.size()) j["auc" + suffix] = optional_json(report.auc_by_group[k]);
  }
  j["gap_fpr"] = optional_json(report.rates.gap_fpr);
  j["gap_fnr"] = optional_json(report.rates.gap_fnr);
  j["gap_ppr"] = report.rates.gap_ppr;
  if (report.rates.groups.size() > 2) {
    for (const auto& p : report.rates.pairwise) {
      const std::string suffix = "_" + std::to_string(p.group_a) + "_" + std::to_string(p.group_b);
      j["gap_fpr" + suffix] = optional_json(p.fpr);
      j["gap_fnr" + suffix] = optional_json(p.fnr);
      j["gap_ppr" + suffix] = p.ppr;
    }
  }
  return j;
}

}  // namespace pfr
