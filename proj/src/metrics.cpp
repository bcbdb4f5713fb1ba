#include "acfkit/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "acfkit/error.hpp"

namespace acfkit {

namespace {

void check_binary(int c) {
  if (c != 0 && c != 1) throw Error(ErrorCode::InvalidArgument, fmt::format("class index {} is not binary", c));
}

void check_scores(std::span<const int> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) {
    throw Error(ErrorCode::LengthMismatch, fmt::format("{} labels vs {} scores", labels.size(), scores.size()));
  }
  if (labels.empty()) throw Error(ErrorCode::Empty, "no samples");
  for (double s : scores) {
    if (!std::isfinite(s)) throw Error(ErrorCode::NonFinite, "scores must be finite");
  }
}

}  // namespace

std::size_t ConfusionMatrix::total() const noexcept {
  return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1];
}

ConfusionMatrix confusion(std::span<const int> labels, std::span<const int> predictions) {
  if (labels.size() != predictions.size()) {
    throw Error(ErrorCode::LengthMismatch,
                fmt::format("{} labels vs {} predictions", labels.size(), predictions.size()));
  }
  if (labels.empty()) throw Error(ErrorCode::Empty, "no samples");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    check_binary(labels[i]);
    check_binary(predictions[i]);
    ++cm.counts[labels[i]][predictions[i]];
  }
  return cm;
}

std::array<double, 2> per_class_recall(const ConfusionMatrix& cm) {
  std::array<double, 2> out{};
  for (int c = 0; c < 2; ++c) {
    const std::size_t n = cm.true_count(c);
    if (n == 0) throw Error(ErrorCode::MissingClass, fmt::format("no samples of true class {}", c));
    out[c] = static_cast<double>(cm.counts[c][c]) / static_cast<double>(n);
  }
  return out;
}

double uar(const ConfusionMatrix& cm) {
  auto r = per_class_recall(cm);
  return (r[0] + r[1]) / 2.0;
}

F1Scores f1_per_class(const ConfusionMatrix& cm) {
  const auto recall = per_class_recall(cm);
  F1Scores out;
  for (int c = 0; c < 2; ++c) {
    const std::size_t predicted = cm.predicted_count(c);
    if (predicted == 0 || cm.counts[c][c] == 0) {
      out.f1[c] = 0.0;
      out.undefined[c] = true;
      continue;
    }
    const double precision = static_cast<double>(cm.counts[c][c]) / static_cast<double>(predicted);
    out.f1[c] = 2.0 * precision * recall[c] / (precision + recall[c]);
  }
  return out;
}

double auc_roc(std::span<const int> labels, std::span<const double> scores, int positive_class) {
  check_scores(labels, scores);
  const std::size_t n = labels.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    // 1-based ranks i+1 .. j+1 share their mean
    const double mid_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == positive_class) {
        positive_rank_sum += mid_rank;
        ++positives;
      }
    }
    i = j + 1;
  }
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) throw Error(ErrorCode::SingleClass, "AUC needs both classes present");
  const double np = static_cast<double>(positives);
  const double u = positive_rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(negatives));
}

std::vector<RocPoint> roc_curve(std::span<const int> labels, std::span<const double> scores, int positive_class) {
  check_scores(labels, scores);
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), positive_class));
  const std::size_t negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) throw Error(ErrorCode::SingleClass, "ROC needs both classes present");

  std::vector<RocPoint> curve{{0.0, 0.0}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    for (; j < order.size() && scores[order[j]] == scores[order[i]]; ++j) {
      (labels[order[j]] == positive_class ? tp : fp) += 1;
    }
    curve.push_back({static_cast<double>(fp) / static_cast<double>(negatives),
                     static_cast<double>(tp) / static_cast<double>(positives)});
    i = j;
  }
  return curve;
}

double chance_f1(double prevalence) { return 2.0 * prevalence / (2.0 * prevalence + 1.0); }

double majority_f1(double prevalence) { return 2.0 * prevalence / (1.0 + prevalence); }

MetricsReport evaluate_predictions(std::span<const int> labels, std::span<const int> predictions,
                                   std::span<const double> scores) {
  MetricsReport r;
  r.cm = confusion(labels, predictions);
  r.samples = labels.size();
  const auto recall = per_class_recall(r.cm);
  r.recall_depressed = recall[0];
  r.recall_not_depressed = recall[1];
  r.uar = (recall[0] + recall[1]) / 2.0;
  const auto f1 = f1_per_class(r.cm);
  r.f1_depressed = f1.f1[0];
  r.f1_not_depressed = f1.f1[1];
  r.f1_undefined = f1.undefined;
  r.auc_roc = auc_roc(labels, scores, 0);
  r.roc = roc_curve(labels, scores, 0);
  return r;
}

nlohmann::ordered_json to_json(const MetricsReport& r, bool include_roc) {
  nlohmann::ordered_json j;
  j["samples"] = r.samples;
  j["auc_roc"] = r.auc_roc;
  j["uar"] = r.uar;
  j["f1_depressed"] = r.f1_depressed;
  j["f1_not_depressed"] = r.f1_not_depressed;
  j["recall_depressed"] = r.recall_depressed;
  j["recall_not_depressed"] = r.recall_not_depressed;
  j["f1_undefined"] = {{"depressed", r.f1_undefined[0]}, {"not_depressed", r.f1_undefined[1]}};
  j["confusion"] = {{r.cm.counts[0][0], r.cm.counts[0][1]}, {r.cm.counts[1][0], r.cm.counts[1][1]}};
  if (include_roc) {
    auto roc = nlohmann::ordered_json::array();
    for (const auto& p : r.roc) roc.push_back({p.fpr, p.tpr});
    j["roc"] = std::move(roc);
  }
  return j;
}

std::string format_metrics_table(const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  std::size_t name_width = 5;
  for (const auto& [name, _] : rows) name_width = std::max(name_width, name.size());
  std::string out = fmt::format("{:<{}}  {:>8}  {:>8}  {:>10}\n", "Model", name_width, "AUC-ROC", "UAR", "F1 (D/ND)");
  out += std::string(name_width + 32, '-') + '\n';
  for (const auto& [name, r] : rows) {
    out += fmt::format("{:<{}}  {:>8.4f}  {:>8.4f}  {:>10}\n", name, name_width, r.auc_roc, r.uar,
                       fmt::format("{:.2f}/{:.2f}", r.f1_depressed, r.f1_not_depressed));
  }
  return out;
}

}  // namespace acfkit
