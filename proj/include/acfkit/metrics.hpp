#pragma once

#include <array>
#include <cstddef>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace acfkit {

// Binary confusion counts indexed [true][predicted]; class 0 is "depressed".
struct ConfusionMatrix {
  std::array<std::array<std::size_t, 2>, 2> counts{};

  std::size_t total() const noexcept;
  std::size_t true_count(int cls) const noexcept { return counts[cls][0] + counts[cls][1]; }
  std::size_t predicted_count(int cls) const noexcept { return counts[0][cls] + counts[1][cls]; }
  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(std::span<const int> labels, std::span<const int> predictions);

/// Recall of each true class; throws MissingClass if a class has no samples.
std::array<double, 2> per_class_recall(const ConfusionMatrix& cm);
double uar(const ConfusionMatrix& cm);

struct F1Scores {
  std::array<double, 2> f1{};
  // true where precision + recall had a zero denominator and F1 was set to 0
  std::array<bool, 2> undefined{};
};

F1Scores f1_per_class(const ConfusionMatrix& cm);

/// Mann-Whitney AUC: share of (positive, negative) pairs ranked correctly,
/// ties worth one half. O(n log n) via mid-ranks.
double auc_roc(std::span<const int> labels, std::span<const double> scores, int positive_class = 0);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

std::vector<RocPoint> roc_curve(std::span<const int> labels, std::span<const double> scores,
                                int positive_class = 0);

// F1 per class of a coin-flip predictor when a share `prevalence` of samples
// belongs to that class: 2 pi / (2 pi + 1).
double chance_f1(double prevalence);
// F1 of the class predicted by an always-majority predictor: 2 pi / (1 + pi).
double majority_f1(double prevalence);

struct MetricsReport {
  std::size_t samples = 0;
  double auc_roc = 0.5;
  double uar = 0.0;
  double f1_depressed = 0.0;
  double f1_not_depressed = 0.0;
  double recall_depressed = 0.0;
  double recall_not_depressed = 0.0;
  std::array<bool, 2> f1_undefined{};
  ConfusionMatrix cm;
  std::vector<RocPoint> roc;
};

/// All metrics at once. `scores` are the depressed-class scores used for AUC.
MetricsReport evaluate_predictions(std::span<const int> labels, std::span<const int> predictions,
                                   std::span<const double> scores);

nlohmann::ordered_json to_json(const MetricsReport& report, bool include_roc = true);

/// Aligned text table with AUC-ROC, UAR and F1 (D/ND) columns.
std::string format_metrics_table(const std::vector<std::pair<std::string, MetricsReport>>& rows);

}  // namespace acfkit
