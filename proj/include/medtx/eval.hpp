#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "medtx/body_system.hpp"

namespace medtx {

/// counts[i][j] = examples of true class_order[i] predicted as class_order[j].
struct ConfusionMatrix {
  std::vector<BodySystem> class_order;
  std::vector<std::vector<std::size_t>> counts;

  std::size_t total() const;
  std::size_t trace() const;
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct EvalReport {
  double accuracy = 0.0;
  std::vector<std::pair<BodySystem, ClassMetrics>> per_class;  // class_order order
  double macro_f1 = 0.0;
  ConfusionMatrix confusion;

  /// Throws NotFound when the class is not part of the report.
  const ClassMetrics& metrics(BodySystem c) const;
};

/// Throws Input on empty or mismatched lists or labels outside class_order.
ConfusionMatrix confusion_matrix(std::span<const BodySystem> truth, std::span<const BodySystem> predicted,
                                 std::span<const BodySystem> class_order = kClassOrder);

/// Precision, recall and F1 per class (0/0 counts as 0), accuracy and
/// unweighted macro F1. Throws Input on an empty matrix.
EvalReport compute_metrics(const ConfusionMatrix& confusion);

/// Plain-text table: rows Heart, Brain, Reproductive, Digestive; columns
/// Precision, Recall, F1-score; values rounded half-up to two decimals.
std::string render_table(const EvalReport& report);

/// Half-up rounding to two decimals, formatted "0.00".
std::string format_metric(double value);

}  // namespace medtx
