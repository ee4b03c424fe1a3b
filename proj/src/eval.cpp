#include "medtx/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "medtx/errors.hpp"

namespace medtx {

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (const auto& row : counts) {
    for (std::size_t c : row) n += c;
  }
  return n;
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) n += counts[i][i];
  return n;
}

const ClassMetrics& EvalReport::metrics(BodySystem c) const {
  for (const auto& [cls, m] : per_class) {
    if (cls == c) return m;
  }
  throw Error(ErrorKind::NotFound, "class " + std::string(to_string(c)) + " not in report");
}

ConfusionMatrix confusion_matrix(std::span<const BodySystem> truth, std::span<const BodySystem> predicted,
                                 std::span<const BodySystem> class_order) {
  if (truth.size() != predicted.size()) throw Error(ErrorKind::Input, "label lists differ in length");
  if (truth.empty()) throw Error(ErrorKind::Input, "label lists are empty");
  ConfusionMatrix m;
  m.class_order.assign(class_order.begin(), class_order.end());
  m.counts.assign(class_order.size(), std::vector<std::size_t>(class_order.size(), 0));
  const auto position = [&](BodySystem c) {
    const auto it = std::find(class_order.begin(), class_order.end(), c);
    if (it == class_order.end()) {
      throw Error(ErrorKind::Input, "label " + std::string(to_string(c)) + " not in class order");
    }
    return static_cast<std::size_t>(it - class_order.begin());
  };
  for (std::size_t k = 0; k < truth.size(); ++k) ++m.counts[position(truth[k])][position(predicted[k])];
  return m;
}

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

EvalReport compute_metrics(const ConfusionMatrix& confusion) {
  const std::size_t total = confusion.total();
  if (total == 0) throw Error(ErrorKind::Input, "confusion matrix is empty");
  const std::size_t n = confusion.class_order.size();
  EvalReport report;
  report.confusion = confusion;
  report.accuracy = ratio(confusion.trace(), total);
  double f1_sum = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t row = 0;
    std::size_t col = 0;
    for (std::size_t k = 0; k < n; ++k) {
      row += confusion.counts[c][k];
      col += confusion.counts[k][c];
    }
    const std::size_t tp = confusion.counts[c][c];
    ClassMetrics m;
    m.precision = ratio(tp, col);
    m.recall = ratio(tp, row);
    m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    f1_sum += m.f1;
    report.per_class.emplace_back(confusion.class_order[c], m);
  }
  report.macro_f1 = n == 0 ? 0.0 : f1_sum / static_cast<double>(n);
  return report;
}

std::string format_metric(double value) {
  const double cents = std::floor(value * 100.0 + 0.5 + 1e-9);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", cents / 100.0);
  return buf;
}

std::string render_table(const EvalReport& report) {
  constexpr int kLabelWidth = 14;
  constexpr int kCellWidth = 11;
  std::ostringstream out;
  const auto cell = [&](const std::string& s, int width) {
    out << s;
    for (int i = static_cast<int>(s.size()); i < width; ++i) out << ' ';
  };
  cell("", kLabelWidth);
  cell("Precision", kCellWidth);
  cell("Recall", kCellWidth);
  out << "F1-score\n";
  for (BodySystem c : kClassOrder) {
    const ClassMetrics& m = report.metrics(c);
    cell(std::string(to_string(c)), kLabelWidth);
    cell(format_metric(m.precision), kCellWidth);
    cell(format_metric(m.recall), kCellWidth);
    out << format_metric(m.f1) << '\n';
  }
  return out.str();
}

}  // namespace medtx
