#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "medtx/classical.hpp"
#include "medtx/errors.hpp"

namespace medtx {

void GdConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorKind::Config, "learning_rate must be positive");
  }
  if (epochs < 1) throw Error(ErrorKind::Config, "epochs must be at least 1");
  if (batch_size < 1) throw Error(ErrorKind::Config, "batch_size must be at least 1");
  if (!(l2_penalty >= 0.0)) throw Error(ErrorKind::Config, "l2_penalty must be non-negative");
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double shift = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - shift).exp();
  return e / e.sum();
}

double cross_entropy(const Eigen::VectorXd& probabilities, std::size_t label) {
  return -std::log(std::max(probabilities[static_cast<Eigen::Index>(label)], 1e-12));
}

std::size_t argmax(const Eigen::VectorXd& v) {
  std::size_t best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v[i] > v[static_cast<Eigen::Index>(best)]) best = static_cast<std::size_t>(i);
  }
  return best;
}

Prediction make_prediction(const Eigen::VectorXd& probabilities) {
  Prediction p;
  p.class_index = argmax(probabilities);
  p.label = kClassOrder.at(p.class_index);
  p.probabilities.assign(probabilities.data(), probabilities.data() + probabilities.size());
  return p;
}

SoftmaxRegressionModel SoftmaxRegressionModel::zeros(std::size_t features) {
  SoftmaxRegressionModel m;
  m.weights = Eigen::MatrixXd::Zero(kNumClasses, static_cast<Eigen::Index>(features));
  m.bias = Eigen::VectorXd::Zero(kNumClasses);
  return m;
}

namespace {

void check_inputs(const Eigen::MatrixXd& features, std::span<const std::size_t> labels) {
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw Error(ErrorKind::Shape, "feature rows and labels differ in length");
  }
  for (std::size_t y : labels) {
    if (y >= kNumClasses) throw Error(ErrorKind::Input, "label index out of range");
  }
}

}  // namespace

SoftmaxGradient softmax_loss_gradient(const SoftmaxRegressionModel& model,
                                      const Eigen::MatrixXd& features,
                                      std::span<const std::size_t> labels,
                                      std::span<const std::size_t> rows, double l2_penalty) {
  std::vector<std::size_t> all;
  if (rows.empty()) {
    all.resize(labels.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    rows = all;
  }
  const auto b = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd x(b, features.cols());
  for (Eigen::Index r = 0; r < b; ++r) x.row(r) = features.row(static_cast<Eigen::Index>(rows[r]));

  Eigen::MatrixXd logits = (x * model.weights.transpose()).rowwise() + model.bias.transpose();
  Eigen::MatrixXd delta(b, logits.cols());
  double loss = 0.0;
  for (Eigen::Index r = 0; r < b; ++r) {
    const Eigen::VectorXd p = softmax(logits.row(r).transpose());
    const std::size_t y = labels[rows[r]];
    loss += cross_entropy(p, y);
    delta.row(r) = p.transpose();
    delta(r, static_cast<Eigen::Index>(y)) -= 1.0;
  }
  const double inv_b = 1.0 / static_cast<double>(b);
  delta *= inv_b;

  SoftmaxGradient g;
  g.loss = loss * inv_b;
  g.weights = delta.transpose() * x;
  g.bias = delta.colwise().sum().transpose();
  if (l2_penalty > 0.0) {
    g.loss += 0.5 * l2_penalty * model.weights.squaredNorm();
    g.weights += l2_penalty * model.weights;
  }
  return g;
}

double mean_loss(const SoftmaxRegressionModel& model, const Eigen::MatrixXd& features,
                 std::span<const std::size_t> labels) {
  check_inputs(features, labels);
  return softmax_loss_gradient(model, features, labels).loss;
}

SoftmaxTrainResult train_softmax(const Eigen::MatrixXd& features, std::span<const std::size_t> labels,
                                 const GdConfig& config) {
  config.validate();
  check_inputs(features, labels);
  if (labels.empty()) throw Error(ErrorKind::EmptyDataset, "no training examples");

  SoftmaxTrainResult result;
  result.model = SoftmaxRegressionModel::zeros(static_cast<std::size_t>(features.cols()));
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(config.seed);
  const auto batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      const std::span<const std::size_t> rows(order.data() + start, stop - start);
      const SoftmaxGradient g =
          softmax_loss_gradient(result.model, features, labels, rows, config.l2_penalty);
      if (!std::isfinite(g.loss) || !g.weights.allFinite()) {
        throw Error(ErrorKind::Divergence, "softmax regression diverged at epoch " + std::to_string(epoch));
      }
      result.model.weights -= config.learning_rate * g.weights;
      result.model.bias -= config.learning_rate * g.bias;
      epoch_loss += g.loss;
      ++batches;
    }
    if (!result.model.weights.allFinite() || !result.model.bias.allFinite()) {
      throw Error(ErrorKind::Divergence, "softmax regression diverged at epoch " + std::to_string(epoch));
    }
    result.loss_trace.push_back(epoch_loss / static_cast<double>(batches));
  }
  return result;
}

Prediction predict_softmax(const SoftmaxRegressionModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.weights.cols()) {
    throw Error(ErrorKind::Shape, "softmax input has dimension " + std::to_string(x.size()) +
                                      ", model expects " + std::to_string(model.weights.cols()));
  }
  return make_prediction(softmax(model.weights * x + model.bias));
}

GridSearchResult grid_search(const Eigen::MatrixXd& features, std::span<const std::size_t> labels,
                             double validation_fraction, std::span<const GdConfig> candidates,
                             std::uint64_t split_seed) {
  if (candidates.empty()) throw Error(ErrorKind::Config, "grid search needs at least one candidate");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw Error(ErrorKind::Config, "validation_fraction must lie in (0, 1)");
  }
  check_inputs(features, labels);

  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(split_seed);
  std::shuffle(order.begin(), order.end(), rng);
  auto n_val = static_cast<std::size_t>(std::floor(validation_fraction * static_cast<double>(order.size())));
  n_val = std::clamp<std::size_t>(n_val, 1, order.size() - 1);
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> fit(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val.begin(), val.end());
  std::sort(fit.begin(), fit.end());

  const auto gather = [&](const std::vector<std::size_t>& idx, Eigen::MatrixXd& x, std::vector<std::size_t>& y) {
    x.resize(static_cast<Eigen::Index>(idx.size()), features.cols());
    y.clear();
    for (std::size_t r = 0; r < idx.size(); ++r) {
      x.row(static_cast<Eigen::Index>(r)) = features.row(static_cast<Eigen::Index>(idx[r]));
      y.push_back(labels[idx[r]]);
    }
  };
  Eigen::MatrixXd x_fit, x_val;
  std::vector<std::size_t> y_fit, y_val;
  gather(fit, x_fit, y_fit);
  gather(val, x_val, y_val);

  GridSearchResult result;
  double best = -1.0;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    double score = 0.0;
    try {
      const auto trained = train_softmax(x_fit, y_fit, candidates[c]);
      std::size_t correct = 0;
      for (Eigen::Index r = 0; r < x_val.rows(); ++r) {
        if (predict_softmax(trained.model, x_val.row(r).transpose()).class_index ==
            y_val[static_cast<std::size_t>(r)]) {
          ++correct;
        }
      }
      score = static_cast<double>(correct) / static_cast<double>(y_val.size());
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Divergence) throw;
    }
    result.scores.push_back(score);
    if (score > best) {
      best = score;
      result.best_index = c;
    }
  }
  result.best = candidates[result.best_index];
  return result;
}

}  // namespace medtx
