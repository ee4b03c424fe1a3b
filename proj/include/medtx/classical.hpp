#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "medtx/body_system.hpp"

namespace medtx {

/// Mini-batch gradient descent settings shared by the linear and neural
/// trainers.
struct GdConfig {
  double learning_rate = 0.1;
  int epochs = 50;
  int batch_size = 100;
  std::uint64_t seed = 0;
  double l2_penalty = 0.0;

  void validate() const;  // throws Config
};

struct Prediction {
  std::size_t class_index = 0;
  BodySystem label = BodySystem::Heart;
  std::vector<double> probabilities;  // aligned with kClassOrder
};

/// Max-logit-shifted softmax.
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

/// -ln p[label], with p clamped at 1e-12.
double cross_entropy(const Eigen::VectorXd& probabilities, std::size_t label);

/// Index of the maximum; earliest index wins ties.
std::size_t argmax(const Eigen::VectorXd& v);

Prediction make_prediction(const Eigen::VectorXd& probabilities);

// ---------------------------------------------------------------------------
// Softmax (multinomial logistic) regression

struct SoftmaxRegressionModel {
  Eigen::MatrixXd weights;  // classes x features
  Eigen::VectorXd bias;     // classes

  static SoftmaxRegressionModel zeros(std::size_t features);
  std::size_t feature_count() const { return static_cast<std::size_t>(weights.cols()); }
};

struct SoftmaxGradient {
  Eigen::MatrixXd weights;
  Eigen::VectorXd bias;
  double loss = 0.0;
};

/// Mean categorical cross-entropy over `rows` of `features` (all rows when
/// empty) plus 0.5 * l2 * ||W||^2, and its analytic gradient.
SoftmaxGradient softmax_loss_gradient(const SoftmaxRegressionModel& model,
                                      const Eigen::MatrixXd& features,
                                      std::span<const std::size_t> labels,
                                      std::span<const std::size_t> rows = {},
                                      double l2_penalty = 0.0);

double mean_loss(const SoftmaxRegressionModel& model, const Eigen::MatrixXd& features,
                 std::span<const std::size_t> labels);

struct SoftmaxTrainResult {
  SoftmaxRegressionModel model;
  std::vector<double> loss_trace;  // mean mini-batch loss per epoch
};

/// Zero-initialised model, seeded shuffle each epoch. `features` holds one
/// example per row; labels index kClassOrder. Throws Divergence when the
/// loss stops being finite.
SoftmaxTrainResult train_softmax(const Eigen::MatrixXd& features, std::span<const std::size_t> labels,
                                 const GdConfig& config);

Prediction predict_softmax(const SoftmaxRegressionModel& model, const Eigen::VectorXd& x);

struct GridSearchResult {
  GdConfig best;
  std::size_t best_index = 0;
  std::vector<double> scores;  // validation accuracy per candidate
};

/// Holds out `validation_fraction` of the rows (seeded by `split_seed`),
/// trains each candidate on the rest and scores validation accuracy. A
/// diverging candidate scores 0. Ties go to the earliest candidate.
GridSearchResult grid_search(const Eigen::MatrixXd& features, std::span<const std::size_t> labels,
                             double validation_fraction, std::span<const GdConfig> candidates,
                             std::uint64_t split_seed = 0);

// ---------------------------------------------------------------------------
// Random forest

struct TreeNode {
  int feature = -1;  // < 0 marks a leaf
  double threshold = 0.0;  // x[feature] <= threshold goes left
  int left = -1;
  int right = -1;
  std::vector<double> class_counts;  // leaves only, aligned with kClassOrder

  bool is_leaf() const { return feature < 0; }
};

class DecisionTree {
 public:
  DecisionTree() = default;
  /// Node 0 is the root. Throws Input on dangling child indices, empty leaf
  /// distributions, or paths longer than max_depth.
  DecisionTree(std::vector<TreeNode> nodes, int max_depth);

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  int max_depth() const { return max_depth_; }
  /// Longest root-to-leaf path, counted in internal nodes.
  int depth() const;

  const TreeNode& leaf_for(const Eigen::VectorXd& x) const;
  /// Majority class of the reached leaf; ties by kClassOrder.
  std::size_t vote(const Eigen::VectorXd& x) const;

 private:
  std::vector<TreeNode> nodes_;
  int max_depth_ = 0;
};

struct RandomForestModel {
  std::vector<DecisionTree> trees;
  int n_estimators = 150;
  int max_depth = 4;
  std::uint64_t seed = 0;
  std::size_t feature_count = 0;
};

struct ForestPrediction {
  std::size_t class_index = 0;
  BodySystem label = BodySystem::Heart;
  std::vector<double> votes;  // fraction of trees per class
};

/// Each tree is grown on a bootstrap sample with seed + tree_index, trying
/// ceil(sqrt(d)) random features per split and maximising Gini decrease.
RandomForestModel train_forest(const Eigen::MatrixXd& features, std::span<const std::size_t> labels,
                               int n_estimators = 150, int max_depth = 4, std::uint64_t seed = 0);

ForestPrediction predict_forest(const RandomForestModel& model, const Eigen::VectorXd& x);

}  // namespace medtx
