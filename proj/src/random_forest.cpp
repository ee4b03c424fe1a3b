#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "medtx/classical.hpp"
#include "medtx/errors.hpp"

namespace medtx {

DecisionTree::DecisionTree(std::vector<TreeNode> nodes, int max_depth)
    : nodes_(std::move(nodes)), max_depth_(max_depth) {
  if (nodes_.empty()) throw Error(ErrorKind::Input, "decision tree has no nodes");
  const auto n = static_cast<int>(nodes_.size());
  for (const auto& node : nodes_) {
    if (node.is_leaf()) {
      if (node.class_counts.size() != kNumClasses) {
        throw Error(ErrorKind::Input, "leaf distribution must have one count per class");
      }
      double total = 0.0;
      for (double c : node.class_counts) {
        if (!(c >= 0.0)) throw Error(ErrorKind::Input, "leaf counts must be non-negative");
        total += c;
      }
      if (total <= 0.0) throw Error(ErrorKind::Input, "leaf distribution is empty");
    } else if (node.left <= 0 || node.right <= 0 || node.left >= n || node.right >= n) {
      throw Error(ErrorKind::Input, "decision tree child index out of range");
    }
  }
  if (depth() > max_depth_) throw Error(ErrorKind::Input, "decision tree deeper than max_depth");
}

int DecisionTree::depth() const {
  // Iterative walk; guards against cycles by bounding the depth at node count.
  int deepest = 0;
  std::vector<std::pair<int, int>> stack{{0, 0}};
  while (!stack.empty()) {
    const auto [idx, d] = stack.back();
    stack.pop_back();
    const auto& node = nodes_[static_cast<std::size_t>(idx)];
    if (node.is_leaf()) {
      deepest = std::max(deepest, d);
      continue;
    }
    if (d >= static_cast<int>(nodes_.size())) throw Error(ErrorKind::Input, "decision tree contains a cycle");
    stack.emplace_back(node.left, d + 1);
    stack.emplace_back(node.right, d + 1);
  }
  return deepest;
}

const TreeNode& DecisionTree::leaf_for(const Eigen::VectorXd& x) const {
  const TreeNode* node = &nodes_.front();
  while (!node->is_leaf()) {
    const int next = x[node->feature] <= node->threshold ? node->left : node->right;
    node = &nodes_[static_cast<std::size_t>(next)];
  }
  return *node;
}

std::size_t DecisionTree::vote(const Eigen::VectorXd& x) const {
  const auto& counts = leaf_for(x).class_counts;
  return static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double decrease = 0.0;
};

// n * gini for a count vector.
double weighted_gini(const std::array<double, kNumClasses>& counts, double n) {
  if (n <= 0.0) return 0.0;
  double sq = 0.0;
  for (double c : counts) sq += c * c;
  return n - sq / n;
}

class TreeGrower {
 public:
  TreeGrower(const Eigen::MatrixXd& x, std::span<const std::size_t> y, int max_depth, std::uint64_t seed)
      : x_(x), y_(y), max_depth_(max_depth), rng_(seed),
        features_(static_cast<std::size_t>(x.cols())),
        try_count_(static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(x.cols()))))) {
    std::iota(features_.begin(), features_.end(), 0);
    try_count_ = std::min(try_count_, features_.size());
  }

  DecisionTree grow() {
    const std::size_t n = y_.size();
    std::uniform_int_distribution<std::size_t> draw(0, n - 1);
    std::vector<std::size_t> sample(n);
    for (auto& s : sample) s = draw(rng_);
    std::sort(sample.begin(), sample.end());
    build(sample, 0);
    return DecisionTree(std::move(nodes_), max_depth_);
  }

 private:
  int build(const std::vector<std::size_t>& rows, int depth) {
    const int index = static_cast<int>(nodes_.size());
    nodes_.emplace_back();

    std::array<double, kNumClasses> counts{};
    for (std::size_t r : rows) counts[y_[r]] += 1.0;
    const bool pure = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0.0; }) <= 1;

    Split split;
    if (depth < max_depth_ && !pure && rows.size() >= 2) split = best_split(rows, counts);
    if (split.feature < 0) {
      nodes_[static_cast<std::size_t>(index)].class_counts.assign(counts.begin(), counts.end());
      return index;
    }

    std::vector<std::size_t> left, right;
    for (std::size_t r : rows) {
      (x_(static_cast<Eigen::Index>(r), split.feature) <= split.threshold ? left : right).push_back(r);
    }
    const int l = build(left, depth + 1);
    const int rgt = build(right, depth + 1);
    auto& node = nodes_[static_cast<std::size_t>(index)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = rgt;
    return index;
  }

  Split best_split(const std::vector<std::size_t>& rows, const std::array<double, kNumClasses>& counts) {
    // Partial Fisher-Yates draws the candidate feature subset.
    for (std::size_t i = 0; i < try_count_; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, features_.size() - 1);
      std::swap(features_[i], features_[pick(rng_)]);
    }
    const double n = static_cast<double>(rows.size());
    const double parent = weighted_gini(counts, n);

    Split best;
    std::vector<std::pair<double, std::size_t>> column(rows.size());
    for (std::size_t t = 0; t < try_count_; ++t) {
      const int f = features_[t];
      for (std::size_t i = 0; i < rows.size(); ++i) {
        column[i] = {x_(static_cast<Eigen::Index>(rows[i]), f), y_[rows[i]]};
      }
      std::sort(column.begin(), column.end());
      if (column.front().first == column.back().first) continue;

      std::array<double, kNumClasses> left{};
      std::array<double, kNumClasses> right = counts;
      for (std::size_t i = 0; i + 1 < column.size(); ++i) {
        left[column[i].second] += 1.0;
        right[column[i].second] -= 1.0;
        if (column[i].first == column[i + 1].first) continue;
        const double nl = static_cast<double>(i + 1);
        const double decrease = parent - weighted_gini(left, nl) - weighted_gini(right, n - nl);
        if (decrease > best.decrease + 1e-12) {
          best.feature = f;
          best.threshold = 0.5 * (column[i].first + column[i + 1].first);
          best.decrease = decrease;
        }
      }
    }
    return best;
  }

  const Eigen::MatrixXd& x_;
  std::span<const std::size_t> y_;
  int max_depth_;
  std::mt19937_64 rng_;
  std::vector<int> features_;
  std::size_t try_count_;
  std::vector<TreeNode> nodes_;
};

}  // namespace

RandomForestModel train_forest(const Eigen::MatrixXd& features, std::span<const std::size_t> labels,
                               int n_estimators, int max_depth, std::uint64_t seed) {
  if (n_estimators < 1) throw Error(ErrorKind::Config, "n_estimators must be at least 1");
  if (max_depth < 0) throw Error(ErrorKind::Config, "max_depth must be non-negative");
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw Error(ErrorKind::Shape, "feature rows and labels differ in length");
  }
  if (labels.empty() || features.cols() == 0) throw Error(ErrorKind::EmptyDataset, "no training data for forest");
  for (std::size_t y : labels) {
    if (y >= kNumClasses) throw Error(ErrorKind::Input, "label index out of range");
  }

  RandomForestModel model;
  model.n_estimators = n_estimators;
  model.max_depth = max_depth;
  model.seed = seed;
  model.feature_count = static_cast<std::size_t>(features.cols());
  model.trees.reserve(static_cast<std::size_t>(n_estimators));
  for (int t = 0; t < n_estimators; ++t) {
    TreeGrower grower(features, labels, max_depth, seed + static_cast<std::uint64_t>(t));
    model.trees.push_back(grower.grow());
  }
  return model;
}

ForestPrediction predict_forest(const RandomForestModel& model, const Eigen::VectorXd& x) {
  if (static_cast<std::size_t>(x.size()) != model.feature_count) {
    throw Error(ErrorKind::Shape, "forest input has dimension " + std::to_string(x.size()) +
                                      ", model expects " + std::to_string(model.feature_count));
  }
  ForestPrediction p;
  p.votes.assign(kNumClasses, 0.0);
  for (const auto& tree : model.trees) p.votes[tree.vote(x)] += 1.0;
  for (auto& v : p.votes) v /= static_cast<double>(model.trees.size());
  p.class_index = static_cast<std::size_t>(std::max_element(p.votes.begin(), p.votes.end()) - p.votes.begin());
  p.label = kClassOrder[p.class_index];
  return p;
}

}  // namespace medtx
