#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "medtx/preprocess.hpp"

namespace medtx {

/// Bijective token <-> index map with contiguous indices.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens);

  std::optional<std::size_t> index_of(std::string_view token) const;
  const std::string& token(std::size_t index) const { return tokens_.at(index); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::size_t size() const { return tokens_.size(); }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct SparseEntry {
  std::size_t index = 0;
  double weight = 0.0;
};

struct FeatureVector {
  std::size_t dimension = 0;
  std::vector<SparseEntry> entries;  // strictly increasing index

  Eigen::VectorXd dense() const;
  double norm() const;
};

/// Smoothed TF-IDF: tf = count/|d|, idf = ln((1+N)/(1+df)) + 1, followed by
/// L2 normalization of each document vector.
class TfidfModel {
 public:
  static constexpr std::string_view kSmoothing = "smooth_ln_plus1_l2";

  TfidfModel() = default;
  TfidfModel(Vocabulary vocabulary, std::vector<std::size_t> document_frequency,
             std::size_t document_count);

  const Vocabulary& vocabulary() const { return vocabulary_; }
  const std::vector<std::size_t>& document_frequency() const { return df_; }
  std::size_t document_count() const { return document_count_; }
  std::size_t dimension() const { return vocabulary_.size(); }
  double idf(std::size_t index) const { return idf_.at(index); }

 private:
  Vocabulary vocabulary_;
  std::vector<std::size_t> df_;
  std::vector<double> idf_;
  std::size_t document_count_ = 0;
};

/// Vocabulary is sorted lexicographically. With `max_features`, only the
/// highest document-frequency tokens are kept (ties: lexicographic).
/// Throws EmptyDataset when every document is empty.
TfidfModel fit_tfidf(std::span<const TokenizedDoc> docs,
                     std::optional<std::size_t> max_features = std::nullopt);

FeatureVector transform_tfidf(const TfidfModel& model, const TokenizedDoc& doc);

/// Stacks feature vectors as rows of a dense matrix.
Eigen::MatrixXd densify(std::span<const FeatureVector> vectors);

struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;  // k x d, orthonormal rows
  Eigen::VectorXd explained_variance_ratio;
  double variance_threshold = 0.95;

  std::size_t input_dimension() const { return static_cast<std::size_t>(mean.size()); }
  std::size_t output_dimension() const { return static_cast<std::size_t>(components.rows()); }
};

/// Keeps the fewest leading components whose cumulative explained variance
/// reaches `variance_threshold`. Rows of `data` are observations.
/// Throws Config for fewer than two rows, an out-of-range threshold, or
/// zero total variance.
PcaModel fit_pca(const Eigen::MatrixXd& data, double variance_threshold);

/// Fixed number of leading components (used for 2-D embedding exports).
/// Zero-variance data is allowed here.
PcaModel fit_pca_components(const Eigen::MatrixXd& data, std::size_t k);

/// Throws Shape on a dimension mismatch.
Eigen::VectorXd project(const PcaModel& model, const Eigen::VectorXd& x);
Eigen::VectorXd project(const PcaModel& model, const FeatureVector& x);

}  // namespace medtx
