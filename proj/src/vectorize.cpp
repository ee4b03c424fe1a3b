#include "medtx/vectorize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "medtx/errors.hpp"

namespace medtx {

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], i).second) {
      throw Error(ErrorKind::Input, "duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
}

std::optional<std::size_t> Vocabulary::index_of(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Eigen::VectorXd FeatureVector::dense() const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dimension));
  for (const auto& e : entries) v[static_cast<Eigen::Index>(e.index)] = e.weight;
  return v;
}

double FeatureVector::norm() const {
  double s = 0.0;
  for (const auto& e : entries) s += e.weight * e.weight;
  return std::sqrt(s);
}

TfidfModel::TfidfModel(Vocabulary vocabulary, std::vector<std::size_t> document_frequency,
                       std::size_t document_count)
    : vocabulary_(std::move(vocabulary)), df_(std::move(document_frequency)),
      document_count_(document_count) {
  if (df_.size() != vocabulary_.size()) {
    throw Error(ErrorKind::Shape, "document frequency table does not match vocabulary");
  }
  idf_.resize(df_.size());
  const double n = static_cast<double>(document_count_);
  for (std::size_t i = 0; i < df_.size(); ++i) {
    if (df_[i] < 1 || df_[i] > document_count_) {
      throw Error(ErrorKind::Input, "document frequency out of range for '" + vocabulary_.token(i) + "'");
    }
    idf_[i] = std::log((1.0 + n) / (1.0 + static_cast<double>(df_[i]))) + 1.0;
  }
}

TfidfModel fit_tfidf(std::span<const TokenizedDoc> docs, std::optional<std::size_t> max_features) {
  std::map<std::string, std::size_t> df;
  for (const auto& doc : docs) {
    std::vector<std::string> unique(doc.tokens.begin(), doc.tokens.end());
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    for (auto& t : unique) ++df[std::move(t)];
  }
  if (df.empty()) throw Error(ErrorKind::EmptyDataset, "cannot fit tf-idf: all documents are empty");

  std::vector<std::pair<std::string, std::size_t>> entries(df.begin(), df.end());
  if (max_features && *max_features < entries.size()) {
    std::stable_sort(entries.begin(), entries.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    entries.resize(*max_features);
    std::sort(entries.begin(), entries.end());
  }
  std::vector<std::string> tokens;
  std::vector<std::size_t> freq;
  tokens.reserve(entries.size());
  freq.reserve(entries.size());
  for (auto& [t, f] : entries) {
    tokens.push_back(t);
    freq.push_back(f);
  }
  return TfidfModel(Vocabulary(std::move(tokens)), std::move(freq), docs.size());
}

FeatureVector transform_tfidf(const TfidfModel& model, const TokenizedDoc& doc) {
  FeatureVector out;
  out.dimension = model.dimension();
  if (doc.tokens.empty()) return out;

  std::map<std::size_t, std::size_t> counts;
  for (const auto& t : doc.tokens) {
    if (const auto idx = model.vocabulary().index_of(t)) ++counts[*idx];
  }
  const double length = static_cast<double>(doc.tokens.size());
  double sq = 0.0;
  out.entries.reserve(counts.size());
  for (const auto& [idx, count] : counts) {
    const double w = (static_cast<double>(count) / length) * model.idf(idx);
    out.entries.push_back({idx, w});
    sq += w * w;
  }
  if (sq > 0.0) {
    const double inv = 1.0 / std::sqrt(sq);
    for (auto& e : out.entries) e.weight *= inv;
  }
  return out;
}

Eigen::MatrixXd densify(std::span<const FeatureVector> vectors) {
  if (vectors.empty()) return {};
  const std::size_t d = vectors.front().dimension;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(vectors.size()),
                                            static_cast<Eigen::Index>(d));
  for (std::size_t r = 0; r < vectors.size(); ++r) {
    if (vectors[r].dimension != d) throw Error(ErrorKind::Shape, "feature vectors differ in dimension");
    for (const auto& e : vectors[r].entries) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(e.index)) = e.weight;
    }
  }
  return m;
}

namespace {

struct Eigenbasis {
  Eigen::MatrixXd axes;      // d x m, columns orthonormal, descending variance
  Eigen::VectorXd variance;  // m, descending, clipped at zero
  double total = 0.0;
};

// Eigendecomposition of the sample covariance. When d > n the n x n Gram
// matrix is decomposed instead and its eigenvectors lifted back to R^d.
Eigenbasis decompose(const Eigen::MatrixXd& centered) {
  const Eigen::Index n = centered.rows();
  const Eigen::Index d = centered.cols();
  const double denom = static_cast<double>(n - 1);
  Eigenbasis basis;

  if (d <= n) {
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    basis.axes = solver.eigenvectors().rowwise().reverse();
    basis.variance = solver.eigenvalues().reverse();
  } else {
    const Eigen::MatrixXd gram = (centered * centered.transpose()) / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
    const Eigen::MatrixXd u = solver.eigenvectors().rowwise().reverse();
    basis.variance = solver.eigenvalues().reverse();
    basis.axes = centered.transpose() * u;
  }
  const double top = basis.variance.size() > 0 ? std::max(0.0, basis.variance[0]) : 0.0;
  const double floor = top * static_cast<double>(std::max(n, d)) * std::numeric_limits<double>::epsilon();
  for (Eigen::Index i = 0; i < basis.variance.size(); ++i) {
    if (basis.variance[i] <= floor) basis.variance[i] = 0.0;
  }
  basis.total = basis.variance.sum();
  return basis;
}

PcaModel assemble(const Eigen::MatrixXd& data, const Eigen::VectorXd& mean, const Eigenbasis& basis,
                  Eigen::Index k, double threshold) {
  const Eigen::Index d = data.cols();
  Eigen::MatrixXd axes = basis.axes.leftCols(k);
  if (axes.rows() == d && k > 0) {
    // Lifted Gram eigenvectors are only approximately orthogonal; a thin QR
    // restores orthonormality without changing the spanned subspace.
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(axes);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, k);
    for (Eigen::Index j = 0; j < k; ++j) {
      if (q.col(j).dot(axes.col(j)) < 0.0) q.col(j) = -q.col(j);
    }
    axes = std::move(q);
  }
  PcaModel model;
  model.mean = mean;
  model.variance_threshold = threshold;
  model.components = axes.transpose();
  model.explained_variance_ratio.resize(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    model.explained_variance_ratio[j] = basis.total > 0.0 ? basis.variance[j] / basis.total : 0.0;
    auto row = model.components.row(j);
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index c = 0; c < d; ++c) {
      if (std::abs(row[c]) > best + 1e-15) {
        best = std::abs(row[c]);
        arg = c;
      }
    }
    if (row[arg] < 0.0) row = -row;
  }
  return model;
}

Eigen::VectorXd column_mean(const Eigen::MatrixXd& data) {
  return data.colwise().mean().transpose();
}

}  // namespace

PcaModel fit_pca(const Eigen::MatrixXd& data, double variance_threshold) {
  if (data.rows() < 2) throw Error(ErrorKind::Config, "pca needs at least two vectors");
  if (!(variance_threshold > 0.0 && variance_threshold <= 1.0)) {
    throw Error(ErrorKind::Config, "pca variance threshold must lie in (0, 1]");
  }
  const Eigen::VectorXd mean = column_mean(data);
  const Eigen::MatrixXd centered = data.rowwise() - mean.transpose();
  const Eigenbasis basis = decompose(centered);
  if (!(basis.total > 0.0)) throw Error(ErrorKind::Config, "pca input has zero variance");

  const double target = variance_threshold * basis.total * (1.0 - 1e-12);
  Eigen::Index k = 0;
  double cumulative = 0.0;
  while (k < basis.variance.size() && basis.variance[k] > 0.0) {
    cumulative += basis.variance[k];
    ++k;
    if (cumulative >= target) break;
  }
  return assemble(data, mean, basis, k, variance_threshold);
}

PcaModel fit_pca_components(const Eigen::MatrixXd& data, std::size_t k) {
  if (data.rows() < 2) throw Error(ErrorKind::Config, "pca needs at least two vectors");
  const Eigen::VectorXd mean = column_mean(data);
  const Eigen::MatrixXd centered = data.rowwise() - mean.transpose();
  Eigenbasis basis = decompose(centered);
  const auto available = std::min<Eigen::Index>(basis.axes.cols(), data.cols());
  const auto keep = std::min<Eigen::Index>(static_cast<Eigen::Index>(k), available);
  if (basis.total == 0.0) {
    // Degenerate data: any orthonormal basis works, the projections are zero.
    basis.axes = Eigen::MatrixXd::Identity(data.cols(), available);
  }
  PcaModel model = assemble(data, mean, basis, keep, 1.0);
  return model;
}

Eigen::VectorXd project(const PcaModel& model, const Eigen::VectorXd& x) {
  if (static_cast<std::size_t>(x.size()) != model.input_dimension()) {
    throw Error(ErrorKind::Shape, "pca input has dimension " + std::to_string(x.size()) +
                                      ", model expects " + std::to_string(model.input_dimension()));
  }
  return model.components * (x - model.mean);
}

Eigen::VectorXd project(const PcaModel& model, const FeatureVector& x) {
  if (x.dimension != model.input_dimension()) {
    throw Error(ErrorKind::Shape, "pca input has dimension " + std::to_string(x.dimension) +
                                      ", model expects " + std::to_string(model.input_dimension()));
  }
  Eigen::VectorXd out = -(model.components * model.mean);
  for (const auto& e : x.entries) {
    out += model.components.col(static_cast<Eigen::Index>(e.index)) * e.weight;
  }
  return out;
}

}  // namespace medtx
