#include "medtx/serialize.hpp"

#include <sodium.h>

#include <algorithm>
#include <map>

#include "medtx/errors.hpp"

namespace medtx {

std::string content_hash(std::string_view bytes) {
  unsigned char digest[32];
  crypto_generichash(digest, sizeof digest, reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(),
                     nullptr, 0);
  char hex[65];
  sodium_bin2hex(hex, sizeof hex, digest, sizeof digest);
  return hex;
}

namespace {

const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error(ErrorKind::Schema, std::string("missing field '") + key + "'");
  }
  return j.at(key);
}

template <class T>
T get(const Json& j, const char* key) {
  try {
    return field(j, key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Schema, std::string("field '") + key + "': " + e.what());
  }
}

BodySystem class_from_json(const Json& j) {
  const auto c = parse_body_system(j.get<std::string>());
  if (!c) throw Error(ErrorKind::Schema, "unknown class " + j.dump());
  return *c;
}

}  // namespace

Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json data = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Eigen::MatrixXd matrix_from_json(const Json& j) {
  const auto rows = get<Eigen::Index>(j, "rows");
  const auto cols = get<Eigen::Index>(j, "cols");
  const Json& data = field(j, "data");
  if (rows < 0 || cols < 0 || !data.is_array() || static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw Error(ErrorKind::Schema, "matrix data does not match its shape");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)].get<double>();
  }
  return m;
}

Json vector_to_json(const Eigen::VectorXd& v) {
  return Json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vector_from_json(const Json& j) {
  if (!j.is_array()) throw Error(ErrorKind::Schema, "expected a numeric array");
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

Json to_json(const DatasetStats& stats) {
  Json per_class = Json::object();
  for (const auto& [c, n] : stats.per_class_counts) per_class[std::string(to_string(c))] = n;
  Json histogram = Json::array();
  for (const auto& b : stats.length_histogram) {
    histogram.push_back({{"bucket_start", b.start}, {"bucket_end", b.end}, {"count", b.count}});
  }
  return {{"report_count", stats.report_count},
          {"per_class_counts", std::move(per_class)},
          {"unique_word_count", stats.unique_word_count},
          {"mean_char_length", stats.mean_char_length},
          {"histogram_bucket_width", kHistogramBucketWidth},
          {"length_histogram", std::move(histogram)}};
}

Json to_json(const EvalReport& report) {
  Json per_class = Json::object();
  for (const auto& [c, m] : report.per_class) {
    per_class[std::string(to_string(c))] = {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
  }
  Json order = Json::array();
  for (BodySystem c : report.confusion.class_order) order.push_back(std::string(to_string(c)));
  return {{"accuracy", report.accuracy},
          {"macro_f1", report.macro_f1},
          {"per_class", std::move(per_class)},
          {"confusion", {{"class_order", std::move(order)}, {"counts", report.confusion.counts}}}};
}

Json to_json(const SplitSpec& spec) {
  return {{"train_fraction", spec.train_fraction}, {"seed", spec.seed}, {"stratified", spec.stratified}};
}

SplitSpec split_spec_from_json(const Json& j) {
  return {get<double>(j, "train_fraction"), get<std::uint64_t>(j, "seed"), get<bool>(j, "stratified")};
}

Json to_json(const SpecialtyMapping& mapping) {
  Json out = Json::object();
  for (const auto& [name, cls] : mapping.entries()) {
    out[name] = cls ? std::string(to_string(*cls)) : std::string("excluded");
  }
  return out;
}

SpecialtyMapping mapping_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorKind::Schema, "mapping must be an object");
  SpecialtyMapping mapping;
  for (const auto& [name, cls] : j.items()) {
    const auto s = cls.get<std::string>();
    mapping.set(name, s == "excluded" ? std::nullopt : std::optional<BodySystem>(class_from_json(cls)));
  }
  return mapping;
}

Json to_json(const CleanConfig& config) {
  std::vector<std::string> stops(config.stopwords.begin(), config.stopwords.end());
  std::sort(stops.begin(), stops.end());
  const std::map<std::string, std::string> lemmas(config.lemmas.begin(), config.lemmas.end());
  return {{"min_token_length", config.min_token_length}, {"stopwords", stops}, {"lemmas", lemmas}};
}

CleanConfig clean_config_from_json(const Json& j) {
  CleanConfig config;
  config.min_token_length = get<std::size_t>(j, "min_token_length");
  for (const auto& w : field(j, "stopwords")) config.stopwords.insert(w.get<std::string>());
  for (const auto& [k, v] : field(j, "lemmas").items()) config.lemmas.emplace(k, v.get<std::string>());
  return config;
}

Json to_json(const TfidfModel& model) {
  return {{"smoothing", std::string(TfidfModel::kSmoothing)},
          {"document_count", model.document_count()},
          {"vocabulary", model.vocabulary().tokens()},
          {"document_frequency", model.document_frequency()}};
}

TfidfModel tfidf_from_json(const Json& j) {
  if (get<std::string>(j, "smoothing") != TfidfModel::kSmoothing) {
    throw Error(ErrorKind::Schema, "unsupported tf-idf variant");
  }
  return TfidfModel(Vocabulary(get<std::vector<std::string>>(j, "vocabulary")),
                    get<std::vector<std::size_t>>(j, "document_frequency"),
                    get<std::size_t>(j, "document_count"));
}

Json to_json(const PcaModel& model) {
  return {{"mean", vector_to_json(model.mean)},
          {"components", matrix_to_json(model.components)},
          {"explained_variance_ratio", vector_to_json(model.explained_variance_ratio)},
          {"variance_threshold", model.variance_threshold}};
}

PcaModel pca_from_json(const Json& j) {
  PcaModel m;
  m.mean = vector_from_json(field(j, "mean"));
  m.components = matrix_from_json(field(j, "components"));
  m.explained_variance_ratio = vector_from_json(field(j, "explained_variance_ratio"));
  m.variance_threshold = get<double>(j, "variance_threshold");
  if (m.components.cols() != m.mean.size() || m.components.rows() != m.explained_variance_ratio.size()) {
    throw Error(ErrorKind::Schema, "pca model shapes are inconsistent");
  }
  return m;
}

Json to_json(const GdConfig& config) {
  return {{"learning_rate", config.learning_rate},
          {"epochs", config.epochs},
          {"batch_size", config.batch_size},
          {"seed", config.seed},
          {"l2_penalty", config.l2_penalty}};
}

GdConfig gd_config_from_json(const Json& j) {
  GdConfig c;
  c.learning_rate = get<double>(j, "learning_rate");
  c.epochs = get<int>(j, "epochs");
  c.batch_size = get<int>(j, "batch_size");
  c.seed = get<std::uint64_t>(j, "seed");
  c.l2_penalty = get<double>(j, "l2_penalty");
  return c;
}

Json to_json(const SoftmaxRegressionModel& model) {
  Json order = Json::array();
  for (BodySystem c : kClassOrder) order.push_back(std::string(to_string(c)));
  return {{"class_order", std::move(order)},
          {"weights", matrix_to_json(model.weights)},
          {"bias", vector_to_json(model.bias)}};
}

SoftmaxRegressionModel softmax_model_from_json(const Json& j) {
  SoftmaxRegressionModel m;
  m.weights = matrix_from_json(field(j, "weights"));
  m.bias = vector_from_json(field(j, "bias"));
  if (m.weights.rows() != static_cast<Eigen::Index>(kNumClasses) || m.bias.size() != m.weights.rows()) {
    throw Error(ErrorKind::Schema, "softmax model must have one row per class");
  }
  return m;
}

namespace {

Json node_to_json(const std::vector<TreeNode>& nodes, int index) {
  const TreeNode& n = nodes[static_cast<std::size_t>(index)];
  if (n.is_leaf()) return {{"leaf", n.class_counts}};
  return {{"feature", n.feature},
          {"threshold", n.threshold},
          {"left", node_to_json(nodes, n.left)},
          {"right", node_to_json(nodes, n.right)}};
}

int node_from_json(const Json& j, std::vector<TreeNode>& nodes) {
  const int index = static_cast<int>(nodes.size());
  nodes.emplace_back();
  if (j.contains("leaf")) {
    nodes[static_cast<std::size_t>(index)].class_counts = get<std::vector<double>>(j, "leaf");
    return index;
  }
  const int feature = get<int>(j, "feature");
  if (feature < 0) throw Error(ErrorKind::Schema, "split feature must be non-negative");
  const double threshold = get<double>(j, "threshold");
  const int left = node_from_json(field(j, "left"), nodes);
  const int right = node_from_json(field(j, "right"), nodes);
  auto& n = nodes[static_cast<std::size_t>(index)];
  n.feature = feature;
  n.threshold = threshold;
  n.left = left;
  n.right = right;
  return index;
}

}  // namespace

Json to_json(const RandomForestModel& model) {
  Json trees = Json::array();
  for (const auto& t : model.trees) trees.push_back(node_to_json(t.nodes(), 0));
  Json order = Json::array();
  for (BodySystem c : kClassOrder) order.push_back(std::string(to_string(c)));
  return {{"class_order", std::move(order)},
          {"n_estimators", model.n_estimators},
          {"max_depth", model.max_depth},
          {"seed", model.seed},
          {"feature_count", model.feature_count},
          {"trees", std::move(trees)}};
}

RandomForestModel forest_from_json(const Json& j) {
  RandomForestModel m;
  m.n_estimators = get<int>(j, "n_estimators");
  m.max_depth = get<int>(j, "max_depth");
  m.seed = get<std::uint64_t>(j, "seed");
  m.feature_count = get<std::size_t>(j, "feature_count");
  for (const auto& t : field(j, "trees")) {
    std::vector<TreeNode> nodes;
    node_from_json(t, nodes);
    for (const auto& n : nodes) {
      if (!n.is_leaf() && static_cast<std::size_t>(n.feature) >= m.feature_count) {
        throw Error(ErrorKind::Schema, "split feature outside the forest's input dimension");
      }
    }
    m.trees.emplace_back(std::move(nodes), m.max_depth);
  }
  if (static_cast<int>(m.trees.size()) != m.n_estimators) {
    throw Error(ErrorKind::Schema, "forest tree count does not match n_estimators");
  }
  return m;
}

Json to_json(const NetworkConfig& c) {
  return {{"architecture", std::string(to_string(c.architecture))},
          {"vocab_size", c.vocab_size},
          {"embed_dim", c.embed_dim},
          {"hidden_size", c.hidden_size},
          {"n_filters", c.n_filters},
          {"kernel_width", c.kernel_width},
          {"max_len", c.max_len},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"seed", c.seed},
          {"init_scale", c.init_scale},
          {"forget_bias", c.forget_bias},
          {"clip_norm", c.clip_norm}};
}

NetworkConfig network_config_from_json(const Json& j) {
  NetworkConfig c;
  const auto arch = parse_architecture(get<std::string>(j, "architecture"));
  if (!arch) throw Error(ErrorKind::Schema, "unknown network architecture");
  c.architecture = *arch;
  c.vocab_size = get<std::size_t>(j, "vocab_size");
  c.embed_dim = get<std::size_t>(j, "embed_dim");
  c.hidden_size = get<std::size_t>(j, "hidden_size");
  c.n_filters = get<std::size_t>(j, "n_filters");
  c.kernel_width = get<std::size_t>(j, "kernel_width");
  c.max_len = get<std::size_t>(j, "max_len");
  c.epochs = get<int>(j, "epochs");
  c.batch_size = get<std::size_t>(j, "batch_size");
  c.learning_rate = get<double>(j, "learning_rate");
  c.seed = get<std::uint64_t>(j, "seed");
  c.init_scale = get<double>(j, "init_scale");
  c.forget_bias = get<double>(j, "forget_bias");
  c.clip_norm = get<double>(j, "clip_norm");
  return c;
}

Json to_json(const NetworkParams& params) {
  Json out = Json::object();
  out["embedding"] = matrix_to_json(params.embedding);
  if (params.conv) {
    Json taps = Json::array();
    for (const auto& t : params.conv->taps) taps.push_back(matrix_to_json(t));
    out["conv"] = {{"taps", std::move(taps)}, {"bias", vector_to_json(params.conv->bias)}};
  }
  out["lstm"] = {{"weights", matrix_to_json(params.lstm.weights)}, {"bias", vector_to_json(params.lstm.bias)}};
  out["output"] = {{"weights", matrix_to_json(params.output_weights)},
                   {"bias", vector_to_json(params.output_bias)}};
  return out;
}

NetworkParams network_params_from_json(const Json& j, const NetworkConfig& config) {
  NetworkParams p;
  p.embedding = matrix_from_json(field(j, "embedding"));
  if (j.contains("conv")) {
    Conv1dParams conv;
    for (const auto& t : field(j.at("conv"), "taps")) conv.taps.push_back(matrix_from_json(t));
    conv.bias = vector_from_json(field(j.at("conv"), "bias"));
    p.conv = std::move(conv);
  }
  p.lstm.weights = matrix_from_json(field(field(j, "lstm"), "weights"));
  p.lstm.bias = vector_from_json(field(field(j, "lstm"), "bias"));
  p.output_weights = matrix_from_json(field(field(j, "output"), "weights"));
  p.output_bias = vector_from_json(field(field(j, "output"), "bias"));
  if ((config.architecture == Architecture::CnnLstm) != p.conv.has_value()) {
    throw Error(ErrorKind::Schema, "conv parameters do not match the architecture");
  }
  p.check_shapes(config);
  return p;
}

}  // namespace medtx
