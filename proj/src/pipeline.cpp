#include "medtx/pipeline.hpp"

#include <fstream>
#include <sstream>

#include "medtx/errors.hpp"

namespace medtx {

std::string_view to_string(ModelFamily family) {
  switch (family) {
    case ModelFamily::LogReg: return "logreg";
    case ModelFamily::Forest: return "forest";
    case ModelFamily::Lstm: return "lstm";
    case ModelFamily::CnnLstm: return "cnn-lstm";
  }
  return "?";
}

std::optional<ModelFamily> parse_model_family(std::string_view name) {
  if (name == "logreg") return ModelFamily::LogReg;
  if (name == "forest") return ModelFamily::Forest;
  if (name == "lstm") return ModelFamily::Lstm;
  if (name == "cnn-lstm" || name == "cnn_lstm") return ModelFamily::CnnLstm;
  return std::nullopt;
}

std::vector<GdConfig> default_logreg_grid(const GdConfig& base) {
  std::vector<GdConfig> grid;
  for (double l2 : {0.0, 1e-4}) {
    for (double lr : {0.1, 0.5, 1.0, 2.0}) {
      GdConfig c = base;
      c.learning_rate = lr;
      c.l2_penalty = l2;
      grid.push_back(c);
    }
  }
  return grid;
}

std::string dataset_fingerprint(const std::vector<CuratedExample>& examples) {
  std::string buffer;
  for (const auto& ex : examples) {
    buffer += ex.id;
    buffer.push_back('\0');
    buffer += to_string(ex.label);
    buffer.push_back('\0');
    buffer += ex.transcription;
    buffer.push_back('\x1e');
  }
  return content_hash(buffer);
}

namespace {

std::vector<TokenizedDoc> preprocess_all(const std::vector<CuratedExample>& examples, const CleanConfig& clean) {
  std::vector<TokenizedDoc> docs;
  docs.reserve(examples.size());
  for (const auto& ex : examples) docs.push_back(preprocess_document(ex.transcription, clean, ex.id));
  return docs;
}

std::vector<std::size_t> label_indices(const std::vector<CuratedExample>& examples) {
  std::vector<std::size_t> y;
  y.reserve(examples.size());
  for (const auto& ex : examples) y.push_back(class_index(ex.label));
  return y;
}

Eigen::MatrixXd tfidf_matrix(const TfidfModel& tfidf, const std::vector<TokenizedDoc>& docs) {
  std::vector<FeatureVector> vectors;
  vectors.reserve(docs.size());
  for (const auto& d : docs) vectors.push_back(transform_tfidf(tfidf, d));
  return densify(vectors);
}

Prediction predict_one(const ModelArtifact& artifact, const TokenizedDoc& doc) {
  return std::visit(
      [&](const auto& model) -> Prediction {
        using T = std::decay_t<decltype(model)>;
        if constexpr (std::is_same_v<T, NetworkModel>) {
          const TokenizedDoc one[] = {doc};
          const SequenceBatch batch = encode_sequences(one, artifact.tfidf.vocabulary(), model.config.max_len);
          return predict_network(model.params, model.config, batch).front();
        } else {
          const FeatureVector v = transform_tfidf(artifact.tfidf, doc);
          if constexpr (std::is_same_v<T, SoftmaxRegressionModel>) {
            return predict_softmax(model, artifact.pca ? project(*artifact.pca, v) : v.dense());
          } else {
            const ForestPrediction fp = predict_forest(model, v.dense());
            Prediction p;
            p.class_index = fp.class_index;
            p.label = fp.label;
            p.probabilities = fp.votes;
            return p;
          }
        }
      },
      artifact.model);
}

}  // namespace

TrainOutcome train_pipeline(const std::vector<CuratedExample>& examples, const CleanConfig& clean,
                            const SpecialtyMapping& mapping, const PipelineOptions& options) {
  const DatasetSplit split = split_dataset(examples, options.split);
  if (split.train.empty() || split.test.empty()) {
    throw Error(ErrorKind::EmptyDataset, "split produced an empty train or test set");
  }
  const auto train_docs = preprocess_all(split.train, clean);
  const auto train_labels = label_indices(split.train);

  TrainOutcome outcome;
  ModelArtifact& a = outcome.artifact;
  a.family = options.family;
  a.clean = clean;
  a.mapping = mapping;
  a.split = options.split;
  a.dataset_fingerprint = dataset_fingerprint(examples);
  a.tfidf = fit_tfidf(train_docs, options.max_features);

  switch (options.family) {
    case ModelFamily::LogReg: {
      Eigen::MatrixXd x = tfidf_matrix(a.tfidf, train_docs);
      if (options.use_pca) {
        a.pca = fit_pca(x, options.pca_threshold);
        x = ((x.rowwise() - a.pca->mean.transpose()) * a.pca->components.transpose()).eval();
      }
      GdConfig gd = options.gd;
      if (!options.grid.empty()) {
        gd = grid_search(x, train_labels, options.validation_fraction, options.grid, options.split.seed).best;
      }
      auto trained = train_softmax(x, train_labels, gd);
      a.selected_gd = gd;
      a.loss_trace = std::move(trained.loss_trace);
      a.model = std::move(trained.model);
      break;
    }
    case ModelFamily::Forest: {
      const Eigen::MatrixXd x = tfidf_matrix(a.tfidf, train_docs);
      a.model = train_forest(x, train_labels, options.n_estimators, options.max_depth, options.forest_seed);
      break;
    }
    case ModelFamily::Lstm:
    case ModelFamily::CnnLstm: {
      NetworkConfig config = options.network;
      config.architecture =
          options.family == ModelFamily::CnnLstm ? Architecture::CnnLstm : Architecture::Lstm;
      config.vocab_size = a.tfidf.dimension();
      SequenceBatch data = encode_sequences(train_docs, a.tfidf.vocabulary(), config.max_len);
      data.labels = train_labels;
      auto trained = train_network(data, config);
      a.loss_trace = std::move(trained.loss_trace);
      a.model = NetworkModel{config, std::move(trained.params)};
      break;
    }
  }

  outcome.test_report = evaluate_examples(a, split.test);
  a.test_accuracy = outcome.test_report.accuracy;
  return outcome;
}

std::vector<Prediction> predict_docs(const ModelArtifact& artifact, const std::vector<TokenizedDoc>& docs) {
  std::vector<Prediction> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back(predict_one(artifact, d));
  return out;
}

Prediction classify_text(const ModelArtifact& artifact, std::string_view text) {
  const TokenizedDoc doc = preprocess_document(text, artifact.clean);
  if (doc.tokens.empty()) throw Error(ErrorKind::Unclassifiable, "text has no usable tokens after preprocessing");
  return predict_one(artifact, doc);
}

EvalReport evaluate_examples(const ModelArtifact& artifact, const std::vector<CuratedExample>& examples) {
  const auto docs = preprocess_all(examples, artifact.clean);
  const auto predictions = predict_docs(artifact, docs);
  std::vector<BodySystem> truth, predicted;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    truth.push_back(examples[i].label);
    predicted.push_back(predictions[i].label);
  }
  return compute_metrics(confusion_matrix(truth, predicted));
}

EvalReport evaluate_artifact(const ModelArtifact& artifact, const std::vector<CuratedExample>& examples) {
  return evaluate_examples(artifact, split_dataset(examples, artifact.split).test);
}

Json artifact_to_json(const ModelArtifact& a) {
  Json order = Json::array();
  for (BodySystem c : kClassOrder) order.push_back(std::string(to_string(c)));
  Json j = Json::object();
  j["format_version"] = ModelArtifact::kFormatVersion;
  j["family"] = std::string(to_string(a.family));
  j["class_order"] = std::move(order);
  j["clean"] = to_json(a.clean);
  j["clean_hash"] = a.clean.fingerprint();
  j["mapping"] = to_json(a.mapping);
  j["split"] = to_json(a.split);
  j["dataset_fingerprint"] = a.dataset_fingerprint;
  j["tfidf"] = to_json(a.tfidf);
  j["vocabulary_hash"] = content_hash(Json(a.tfidf.vocabulary().tokens()).dump());
  j["pca"] = a.pca ? to_json(*a.pca) : Json(nullptr);
  j["selected_gd"] = a.selected_gd ? to_json(*a.selected_gd) : Json(nullptr);
  j["loss_trace"] = a.loss_trace;
  j["test_accuracy"] = a.test_accuracy;
  j["model"] = std::visit(
      [](const auto& m) -> Json {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, NetworkModel>) {
          return {{"config", to_json(m.config)}, {"params", to_json(m.params)}};
        } else {
          return to_json(m);
        }
      },
      a.model);
  return j;
}

ModelArtifact artifact_from_json(const Json& j) {
  try {
    if (j.at("format_version").get<int>() != ModelArtifact::kFormatVersion) {
      throw Error(ErrorKind::Schema, "unsupported artifact format version");
    }
    ModelArtifact a;
    const auto family = parse_model_family(j.at("family").get<std::string>());
    if (!family) throw Error(ErrorKind::Schema, "unknown model family");
    a.family = *family;
    const auto order = j.at("class_order").get<std::vector<std::string>>();
    if (order.size() != kNumClasses) throw Error(ErrorKind::Schema, "artifact class order must list four classes");
    for (std::size_t i = 0; i < kNumClasses; ++i) {
      if (parse_body_system(order[i]) != kClassOrder[i]) {
        throw Error(ErrorKind::Schema, "artifact class order differs from Heart, Brain, Reproductive, Digestive");
      }
    }
    a.clean = clean_config_from_json(j.at("clean"));
    if (a.clean.fingerprint() != j.at("clean_hash").get<std::string>()) {
      throw Error(ErrorKind::Schema, "artifact preprocessing hash mismatch");
    }
    a.mapping = mapping_from_json(j.at("mapping"));
    a.split = split_spec_from_json(j.at("split"));
    a.dataset_fingerprint = j.at("dataset_fingerprint").get<std::string>();
    a.tfidf = tfidf_from_json(j.at("tfidf"));
    if (content_hash(Json(a.tfidf.vocabulary().tokens()).dump()) != j.at("vocabulary_hash").get<std::string>()) {
      throw Error(ErrorKind::Schema, "artifact vocabulary hash mismatch");
    }
    if (!j.at("pca").is_null()) a.pca = pca_from_json(j.at("pca"));
    if (!j.at("selected_gd").is_null()) a.selected_gd = gd_config_from_json(j.at("selected_gd"));
    a.loss_trace = j.at("loss_trace").get<std::vector<double>>();
    a.test_accuracy = j.at("test_accuracy").get<double>();
    const Json& m = j.at("model");
    switch (a.family) {
      case ModelFamily::LogReg: {
        auto model = softmax_model_from_json(m);
        const std::size_t expected = a.pca ? a.pca->output_dimension() : a.tfidf.dimension();
        if (model.feature_count() != expected) throw Error(ErrorKind::Schema, "softmax weights do not match features");
        if (a.pca && a.pca->input_dimension() != a.tfidf.dimension()) {
          throw Error(ErrorKind::Schema, "pca input does not match the tf-idf dimension");
        }
        a.model = std::move(model);
        break;
      }
      case ModelFamily::Forest: {
        auto model = forest_from_json(m);
        if (model.feature_count != a.tfidf.dimension()) throw Error(ErrorKind::Schema, "forest input does not match tf-idf");
        a.model = std::move(model);
        break;
      }
      case ModelFamily::Lstm:
      case ModelFamily::CnnLstm: {
        NetworkModel net;
        net.config = network_config_from_json(m.at("config"));
        if (net.config.vocab_size != a.tfidf.dimension()) {
          throw Error(ErrorKind::Schema, "network vocabulary does not match the artifact vocabulary");
        }
        net.params = network_params_from_json(m.at("params"), net.config);
        a.model = std::move(net);
        break;
      }
    }
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Schema, std::string("malformed artifact: ") + e.what());
  }
}

std::string serialize_artifact(const ModelArtifact& artifact) {
  return artifact_to_json(artifact).dump() + "\n";
}

void save_artifact(const ModelArtifact& artifact, const std::filesystem::path& path) {
  const std::string bytes = serialize_artifact(artifact);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + tmp.string());
    out << bytes;
    if (!out) throw Error(ErrorKind::Io, "error writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

ModelArtifact load_artifact(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read artifact " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Schema, "artifact " + path.string() + " is not valid JSON: " + e.what());
  }
  return artifact_from_json(j);
}

ArtifactHashes artifact_hashes(const ModelArtifact& artifact) {
  const Json j = artifact_to_json(artifact);
  return {j.at("clean_hash").get<std::string>(), content_hash(j.at("tfidf").dump()),
          content_hash(j.at("pca").dump()), content_hash(j.at("model").dump())};
}

}  // namespace medtx
