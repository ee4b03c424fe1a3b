#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "medtx/classical.hpp"
#include "medtx/corpus.hpp"
#include "medtx/eval.hpp"
#include "medtx/neural.hpp"
#include "medtx/preprocess.hpp"
#include "medtx/serialize.hpp"
#include "medtx/vectorize.hpp"

namespace medtx {

enum class ModelFamily { LogReg, Forest, Lstm, CnnLstm };

/// "logreg", "forest", "lstm", "cnn-lstm".
std::string_view to_string(ModelFamily family);
std::optional<ModelFamily> parse_model_family(std::string_view name);

/// Learning-rate x L2 grid tried for the logistic model when grid search is on.
std::vector<GdConfig> default_logreg_grid(const GdConfig& base);

struct PipelineOptions {
  ModelFamily family = ModelFamily::LogReg;
  SplitSpec split{0.8, 0, true};
  std::optional<std::size_t> max_features;

  // logistic regression
  GdConfig gd;
  bool use_pca = true;
  double pca_threshold = 0.95;
  std::vector<GdConfig> grid;  // empty: train `gd` directly
  double validation_fraction = 0.1;

  // random forest
  int n_estimators = 150;
  int max_depth = 4;
  std::uint64_t forest_seed = 0;

  // lstm / cnn-lstm; vocab_size and architecture are filled in by training
  NetworkConfig network;
};

struct NetworkModel {
  NetworkConfig config;
  NetworkParams params;
};

/// A trained classifier together with everything needed to reproduce its
/// preprocessing and its evaluation split.
struct ModelArtifact {
  static constexpr int kFormatVersion = 1;

  ModelFamily family = ModelFamily::LogReg;
  CleanConfig clean;
  SpecialtyMapping mapping;
  SplitSpec split;
  std::string dataset_fingerprint;
  TfidfModel tfidf;
  std::optional<PcaModel> pca;
  std::variant<SoftmaxRegressionModel, RandomForestModel, NetworkModel> model;
  std::optional<GdConfig> selected_gd;
  std::vector<double> loss_trace;
  double test_accuracy = 0.0;
};

struct TrainOutcome {
  ModelArtifact artifact;
  EvalReport test_report;
};

/// Hash over ids, labels and texts in order.
std::string dataset_fingerprint(const std::vector<CuratedExample>& examples);

/// Split, preprocess, vectorize, train and evaluate on the held-out split.
TrainOutcome train_pipeline(const std::vector<CuratedExample>& examples, const CleanConfig& clean,
                            const SpecialtyMapping& mapping, const PipelineOptions& options);

std::vector<Prediction> predict_docs(const ModelArtifact& artifact, const std::vector<TokenizedDoc>& docs);

/// Full inference path for one text. Throws Unclassifiable when
/// preprocessing leaves no tokens.
Prediction classify_text(const ModelArtifact& artifact, std::string_view text);

EvalReport evaluate_examples(const ModelArtifact& artifact, const std::vector<CuratedExample>& examples);

/// Re-creates the artifact's split over `examples` and evaluates its test half.
EvalReport evaluate_artifact(const ModelArtifact& artifact, const std::vector<CuratedExample>& examples);

Json artifact_to_json(const ModelArtifact& artifact);
ModelArtifact artifact_from_json(const Json& j);

/// Serialized bytes are a pure function of the artifact.
std::string serialize_artifact(const ModelArtifact& artifact);
void save_artifact(const ModelArtifact& artifact, const std::filesystem::path& path);
ModelArtifact load_artifact(const std::filesystem::path& path);

/// Content hashes of the artifact's preprocessing and model sections.
struct ArtifactHashes {
  std::string clean;
  std::string tfidf;
  std::string pca;
  std::string model;
};
ArtifactHashes artifact_hashes(const ModelArtifact& artifact);

}  // namespace medtx
