#pragma once

#include <Eigen/Dense>
#include <string>
#include <string_view>

#include <json.hpp>

#include "medtx/classical.hpp"
#include "medtx/corpus.hpp"
#include "medtx/eval.hpp"
#include "medtx/neural.hpp"
#include "medtx/preprocess.hpp"
#include "medtx/vectorize.hpp"

namespace medtx {

using Json = nlohmann::json;

/// Hex BLAKE2b-256 of arbitrary bytes.
std::string content_hash(std::string_view bytes);

/// Matrices are stored as {"rows", "cols", "data"} with row-major data.
Json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const Json& j);
Json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const Json& j);

Json to_json(const DatasetStats& stats);
Json to_json(const EvalReport& report);

Json to_json(const SplitSpec& spec);
SplitSpec split_spec_from_json(const Json& j);

Json to_json(const SpecialtyMapping& mapping);
SpecialtyMapping mapping_from_json(const Json& j);

Json to_json(const CleanConfig& config);
CleanConfig clean_config_from_json(const Json& j);

Json to_json(const TfidfModel& model);
TfidfModel tfidf_from_json(const Json& j);

Json to_json(const PcaModel& model);
PcaModel pca_from_json(const Json& j);

Json to_json(const GdConfig& config);
GdConfig gd_config_from_json(const Json& j);

Json to_json(const SoftmaxRegressionModel& model);
SoftmaxRegressionModel softmax_model_from_json(const Json& j);

Json to_json(const RandomForestModel& model);
RandomForestModel forest_from_json(const Json& j);

Json to_json(const NetworkConfig& config);
NetworkConfig network_config_from_json(const Json& j);

Json to_json(const NetworkParams& params);
NetworkParams network_params_from_json(const Json& j, const NetworkConfig& config);

}  // namespace medtx
