#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "medtx/classical.hpp"
#include "medtx/preprocess.hpp"
#include "medtx/vectorize.hpp"

namespace medtx {

enum class Architecture { Lstm, CnnLstm };

std::string_view to_string(Architecture a);
/// Accepts "lstm", "cnn_lstm" and "cnn-lstm".
std::optional<Architecture> parse_architecture(std::string_view name);

struct NetworkConfig {
  Architecture architecture = Architecture::Lstm;
  std::size_t vocab_size = 0;  // real tokens; ids 0 (pad) and 1 (unknown) come on top
  std::size_t embed_dim = 64;
  std::size_t hidden_size = 64;
  std::size_t n_filters = 32;
  std::size_t kernel_width = 5;
  std::size_t max_len = 256;
  int epochs = 50;
  std::size_t batch_size = 100;
  double learning_rate = 0.5;
  std::uint64_t seed = 0;
  double init_scale = 0.08;
  double forget_bias = 0.0;  // added to the forget-gate bias after init
  double clip_norm = 5.0;

  std::size_t id_count() const { return vocab_size + 2; }
  std::size_t lstm_input_size() const {
    return architecture == Architecture::CnnLstm ? n_filters : embed_dim;
  }
  void validate() const;  // throws Config
};

inline constexpr std::int32_t kPadId = 0;
inline constexpr std::int32_t kUnknownId = 1;

/// Right-padded token ids, one row per document.
struct SequenceBatch {
  std::size_t max_len = 0;
  std::vector<std::int32_t> ids;  // row-major, size() x max_len
  std::vector<std::size_t> lengths;
  std::vector<std::size_t> labels;  // empty when unlabeled

  std::size_t size() const { return lengths.size(); }
  std::int32_t id(std::size_t row, std::size_t t) const { return ids[row * max_len + t]; }
  SequenceBatch select(std::span<const std::size_t> rows) const;
};

/// Vocabulary index i maps to id i + 2; out-of-vocabulary tokens map to
/// kUnknownId. Documents longer than max_len keep their first max_len tokens.
SequenceBatch encode_sequences(std::span<const TokenizedDoc> docs, const Vocabulary& vocabulary,
                               std::size_t max_len);

/// Gate blocks are stacked f, i, o, g (rows [0,H), [H,2H), ...). Columns
/// cover the step input followed by the previous hidden state.
struct LstmParams {
  Eigen::MatrixXd weights;  // 4H x (input + H)
  Eigen::VectorXd bias;     // 4H

  std::size_t hidden_size() const { return static_cast<std::size_t>(bias.size() / 4); }
  std::size_t input_size() const {
    return static_cast<std::size_t>(weights.cols()) - hidden_size();
  }
};

struct LstmStep {
  Eigen::VectorXd h, c, f, i, o, g;
};

LstmStep lstm_cell_step(const LstmParams& params, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& h_prev, const Eigen::VectorXd& c_prev);

/// Same-length 1-D convolution. taps[j] (filters x in) is applied at
/// offset j - kernel_width/2.
struct Conv1dParams {
  std::vector<Eigen::MatrixXd> taps;
  Eigen::VectorXd bias;
};

struct NetworkParams {
  Eigen::MatrixXd embedding;  // embed_dim x id_count; the pad column is never read
  std::optional<Conv1dParams> conv;
  LstmParams lstm;
  Eigen::MatrixXd output_weights;  // classes x hidden
  Eigen::VectorXd output_bias;

  static NetworkParams zeros(const NetworkConfig& config);
  /// Uniform(-scale, scale) everywhere; the pad column is zeroed.
  static NetworkParams random(const NetworkConfig& config, std::uint64_t seed, double scale);

  void check_shapes(const NetworkConfig& config) const;  // throws Shape

  /// Flat views over every parameter tensor, in a fixed order.
  std::vector<std::pair<std::string, Eigen::Map<Eigen::VectorXd>>> tensors();
  std::vector<std::pair<std::string, Eigen::Map<const Eigen::VectorXd>>> tensors() const;
};

/// Activations kept for backpropagation. Matrices are features x batch.
struct ForwardCache {
  std::size_t steps = 0;
  std::vector<Eigen::MatrixXd> embedded;  // per step, embed_dim x B
  std::vector<Eigen::MatrixXd> conv_out;  // per step, filters x B (cnn_lstm only)
  std::vector<Eigen::MatrixXd> lstm_in;   // per step, (input + H) x B
  std::vector<Eigen::MatrixXd> gates;     // per step, 4H x B post-activation
  std::vector<Eigen::MatrixXd> cell;      // per step, H x B
  std::vector<Eigen::MatrixXd> cell_tanh;
  Eigen::MatrixXd final_hidden;           // H x B
};

struct ForwardResult {
  Eigen::MatrixXd probabilities;  // B x classes
  ForwardCache cache;
};

ForwardResult forward(const NetworkParams& params, const NetworkConfig& config,
                      const SequenceBatch& batch);

/// Mean cross-entropy of a labeled batch; fills `grads` (same shapes as
/// params) by backpropagation through time.
double loss_and_gradient(const NetworkParams& params, const NetworkConfig& config,
                         const SequenceBatch& batch, NetworkParams& grads);

double batch_loss(const NetworkParams& params, const NetworkConfig& config, const SequenceBatch& batch);

struct NetworkTrainResult {
  NetworkParams params;
  std::vector<double> loss_trace;  // mean mini-batch loss per epoch
};

/// Seeded init and shuffling, plain gradient descent with global-norm
/// clipping. Throws Divergence naming the epoch on a non-finite loss.
NetworkTrainResult train_network(const SequenceBatch& data, const NetworkConfig& config);

std::vector<Prediction> predict_network(const NetworkParams& params, const NetworkConfig& config,
                                        const SequenceBatch& batch);

struct TensorCheck {
  std::string name;
  double max_relative_error = 0.0;
};

struct GradientCheckReport {
  std::vector<TensorCheck> tensors;
  double max_relative_error = 0.0;
};

/// Compares every analytic gradient entry with a central difference on a
/// random labeled batch. Relative error is |a - n| / max(|a|, |n|, 1e-7).
GradientCheckReport gradient_check(const NetworkConfig& config, std::uint64_t seed,
                                   std::size_t batch_size = 4, double epsilon = 1e-4);

}  // namespace medtx
