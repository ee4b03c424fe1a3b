#include "medtx/neural.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "medtx/errors.hpp"

namespace medtx {

std::string_view to_string(Architecture a) {
  return a == Architecture::CnnLstm ? "cnn_lstm" : "lstm";
}

std::optional<Architecture> parse_architecture(std::string_view raw) {
  std::string name(raw);
  std::ranges::transform(name, name.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  if (name == "lstm") return Architecture::Lstm;
  if (name == "cnn_lstm" || name == "cnn-lstm") return Architecture::CnnLstm;
  return std::nullopt;
}

void NetworkConfig::validate() const {
  if (vocab_size == 0) throw Error(ErrorKind::Config, "vocab_size must be positive");
  if (embed_dim == 0 || hidden_size == 0 || max_len == 0 || batch_size == 0) {
    throw Error(ErrorKind::Config, "network dimensions must be positive");
  }
  if (architecture == Architecture::CnnLstm) {
    if (n_filters == 0) throw Error(ErrorKind::Config, "n_filters must be positive");
    if (kernel_width == 0 || kernel_width % 2 == 0) {
      throw Error(ErrorKind::Config, "kernel_width must be odd");
    }
  }
  if (epochs < 1) throw Error(ErrorKind::Config, "epochs must be at least 1");
  if (!(learning_rate > 0.0)) throw Error(ErrorKind::Config, "learning_rate must be positive");
  if (!(init_scale >= 0.0) || !(clip_norm > 0.0)) {
    throw Error(ErrorKind::Config, "init_scale must be >= 0 and clip_norm > 0");
  }
}

SequenceBatch SequenceBatch::select(std::span<const std::size_t> rows) const {
  SequenceBatch out;
  out.max_len = max_len;
  out.ids.reserve(rows.size() * max_len);
  for (std::size_t r : rows) {
    out.ids.insert(out.ids.end(), ids.begin() + static_cast<std::ptrdiff_t>(r * max_len),
                   ids.begin() + static_cast<std::ptrdiff_t>((r + 1) * max_len));
    out.lengths.push_back(lengths.at(r));
    if (!labels.empty()) out.labels.push_back(labels.at(r));
  }
  return out;
}

SequenceBatch encode_sequences(std::span<const TokenizedDoc> docs, const Vocabulary& vocabulary,
                               std::size_t max_len) {
  if (max_len == 0) throw Error(ErrorKind::Config, "max_len must be positive");
  SequenceBatch batch;
  batch.max_len = max_len;
  batch.ids.assign(docs.size() * max_len, kPadId);
  batch.lengths.reserve(docs.size());
  for (std::size_t r = 0; r < docs.size(); ++r) {
    const auto& tokens = docs[r].tokens;
    const std::size_t len = std::min(tokens.size(), max_len);
    for (std::size_t t = 0; t < len; ++t) {
      const auto idx = vocabulary.index_of(tokens[t]);
      batch.ids[r * max_len + t] = idx ? static_cast<std::int32_t>(*idx + 2) : kUnknownId;
    }
    batch.lengths.push_back(len);
  }
  return batch;
}

namespace {

double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// Applies gate nonlinearities in place to a 4H x B pre-activation block.
void activate_gates(Eigen::MatrixXd& z, Eigen::Index hidden) {
  z.topRows(3 * hidden) = z.topRows(3 * hidden).unaryExpr(&sigmoid);
  z.bottomRows(hidden) = z.bottomRows(hidden).array().tanh();
}

}  // namespace

LstmStep lstm_cell_step(const LstmParams& params, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& h_prev, const Eigen::VectorXd& c_prev) {
  const auto hidden = static_cast<Eigen::Index>(params.hidden_size());
  if (static_cast<std::size_t>(x.size()) != params.input_size() || h_prev.size() != hidden ||
      c_prev.size() != hidden) {
    throw Error(ErrorKind::Shape, "lstm step inputs do not match parameter shapes");
  }
  Eigen::VectorXd in(x.size() + hidden);
  in << x, h_prev;
  Eigen::MatrixXd z = params.weights * in + params.bias;
  activate_gates(z, hidden);
  LstmStep s;
  s.f = z.col(0).segment(0, hidden);
  s.i = z.col(0).segment(hidden, hidden);
  s.o = z.col(0).segment(2 * hidden, hidden);
  s.g = z.col(0).segment(3 * hidden, hidden);
  s.c = s.f.cwiseProduct(c_prev) + s.i.cwiseProduct(s.g);
  s.h = s.o.cwiseProduct(s.c.array().tanh().matrix());
  return s;
}

NetworkParams NetworkParams::zeros(const NetworkConfig& config) {
  const auto e = static_cast<Eigen::Index>(config.embed_dim);
  const auto h = static_cast<Eigen::Index>(config.hidden_size);
  const auto in = static_cast<Eigen::Index>(config.lstm_input_size());
  NetworkParams p;
  p.embedding = Eigen::MatrixXd::Zero(e, static_cast<Eigen::Index>(config.id_count()));
  if (config.architecture == Architecture::CnnLstm) {
    Conv1dParams conv;
    const auto f = static_cast<Eigen::Index>(config.n_filters);
    conv.taps.assign(config.kernel_width, Eigen::MatrixXd::Zero(f, e));
    conv.bias = Eigen::VectorXd::Zero(f);
    p.conv = std::move(conv);
  }
  p.lstm.weights = Eigen::MatrixXd::Zero(4 * h, in + h);
  p.lstm.bias = Eigen::VectorXd::Zero(4 * h);
  p.output_weights = Eigen::MatrixXd::Zero(kNumClasses, h);
  p.output_bias = Eigen::VectorXd::Zero(kNumClasses);
  return p;
}

NetworkParams NetworkParams::random(const NetworkConfig& config, std::uint64_t seed, double scale) {
  NetworkParams p = zeros(config);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (auto& [name, t] : p.tensors()) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = dist(rng);
  }
  p.embedding.col(kPadId).setZero();
  return p;
}

void NetworkParams::check_shapes(const NetworkConfig& config) const {
  const NetworkParams ref = zeros(config);
  const auto mine = tensors();
  const auto want = ref.tensors();
  bool ok = mine.size() == want.size() && embedding.rows() == ref.embedding.rows() &&
            embedding.cols() == ref.embedding.cols() && lstm.weights.rows() == ref.lstm.weights.rows() &&
            lstm.weights.cols() == ref.lstm.weights.cols() &&
            output_weights.cols() == ref.output_weights.cols();
  for (std::size_t i = 0; ok && i < mine.size(); ++i) ok = mine[i].second.size() == want[i].second.size();
  if (conv && ref.conv) {
    for (std::size_t j = 0; ok && j < conv->taps.size(); ++j) {
      ok = conv->taps[j].rows() == ref.conv->taps[j].rows() && conv->taps[j].cols() == ref.conv->taps[j].cols();
    }
  }
  if (!ok) throw Error(ErrorKind::Shape, "network parameters do not match the network config");
}

namespace {

template <class Params, class Map>
std::vector<std::pair<std::string, Map>> collect(Params& p) {
  std::vector<std::pair<std::string, Map>> out;
  const auto add = [&](std::string name, auto& m) { out.emplace_back(std::move(name), Map(m.data(), m.size())); };
  add("embedding", p.embedding);
  if (p.conv) {
    for (std::size_t j = 0; j < p.conv->taps.size(); ++j) add("conv.tap" + std::to_string(j), p.conv->taps[j]);
    add("conv.bias", p.conv->bias);
  }
  add("lstm.weights", p.lstm.weights);
  add("lstm.bias", p.lstm.bias);
  add("output.weights", p.output_weights);
  add("output.bias", p.output_bias);
  return out;
}

}  // namespace

std::vector<std::pair<std::string, Eigen::Map<Eigen::VectorXd>>> NetworkParams::tensors() {
  return collect<NetworkParams, Eigen::Map<Eigen::VectorXd>>(*this);
}

std::vector<std::pair<std::string, Eigen::Map<const Eigen::VectorXd>>> NetworkParams::tensors() const {
  return collect<const NetworkParams, Eigen::Map<const Eigen::VectorXd>>(*this);
}

ForwardResult forward(const NetworkParams& params, const NetworkConfig& config, const SequenceBatch& batch) {
  params.check_shapes(config);
  const auto b = static_cast<Eigen::Index>(batch.size());
  const auto e = static_cast<Eigen::Index>(config.embed_dim);
  const auto h = static_cast<Eigen::Index>(config.hidden_size);
  const auto in = static_cast<Eigen::Index>(config.lstm_input_size());
  const bool cnn = config.architecture == Architecture::CnnLstm;
  if (cnn != params.conv.has_value()) throw Error(ErrorKind::Shape, "conv parameters do not match architecture");

  std::size_t steps = 1;
  for (std::size_t r = 0; r < batch.size(); ++r) {
    if (batch.lengths[r] > batch.max_len) throw Error(ErrorKind::Shape, "sequence length exceeds max_len");
    steps = std::max(steps, batch.lengths[r]);
  }
  for (std::int32_t id : batch.ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= config.id_count()) {
      throw Error(ErrorKind::Shape, "token id outside the network vocabulary");
    }
  }

  ForwardResult result;
  ForwardCache& cache = result.cache;
  cache.steps = steps;
  cache.embedded.assign(steps, Eigen::MatrixXd::Zero(e, b));
  for (std::size_t t = 0; t < steps; ++t) {
    for (Eigen::Index r = 0; r < b; ++r) {
      const std::int32_t id = batch.id(static_cast<std::size_t>(r), t);
      if (id != kPadId) cache.embedded[t].col(r) = params.embedding.col(id);
    }
  }

  const std::vector<Eigen::MatrixXd>* lstm_source = &cache.embedded;
  if (cnn) {
    const auto& conv = *params.conv;
    const auto half = static_cast<std::ptrdiff_t>(config.kernel_width / 2);
    cache.conv_out.resize(steps);
    for (std::size_t t = 0; t < steps; ++t) {
      Eigen::MatrixXd acc = conv.bias.replicate(1, b);
      for (std::size_t j = 0; j < conv.taps.size(); ++j) {
        const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(j) - half;
        if (s < 0 || s >= static_cast<std::ptrdiff_t>(steps)) continue;
        acc.noalias() += conv.taps[j] * cache.embedded[static_cast<std::size_t>(s)];
      }
      cache.conv_out[t] = acc.cwiseMax(0.0);
    }
    lstm_source = &cache.conv_out;
  }

  cache.lstm_in.resize(steps);
  cache.gates.resize(steps);
  cache.cell.resize(steps);
  cache.cell_tanh.resize(steps);
  cache.final_hidden = Eigen::MatrixXd::Zero(h, b);
  Eigen::MatrixXd hidden = Eigen::MatrixXd::Zero(h, b);
  Eigen::MatrixXd cell = Eigen::MatrixXd::Zero(h, b);
  for (std::size_t t = 0; t < steps; ++t) {
    auto& x = cache.lstm_in[t];
    x.resize(in + h, b);
    x.topRows(in) = (*lstm_source)[t];
    x.bottomRows(h) = hidden;
    Eigen::MatrixXd z = params.lstm.weights * x;
    z.colwise() += params.lstm.bias;
    activate_gates(z, h);
    cell = z.topRows(h).cwiseProduct(cell) + z.middleRows(h, h).cwiseProduct(z.bottomRows(h));
    cache.cell_tanh[t] = cell.array().tanh();
    hidden = z.middleRows(2 * h, h).cwiseProduct(cache.cell_tanh[t]);
    cache.gates[t] = std::move(z);
    cache.cell[t] = cell;
    for (Eigen::Index r = 0; r < b; ++r) {
      if (batch.lengths[static_cast<std::size_t>(r)] == t + 1) cache.final_hidden.col(r) = hidden.col(r);
    }
  }

  Eigen::MatrixXd logits = params.output_weights * cache.final_hidden;
  logits.colwise() += params.output_bias;
  result.probabilities.resize(b, static_cast<Eigen::Index>(kNumClasses));
  for (Eigen::Index r = 0; r < b; ++r) result.probabilities.row(r) = softmax(logits.col(r)).transpose();
  return result;
}

double loss_and_gradient(const NetworkParams& params, const NetworkConfig& config,
                         const SequenceBatch& batch, NetworkParams& grads) {
  if (batch.labels.size() != batch.size() || batch.size() == 0) {
    throw Error(ErrorKind::Input, "gradient needs a non-empty labeled batch");
  }
  const ForwardResult fwd = forward(params, config, batch);
  const ForwardCache& cache = fwd.cache;
  const auto b = static_cast<Eigen::Index>(batch.size());
  const auto h = static_cast<Eigen::Index>(config.hidden_size);
  const auto in = static_cast<Eigen::Index>(config.lstm_input_size());
  const bool cnn = config.architecture == Architecture::CnnLstm;
  const double inv_b = 1.0 / static_cast<double>(b);

  grads = NetworkParams::zeros(config);

  double loss = 0.0;
  Eigen::MatrixXd dlogits = fwd.probabilities.transpose();
  for (Eigen::Index r = 0; r < b; ++r) {
    const std::size_t y = batch.labels[static_cast<std::size_t>(r)];
    if (y >= kNumClasses) throw Error(ErrorKind::Input, "label index out of range");
    loss += cross_entropy(fwd.probabilities.row(r).transpose(), y);
    dlogits(static_cast<Eigen::Index>(y), r) -= 1.0;
  }
  loss *= inv_b;
  dlogits *= inv_b;

  grads.output_weights.noalias() = dlogits * cache.final_hidden.transpose();
  grads.output_bias = dlogits.rowwise().sum();
  const Eigen::MatrixXd dfinal = params.output_weights.transpose() * dlogits;

  const std::size_t steps = cache.steps;
  Eigen::MatrixXd dh = Eigen::MatrixXd::Zero(h, b);
  Eigen::MatrixXd dc = Eigen::MatrixXd::Zero(h, b);
  Eigen::MatrixXd dz(4 * h, b);
  std::vector<Eigen::MatrixXd> dsource(steps);

  for (std::size_t t = steps; t-- > 0;) {
    for (Eigen::Index r = 0; r < b; ++r) {
      if (batch.lengths[static_cast<std::size_t>(r)] == t + 1) dh.col(r) += dfinal.col(r);
    }
    const auto& z = cache.gates[t];
    const auto f = z.topRows(h).array();
    const auto i = z.middleRows(h, h).array();
    const auto o = z.middleRows(2 * h, h).array();
    const auto g = z.bottomRows(h).array();
    const auto tc = cache.cell_tanh[t].array();

    dc.array() += dh.array() * o * (1.0 - tc.square());
    if (t > 0) {
      dz.topRows(h).array() = dc.array() * cache.cell[t - 1].array() * f * (1.0 - f);
    } else {
      dz.topRows(h).setZero();
    }
    dz.middleRows(h, h).array() = dc.array() * g * i * (1.0 - i);
    dz.middleRows(2 * h, h).array() = dh.array() * tc * o * (1.0 - o);
    dz.bottomRows(h).array() = dc.array() * i * (1.0 - g.square());

    grads.lstm.weights.noalias() += dz * cache.lstm_in[t].transpose();
    grads.lstm.bias += dz.rowwise().sum();
    const Eigen::MatrixXd dx = params.lstm.weights.transpose() * dz;
    dsource[t] = dx.topRows(in);
    dh = dx.bottomRows(h);
    dc.array() *= f;
  }

  std::vector<Eigen::MatrixXd>* dembedded = &dsource;
  std::vector<Eigen::MatrixXd> dconv_in;
  if (cnn) {
    const auto& conv = *params.conv;
    auto& gconv = *grads.conv;
    const auto half = static_cast<std::ptrdiff_t>(config.kernel_width / 2);
    dconv_in.assign(steps, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(config.embed_dim), b));
    for (std::size_t t = 0; t < steps; ++t) {
      const Eigen::MatrixXd da = (cache.conv_out[t].array() > 0.0).select(dsource[t], 0.0);
      gconv.bias += da.rowwise().sum();
      for (std::size_t j = 0; j < conv.taps.size(); ++j) {
        const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(j) - half;
        if (s < 0 || s >= static_cast<std::ptrdiff_t>(steps)) continue;
        const auto su = static_cast<std::size_t>(s);
        gconv.taps[j].noalias() += da * cache.embedded[su].transpose();
        dconv_in[su].noalias() += conv.taps[j].transpose() * da;
      }
    }
    dembedded = &dconv_in;
  }

  for (std::size_t t = 0; t < steps; ++t) {
    for (Eigen::Index r = 0; r < b; ++r) {
      const std::int32_t id = batch.id(static_cast<std::size_t>(r), t);
      if (id != kPadId) grads.embedding.col(id) += (*dembedded)[t].col(r);
    }
  }
  return loss;
}

double batch_loss(const NetworkParams& params, const NetworkConfig& config, const SequenceBatch& batch) {
  if (batch.labels.size() != batch.size() || batch.size() == 0) {
    throw Error(ErrorKind::Input, "loss needs a non-empty labeled batch");
  }
  const ForwardResult fwd = forward(params, config, batch);
  double loss = 0.0;
  for (std::size_t r = 0; r < batch.size(); ++r) {
    loss += cross_entropy(fwd.probabilities.row(static_cast<Eigen::Index>(r)).transpose(), batch.labels[r]);
  }
  return loss / static_cast<double>(batch.size());
}

NetworkTrainResult train_network(const SequenceBatch& data, const NetworkConfig& config) {
  config.validate();
  if (data.size() == 0 || data.labels.size() != data.size()) {
    throw Error(ErrorKind::EmptyDataset, "network training needs labeled examples");
  }
  NetworkTrainResult result;
  result.params = NetworkParams::random(config, config.seed, config.init_scale);
  result.params.lstm.bias.head(static_cast<Eigen::Index>(config.hidden_size)).array() += config.forget_bias;
  std::mt19937_64 rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  NetworkParams grads;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      const SequenceBatch mb = data.select(std::span<const std::size_t>(order.data() + start, stop - start));
      const double loss = loss_and_gradient(result.params, config, mb, grads);
      if (!std::isfinite(loss)) {
        throw Error(ErrorKind::Divergence, "network training diverged at epoch " + std::to_string(epoch));
      }
      double sq = 0.0;
      for (const auto& [name, g] : std::as_const(grads).tensors()) sq += g.squaredNorm();
      const double norm = std::sqrt(sq);
      if (!std::isfinite(norm)) {
        throw Error(ErrorKind::Divergence, "network training diverged at epoch " + std::to_string(epoch));
      }
      const double scale = norm > config.clip_norm ? config.clip_norm / norm : 1.0;
      auto ps = result.params.tensors();
      const auto gs = std::as_const(grads).tensors();
      for (std::size_t k = 0; k < ps.size(); ++k) ps[k].second -= (config.learning_rate * scale) * gs[k].second;
      epoch_loss += loss;
      ++batches;
    }
    result.loss_trace.push_back(epoch_loss / static_cast<double>(batches));
  }
  return result;
}

std::vector<Prediction> predict_network(const NetworkParams& params, const NetworkConfig& config,
                                        const SequenceBatch& batch) {
  std::vector<Prediction> out;
  out.reserve(batch.size());
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < batch.size(); start += config.batch_size) {
    rows.clear();
    for (std::size_t r = start; r < std::min(batch.size(), start + config.batch_size); ++r) rows.push_back(r);
    SequenceBatch chunk = batch.select(rows);
    chunk.labels.clear();
    const ForwardResult fwd = forward(params, config, chunk);
    for (Eigen::Index r = 0; r < fwd.probabilities.rows(); ++r) {
      out.push_back(make_prediction(fwd.probabilities.row(r).transpose()));
    }
  }
  return out;
}

GradientCheckReport gradient_check(const NetworkConfig& config, std::uint64_t seed, std::size_t batch_size,
                                   double epsilon) {
  config.validate();
  std::mt19937_64 rng(seed);
  NetworkParams params = NetworkParams::random(config, seed + 1, 0.5);

  SequenceBatch batch;
  batch.max_len = config.max_len;
  batch.ids.assign(batch_size * config.max_len, kPadId);
  std::uniform_int_distribution<std::size_t> len_dist(1, config.max_len);
  std::uniform_int_distribution<std::int32_t> id_dist(1, static_cast<std::int32_t>(config.id_count() - 1));
  std::uniform_int_distribution<std::size_t> label_dist(0, kNumClasses - 1);
  for (std::size_t r = 0; r < batch_size; ++r) {
    const std::size_t len = len_dist(rng);
    for (std::size_t t = 0; t < len; ++t) batch.ids[r * config.max_len + t] = id_dist(rng);
    batch.lengths.push_back(len);
    batch.labels.push_back(label_dist(rng));
  }

  NetworkParams grads;
  loss_and_gradient(params, config, batch, grads);

  GradientCheckReport report;
  auto ps = params.tensors();
  const auto gs = std::as_const(grads).tensors();
  for (std::size_t k = 0; k < ps.size(); ++k) {
    TensorCheck check{ps[k].first, 0.0};
    auto& theta = ps[k].second;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      if (k == 0 && i < static_cast<Eigen::Index>(config.embed_dim)) continue;  // pad column
      const double saved = theta[i];
      theta[i] = saved + epsilon;
      const double up = batch_loss(params, config, batch);
      theta[i] = saved - epsilon;
      const double down = batch_loss(params, config, batch);
      theta[i] = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double analytic = gs[k].second[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-7});
      check.max_relative_error = std::max(check.max_relative_error, std::abs(analytic - numeric) / denom);
    }
    report.max_relative_error = std::max(report.max_relative_error, check.max_relative_error);
    report.tensors.push_back(std::move(check));
  }
  return report;
}

}  // namespace medtx
