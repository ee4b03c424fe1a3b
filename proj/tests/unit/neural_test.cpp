#include <doctest.h>

#include <random>

#include "medtx/errors.hpp"
#include "medtx/neural.hpp"
#include "synthetic.hpp"

using namespace medtx;

namespace {

NetworkConfig small_config(Architecture a) {
  NetworkConfig c;
  c.architecture = a;
  c.vocab_size = 20;
  c.max_len = 6;
  c.hidden_size = 8;
  c.embed_dim = 5;
  c.n_filters = 4;
  c.kernel_width = 3;
  c.batch_size = 4;
  return c;
}

SequenceBatch random_batch(const NetworkConfig& c, std::size_t n, std::uint64_t seed, std::size_t max_len) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int32_t> id(1, static_cast<std::int32_t>(c.id_count() - 1));
  std::uniform_int_distribution<std::size_t> len(1, c.max_len);
  SequenceBatch b;
  b.max_len = max_len;
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t l = len(rng);
    b.lengths.push_back(l);
    b.labels.push_back(r % kNumClasses);
    for (std::size_t t = 0; t < max_len; ++t) b.ids.push_back(t < l ? id(rng) : kPadId);
  }
  return b;
}

SequenceBatch repad(const SequenceBatch& b, std::size_t max_len) {
  SequenceBatch out = b;
  out.max_len = max_len;
  out.ids.assign(b.size() * max_len, kPadId);
  for (std::size_t r = 0; r < b.size(); ++r)
    for (std::size_t t = 0; t < b.lengths[r]; ++t) out.ids[r * max_len + t] = b.id(r, t);
  return out;
}

}  // namespace

TEST_CASE("network defaults follow the training protocol") {
  NetworkConfig c;
  CHECK(c.epochs == 50);
  CHECK(c.batch_size == 100);
  CHECK(c.embed_dim == 64);
  CHECK(c.hidden_size == 64);
  CHECK(c.n_filters == 32);
  CHECK(c.kernel_width == 5);
  CHECK(c.max_len == 256);
  CHECK(c.init_scale == 0.08);
  CHECK(c.clip_norm == 5.0);
  CHECK(parse_architecture("cnn_lstm") == Architecture::CnnLstm);
  CHECK(parse_architecture("cnn-lstm") == Architecture::CnnLstm);
  CHECK(parse_architecture("LSTM") == Architecture::Lstm);
  CHECK_FALSE(parse_architecture("gru").has_value());
}

TEST_CASE("config validation") {
  auto c = small_config(Architecture::Lstm);
  c.epochs = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = small_config(Architecture::CnnLstm);
  c.kernel_width = 4;
  CHECK_THROWS_AS(c.validate(), Error);
  c = small_config(Architecture::Lstm);
  c.hidden_size = 0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("encode_sequences pads, truncates and maps unknowns") {
  const Vocabulary vocab({"aortic", "heart", "murmur"});
  std::vector<TokenizedDoc> docs(3);
  docs[0].tokens = {"heart", "murmur", "aortic"};
  for (int i = 0; i < 300; ++i) docs[1].tokens.push_back(i % 2 ? "heart" : "kidney");
  docs[2].tokens = {"kidney"};
  const auto b = encode_sequences(docs, vocab, 256);
  REQUIRE(b.size() == 3);
  CHECK(b.lengths[0] == 3);
  CHECK(b.id(0, 0) == 3);  // heart is index 1 -> id 3
  CHECK(b.id(0, 1) == 4);
  CHECK(b.id(0, 2) == 2);
  for (std::size_t t = 3; t < 256; ++t) CHECK(b.id(0, t) == kPadId);
  CHECK(b.lengths[1] == 256);
  CHECK(b.id(1, 0) == kUnknownId);
  CHECK(b.id(1, 255) == 3);
  CHECK(b.id(2, 0) == kUnknownId);
  for (std::int32_t id : b.ids) CHECK(id < static_cast<std::int32_t>(vocab.size() + 2));
}

TEST_CASE("lstm cell at zero") {
  LstmParams p{Eigen::MatrixXd::Zero(12, 5), Eigen::VectorXd::Zero(12)};
  const auto s = lstm_cell_step(p, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3));
  CHECK(s.f.isApproxToConstant(0.5));
  CHECK(s.i.isApproxToConstant(0.5));
  CHECK(s.o.isApproxToConstant(0.5));
  CHECK(s.g.isZero(0));
  CHECK(s.c.isZero(0));
  CHECK(s.h.isZero(0));
}

TEST_CASE("saturated forget gate carries memory") {
  const int H = 3;
  LstmParams p{Eigen::MatrixXd::Random(4 * H, 2 + H) * 0.1, Eigen::VectorXd::Zero(4 * H)};
  p.bias.segment(0, H).setConstant(50.0);   // f -> 1
  p.bias.segment(H, H).setConstant(-50.0);  // i -> 0
  Eigen::VectorXd c = Eigen::Vector3d(0.7, -0.3, 1.2);
  Eigen::VectorXd h = Eigen::VectorXd::Zero(H);
  const Eigen::VectorXd c0 = c;
  for (int t = 0; t < 10; ++t) {
    const auto s = lstm_cell_step(p, Eigen::VectorXd::Random(2), h, c);
    CHECK((s.c - c0).cwiseAbs().maxCoeff() < 1e-6);
    c = s.c;
    h = s.h;
  }
}

TEST_CASE("gate ranges") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    LstmParams p{Eigen::MatrixXd::NullaryExpr(16, 7, [&] { return n(rng); }),
                 Eigen::VectorXd::NullaryExpr(16, [&] { return n(rng); })};
    const auto s = lstm_cell_step(p, Eigen::VectorXd::NullaryExpr(3, [&] { return n(rng); }),
                                  Eigen::VectorXd::NullaryExpr(4, [&] { return n(rng); }),
                                  Eigen::VectorXd::NullaryExpr(4, [&] { return n(rng); }));
    for (const auto* v : {&s.f, &s.i, &s.o}) CHECK((v->array() > 0).all());
    for (const auto* v : {&s.f, &s.i, &s.o}) CHECK((v->array() < 1).all());
    CHECK((s.g.array().abs() < 1).all());
    CHECK((s.c.array().tanh().abs() < 1).all());
  }
}

TEST_CASE("forward outputs distributions and ignores padding") {
  for (auto arch : {Architecture::Lstm, Architecture::CnnLstm}) {
    const auto c = small_config(arch);
    const auto params = NetworkParams::random(c, 3, 0.5);
    const auto b = random_batch(c, 7, 4, c.max_len);
    const auto out = forward(params, c, b);
    REQUIRE(out.probabilities.rows() == 7);
    REQUIRE(out.probabilities.cols() == 4);
    for (int r = 0; r < 7; ++r) CHECK(std::abs(out.probabilities.row(r).sum() - 1.0) < 1e-9);

    const auto wide = forward(params, c, repad(b, 11));
    CHECK((wide.probabilities - out.probabilities).cwiseAbs().maxCoeff() < 1e-9);

    const auto zero = forward(NetworkParams::zeros(c), c, b);
    CHECK((zero.probabilities.array() - 0.25).abs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("forward checks parameter shapes") {
  const auto lstm = small_config(Architecture::Lstm);
  auto other = lstm;
  other.hidden_size = 5;
  const auto b = random_batch(lstm, 2, 1, lstm.max_len);
  CHECK_THROWS_AS(forward(NetworkParams::zeros(other), lstm, b), Error);
}

TEST_CASE("output gradient is p - y") {
  const auto c = small_config(Architecture::Lstm);
  const auto params = NetworkParams::random(c, 5, 0.3);
  const auto b = random_batch(c, 1, 6, c.max_len);
  NetworkParams grads = NetworkParams::zeros(c);
  loss_and_gradient(params, c, b, grads);
  Eigen::VectorXd expected = forward(params, c, b).probabilities.row(0).transpose();
  expected(static_cast<Eigen::Index>(b.labels[0])) -= 1.0;
  CHECK((grads.output_bias - expected).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("analytic gradients match finite differences") {
  for (auto arch : {Architecture::Lstm, Architecture::CnnLstm}) {
    const auto report = gradient_check(small_config(arch), 17);
    CHECK(report.max_relative_error < 1e-4);
    CHECK(report.tensors.size() >= (arch == Architecture::CnnLstm ? 6u : 5u));
    for (const auto& t : report.tensors) CHECK_MESSAGE(t.max_relative_error < 1e-4, t.name);
  }
}

TEST_CASE("training lowers loss and is deterministic") {
  const auto clean = testing::shipped_clean();
  const auto ex = testing::keyword_corpus(80, 3);
  std::vector<TokenizedDoc> docs;
  for (const auto& e : ex) docs.push_back(preprocess_document(e.transcription, clean));
  const auto tfidf = fit_tfidf(docs);
  auto batch = encode_sequences(docs, tfidf.vocabulary(), 32);
  for (const auto& e : ex) batch.labels.push_back(class_index(e.label));

  NetworkConfig c;
  c.architecture = Architecture::Lstm;
  c.vocab_size = tfidf.dimension();
  c.embed_dim = 16;
  c.hidden_size = 16;
  c.max_len = 32;
  c.epochs = 20;
  c.batch_size = 10;
  c.learning_rate = 1.0;
  c.init_scale = 0.2;
  c.forget_bias = 1.0;
  c.seed = 2;
  const auto a = train_network(batch, c);
  const auto b = train_network(batch, c);
  CHECK(a.loss_trace.size() == 20);
  CHECK(a.loss_trace.back() < a.loss_trace.front());
  CHECK(a.loss_trace == b.loss_trace);
  const auto pa = predict_network(a.params, c, batch);
  const auto pb = predict_network(b.params, c, batch);
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i].probabilities == pb[i].probabilities);

  c.epochs = 0;
  CHECK_THROWS_AS(train_network(batch, c), Error);
}
