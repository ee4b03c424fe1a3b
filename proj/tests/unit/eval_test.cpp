#include <doctest.h>

#include <algorithm>
#include <random>

#include "medtx/errors.hpp"
#include "medtx/eval.hpp"

using namespace medtx;

namespace {

constexpr auto H = BodySystem::Heart;
constexpr auto B = BodySystem::Brain;
constexpr auto R = BodySystem::Reproductive;
constexpr auto D = BodySystem::Digestive;

// Pairwise counting straight from the label lists, no matrix.
ClassMetrics brute_force(const std::vector<BodySystem>& truth, const std::vector<BodySystem>& pred, BodySystem c) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == c && pred[i] == c) ++tp;
    if (truth[i] != c && pred[i] == c) ++fp;
    if (truth[i] == c && pred[i] != c) ++fn;
  }
  ClassMetrics m;
  m.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  m.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  m.f1 = m.precision + m.recall == 0 ? 0.0 : 2 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

}  // namespace

TEST_CASE("confusion matrix enumeration") {
  const std::vector<BodySystem> t{H, H, B}, p{H, B, B};
  const auto m = confusion_matrix(t, p);
  CHECK(m.counts[0][0] == 1);
  CHECK(m.counts[0][1] == 1);
  CHECK(m.counts[1][0] == 0);
  CHECK(m.counts[1][1] == 1);
  CHECK(m.total() == 3);
  CHECK(m.trace() == 2);

  const std::vector<BodySystem> all{H, B, R, D, D};
  const auto perfect = confusion_matrix(all, all);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK((i == j || perfect.counts[i][j] == 0));
}

TEST_CASE("confusion matrix input errors") {
  const std::vector<BodySystem> empty, one{H}, two{H, B};
  CHECK_THROWS_AS(confusion_matrix(empty, empty), Error);
  CHECK_THROWS_AS(confusion_matrix(one, two), Error);
  const std::vector<BodySystem> order{H, B};
  const std::vector<BodySystem> outside{D};
  CHECK_THROWS_AS(confusion_matrix(outside, outside, order), Error);
}

TEST_CASE("TP=2 FP=1 FN=1 gives two thirds everywhere") {
  const std::vector<BodySystem> t{H, H, H, B}, p{H, H, B, H};
  const auto r = compute_metrics(confusion_matrix(t, p));
  CHECK(r.metrics(H).precision == 2.0 / 3);
  CHECK(r.metrics(H).recall == 2.0 / 3);
  CHECK(std::abs(r.metrics(H).f1 - 2.0 / 3) < 1e-15);
}

TEST_CASE("perfect and absent classes") {
  const std::vector<BodySystem> t{H, B, B}, p{H, B, B};
  const auto r = compute_metrics(confusion_matrix(t, p));
  CHECK(r.accuracy == 1.0);
  CHECK(r.metrics(H).f1 == 1.0);
  CHECK(r.metrics(B).f1 == 1.0);
  CHECK(r.metrics(R).precision == 0.0);
  CHECK(r.metrics(R).recall == 0.0);
  CHECK(r.metrics(R).f1 == 0.0);
  CHECK(r.macro_f1 == 0.5);
}

TEST_CASE("compute_metrics agrees with brute force on random label sets") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> size(1, 200), cls(0, 3);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<BodySystem> t(size(rng)), p;
    for (auto& x : t) x = kClassOrder[cls(rng)];
    for (std::size_t i = 0; i < t.size(); ++i) p.push_back(kClassOrder[cls(rng)]);
    const auto r = compute_metrics(confusion_matrix(t, p));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < t.size(); ++i) correct += t[i] == p[i];
    CHECK(r.accuracy == static_cast<double>(correct) / static_cast<double>(t.size()));
    double f1_sum = 0;
    for (BodySystem c : kClassOrder) {
      const auto expected = brute_force(t, p, c);
      CHECK(r.metrics(c).precision == expected.precision);
      CHECK(r.metrics(c).recall == expected.recall);
      CHECK(r.metrics(c).f1 == expected.f1);
      f1_sum += expected.f1;
    }
    CHECK(std::abs(r.macro_f1 - f1_sum / 4) < 1e-15);
  }
}

TEST_CASE("permuting the class order permutes the report") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> cls(0, 3);
  std::vector<BodySystem> t(60), p(60);
  for (auto& x : t) x = kClassOrder[cls(rng)];
  for (auto& x : p) x = kClassOrder[cls(rng)];
  const auto base = compute_metrics(confusion_matrix(t, p));
  const std::vector<BodySystem> order{D, R, H, B};
  const auto perm = compute_metrics(confusion_matrix(t, p, order));
  CHECK(perm.accuracy == base.accuracy);
  CHECK(std::abs(perm.macro_f1 - base.macro_f1) < 1e-15);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(perm.per_class[i].first == order[i]);
    CHECK(perm.per_class[i].second.f1 == base.metrics(order[i]).f1);
  }
}

TEST_CASE("format_metric rounds half up") {
  CHECK(format_metric(2.0 / 3) == "0.67");
  CHECK(format_metric(1.0) == "1.00");
  CHECK(format_metric(0.0) == "0.00");
  CHECK(format_metric(0.125) == "0.13");
  CHECK(format_metric(0.935) == "0.94");
  CHECK(format_metric(0.9249999) == "0.92");
}

TEST_CASE("render_table layout") {
  const std::vector<BodySystem> all{H, B, R, D};
  const auto table = render_table(compute_metrics(confusion_matrix(all, all)));
  const std::string expected =
      "              Precision  Recall     F1-score\n"
      "Heart         1.00       1.00       1.00\n"
      "Brain         1.00       1.00       1.00\n"
      "Reproductive  1.00       1.00       1.00\n"
      "Digestive     1.00       1.00       1.00\n";
  CHECK(table == expected);
}
