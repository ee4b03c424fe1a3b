#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "medtx/corpus.hpp"
#include "medtx/errors.hpp"
#include "synthetic.hpp"

using namespace medtx;

namespace {

std::vector<CuratedExample> labelled(const std::vector<std::pair<BodySystem, std::size_t>>& counts) {
  std::vector<CuratedExample> out;
  std::size_t id = 0;
  for (const auto& [c, n] : counts) {
    for (std::size_t i = 0; i < n; ++i) out.push_back({"ex" + std::to_string(id++), c, "text"});
  }
  return out;
}

std::size_t count_of(const std::vector<CuratedExample>& v, BodySystem c) {
  return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [&](const auto& e) { return e.label == c; }));
}

std::set<std::string> ids(const std::vector<CuratedExample>& v) {
  std::set<std::string> s;
  for (const auto& e : v) s.insert(e.id);
  return s;
}

}  // namespace

TEST_CASE("load_reports reads quoted fields and keeps empty transcriptions") {
  std::istringstream in(
      "\xEF\xBB\xBF" "id,medical_specialty,sample_name,transcription\r\n"
      "a, Neurology ,\"Head, CT\",\"HISTORY: headache,\nworse at night\"\r\n"
      "b,Urology,x,\r\n");
  const auto reports = load_reports(in);
  REQUIRE(reports.size() == 2);
  CHECK(reports[0].id == "a");
  CHECK(reports[0].sample_name == "Head, CT");
  CHECK(reports[0].transcription == "HISTORY: headache,\nworse at night");
  CHECK(reports[1].transcription.empty());
}

TEST_CASE("load_reports on a header-only file is empty") {
  std::istringstream in("medical_specialty,transcription\n");
  CHECK(load_reports(in).empty());
}

TEST_CASE("load_reports names the missing column") {
  std::istringstream in("medical_specialty,sample_name\nNeurology,x\n");
  try {
    load_reports(in);
    FAIL("expected a schema error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Schema);
    CHECK(std::string(e.what()).find("transcription") != std::string::npos);
  }
}

TEST_CASE("load_reports rejects an unreadable path") {
  CHECK_THROWS_AS(load_reports(std::filesystem::path("/nonexistent/reports.csv")), Error);
}

TEST_CASE("shipped mapping covers the paper's named specialties") {
  const auto m = testing::shipped_mapping();
  CHECK(m.size() == 40);
  CHECK(m.lookup("Neurology") == BodySystem::Brain);
  CHECK(m.lookup("Neurosurgery") == BodySystem::Brain);
  CHECK(m.lookup("  gastroenterology ") == BodySystem::Digestive);
  CHECK(m.lookup("Nephrology") == BodySystem::Digestive);
  CHECK(m.lookup("Cardiovascular / Pulmonary") == BodySystem::Heart);
  CHECK(m.lookup("Obstetrics / Gynecology") == BodySystem::Reproductive);
  CHECK(m.lookup("Urology") == BodySystem::Reproductive);
  CHECK_FALSE(m.lookup("Radiology").has_value());
  CHECK(m.contains("radiology"));
}

TEST_CASE("curate maps, excludes and counts") {
  SpecialtyMapping m;
  m.set("Neurology", BodySystem::Brain);
  m.set("Nephrology", BodySystem::Digestive);
  m.set("Dentistry", std::nullopt);
  const std::vector<RawReport> reports{
      {"1", "Neurology", "seizure", std::nullopt},
      {"2", "NEPHROLOGY", "renal", std::nullopt},
      {"3", "Dentistry", "tooth", std::nullopt},
      {"4", "Astrology", "stars", std::nullopt},
      {"5", "Neurology", "   ", std::nullopt},
  };
  const auto r = curate(reports, m);
  REQUIRE(r.examples.size() == 2);
  CHECK(r.examples[0].label == BodySystem::Brain);
  CHECK(r.examples[1].label == BodySystem::Digestive);
  CHECK(r.excluded_unmapped == 2);
  CHECK(r.excluded_empty == 1);
}

TEST_CASE("curate errors") {
  const std::vector<RawReport> reports{{"1", "Astrology", "stars", std::nullopt}};
  SpecialtyMapping m;
  CHECK_THROWS_AS(curate(reports, m), Error);
  m.set("Neurology", BodySystem::Brain);
  try {
    curate(reports, m);
    FAIL("expected empty dataset");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyDataset);
  }
}

TEST_CASE("curate is idempotent on its own output") {
  const auto m = testing::shipped_mapping();
  std::istringstream in(testing::keyword_corpus_csv(40));
  const auto once = curate(load_reports(in), m).examples;
  std::vector<RawReport> again;
  for (const auto& e : once) again.push_back({e.id, testing::specialty_for(e.label), e.transcription, std::nullopt});
  const auto twice = curate(again, m).examples;
  REQUIRE(once.size() == twice.size());
  for (std::size_t i = 0; i < once.size(); ++i) {
    CHECK(once[i].id == twice[i].id);
    CHECK(once[i].label == twice[i].label);
    CHECK(once[i].transcription == twice[i].transcription);
  }
}

TEST_CASE("compute_stats on a single ten-character example") {
  const auto s = compute_stats({{"x", BodySystem::Heart, "abcde fghi"}});
  CHECK(s.report_count == 1);
  CHECK(s.mean_char_length == doctest::Approx(10.0));
  CHECK(s.unique_word_count == 2);
  REQUIRE(s.length_histogram.size() == 1);
  CHECK(s.length_histogram[0].start == 0);
  CHECK(s.length_histogram[0].end == 250);
  CHECK(s.length_histogram[0].count == 1);
}

TEST_CASE("compute_stats counts, buckets and unique words") {
  const std::vector<CuratedExample> ex{
      {"a", BodySystem::Heart, std::string(249, 'a')},
      {"b", BodySystem::Heart, std::string(250, 'b')},
      {"c", BodySystem::Brain, std::string(600, 'c')},
      {"d", BodySystem::Digestive, "Heart heart, heart"},
  };
  const auto s = compute_stats(ex);
  CHECK(s.report_count == 4);
  CHECK(s.per_class_counts.at(BodySystem::Heart) == 2);
  CHECK(s.per_class_counts.at(BodySystem::Brain) == 1);
  CHECK(s.per_class_counts.at(BodySystem::Digestive) == 1);
  // raw whitespace words: the three long runs plus "Heart", "heart," and "heart"
  CHECK(s.unique_word_count == 6);
  CHECK(s.mean_char_length == doctest::Approx((249.0 + 250 + 600 + 18) / 4));
  REQUIRE(s.length_histogram.size() == 3);
  CHECK(s.length_histogram[0].count == 2);
  CHECK(s.length_histogram[1].count == 1);
  CHECK(s.length_histogram[2].count == 1);
  std::size_t sum = 0, per_class = 0;
  for (const auto& b : s.length_histogram) sum += b.count;
  for (const auto& [c, n] : s.per_class_counts) per_class += n;
  CHECK(sum == s.report_count);
  CHECK(per_class == s.report_count);
}

TEST_CASE("mean length counts code points, not bytes") {
  CHECK(utf8_length("naïve") == 5);
  const auto s = compute_stats({{"x", BodySystem::Heart, "ééé"}});
  CHECK(s.mean_char_length == doctest::Approx(3.0));
}

TEST_CASE("compute_stats rejects empty input") { CHECK_THROWS_AS(compute_stats({}), Error); }

TEST_CASE("non-stratified split of 1304 gives 1043 / 261") {
  const auto ex = labelled({{BodySystem::Heart, 371}, {BodySystem::Brain, 317},
                            {BodySystem::Reproductive, 311}, {BodySystem::Digestive, 305}});
  const auto split = split_dataset(ex, {0.8, 3, false});
  CHECK(split.train.size() == 1043);
  CHECK(split.test.size() == 261);
}

TEST_CASE("stratified split of the paper's class counts") {
  const auto ex = labelled({{BodySystem::Heart, 371}, {BodySystem::Brain, 317},
                            {BodySystem::Reproductive, 311}, {BodySystem::Digestive, 305}});
  const auto split = split_dataset(ex, {0.8, 11, true});
  // per class: count - floor(0.8 * count)
  CHECK(count_of(split.test, BodySystem::Heart) == 75);
  CHECK(count_of(split.test, BodySystem::Brain) == 64);
  CHECK(count_of(split.test, BodySystem::Reproductive) == 63);
  CHECK(count_of(split.test, BodySystem::Digestive) == 61);
  for (BodySystem c : kClassOrder) {
    const double n = static_cast<double>(count_of(ex, c));
    CHECK(std::abs(count_of(split.train, c) / n - 0.8) < 1.0 / n);
  }
}

TEST_CASE("splits are disjoint, exhaustive and seeded") {
  const auto ex = testing::keyword_corpus(97, 5);
  for (bool stratified : {false, true}) {
    for (double f : {0.1, 0.5, 0.8, 0.99}) {
      const auto a = split_dataset(ex, {f, 42, stratified});
      const auto b = split_dataset(ex, {f, 42, stratified});
      const auto tr = ids(a.train), te = ids(a.test);
      CHECK(a.train.size() + a.test.size() == ex.size());
      CHECK(tr.size() + te.size() == ex.size());
      for (const auto& id : tr) CHECK(te.count(id) == 0);
      CHECK(tr == ids(b.train));
      CHECK(te == ids(b.test));
    }
  }
  const auto x = split_dataset(ex, {0.5, 1, false});
  const auto y = split_dataset(ex, {0.5, 2, false});
  CHECK(ids(x.train) != ids(y.train));
}

TEST_CASE("split_dataset validates its spec") {
  const auto ex = testing::keyword_corpus(8);
  for (double f : {0.0, 1.0, -0.2, 1.5}) CHECK_THROWS_AS(split_dataset(ex, {f, 0, false}), Error);
  const auto heart_only = labelled({{BodySystem::Heart, 5}});
  CHECK_THROWS_AS(split_dataset(heart_only, {0.8, 0, true}), Error);
}
