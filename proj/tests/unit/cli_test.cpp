#include <doctest.h>

#include <map>
#include <sstream>

#include "medtx/cli.hpp"
#include "medtx/service.hpp"
#include "synthetic.hpp"

using namespace medtx;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run medtx_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> v;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) v.push_back(l);
  return v;
}

struct Corpus {
  testing::TempDir dir;
  std::string csv = (dir / "snapshot.csv").string();
  Corpus() { testing::write_file(csv, testing::keyword_corpus_csv()); }
};

}  // namespace

TEST_CASE("usage errors exit 2") {
  CHECK(medtx_run({}).code == cli::kUsageError);
  CHECK(medtx_run({"frobnicate"}).code == cli::kUsageError);
  CHECK(medtx_run({"stats", "--bogus"}).code == cli::kUsageError);
  CHECK(medtx_run({"train", "--model", "svm", "--data", "/etc/hostname"}).code == cli::kUsageError);
  CHECK(medtx_run({"classify", "--model-artifact", "/etc/hostname"}).code == cli::kUsageError);
  const auto help = medtx_run({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("export-embeddings") != std::string::npos);
}

TEST_CASE("stats writes a histogram summing to the report count") {
  Corpus c;
  const auto hist = (c.dir / "hist.csv").string();
  const auto json = (c.dir / "stats.json").string();
  const auto r = medtx_run({"stats", "--data", c.csv, "--histogram-out", hist, "--json-out", json});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("reports        200") != std::string::npos);
  const auto rows = lines(testing::read_file(hist));
  REQUIRE(rows.size() >= 2);
  CHECK(rows[0] == "bucket_start,bucket_end,count");
  std::size_t total = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) total += std::stoul(rows[i].substr(rows[i].rfind(',') + 1));
  CHECK(total == 200);
  const auto j = Json::parse(testing::read_file(json));
  CHECK(j["report_count"] == 200);
  CHECK(j["per_class_counts"]["Heart"] == 50);
}

TEST_CASE("train is reproducible and writes a manifest") {
  Corpus c;
  const auto a = (c.dir / "a.json").string();
  const auto b = (c.dir / "b.json").string();
  const std::vector<std::string> base{"train", "--model", "logreg", "--data", c.csv, "--seed", "7"};
  auto args = base;
  args.insert(args.end(), {"--out", a});
  const auto r1 = medtx_run(args);
  REQUIRE(r1.code == 0);
  args = base;
  args.insert(args.end(), {"--out", b});
  REQUIRE(medtx_run(args).code == 0);
  CHECK(testing::read_file(a) == testing::read_file(b));
  CHECK(r1.out.find("Precision  Recall     F1-score") != std::string::npos);

  const auto manifest = Json::parse(testing::read_file(a + ".manifest.json"));
  CHECK(manifest["seed"] == 7);
  CHECK(manifest["artifact_hash"] == content_hash(testing::read_file(a)));
  for (const char* k : {"clean", "tfidf", "pca", "model"}) CHECK(manifest["config_hashes"][k].is_string());
  CHECK(manifest["dataset_fingerprint"].is_string());
  CHECK(manifest["command_line"].size() == args.size());
  CHECK(manifest["started_at"].is_string());
  CHECK(manifest["finished_at"].is_string());
}

TEST_CASE("evaluate, classify and their errors") {
  Corpus c;
  const auto model = (c.dir / "m.json").string();
  REQUIRE(medtx_run({"train", "--model", "forest", "--n-estimators", "30", "--data", c.csv, "--out", model}).code == 0);

  const auto ev = medtx_run({"evaluate", "--model-artifact", model, "--data", c.csv});
  REQUIRE(ev.code == 0);
  const auto rows = lines(ev.out);
  const auto header = std::find(rows.begin(), rows.end(), "              Precision  Recall     F1-score");
  REQUIRE(header != rows.end());
  REQUIRE(rows.end() - header == 5);
  CHECK(header[1].rfind("Heart         ", 0) == 0);
  CHECK(header[4].rfind("Digestive     ", 0) == 0);

  const auto cls = medtx_run({"classify", "--model-artifact", model, "--text", "cardiac murmur aortic angina", "--json"});
  REQUIRE(cls.code == 0);
  const auto j = Json::parse(cls.out);
  CHECK(j["label"] == "Heart");

  const auto empty = medtx_run({"classify", "--model-artifact", model, "--text", ""});
  CHECK(empty.code != 0);
  CHECK(empty.err.find("unclassifiable") != std::string::npos);

  testing::write_file(c.dir / "other.csv", testing::keyword_corpus_csv(40, 3));
  CHECK(medtx_run({"evaluate", "--model-artifact", model, "--data", (c.dir / "other.csv").string()}).code == 1);
}

TEST_CASE("export-embeddings writes one row per document") {
  Corpus c;
  const auto out = (c.dir / "emb.csv").string();
  const auto r = medtx_run({"export-embeddings", "--data", c.csv, "--out", out});
  REQUIRE(r.code == 0);
  const auto rows = lines(testing::read_file(out));
  REQUIRE(rows.size() == 200);
  std::map<std::string, std::pair<double, double>> sum;
  for (const auto& row : rows) {
    const auto c1 = row.find(','), c2 = row.rfind(',');
    auto& s = sum[row.substr(c2 + 1)];
    s.first += std::stod(row.substr(0, c1));
    s.second += std::stod(row.substr(c1 + 1, c2 - c1 - 1));
  }
  REQUIRE(sum.size() == 4);
  for (auto a = sum.begin(); a != sum.end(); ++a) {
    for (auto b = std::next(a); b != sum.end(); ++b) {
      const double dx = a->second.first / 50 - b->second.first / 50;
      const double dy = a->second.second / 50 - b->second.second / 50;
      CHECK(std::hypot(dx, dy) > 0.0);
    }
  }
}

TEST_CASE("identical documents project to one point") {
  testing::TempDir dir;
  std::string csv = "medical_specialty,transcription\n";
  for (int i = 0; i < 5; ++i) csv += "Neurology,seizure cortex migraine\n";
  testing::write_file(dir / "same.csv", csv);
  const auto out = (dir / "emb.csv").string();
  REQUIRE(medtx_run({"export-embeddings", "--data", (dir / "same.csv").string(), "--out", out}).code == 0);
  const auto rows = lines(testing::read_file(out));
  REQUIRE(rows.size() == 5);
  for (const auto& row : rows) CHECK(row == rows[0]);
}

TEST_CASE("add-user creates a verifiable account") {
  testing::TempDir dir;
  const auto accounts = (dir / "accounts.json").string();
  REQUIRE(medtx_run({"add-user", "--accounts", accounts, "--username", "kim", "--password", "pw", "--role", "admin"}).code == 0);
  CHECK(medtx_run({"add-user", "--accounts", accounts, "--username", "kim", "--password", "pw"}).code == 1);
  CHECK(AccountStore(accounts).verify("kim", "pw")->role == Role::Admin);
}
