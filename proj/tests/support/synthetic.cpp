#include "synthetic.hpp"

#include <array>
#include <atomic>
#include <fstream>
#include <random>
#include <sstream>

#include <unistd.h>

#include "medtx/csv.hpp"

namespace medtx::testing {

namespace {

const std::array<std::vector<std::string>, kNumClasses> kKeywords{{
    {"cardiac", "murmur", "aortic", "ventricle", "angina", "coronary"},
    {"cerebral", "seizure", "neuron", "cortex", "migraine", "cranial"},
    {"uterine", "ovarian", "prostate", "cervix", "pregnancy", "testicular"},
    {"colon", "hepatic", "gastric", "bowel", "pancreas", "renal"},
}};

const std::vector<std::string> kFiller{
    "patient", "history", "examination", "normal", "report", "today",  "noted",
    "stable",  "pain",    "blood",       "plan",   "follow", "review", "given",
    "daily",   "medication", "allergy",  "family", "social", "visit",  "clinic",
    "denies",  "fever",   "weight",      "left",   "right",  "mild",   "chronic"};

}  // namespace

std::vector<CuratedExample> keyword_corpus(std::size_t n_docs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> length(10, 24);
  std::uniform_int_distribution<std::size_t> keyword_count(2, 4);
  std::uniform_int_distribution<std::size_t> filler(0, kFiller.size() - 1);
  std::uniform_int_distribution<std::size_t> keyword(0, 5);
  std::uniform_int_distribution<int> number(10, 199);
  std::uniform_int_distribution<int> coin(0, 9);

  std::vector<CuratedExample> out;
  out.reserve(n_docs);
  for (std::size_t d = 0; d < n_docs; ++d) {
    const BodySystem label = kClassOrder[d % kNumClasses];
    std::vector<std::string> words(length(rng));
    for (auto& w : words) w = kFiller[filler(rng)];
    const std::size_t k = keyword_count(rng);
    std::uniform_int_distribution<std::size_t> slot(0, words.size() - 1);
    for (std::size_t i = 0; i < k; ++i) words[slot(rng)] = kKeywords[class_index(label)][keyword(rng)];

    std::string text;
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (i > 0) text += ' ';
      std::string w = words[i];
      if (coin(rng) == 0) w[0] = static_cast<char>(w[0] - 'a' + 'A');
      text += w;
      const int roll = coin(rng);
      if (roll == 1) text += ',';
      if (roll == 2) text += " " + std::to_string(number(rng)) + "/" + std::to_string(number(rng));
    }
    text += '.';
    out.push_back({"syn-" + std::to_string(d), label, std::move(text)});
  }
  return out;
}

std::string specialty_for(BodySystem c) {
  switch (c) {
    case BodySystem::Heart: return "Cardiovascular / Pulmonary";
    case BodySystem::Brain: return "Neurology";
    case BodySystem::Reproductive: return "Obstetrics / Gynecology";
    case BodySystem::Digestive: return "Gastroenterology";
  }
  return "";
}

std::string keyword_corpus_csv(std::size_t n_docs, std::uint64_t seed) {
  std::string csv = "id,medical_specialty,sample_name,transcription\n";
  for (const auto& ex : keyword_corpus(n_docs, seed)) {
    csv += ex.id + "," + csv_escape(" " + specialty_for(ex.label)) + ",sample," + csv_escape(ex.transcription) + "\n";
  }
  return csv;
}

CleanConfig shipped_clean() {
  static const CleanConfig config = CleanConfig::load(std::filesystem::path(MEDTX_DEFAULT_DATA_DIR) / "stopwords.txt",
                                                      std::filesystem::path(MEDTX_DEFAULT_DATA_DIR) / "lemmas.tsv");
  return config;
}

SpecialtyMapping shipped_mapping() {
  return SpecialtyMapping::load(std::filesystem::path(MEDTX_DEFAULT_DATA_DIR) / "specialty_mapping.tsv");
}

PipelineOptions keyword_options(ModelFamily family, std::uint64_t seed) {
  PipelineOptions o;
  o.family = family;
  o.split = {0.8, seed, true};
  o.gd.seed = seed;
  o.forest_seed = seed;
  o.network.seed = seed;
  o.network.learning_rate = 1.0;
  o.network.batch_size = 10;
  o.network.init_scale = 0.2;
  o.network.forget_bias = 1.0;
  return o;
}

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("medtx-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << bytes;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace medtx::testing
