#include <doctest.h>

#include <cctype>
#include <sstream>

#include "medtx/preprocess.hpp"
#include "synthetic.hpp"

using namespace medtx;

namespace {

using Tokens = std::vector<std::string>;

CleanConfig with_lemmas(std::unordered_map<std::string, std::string> lemmas) {
  CleanConfig c = testing::shipped_clean();
  c.lemmas = std::move(lemmas);
  return c;
}

std::string join(const Tokens& t) {
  std::string s;
  for (const auto& w : t) s += (s.empty() ? "" : " ") + w;
  return s;
}

}  // namespace

TEST_CASE("shipped resources load") {
  const auto c = testing::shipped_clean();
  CHECK(c.stopwords.count("the"));
  CHECK(c.stopwords.count("and"));
  CHECK_FALSE(c.stopwords.count("heart"));
  CHECK(c.lemmas.size() > 10000);
  CHECK(c.min_token_length == 2);
  CHECK(c.fingerprint() == testing::shipped_clean().fingerprint());
}

TEST_CASE("clean_and_tokenize strips symbols, case and stopwords") {
  const auto c = testing::shipped_clean();
  CHECK(clean_and_tokenize("The patient's BP: 120/80 [stable].", c).tokens == Tokens{"patient", "bp", "stable"});
  CHECK(clean_and_tokenize("", c).tokens.empty());
  CHECK(clean_and_tokenize("the of and", c).tokens.empty());
  CHECK(clean_and_tokenize("left-sided\tpain\r\nx", c).tokens == Tokens{"left", "sided", "pain"});
}

TEST_CASE("non-ASCII letters are kept and lowercased") {
  const auto c = testing::shipped_clean();
  CHECK(clean_and_tokenize("Ménière's ÉDEMA", c).tokens == Tokens{"ménière", "édema"});
}

TEST_CASE("lemmatize is a dictionary lookup") {
  const auto c = with_lemmas({{"studies", "study"}});
  CHECK(lemmatize({{"studies"}, ""}, c).tokens == Tokens{"study"});
  CHECK(lemmatize({{"heart", "studies"}, ""}, c).tokens == Tokens{"heart", "study"});
  CHECK(lemmatize({{"unknownword"}, ""}, c).tokens == Tokens{"unknownword"});
  CHECK(lemmatize({{}, ""}, c).tokens.empty());
}

TEST_CASE("preprocess_document composes the two steps") {
  const auto c = with_lemmas({{"studies", "study"}});
  CHECK(preprocess_document("Studies of the heart", c).tokens == Tokens{"study", "heart"});
  CHECK(preprocess_document("120 80 55", c).tokens.empty());
  const auto shipped = testing::shipped_clean();
  for (const auto& ex : testing::keyword_corpus(30)) {
    CHECK(preprocess_document(ex.transcription, shipped).tokens ==
          lemmatize(clean_and_tokenize(ex.transcription, shipped), shipped).tokens);
  }
}

TEST_CASE("source id is carried through") {
  CHECK(preprocess_document("heart", testing::shipped_clean(), "r-7").source_id == "r-7");
}

TEST_CASE("token invariants over the keyword corpus") {
  const auto c = testing::shipped_clean();
  for (const auto& ex : testing::keyword_corpus(60, 3)) {
    const auto doc = preprocess_document(ex.transcription, c);
    std::istringstream words(ex.transcription);
    std::size_t n_words = 0;
    for (std::string w; words >> w;) ++n_words;
    CHECK(doc.tokens.size() <= n_words);
    for (const auto& t : doc.tokens) {
      CHECK(t.size() >= 2);
      CHECK_FALSE(c.stopwords.count(t));
      for (unsigned char ch : t) {
        CHECK_FALSE(std::isdigit(ch));
        CHECK_FALSE(std::ispunct(ch));
        CHECK_FALSE(std::isupper(ch));
      }
    }
    CHECK(preprocess_document(ex.transcription, c).tokens == doc.tokens);
  }
}

TEST_CASE("already-clean root tokens are a fixed point") {
  const auto c = testing::shipped_clean();
  for (const auto& ex : testing::keyword_corpus(40, 9)) {
    const auto once = preprocess_document(ex.transcription, c).tokens;
    bool roots = true;
    for (const auto& t : once) roots = roots && !c.lemmas.count(t);
    if (roots) CHECK(preprocess_document(join(once), c).tokens == once);
  }
}

TEST_CASE("resource parsers") {
  std::istringstream sw("# comment\nThe\n\n  AND \n");
  const auto stop = CleanConfig::parse_stopwords(sw);
  CHECK(stop.size() == 2);
  CHECK(stop.count("the"));
  CHECK(stop.count("and"));
  std::istringstream lm("# surface\troot\nstudies\tstudy\nran\trun\n");
  const auto lemmas = CleanConfig::parse_lemmas(lm);
  CHECK(lemmas.size() == 2);
  CHECK(lemmas.at("ran") == "run");
}

TEST_CASE("fingerprint changes with the resources") {
  auto a = testing::shipped_clean();
  auto b = a;
  b.stopwords.insert("heart");
  CHECK(a.fingerprint() != b.fingerprint());
  b = a;
  b.min_token_length = 3;
  CHECK(a.fingerprint() != b.fingerprint());
}
