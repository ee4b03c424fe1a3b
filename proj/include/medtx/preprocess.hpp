#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace medtx {

/// Cleaning resources: stopword set, surface->root lemma dictionary, and the
/// minimum token length (in code points).
struct CleanConfig {
  std::unordered_set<std::string> stopwords;
  std::unordered_map<std::string, std::string> lemmas;
  std::size_t min_token_length = 2;

  /// One word per line, `#` comments. Words are lowercased on load.
  static std::unordered_set<std::string> parse_stopwords(std::istream& in);
  /// `surface<TAB>root` per line, `#` comments.
  static std::unordered_map<std::string, std::string> parse_lemmas(std::istream& in);

  static CleanConfig load(const std::filesystem::path& stopwords_path,
                          const std::filesystem::path& lemmas_path);

  /// Content hash (hex BLAKE2b) over the sorted resources; identifies the
  /// exact preprocessing a model was trained with.
  std::string fingerprint() const;
};

struct TokenizedDoc {
  std::vector<std::string> tokens;
  std::string source_id;
};

/// Non-letters become spaces, text is lowercased and split on whitespace,
/// then stopwords and short tokens are dropped.
TokenizedDoc clean_and_tokenize(std::string_view text, const CleanConfig& config,
                                std::string source_id = {});

/// Dictionary lookup per token; tokens without an entry pass through.
TokenizedDoc lemmatize(TokenizedDoc doc, const CleanConfig& config);

TokenizedDoc preprocess_document(std::string_view text, const CleanConfig& config,
                                 std::string source_id = {});

}  // namespace medtx
