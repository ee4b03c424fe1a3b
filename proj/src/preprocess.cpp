#include "medtx/preprocess.hpp"

#include <locale.h>
#include <sodium.h>
#include <wctype.h>

#include <algorithm>
#include <fstream>
#include <map>

#include "medtx/errors.hpp"
#include "text_util.hpp"

namespace medtx {

namespace {

// Character classification needs a UTF-8 aware locale regardless of the
// process's global locale, so a dedicated handle is created once.
locale_t utf8_locale() {
  static const locale_t loc = [] {
    locale_t l = newlocale(LC_CTYPE_MASK, "C.UTF-8", static_cast<locale_t>(0));
    if (l == static_cast<locale_t>(0)) l = newlocale(LC_CTYPE_MASK, "en_US.UTF-8", static_cast<locale_t>(0));
    return l;
  }();
  return loc;
}

// Decodes one code point starting at text[i]; advances i. Malformed bytes
// decode to U+FFFD (which is not a letter).
char32_t next_code_point(std::string_view text, std::size_t& i) {
  const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(text[k]); };
  const unsigned char lead = byte(i);
  std::size_t extra = 0;
  char32_t cp = 0;
  if (lead < 0x80) {
    ++i;
    return lead;
  } else if ((lead & 0xE0) == 0xC0) {
    extra = 1;
    cp = lead & 0x1F;
  } else if ((lead & 0xF0) == 0xE0) {
    extra = 2;
    cp = lead & 0x0F;
  } else if ((lead & 0xF8) == 0xF0) {
    extra = 3;
    cp = lead & 0x07;
  } else {
    ++i;
    return 0xFFFD;
  }
  if (i + extra >= text.size()) {
    ++i;
    return 0xFFFD;
  }
  for (std::size_t k = 1; k <= extra; ++k) {
    if ((byte(i + k) & 0xC0) != 0x80) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | (byte(i + k) & 0x3F);
  }
  i += extra + 1;
  return cp;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_letter(char32_t cp) {
  if (cp < 0x80) return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
  return iswalpha_l(static_cast<wint_t>(cp), utf8_locale()) != 0;
}

char32_t to_lower(char32_t cp) {
  if (cp < 0x80) return (cp >= 'A' && cp <= 'Z') ? cp + 32 : cp;
  return static_cast<char32_t>(towlower_l(static_cast<wint_t>(cp), utf8_locale()));
}

}  // namespace

std::unordered_set<std::string> CleanConfig::parse_stopwords(std::istream& in) {
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    const std::string_view w = detail::trim(line);
    if (w.empty() || w.front() == '#') continue;
    words.insert(detail::ascii_lower(w));
  }
  return words;
}

std::unordered_map<std::string, std::string> CleanConfig::parse_lemmas(std::istream& in) {
  std::unordered_map<std::string, std::string> lemmas;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view body = detail::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto tab = body.find('\t');
    const std::string_view surface = tab == std::string_view::npos ? body : detail::trim(body.substr(0, tab));
    const std::string_view root = tab == std::string_view::npos ? std::string_view{} : detail::trim(body.substr(tab + 1));
    if (surface.empty() || root.empty()) {
      throw Error(ErrorKind::Schema, "lemma line " + std::to_string(line_no) + ": expected surface<TAB>root");
    }
    lemmas.emplace(std::string(surface), std::string(root));
  }
  return lemmas;
}

CleanConfig CleanConfig::load(const std::filesystem::path& stopwords_path,
                              const std::filesystem::path& lemmas_path) {
  std::ifstream sw(stopwords_path);
  if (!sw) throw Error(ErrorKind::Io, "cannot read stopword file " + stopwords_path.string());
  std::ifstream lm(lemmas_path);
  if (!lm) throw Error(ErrorKind::Io, "cannot read lemma file " + lemmas_path.string());
  CleanConfig config;
  config.stopwords = parse_stopwords(sw);
  config.lemmas = parse_lemmas(lm);
  return config;
}

std::string CleanConfig::fingerprint() const {
  std::vector<std::string> stops(stopwords.begin(), stopwords.end());
  std::sort(stops.begin(), stops.end());
  const std::map<std::string, std::string> sorted(lemmas.begin(), lemmas.end());

  crypto_generichash_state state;
  crypto_generichash_init(&state, nullptr, 0, 32);
  const auto feed = [&](std::string_view s) {
    crypto_generichash_update(&state, reinterpret_cast<const unsigned char*>(s.data()), s.size());
    const unsigned char sep = 0;
    crypto_generichash_update(&state, &sep, 1);
  };
  feed("stopwords");
  for (const auto& w : stops) feed(w);
  feed("lemmas");
  for (const auto& [k, v] : sorted) {
    feed(k);
    feed(v);
  }
  feed("min_token_length=" + std::to_string(min_token_length));
  unsigned char digest[32];
  crypto_generichash_final(&state, digest, sizeof digest);
  char hex[65];
  sodium_bin2hex(hex, sizeof hex, digest, sizeof digest);
  return hex;
}

TokenizedDoc clean_and_tokenize(std::string_view text, const CleanConfig& config,
                                std::string source_id) {
  TokenizedDoc doc;
  doc.source_id = std::move(source_id);
  std::string current;
  std::size_t current_len = 0;

  const auto flush = [&] {
    if (current_len >= config.min_token_length && !config.stopwords.count(current)) {
      doc.tokens.push_back(current);
    }
    current.clear();
    current_len = 0;
  };

  std::size_t i = 0;
  while (i < text.size()) {
    const char32_t cp = next_code_point(text, i);
    if (is_letter(cp)) {
      append_utf8(current, to_lower(cp));
      ++current_len;
    } else if (current_len > 0) {
      flush();
    }
  }
  if (current_len > 0) flush();
  return doc;
}

TokenizedDoc lemmatize(TokenizedDoc doc, const CleanConfig& config) {
  for (auto& token : doc.tokens) {
    const auto it = config.lemmas.find(token);
    if (it != config.lemmas.end()) token = it->second;
  }
  return doc;
}

TokenizedDoc preprocess_document(std::string_view text, const CleanConfig& config,
                                 std::string source_id) {
  return lemmatize(clean_and_tokenize(text, config, std::move(source_id)), config);
}

}  // namespace medtx
