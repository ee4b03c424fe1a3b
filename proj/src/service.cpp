#include "medtx/service.hpp"

#include <sodium.h>

#include <algorithm>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <regex>
#include <sstream>

#include <httplib.h>

#include "medtx/errors.hpp"
#include "text_util.hpp"

namespace medtx {

namespace {

void ensure_sodium() {
  static const bool ok = sodium_init() >= 0;
  if (!ok) throw Error(ErrorKind::Config, "libsodium failed to initialise");
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::Schema, path.string() + ": " + e.what());
  }
}

// Write-temp-then-rename so a crash leaves either the old or the new file.
void write_file_atomically(const std::filesystem::path& path, const std::string& bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + tmp.string());
    out << bytes;
    out.flush();
    if (!out) throw Error(ErrorKind::Io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot replace " + path.string() + ": " + ec.message());
}

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t extra;
    if (c < 0x80) extra = 0;
    else if ((c & 0xE0) == 0xC0 && c >= 0xC2) extra = 1;
    else if ((c & 0xF0) == 0xE0) extra = 2;
    else if ((c & 0xF8) == 0xF0 && c <= 0xF4) extra = 3;
    else return false;
    if (i + extra >= s.size()) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return false;
    }
    i += extra + 1;
  }
  return true;
}

template <typename T>
T config_value(const Json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw Error(ErrorKind::Config, std::string("config key '") + key + "' has the wrong type");
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) return base / path;
  return path;
}

void validate_config(const ServiceConfig& c) {
  if (c.port < 0 || c.port > 65535) throw Error(ErrorKind::Config, "port must be in [0, 65535]");
  if (c.token_ttl_seconds <= 0) throw Error(ErrorKind::Config, "token_ttl_seconds must be positive");
  if (c.extractor_mode != "passthrough" && c.extractor_mode != "ocr") {
    throw Error(ErrorKind::Config, "extractor_mode must be 'passthrough' or 'ocr'");
  }
  if (c.extractor_mode == "ocr" && c.ocr_endpoint.empty()) {
    throw Error(ErrorKind::Config, "extractor_mode 'ocr' needs ocr_endpoint");
  }
}

}  // namespace

std::string format_timestamp(std::chrono::system_clock::time_point t) {
  using namespace std::chrono;
  const auto ms = time_point_cast<milliseconds>(t);
  auto secs = time_point_cast<seconds>(ms);
  if (secs > ms) secs -= seconds(1);
  const auto millis = (ms - secs).count();
  const std::time_t tt = system_clock::to_time_t(secs);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%S") << '.' << std::setw(3) << std::setfill('0') << millis << 'Z';
  return out.str();
}

// ---------------------------------------------------------------------------

ServiceConfig ServiceConfig::load(const std::filesystem::path& path) {
  Json j;
  try {
    j = read_json_file(path);
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, e.what());
  }
  return from_json(j, path.parent_path());
}

ServiceConfig ServiceConfig::from_json(const Json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw Error(ErrorKind::Config, "service config must be a JSON object");
  static const std::vector<std::string> known{"listen_address", "port", "store_path", "accounts_path",
                                              "artifact_paths", "token_ttl_seconds", "extractor_mode",
                                              "ocr_endpoint", "static_dir"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error(ErrorKind::Config, "unknown config key '" + key + "'");
    }
  }
  ServiceConfig c;
  c.listen_address = config_value(j, "listen_address", c.listen_address);
  c.port = config_value(j, "port", c.port);
  c.store_path = resolve(base_dir, config_value(j, "store_path", c.store_path.string()));
  c.accounts_path = resolve(base_dir, config_value(j, "accounts_path", c.accounts_path.string()));
  for (const auto& p : config_value(j, "artifact_paths", std::vector<std::string>{})) {
    c.artifact_paths.push_back(resolve(base_dir, p));
  }
  c.token_ttl_seconds = config_value(j, "token_ttl_seconds", c.token_ttl_seconds);
  c.extractor_mode = config_value(j, "extractor_mode", c.extractor_mode);
  c.ocr_endpoint = config_value(j, "ocr_endpoint", c.ocr_endpoint);
  if (j.contains("static_dir") && !j["static_dir"].is_null()) {
    c.static_dir = resolve(base_dir, config_value<std::string>(j, "static_dir", ""));
  }
  validate_config(c);
  return c;
}

void ServiceConfig::apply_env(const std::function<std::optional<std::string>(std::string_view)>& getenv) {
  const auto var = [&](const char* name) { return getenv(std::string(kEnvPrefix) + name); };
  const auto integer = [](const std::string& name, const std::string& v) {
    try {
      std::size_t pos = 0;
      const long long n = std::stoll(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return n;
    } catch (const std::exception&) {
      throw Error(ErrorKind::Config, std::string(kEnvPrefix) + name + " must be an integer");
    }
  };
  if (auto v = var("LISTEN_ADDRESS")) listen_address = *v;
  if (auto v = var("PORT")) port = static_cast<int>(integer("PORT", *v));
  if (auto v = var("STORE_PATH")) store_path = *v;
  if (auto v = var("ACCOUNTS_PATH")) accounts_path = *v;
  if (auto v = var("ARTIFACT_PATHS")) {
    artifact_paths.clear();
    std::stringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto t = detail::trim(item);
      if (!t.empty()) artifact_paths.emplace_back(std::string(t));
    }
  }
  if (auto v = var("TOKEN_TTL_SECONDS")) token_ttl_seconds = integer("TOKEN_TTL_SECONDS", *v);
  if (auto v = var("EXTRACTOR_MODE")) extractor_mode = *v;
  if (auto v = var("OCR_ENDPOINT")) ocr_endpoint = *v;
  if (auto v = var("STATIC_DIR")) {
    if (v->empty()) static_dir.reset();
    else static_dir = *v;
  }
  validate_config(*this);
}

void ServiceConfig::apply_env() {
  apply_env([](std::string_view name) -> std::optional<std::string> {
    const char* v = std::getenv(std::string(name).c_str());
    if (!v) return std::nullopt;
    return std::string(v);
  });
}

// ---------------------------------------------------------------------------

std::string_view to_string(Role r) { return r == Role::Admin ? "admin" : "clinician"; }

std::optional<Role> parse_role(std::string_view name) {
  const auto n = detail::ascii_lower(detail::trim(name));
  if (n == "clinician") return Role::Clinician;
  if (n == "admin") return Role::Admin;
  return std::nullopt;
}

AccountStore::AccountStore(std::filesystem::path path) : path_(std::move(path)) {
  if (!std::filesystem::exists(*path_)) return;
  const Json j = read_json_file(*path_);
  try {
    for (const auto& u : j.at("users")) {
      UserAccount a;
      a.username = u.at("username").get<std::string>();
      a.password_hash = u.at("password_hash").get<std::string>();
      const auto role = parse_role(u.at("role").get<std::string>());
      if (!role) throw Error(ErrorKind::Schema, "unknown role for user " + a.username);
      a.role = *role;
      users_.emplace(a.username, std::move(a));
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::Schema, path_->string() + ": " + e.what());
  }
}

void AccountStore::add_user(const std::string& username, const std::string& password, Role role) {
  ensure_sodium();
  if (detail::trim(username).empty()) throw Error(ErrorKind::Validation, "username must not be empty");
  if (password.empty()) throw Error(ErrorKind::Validation, "password must not be empty");
  char hash[crypto_pwhash_STRBYTES];
  if (crypto_pwhash_str(hash, password.data(), password.size(), crypto_pwhash_OPSLIMIT_INTERACTIVE,
                        crypto_pwhash_MEMLIMIT_INTERACTIVE) != 0) {
    throw Error(ErrorKind::Config, "password hashing ran out of memory");
  }
  std::unique_lock lock(mutex_);
  if (users_.count(username)) throw Error(ErrorKind::Validation, "user '" + username + "' already exists");
  users_.emplace(username, UserAccount{username, hash, role});
  try {
    persist();
  } catch (...) {
    users_.erase(username);
    throw;
  }
}

std::optional<UserAccount> AccountStore::verify(const std::string& username, const std::string& password) const {
  ensure_sodium();
  // Unknown users still pay for one hash verification so timing does not
  // reveal which usernames exist.
  static const std::string dummy = [] {
    char h[crypto_pwhash_STRBYTES];
    const char pw[] = "not-a-real-account";
    if (crypto_pwhash_str(h, pw, sizeof(pw) - 1, crypto_pwhash_OPSLIMIT_INTERACTIVE,
                          crypto_pwhash_MEMLIMIT_INTERACTIVE) != 0) {
      return std::string();
    }
    return std::string(h);
  }();
  std::optional<UserAccount> account;
  {
    std::shared_lock lock(mutex_);
    const auto it = users_.find(username);
    if (it != users_.end()) account = it->second;
  }
  const std::string& hash = account ? account->password_hash : dummy;
  const bool ok = crypto_pwhash_str_verify(hash.c_str(), password.data(), password.size()) == 0;
  if (!account || !ok) return std::nullopt;
  return account;
}

std::size_t AccountStore::size() const {
  std::shared_lock lock(mutex_);
  return users_.size();
}

void AccountStore::persist() const {
  if (!path_) return;
  Json users = Json::array();
  for (const auto& [name, a] : users_) {
    users.push_back({{"username", a.username}, {"password_hash", a.password_hash}, {"role", to_string(a.role)}});
  }
  write_file_atomically(*path_, Json{{"users", users}}.dump(2) + "\n");
}

// ---------------------------------------------------------------------------

TokenRegistry::TokenRegistry(std::chrono::seconds ttl, Clock clock) : ttl_(ttl), clock_(std::move(clock)) {
  if (!clock_) clock_ = [] { return std::chrono::system_clock::now(); };
}

AuthToken TokenRegistry::issue(const std::string& username) {
  ensure_sodium();
  unsigned char raw[32];
  randombytes_buf(raw, sizeof raw);
  char hex[sizeof raw * 2 + 1];
  sodium_bin2hex(hex, sizeof hex, raw, sizeof raw);
  AuthToken t{hex, username, clock_() + ttl_};
  std::lock_guard lock(mutex_);
  tokens_[t.token] = t;
  return t;
}

AuthToken TokenRegistry::validate(std::string_view token) const {
  if (token.empty()) throw Error(ErrorKind::Authorization, "missing bearer token");
  const auto now = clock_();
  std::lock_guard lock(mutex_);
  const auto it = tokens_.find(token);
  if (it == tokens_.end()) throw Error(ErrorKind::Authorization, "invalid or revoked token");
  if (now >= it->second.expires_at) throw Error(ErrorKind::Authorization, "token expired");
  return it->second;
}

void TokenRegistry::revoke(std::string_view token) {
  std::lock_guard lock(mutex_);
  const auto it = tokens_.find(token);
  if (it != tokens_.end()) tokens_.erase(it);
}

// ---------------------------------------------------------------------------

Json to_json(const PatientRecord& r) {
  Json j{{"record_id", r.record_id},
         {"patient_name", r.patient_name},
         {"created_at", r.created_at},
         {"raw_text", r.raw_text},
         {"findings_text", r.findings_text},
         {"classification", nullptr}};
  if (r.classification) {
    Json probs = Json::object();
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      probs[std::string(to_string(kClassOrder[c]))] = r.classification->probabilities.at(c);
    }
    j["classification"] = {{"label", std::string(to_string(r.classification->label))},
                           {"probabilities", probs},
                           {"model_id", r.classification->model_id}};
  }
  return j;
}

PatientRecord record_from_json(const Json& j) {
  try {
    PatientRecord r;
    r.record_id = j.at("record_id").get<std::string>();
    r.patient_name = j.at("patient_name").get<std::string>();
    r.created_at = j.at("created_at").get<std::string>();
    r.raw_text = j.at("raw_text").get<std::string>();
    r.findings_text = j.at("findings_text").get<std::string>();
    const auto& c = j.at("classification");
    if (!c.is_null()) {
      Classification cl;
      const auto label = parse_body_system(c.at("label").get<std::string>());
      if (!label) throw Error(ErrorKind::Schema, "unknown label in record " + r.record_id);
      cl.label = *label;
      for (BodySystem cls : kClassOrder) cl.probabilities.push_back(c.at("probabilities").at(std::string(to_string(cls))).get<double>());
      cl.model_id = c.at("model_id").get<std::string>();
      r.classification = std::move(cl);
    }
    return r;
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::Schema, std::string("malformed record: ") + e.what());
  }
}

namespace {

std::uint64_t record_sequence(const std::string& id) {
  const auto dash = id.rfind('-');
  return std::strtoull(id.c_str() + (dash == std::string::npos ? 0 : dash + 1), nullptr, 10);
}

// Normalizes a filter bound to a full millisecond timestamp so that plain
// string comparison against created_at works.
std::string normalize_bound(const std::string& value, bool upper) {
  static const std::regex date(R"((\d{4})-(\d{2})-(\d{2}))");
  static const std::regex stamp(R"((\d{4})-(\d{2})-(\d{2})T(\d{2}):(\d{2}):(\d{2})(\.\d{3})?Z)");
  std::smatch m;
  std::string out;
  if (std::regex_match(value, m, date)) {
    out = value + (upper ? "T23:59:59.999Z" : "T00:00:00.000Z");
  } else if (std::regex_match(value, m, stamp)) {
    out = m[7].matched ? value : value.substr(0, value.size() - 1) + (upper ? ".999Z" : ".000Z");
    if (std::stoi(m[4]) > 23 || std::stoi(m[5]) > 59 || std::stoi(m[6]) > 60) {
      throw Error(ErrorKind::Validation, "invalid time in '" + value + "'");
    }
  } else {
    throw Error(ErrorKind::Validation, "date '" + value + "' is not YYYY-MM-DD or an ISO-8601 UTC timestamp");
  }
  const int month = std::stoi(m[2]), day = std::stoi(m[3]);
  if (month < 1 || month > 12 || day < 1 || day > 31) {
    throw Error(ErrorKind::Validation, "invalid date '" + value + "'");
  }
  return out;
}

}  // namespace

RecordStore::RecordStore(std::filesystem::path path) : path_(std::move(path)) {
  if (!std::filesystem::exists(*path_)) return;
  const Json j = read_json_file(*path_);
  try {
    next_id_ = j.at("next_id").get<std::uint64_t>();
    for (const auto& r : j.at("records")) {
      auto record = record_from_json(r);
      const auto id = record.record_id;
      if (!records_.emplace(id, std::move(record)).second) {
        throw Error(ErrorKind::Schema, "duplicate record id " + id);
      }
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::Schema, path_->string() + ": " + e.what());
  }
}

PatientRecord RecordStore::create(const std::string& patient_name, std::string raw_text, std::string findings_text,
                                  const std::string& created_at) {
  if (detail::trim(patient_name).empty()) throw Error(ErrorKind::Validation, "patient_name must not be empty");
  std::unique_lock lock(mutex_);
  std::ostringstream id;
  id << "rec-" << std::setw(6) << std::setfill('0') << next_id_;
  PatientRecord r{id.str(), patient_name, created_at, std::move(raw_text), std::move(findings_text), std::nullopt};
  records_.emplace(r.record_id, r);
  ++next_id_;
  try {
    persist_locked();
  } catch (...) {
    records_.erase(r.record_id);
    --next_id_;
    throw;
  }
  return r;
}

std::optional<PatientRecord> RecordStore::get(const std::string& record_id) const {
  std::shared_lock lock(mutex_);
  const auto it = records_.find(record_id);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

std::vector<PatientRecord> RecordStore::list(const RecordFilter& filter) const {
  std::optional<std::string> from, to;
  if (filter.from) from = normalize_bound(*filter.from, false);
  if (filter.to) to = normalize_bound(*filter.to, true);
  if (from && to && *from > *to) throw Error(ErrorKind::Validation, "date range 'from' is after 'to'");
  const auto needle = filter.patient_name_substring ? detail::ascii_lower(*filter.patient_name_substring) : std::string();

  std::vector<PatientRecord> out;
  {
    std::shared_lock lock(mutex_);
    for (const auto& [id, r] : records_) {
      if (filter.category && (!r.classification || r.classification->label != *filter.category)) continue;
      if (filter.patient_name_substring && detail::ascii_lower(r.patient_name).find(needle) == std::string::npos) continue;
      if (from && r.created_at < *from) continue;
      if (to && r.created_at > *to) continue;
      out.push_back(r);
    }
  }
  std::sort(out.begin(), out.end(), [](const PatientRecord& a, const PatientRecord& b) {
    if (a.created_at != b.created_at) return a.created_at > b.created_at;
    return record_sequence(a.record_id) > record_sequence(b.record_id);
  });
  return out;
}

PatientRecord RecordStore::set_classification(const std::string& record_id, Classification classification) {
  std::unique_lock lock(mutex_);
  const auto it = records_.find(record_id);
  if (it == records_.end()) throw Error(ErrorKind::NotFound, "no record '" + record_id + "'");
  auto previous = std::move(it->second.classification);
  it->second.classification = std::move(classification);
  try {
    persist_locked();
  } catch (...) {
    it->second.classification = std::move(previous);
    throw;
  }
  return it->second;
}

std::size_t RecordStore::size() const {
  std::shared_lock lock(mutex_);
  return records_.size();
}

void RecordStore::persist_locked() const {
  if (!path_) return;
  std::vector<const PatientRecord*> ordered;
  for (const auto& [id, r] : records_) ordered.push_back(&r);
  std::sort(ordered.begin(), ordered.end(), [](const PatientRecord* a, const PatientRecord* b) {
    return record_sequence(a->record_id) < record_sequence(b->record_id);
  });
  Json records = Json::array();
  for (const auto* r : ordered) records.push_back(to_json(*r));
  write_file_atomically(*path_, Json{{"next_id", next_id_}, {"records", records}}.dump(2) + "\n");
}

// ---------------------------------------------------------------------------

namespace {

bool is_upper_word(std::string_view w) {
  bool letters = false;
  for (unsigned char c : w) {
    if (std::isalpha(c)) {
      if (!std::isupper(c)) return false;
      letters = true;
    } else if (c != '/' && c != '&' && c != '-') {
      return false;
    }
  }
  return letters;
}

// Position just past "FINDINGS" + optional colon when `line` starts with it.
std::optional<std::size_t> findings_header(std::string_view line) {
  const std::size_t lead = line.find_first_not_of(" \t");
  if (lead == std::string_view::npos || line.size() - lead < 8) return std::nullopt;
  if (detail::ascii_lower(line.substr(lead, 8)) != "findings") return std::nullopt;
  std::size_t pos = lead + 8;
  if (pos < line.size() && std::isalnum(static_cast<unsigned char>(line[pos]))) return std::nullopt;
  while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
  if (pos < line.size() && line[pos] == ':') ++pos;
  return pos;
}

// Start of the next all-caps header in `text`: either a run of upper-case
// words ending in a colon ("IMPRESSION:", "PLAN OF CARE:"), or a line made
// only of upper-case words.
std::size_t next_header(std::string_view text) {
  static const std::regex inline_header(R"((^|[^A-Za-z0-9])([A-Z][A-Z/&-]+(?:[ \t]+[A-Z][A-Z/&-]*)*)[ \t]*:)");
  std::size_t best = text.size();
  std::match_results<std::string_view::const_iterator> m;
  if (std::regex_search(text.begin(), text.end(), m, inline_header)) {
    best = static_cast<std::size_t>(m.position(2));
  }
  std::size_t line_start = 0;
  while (line_start < text.size()) {
    std::size_t end = text.find('\n', line_start);
    if (end == std::string_view::npos) end = text.size();
    if (line_start > 0) {  // the section's own first line is never a header
      const auto line = detail::trim(text.substr(line_start, end - line_start));
      std::istringstream words{std::string(line)};
      std::string w;
      bool all_upper = !line.empty();
      while (all_upper && words >> w) all_upper = is_upper_word(w);
      if (all_upper) {
        best = std::min(best, line_start);
        break;
      }
    }
    line_start = end + 1;
  }
  return best;
}

}  // namespace

std::string extract_findings(std::string_view text) {
  std::size_t line_start = 0;
  while (line_start <= text.size()) {
    std::size_t end = text.find('\n', line_start);
    if (end == std::string_view::npos) end = text.size();
    if (const auto after = findings_header(text.substr(line_start, end - line_start))) {
      const auto rest = text.substr(line_start + *after);
      const auto section = detail::trim(rest.substr(0, next_header(rest)));
      if (!section.empty()) return std::string(section);
      break;
    }
    if (end == text.size()) break;
    line_start = end + 1;
  }
  return std::string(text);
}

// ---------------------------------------------------------------------------

std::string PassThroughExtractor::extract(const Payload& payload) const {
  if (!payload.text) throw Error(ErrorKind::Extraction, "pass-through extractor only accepts text payloads");
  if (!valid_utf8(*payload.text)) throw Error(ErrorKind::Extraction, "text payload is not valid UTF-8");
  return *payload.text;
}

HttpOcrExtractor::HttpOcrExtractor(std::string endpoint_url) {
  static const std::regex url(R"((https?://[^/]+)(/.*)?)");
  std::smatch m;
  if (!std::regex_match(endpoint_url, m, url)) {
    throw Error(ErrorKind::Config, "OCR endpoint must be an http(s) URL: " + endpoint_url);
  }
  scheme_host_port_ = m[1];
  path_ = m[2].matched ? std::string(m[2]) : "/";
}

std::string HttpOcrExtractor::extract(const Payload& payload) const {
  if (payload.text) return PassThroughExtractor{}.extract(payload);
  if (!payload.image_bytes) throw Error(ErrorKind::Extraction, "payload has neither text nor image bytes");
  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(10);
  client.set_read_timeout(60);
  const auto res = client.Post(path_, *payload.image_bytes, "application/octet-stream");
  if (!res) throw Error(ErrorKind::Extraction, "OCR endpoint unreachable: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw Error(ErrorKind::Extraction, "OCR endpoint returned HTTP " + std::to_string(res->status));
  }
  if (!valid_utf8(res->body)) throw Error(ErrorKind::Extraction, "OCR endpoint returned invalid UTF-8");
  return res->body;
}

std::unique_ptr<TextExtractor> make_extractor(const ServiceConfig& config) {
  if (config.extractor_mode == "ocr") return std::make_unique<HttpOcrExtractor>(config.ocr_endpoint);
  return std::make_unique<PassThroughExtractor>();
}

// ---------------------------------------------------------------------------

void ModelRegistry::add(LoadedModel model) {
  if (find(model.model_id)) throw Error(ErrorKind::Config, "duplicate model id '" + model.model_id + "'");
  models_.push_back(std::move(model));
}

void ModelRegistry::load_file(const std::filesystem::path& path) {
  LoadedModel m;
  m.model_id = path.stem().string();
  m.artifact = std::make_shared<const ModelArtifact>(load_artifact(path));
  auto manifest = path;
  manifest += ".manifest.json";
  if (std::filesystem::exists(manifest)) {
    const Json j = read_json_file(manifest);
    if (j.contains("finished_at") && j["finished_at"].is_string()) m.trained_at = j["finished_at"].get<std::string>();
  }
  add(std::move(m));
}

const LoadedModel* ModelRegistry::find(std::string_view model_id) const {
  for (const auto& m : models_) {
    if (m.model_id == model_id) return &m;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------

ClassificationService::ClassificationService(AccountStore& accounts, RecordStore& records, ModelRegistry& models,
                                             std::unique_ptr<TextExtractor> extractor, std::chrono::seconds token_ttl,
                                             Clock clock)
    : accounts_(accounts),
      records_(records),
      models_(models),
      extractor_(std::move(extractor)),
      clock_(clock ? std::move(clock) : Clock([] { return std::chrono::system_clock::now(); })),
      tokens_(token_ttl, clock_) {
  if (!extractor_) extractor_ = std::make_unique<PassThroughExtractor>();
}

AuthToken ClassificationService::login(const std::string& username, const std::string& password) {
  const auto account = accounts_.verify(username, password);
  if (!account) throw Error(ErrorKind::Authentication, "invalid username or password");
  return tokens_.issue(account->username);
}

void ClassificationService::logout(std::string_view token) {
  tokens_.validate(token);
  tokens_.revoke(token);
}

void ClassificationService::authorize(std::string_view token) const { tokens_.validate(token); }

PatientRecord ClassificationService::create_record(std::string_view token, const std::string& patient_name,
                                                   const Payload& payload) {
  tokens_.validate(token);
  if (detail::trim(patient_name).empty()) throw Error(ErrorKind::Validation, "patient_name must not be empty");
  std::string raw = extractor_->extract(payload);
  if (detail::trim(raw).empty()) throw Error(ErrorKind::Validation, "extracted text is empty");
  std::string findings = extract_findings(raw);
  return records_.create(patient_name, std::move(raw), std::move(findings), format_timestamp(clock_()));
}

std::vector<PatientRecord> ClassificationService::list_records(std::string_view token,
                                                               const RecordFilter& filter) const {
  tokens_.validate(token);
  return records_.list(filter);
}

PatientRecord ClassificationService::classify_record(std::string_view token, const std::string& record_id,
                                                     const std::string& model_id) {
  tokens_.validate(token);
  const auto record = records_.get(record_id);
  if (!record) throw Error(ErrorKind::NotFound, "no record '" + record_id + "'");
  const LoadedModel* model = models_.find(model_id);
  if (!model) throw Error(ErrorKind::NotFound, "no model '" + model_id + "'");
  const Prediction p = classify_text(*model->artifact, record->findings_text);
  return records_.set_classification(record_id, Classification{p.label, p.probabilities, model_id});
}

std::vector<LoadedModel> ClassificationService::list_models(std::string_view token) const {
  tokens_.validate(token);
  return models_.models();
}

}  // namespace medtx
