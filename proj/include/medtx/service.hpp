#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "medtx/body_system.hpp"
#include "medtx/pipeline.hpp"

namespace medtx {

using Clock = std::function<std::chrono::system_clock::time_point()>;

/// ISO-8601 UTC with milliseconds, e.g. 2026-10-16T08:30:00.125Z.
std::string format_timestamp(std::chrono::system_clock::time_point t);

// ---------------------------------------------------------------------------
// Configuration

struct ServiceConfig {
  std::string listen_address = "127.0.0.1";
  int port = 8080;
  std::filesystem::path store_path = "records.json";
  std::filesystem::path accounts_path = "accounts.json";
  std::vector<std::filesystem::path> artifact_paths;
  std::int64_t token_ttl_seconds = 24 * 60 * 60;
  std::string extractor_mode = "passthrough";  // or "ocr"
  std::string ocr_endpoint;
  std::optional<std::filesystem::path> static_dir;

  static constexpr std::string_view kEnvPrefix = "MEDTX_";

  /// JSON object with the snake_case keys above; relative paths resolve
  /// against the config file's directory.
  static ServiceConfig load(const std::filesystem::path& path);
  static ServiceConfig from_json(const Json& j, const std::filesystem::path& base_dir = {});

  /// Overrides from MEDTX_LISTEN_ADDRESS, MEDTX_PORT, MEDTX_STORE_PATH,
  /// MEDTX_ACCOUNTS_PATH, MEDTX_ARTIFACT_PATHS (comma separated),
  /// MEDTX_TOKEN_TTL_SECONDS, MEDTX_EXTRACTOR_MODE, MEDTX_OCR_ENDPOINT,
  /// MEDTX_STATIC_DIR.
  void apply_env(const std::function<std::optional<std::string>(std::string_view)>& getenv);
  void apply_env();
};

// ---------------------------------------------------------------------------
// Accounts and tokens

enum class Role { Clinician, Admin };
std::string_view to_string(Role r);
std::optional<Role> parse_role(std::string_view name);

struct UserAccount {
  std::string username;
  std::string password_hash;  // libsodium pwhash string, includes the salt
  Role role = Role::Clinician;
};

/// File-backed account table. Hashes stay on the server side.
class AccountStore {
 public:
  AccountStore() = default;
  explicit AccountStore(std::filesystem::path path);

  /// Throws Validation on an empty or duplicate username or empty password.
  void add_user(const std::string& username, const std::string& password, Role role);
  /// nullopt for an unknown user or wrong password.
  std::optional<UserAccount> verify(const std::string& username, const std::string& password) const;
  std::size_t size() const;

 private:
  void persist() const;

  std::optional<std::filesystem::path> path_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, UserAccount> users_;
};

struct AuthToken {
  std::string token;
  std::string username;
  std::chrono::system_clock::time_point expires_at;
};

class TokenRegistry {
 public:
  TokenRegistry(std::chrono::seconds ttl, Clock clock);

  /// 256 random bits, hex encoded.
  AuthToken issue(const std::string& username);
  /// Throws Authorization when missing, unknown, expired or revoked.
  AuthToken validate(std::string_view token) const;
  void revoke(std::string_view token);

 private:
  std::chrono::seconds ttl_;
  Clock clock_;
  mutable std::mutex mutex_;
  std::map<std::string, AuthToken, std::less<>> tokens_;
};

// ---------------------------------------------------------------------------
// Records

struct Classification {
  BodySystem label = BodySystem::Heart;
  std::vector<double> probabilities;  // aligned with kClassOrder
  std::string model_id;

  friend bool operator==(const Classification&, const Classification&) = default;
};

struct PatientRecord {
  std::string record_id;
  std::string patient_name;
  std::string created_at;
  std::string raw_text;
  std::string findings_text;
  std::optional<Classification> classification;

  friend bool operator==(const PatientRecord&, const PatientRecord&) = default;
};

Json to_json(const PatientRecord& record);
PatientRecord record_from_json(const Json& j);

struct RecordFilter {
  std::optional<BodySystem> category;
  std::optional<std::string> patient_name_substring;  // case-insensitive
  std::optional<std::string> from;  // YYYY-MM-DD or full timestamp, inclusive
  std::optional<std::string> to;    // YYYY-MM-DD or full timestamp, inclusive
};

/// Durable record table. Writes are serialized and persisted with
/// write-temp-then-rename; reads run concurrently.
class RecordStore {
 public:
  RecordStore() = default;
  explicit RecordStore(std::filesystem::path path);

  PatientRecord create(const std::string& patient_name, std::string raw_text, std::string findings_text,
                       const std::string& created_at);
  std::optional<PatientRecord> get(const std::string& record_id) const;
  /// Sorted by created_at descending (then record_id descending).
  /// Throws Validation on a malformed or inverted date range.
  std::vector<PatientRecord> list(const RecordFilter& filter) const;
  /// Throws NotFound.
  PatientRecord set_classification(const std::string& record_id, Classification classification);
  std::size_t size() const;

 private:
  void persist_locked() const;

  std::optional<std::filesystem::path> path_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, PatientRecord> records_;
  std::uint64_t next_id_ = 1;
};

/// Section of a report between a FINDINGS header (case-insensitive,
/// optional colon, at the start of a line) and the next all-caps header.
/// Falls back to the whole text when there is no such section.
std::string extract_findings(std::string_view text);

// ---------------------------------------------------------------------------
// Text extraction

struct Payload {
  std::optional<std::string> text;
  std::optional<std::string> image_bytes;
};

class TextExtractor {
 public:
  virtual ~TextExtractor() = default;
  /// Throws Extraction when the payload cannot be turned into text.
  virtual std::string extract(const Payload& payload) const = 0;
};

/// Accepts text payloads only.
class PassThroughExtractor final : public TextExtractor {
 public:
  std::string extract(const Payload& payload) const override;
};

/// POSTs image bytes (application/octet-stream) to an external OCR endpoint
/// and expects plain UTF-8 text back. Text payloads pass through.
class HttpOcrExtractor final : public TextExtractor {
 public:
  explicit HttpOcrExtractor(std::string endpoint_url);
  std::string extract(const Payload& payload) const override;

 private:
  std::string scheme_host_port_;
  std::string path_;
};

std::unique_ptr<TextExtractor> make_extractor(const ServiceConfig& config);

// ---------------------------------------------------------------------------
// Models

struct LoadedModel {
  std::string model_id;
  std::shared_ptr<const ModelArtifact> artifact;
  std::optional<std::string> trained_at;
};

class ModelRegistry {
 public:
  void add(LoadedModel model);
  /// Model id is the file stem; trained_at comes from a sibling
  /// `<artifact>.manifest.json` when present.
  void load_file(const std::filesystem::path& path);
  const LoadedModel* find(std::string_view model_id) const;
  const std::vector<LoadedModel>& models() const { return models_; }
  bool empty() const { return models_.empty(); }

 private:
  std::vector<LoadedModel> models_;
};

// ---------------------------------------------------------------------------
// Service facade: every operation except login takes a bearer token.

class ClassificationService {
 public:
  ClassificationService(AccountStore& accounts, RecordStore& records, ModelRegistry& models,
                        std::unique_ptr<TextExtractor> extractor, std::chrono::seconds token_ttl,
                        Clock clock = {});

  /// Throws Authentication with the same message for unknown users and bad
  /// passwords.
  AuthToken login(const std::string& username, const std::string& password);
  void logout(std::string_view token);
  /// Throws Authorization unless `token` is live.
  void authorize(std::string_view token) const;

  PatientRecord create_record(std::string_view token, const std::string& patient_name, const Payload& payload);
  std::vector<PatientRecord> list_records(std::string_view token, const RecordFilter& filter) const;
  PatientRecord classify_record(std::string_view token, const std::string& record_id, const std::string& model_id);
  std::vector<LoadedModel> list_models(std::string_view token) const;

  bool model_loaded() const { return !models_.empty(); }

 private:
  AccountStore& accounts_;
  RecordStore& records_;
  ModelRegistry& models_;
  std::unique_ptr<TextExtractor> extractor_;
  Clock clock_;
  TokenRegistry tokens_;
};

}  // namespace medtx
