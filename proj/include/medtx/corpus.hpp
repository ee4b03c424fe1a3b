#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "medtx/body_system.hpp"

namespace medtx {

struct RawReport {
  std::string id;
  std::string specialty;
  std::string transcription;
  std::optional<std::string> sample_name;
};

/// Specialty name -> body system. An entry mapped to std::nullopt is an
/// explicit exclusion; unknown specialties are excluded as well.
class SpecialtyMapping {
 public:
  void set(std::string_view specialty, std::optional<BodySystem> target);

  /// Returns the class for a specialty, or nullopt when excluded/unmapped.
  std::optional<BodySystem> lookup(std::string_view specialty) const;
  bool contains(std::string_view specialty) const;

  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

  /// Normalized (trimmed, lowercased) keys in sorted order.
  const std::map<std::string, std::optional<BodySystem>>& entries() const { return entries_; }

  /// `specialty<TAB>class` per line; `#` starts a comment; class may be
  /// "excluded".
  static SpecialtyMapping parse(std::istream& in);
  static SpecialtyMapping load(const std::filesystem::path& path);

 private:
  std::map<std::string, std::optional<BodySystem>> entries_;
};

struct CuratedExample {
  std::string id;
  BodySystem label;
  std::string transcription;
};

struct CurationResult {
  std::vector<CuratedExample> examples;
  std::size_t excluded_unmapped = 0;
  std::size_t excluded_empty = 0;
};

struct HistogramBucket {
  std::size_t start = 0;  // inclusive, characters
  std::size_t end = 0;    // exclusive
  std::size_t count = 0;
};

inline constexpr std::size_t kHistogramBucketWidth = 250;

struct DatasetStats {
  std::size_t report_count = 0;
  std::map<BodySystem, std::size_t> per_class_counts;
  std::size_t unique_word_count = 0;
  double mean_char_length = 0.0;
  std::vector<HistogramBucket> length_histogram;
};

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  bool stratified = false;
};

struct DatasetSplit {
  std::vector<CuratedExample> train;
  std::vector<CuratedExample> test;
};

/// Reads a CSV snapshot with `medical_specialty` and `transcription` headers
/// (optional `sample_name`, optional `id`). Rows with an empty transcription
/// are kept. Throws Schema on a missing column, Io when unreadable.
std::vector<RawReport> load_reports(std::istream& in);
std::vector<RawReport> load_reports(const std::filesystem::path& path);

/// Drops unmapped/excluded specialties and empty transcriptions.
/// Throws Config on an empty mapping, EmptyDataset when nothing survives.
CurationResult curate(const std::vector<RawReport>& reports, const SpecialtyMapping& mapping);

/// Throws EmptyDataset on empty input.
DatasetStats compute_stats(const std::vector<CuratedExample>& examples);

/// Deterministic under `spec.seed`. Train size is floor(fraction * n) (per
/// class when stratified); the remainder goes to test. Both halves keep the
/// input order.
DatasetSplit split_dataset(const std::vector<CuratedExample>& examples, const SplitSpec& spec);

/// Number of Unicode code points in a UTF-8 string.
std::size_t utf8_length(std::string_view text);

}  // namespace medtx
