#include "medtx/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_set>

#include "medtx/csv.hpp"
#include "medtx/errors.hpp"
#include "text_util.hpp"

namespace medtx {

namespace {

std::string normalize_key(std::string_view specialty) {
  return detail::ascii_lower(detail::trim(specialty));
}

std::size_t train_count(double fraction, std::size_t n) {
  // The epsilon absorbs representation error in products like 0.8 * 305.
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

}  // namespace

void SpecialtyMapping::set(std::string_view specialty, std::optional<BodySystem> target) {
  entries_[normalize_key(specialty)] = target;
}

std::optional<BodySystem> SpecialtyMapping::lookup(std::string_view specialty) const {
  const auto it = entries_.find(normalize_key(specialty));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

bool SpecialtyMapping::contains(std::string_view specialty) const {
  return entries_.count(normalize_key(specialty)) > 0;
}

SpecialtyMapping SpecialtyMapping::parse(std::istream& in) {
  SpecialtyMapping mapping;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view body = detail::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto tab = body.find('\t');
    if (tab == std::string_view::npos) {
      throw Error(ErrorKind::Schema,
                  "mapping line " + std::to_string(line_no) + ": expected specialty<TAB>class");
    }
    const std::string_view name = detail::trim(body.substr(0, tab));
    const std::string_view target = detail::trim(body.substr(tab + 1));
    if (name.empty()) {
      throw Error(ErrorKind::Schema, "mapping line " + std::to_string(line_no) + ": empty specialty");
    }
    if (detail::ascii_lower(target) == "excluded") {
      mapping.set(name, std::nullopt);
      continue;
    }
    const auto cls = parse_body_system(target);
    if (!cls) {
      throw Error(ErrorKind::Schema, "mapping line " + std::to_string(line_no) +
                                         ": unknown class '" + std::string(target) + "'");
    }
    mapping.set(name, *cls);
  }
  return mapping;
}

SpecialtyMapping SpecialtyMapping::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read mapping file " + path.string());
  return parse(in);
}

std::vector<RawReport> load_reports(std::istream& in) {
  if (!in) throw Error(ErrorKind::Io, "unreadable report source");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw Error(ErrorKind::Io, "error reading report source");
  std::string text = buffer.str();
  if (text.rfind("\xEF\xBB\xBF", 0) == 0) text.erase(0, 3);

  const auto rows = parse_csv(text);
  if (rows.empty()) throw Error(ErrorKind::Schema, "csv has no header row");

  const auto& header = rows.front();
  const auto column = [&](std::string_view name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (detail::ascii_lower(detail::trim(header[i])) == name) return i;
    }
    return std::nullopt;
  };
  const auto specialty_col = column("medical_specialty");
  const auto text_col = column("transcription");
  if (!specialty_col) throw Error(ErrorKind::Schema, "csv is missing required column 'medical_specialty'");
  if (!text_col) throw Error(ErrorKind::Schema, "csv is missing required column 'transcription'");
  const auto sample_col = column("sample_name");
  const auto id_col = column("id");

  std::vector<RawReport> reports;
  reports.reserve(rows.size() - 1);
  std::unordered_set<std::string> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const auto cell = [&](std::optional<std::size_t> col) -> std::string {
      return col && *col < row.size() ? row[*col] : std::string();
    };
    RawReport report;
    report.id = id_col ? std::string(detail::trim(cell(id_col))) : "row-" + std::to_string(r - 1);
    if (report.id.empty() || !seen.insert(report.id).second) {
      throw Error(ErrorKind::Schema, "csv row " + std::to_string(r) + ": missing or duplicate id");
    }
    report.specialty = std::string(detail::trim(cell(specialty_col)));
    if (report.specialty.empty()) {
      throw Error(ErrorKind::Schema, "csv row " + std::to_string(r) + ": empty medical_specialty");
    }
    report.transcription = cell(text_col);
    if (sample_col) report.sample_name = std::string(detail::trim(cell(sample_col)));
    reports.push_back(std::move(report));
  }
  return reports;
}

std::vector<RawReport> load_reports(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  return load_reports(in);
}

CurationResult curate(const std::vector<RawReport>& reports, const SpecialtyMapping& mapping) {
  if (mapping.empty()) throw Error(ErrorKind::Config, "specialty mapping is empty");
  CurationResult result;
  for (const auto& report : reports) {
    const auto label = mapping.lookup(report.specialty);
    if (!label) {
      ++result.excluded_unmapped;
      continue;
    }
    if (detail::trim(report.transcription).empty()) {
      ++result.excluded_empty;
      continue;
    }
    result.examples.push_back({report.id, *label, report.transcription});
  }
  if (result.examples.empty()) {
    throw Error(ErrorKind::EmptyDataset, "no reports survived curation");
  }
  return result;
}

std::size_t utf8_length(std::string_view text) {
  std::size_t n = 0;
  for (unsigned char c : text) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

DatasetStats compute_stats(const std::vector<CuratedExample>& examples) {
  if (examples.empty()) throw Error(ErrorKind::EmptyDataset, "cannot compute stats of an empty dataset");
  DatasetStats stats;
  stats.report_count = examples.size();
  for (BodySystem c : kClassOrder) stats.per_class_counts[c] = 0;

  std::unordered_set<std::string> words;
  std::vector<std::size_t> lengths;
  lengths.reserve(examples.size());
  double total = 0.0;
  for (const auto& ex : examples) {
    ++stats.per_class_counts[ex.label];
    std::istringstream ws(ex.transcription);
    std::string word;
    while (ws >> word) words.insert(word);
    const std::size_t len = utf8_length(ex.transcription);
    lengths.push_back(len);
    total += static_cast<double>(len);
  }
  stats.unique_word_count = words.size();
  stats.mean_char_length = total / static_cast<double>(examples.size());

  const std::size_t max_len = *std::max_element(lengths.begin(), lengths.end());
  const std::size_t buckets = max_len / kHistogramBucketWidth + 1;
  stats.length_histogram.resize(buckets);
  for (std::size_t b = 0; b < buckets; ++b) {
    stats.length_histogram[b].start = b * kHistogramBucketWidth;
    stats.length_histogram[b].end = (b + 1) * kHistogramBucketWidth;
  }
  for (std::size_t len : lengths) ++stats.length_histogram[len / kHistogramBucketWidth].count;
  return stats;
}

DatasetSplit split_dataset(const std::vector<CuratedExample>& examples, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw Error(ErrorKind::Config, "train_fraction must lie in (0, 1)");
  }
  std::mt19937_64 rng(spec.seed);
  std::vector<char> in_train(examples.size(), 0);

  const auto assign = [&](std::vector<std::size_t> idx) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t n_train = train_count(spec.train_fraction, idx.size());
    for (std::size_t i = 0; i < n_train; ++i) in_train[idx[i]] = 1;
  };

  if (spec.stratified) {
    for (BodySystem c : kClassOrder) {
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < examples.size(); ++i) {
        if (examples[i].label == c) idx.push_back(i);
      }
      if (idx.empty()) {
        throw Error(ErrorKind::Config, "stratified split needs at least one example of class " +
                                           std::string(to_string(c)));
      }
      assign(std::move(idx));
    }
  } else {
    std::vector<std::size_t> idx(examples.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    assign(std::move(idx));
  }

  DatasetSplit split;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    (in_train[i] ? split.train : split.test).push_back(examples[i]);
  }
  return split;
}

}  // namespace medtx
