#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "culturekit/roster.hpp"
#include "json.hpp"

namespace culturekit::corpusscan {

enum class PatternClass { demonym, country_name, topic_keyword };

struct Pattern {
  std::string needle;  // matched case-insensitively at word boundaries
  PatternClass cls = PatternClass::demonym;
  std::string owner;  // culture id or topic id
};

struct PatternSet {
  std::vector<Pattern> patterns;  // deduplicated on (needle, cls, owner)

  // demonym + country name per culture, keyword list per topic.
  static PatternSet from_roster(const roster::Roster& roster);
  static PatternSet load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

struct DocMatches {
  std::set<std::string> cultures;          // hit via either pattern class
  std::set<std::string> cultures_demonym;  // subtotal: hit via demonym
  std::set<std::string> cultures_country;  // subtotal: hit via country name
  std::set<std::string> topics;
};

// Single-pass multi-pattern search: byte-level Aho-Corasick over
// case-folded input with an alphanumeric word-boundary post-check.
// "Indiana" does not hit "Indian". Thread-safe once built.
class MultiPatternMatcher {
 public:
  explicit MultiPatternMatcher(const PatternSet& set);

  DocMatches match_document(std::string_view doc) const;

 private:
  struct Node {
    std::array<int32_t, 256> next;
    std::vector<int32_t> outputs;  // pattern ids ending here (fail chain merged)
  };
  std::vector<Node> nodes_;
  std::vector<Pattern> patterns_;
  std::vector<size_t> pattern_len_;
};

struct CooccurrenceCounts {
  // Document-level counts: a document contributes at most 1 everywhere.
  std::map<std::string, long> culture_docs;
  std::map<std::string, long> culture_docs_demonym;
  std::map<std::string, long> culture_docs_country;
  std::map<std::pair<std::string, std::string>, long> culture_topic_docs;
  long docs_scanned = 0;
  long long bytes_scanned = 0;
  long warnings = 0;
  std::vector<std::string> failed_shards;

  void add_document(const DocMatches& m, size_t doc_bytes);
  void merge(const CooccurrenceCounts& other);  // commutative and associative
};

enum class CorpusFormat { lines, length_prefixed };
CorpusFormat corpus_format_from_string(std::string_view s);

struct ScanOptions {
  CorpusFormat format = CorpusFormat::lines;
  int parallelism = 1;
  // called after each shard with (shards done, shards total)
  std::function<void(size_t, size_t)> progress;
};

// Scans one decoded shard payload.
CooccurrenceCounts scan_payload(std::string_view payload, const MultiPatternMatcher& matcher,
                                CorpusFormat format);

// Reads a shard file, transparently inflating gzip (magic 1f 8b).
std::string decode_shard(const std::filesystem::path& path);

// Scans every regular file under `corpus_dir` with a worker pool. Unreadable
// or malformed shards are recorded in warnings/failed_shards and skipped;
// totals are independent of shard order and parallelism.
CooccurrenceCounts scan_corpus(const std::filesystem::path& corpus_dir,
                               const MultiPatternMatcher& matcher, const ScanOptions& options);

// counts CSVs: per-culture and per-(culture, topic), with per-pattern-class
// subtotal columns.
std::string culture_counts_csv(const CooccurrenceCounts& counts);
std::string culture_topic_counts_csv(const CooccurrenceCounts& counts);

// Reads the (culture, topic) -> docs map back from culture_topic_counts_csv
// output (the union column).
std::map<std::pair<std::string, std::string>, long> load_culture_topic_csv(
    const std::filesystem::path& path);

}  // namespace culturekit::corpusscan
