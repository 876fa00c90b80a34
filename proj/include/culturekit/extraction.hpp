#pragma once

#include <compare>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "culturekit/genclient.hpp"
#include "culturekit/roster.hpp"

namespace culturekit::extraction {

struct ProvenanceEntry {
  std::optional<std::string> culture;  // empty = agnostic generation
  prompting::Variant variant = prompting::Variant::conditioned;
  int sample_index = 0;

  auto operator<=>(const ProvenanceEntry&) const = default;
};

struct CandidateSymbol {
  std::string norm;
  std::string topic;
  std::set<std::string> surfaces;  // raw extractor phrasings that normalized to norm
  std::set<ProvenanceEntry> provenance;

  nlohmann::json to_json() const;
  static CandidateSymbol from_json(const nlohmann::json& j);
};

// Splits on ";", trims, drops empty segments and segments equal
// (case-insensitively) to "None".
std::vector<std::string> parse_extractor_response(std::string_view response);

// Case-fold, collapse whitespace, strip surrounding punctuation and trailing
// parenthesized explanations. Pure and idempotent.
std::string normalize_phrase(std::string_view phrase);

// Token phrases removed before deciding whether anything substantive is left:
// a fixed stop list, every demonym and country name, and the topic's own
// keywords. Filter tables are precomputed once per roster.
class PhraseFilter {
 public:
  PhraseFilter(const roster::Roster& roster, const roster::Topic& topic);

  // norm of the phrase, or nullopt when nothing but topic/culture filler
  // remains.
  std::optional<std::string> normalize_and_filter(std::string_view phrase) const;

 private:
  bool has_content_token(const std::string& norm) const;
  std::vector<std::vector<std::string>> removable_;  // token sequences, longest first
};

struct RecordRef {
  std::optional<std::string> culture;
  prompting::Variant variant;
  int sample_index;
};

struct ExtractionOutcome {
  std::vector<CandidateSymbol> candidates;  // sorted by norm
  std::vector<RecordRef> unextracted;       // extractor failed for these records
  int refusals_skipped = 0;
};

// Runs the extractor over every non-refusal record of one topic, parses and
// filters the responses, and merges candidates by norm (provenance unions).
// Extractor failures mark the record unextracted instead of aborting.
ExtractionOutcome extract_candidates(std::span<const genclient::GenerationRecord> records,
                                     genclient::GenClient& extractor,
                                     const roster::Roster& roster, const roster::Topic& topic,
                                     const genclient::SamplingParams& extractor_params,
                                     int parallelism);

// Deterministic merge of candidate sets (union of surfaces and provenance).
std::vector<CandidateSymbol> merge_candidates(std::span<const CandidateSymbol> a,
                                              std::span<const CandidateSymbol> b);

}  // namespace culturekit::extraction
