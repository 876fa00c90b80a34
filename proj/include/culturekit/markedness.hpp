#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "culturekit/genclient.hpp"
#include "culturekit/roster.hpp"

namespace culturekit::markedness {

struct MarkerFlags {
  bool vocab = false;  // "traditional" or the culture's name, whole-word
  bool paren = false;  // any "(" or ")"
};

// Pure function of (text, culture). Matching is case-insensitive with
// alphanumeric word boundaries; both the demonym and the country name count
// as the culture name. Without a culture only "traditional" is checked.
MarkerFlags detect_markers(std::string_view generation_text, const roster::Culture* culture);

struct MarkerReport {
  std::string model_id;
  std::string topic;
  std::optional<std::string> culture;  // empty = culture-agnostic baseline row
  long total = 0;                      // non-refusal generations in scope
  long vocab_marked = 0;
  long paren_marked = 0;
};

struct RegionMarkerRow {
  std::string model_id;
  std::string topic;
  std::string region;
  int cultures = 0;  // member cultures contributing to the means
  double total_mean = 0.0;
  double vocab_marked_mean = 0.0;
  double paren_marked_mean = 0.0;
};

struct MarkednessTables {
  std::vector<MarkerReport> rows;           // per (topic, culture) plus agnostic rows
  std::vector<RegionMarkerRow> region_rows;  // means over member cultures
};

// Counts markers of conditioned records per (topic, culture) and of agnostic
// records per topic; demographic variants and refusals are excluded. Region
// rows are means of the member-culture counts that appear.
MarkednessTables aggregate_markedness(std::span<const genclient::GenerationRecord> records,
                                      const roster::Roster& roster);

}  // namespace culturekit::markedness
