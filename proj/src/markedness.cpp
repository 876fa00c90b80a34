#include "culturekit/markedness.hpp"

#include <algorithm>
#include <map>
#include <tuple>

#include "culturekit/text.hpp"

namespace culturekit::markedness {

MarkerFlags detect_markers(std::string_view generation_text, const roster::Culture* culture) {
  MarkerFlags flags;
  flags.paren = generation_text.find('(') != std::string_view::npos ||
                generation_text.find(')') != std::string_view::npos;
  flags.vocab = text::contains_word_ci(generation_text, "traditional");
  if (!flags.vocab && culture) {
    flags.vocab = text::contains_word_ci(generation_text, culture->demonym) ||
                  text::contains_word_ci(generation_text, culture->country_name);
  }
  return flags;
}

MarkednessTables aggregate_markedness(std::span<const genclient::GenerationRecord> records,
                                      const roster::Roster& roster) {
  // key: (model, topic, culture-or-empty)
  std::map<std::tuple<std::string, std::string, std::string>, MarkerReport> acc;
  for (const auto& rec : records) {
    bool agnostic = rec.variant == prompting::Variant::agnostic;
    if (!agnostic && rec.variant != prompting::Variant::conditioned) continue;
    if (rec.refusal) continue;

    const roster::Culture* culture =
        rec.culture ? &roster.culture(*rec.culture) : nullptr;
    MarkerFlags flags = detect_markers(rec.text, culture);

    auto key = std::make_tuple(rec.model_id, rec.topic, rec.culture.value_or(""));
    MarkerReport& row = acc[key];
    row.model_id = rec.model_id;
    row.topic = rec.topic;
    if (rec.culture) row.culture = rec.culture;
    ++row.total;
    if (flags.vocab) ++row.vocab_marked;
    if (flags.paren) ++row.paren_marked;
  }

  MarkednessTables tables;
  for (auto& [key, row] : acc) tables.rows.push_back(std::move(row));

  // (model, topic, region) -> sums over member cultures
  std::map<std::tuple<std::string, std::string, std::string>,
           std::tuple<int, long, long, long>>
      region_acc;
  for (const auto& row : tables.rows) {
    if (!row.culture) continue;
    const auto& region = roster.culture(*row.culture).region;
    auto& [count, total, vocab, paren] =
        region_acc[std::make_tuple(row.model_id, row.topic, region)];
    ++count;
    total += row.total;
    vocab += row.vocab_marked;
    paren += row.paren_marked;
  }
  for (const auto& [key, sums] : region_acc) {
    const auto& [count, total, vocab, paren] = sums;
    RegionMarkerRow row;
    row.model_id = std::get<0>(key);
    row.topic = std::get<1>(key);
    row.region = std::get<2>(key);
    row.cultures = count;
    row.total_mean = static_cast<double>(total) / count;
    row.vocab_marked_mean = static_cast<double>(vocab) / count;
    row.paren_marked_mean = static_cast<double>(paren) / count;
    tables.region_rows.push_back(std::move(row));
  }
  return tables;
}

}  // namespace culturekit::markedness
