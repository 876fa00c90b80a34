#include "culturekit/extraction.hpp"

#include <algorithm>
#include <map>

#include "culturekit/errors.hpp"
#include "culturekit/parallel.hpp"
#include "culturekit/text.hpp"

namespace culturekit::extraction {

nlohmann::json CandidateSymbol::to_json() const {
  nlohmann::json prov = nlohmann::json::array();
  for (const auto& p : provenance) {
    prov.push_back({{"culture", p.culture ? nlohmann::json(*p.culture) : nlohmann::json(nullptr)},
                    {"variant", prompting::to_string(p.variant)},
                    {"sample_index", p.sample_index}});
  }
  return {{"norm", norm},
          {"topic", topic},
          {"surfaces", std::vector<std::string>(surfaces.begin(), surfaces.end())},
          {"provenance", prov}};
}

CandidateSymbol CandidateSymbol::from_json(const nlohmann::json& j) {
  CandidateSymbol c;
  c.norm = j.at("norm").get<std::string>();
  c.topic = j.at("topic").get<std::string>();
  for (const auto& s : j.at("surfaces")) c.surfaces.insert(s.get<std::string>());
  for (const auto& p : j.at("provenance")) {
    ProvenanceEntry e;
    if (!p.at("culture").is_null()) e.culture = p.at("culture").get<std::string>();
    e.variant = prompting::variant_from_string(p.at("variant").get<std::string>());
    e.sample_index = p.at("sample_index").get<int>();
    c.provenance.insert(e);
  }
  return c;
}

std::vector<std::string> parse_extractor_response(std::string_view response) {
  std::vector<std::string> out;
  for (const auto& segment : text::split(response, ';')) {
    std::string phrase = text::trim(segment);
    if (phrase.empty()) continue;
    if (text::lower_ascii(phrase) == "none") continue;
    out.push_back(std::move(phrase));
  }
  return out;
}

namespace {

bool is_strip_punct(char c) {
  switch (c) {
    case '.': case ',': case ';': case ':': case '!': case '?':
    case '"': case '\'': case '`': case '(': case ')': case '[': case ']':
      return true;
    default:
      return false;
  }
}

std::string strip_surrounding_punct(std::string s) {
  size_t b = 0, e = s.size();
  while (b < e && (is_strip_punct(s[b]) || std::isspace(static_cast<unsigned char>(s[b])))) ++b;
  while (e > b && (is_strip_punct(s[e - 1]) || std::isspace(static_cast<unsigned char>(s[e - 1]))))
    --e;
  return s.substr(b, e - b);
}

std::string strip_trailing_parentheticals(std::string s) {
  for (;;) {
    size_t e = s.size();
    while (e > 0 && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    if (e == 0 || s[e - 1] != ')') return s.substr(0, e);
    size_t open = s.rfind('(', e - 1);
    if (open == std::string::npos) return s.substr(0, e);
    s = s.substr(0, open);
  }
}

}  // namespace

std::string normalize_phrase(std::string_view phrase) {
  std::string s = strip_trailing_parentheticals(std::string(phrase));
  s = strip_surrounding_punct(std::move(s));
  s = text::lower_ascii(s);
  s = text::collapse_ws(s);
  s = strip_surrounding_punct(std::move(s));
  return s;
}

PhraseFilter::PhraseFilter(const roster::Roster& roster, const roster::Topic& topic) {
  static const char* kStopTokens[] = {"traditional", "typical", "classic", "local"};
  for (const char* t : kStopTokens) removable_.push_back({t});
  for (const auto& c : roster.cultures()) {
    removable_.push_back(text::word_tokens(c.demonym));
    removable_.push_back(text::word_tokens(c.country_name));
  }
  for (const auto& k : topic.keywords) removable_.push_back(text::word_tokens(k));
  // Longest-first so phrase entries win over their own prefixes.
  std::sort(removable_.begin(), removable_.end(),
            [](const auto& a, const auto& b) { return a.size() > b.size(); });
  removable_.erase(std::unique(removable_.begin(), removable_.end()), removable_.end());
}

bool PhraseFilter::has_content_token(const std::string& norm) const {
  std::vector<std::string> tokens = text::word_tokens(norm);
  size_t i = 0;
  while (i < tokens.size()) {
    bool removed = false;
    for (const auto& seq : removable_) {
      if (seq.empty() || seq.size() > tokens.size() - i) continue;
      if (std::equal(seq.begin(), seq.end(), tokens.begin() + static_cast<long>(i))) {
        i += seq.size();
        removed = true;
        break;
      }
    }
    if (!removed) return true;  // a token survived every removal list
  }
  return false;
}

std::optional<std::string> PhraseFilter::normalize_and_filter(std::string_view phrase) const {
  std::string norm = normalize_phrase(phrase);
  if (norm.empty()) return std::nullopt;
  if (!has_content_token(norm)) return std::nullopt;
  return norm;
}

ExtractionOutcome extract_candidates(std::span<const genclient::GenerationRecord> records,
                                     genclient::GenClient& extractor,
                                     const roster::Roster& roster, const roster::Topic& topic,
                                     const genclient::SamplingParams& extractor_params,
                                     int parallelism) {
  for (const auto& r : records)
    if (r.topic != topic.id)
      throw UsageError("extract_candidates: record topic '" + r.topic +
                       "' does not match '" + topic.id + "'");

  struct PerRecord {
    bool skipped = false;
    bool failed = false;
    std::vector<std::string> phrases;
  };
  std::vector<PerRecord> results(records.size());

  parallel::for_each_index(records.size(), parallelism, [&](size_t i) {
    const auto& record = records[i];
    if (record.refusal || text::trim(record.text).empty()) {
      results[i].skipped = true;
      return;
    }
    std::string sentence =
        prompting::generation_tail(topic, record.variant) + " " + text::trim(record.text);
    std::string prompt = prompting::render_extraction_prompt(topic, sentence);
    genclient::SamplingParams params = extractor_params;
    params.n = 1;
    try {
      auto samples = extractor.sample(prompt, params);
      results[i].phrases = parse_extractor_response(samples[0].raw_text);
    } catch (const TransportError&) {
      results[i].failed = true;
    }
  });

  PhraseFilter filter(roster, topic);
  std::map<std::string, CandidateSymbol> by_norm;
  ExtractionOutcome out;
  for (size_t i = 0; i < records.size(); ++i) {
    const auto& record = records[i];
    const auto& res = results[i];
    if (res.skipped) {
      ++out.refusals_skipped;
      continue;
    }
    if (res.failed) {
      out.unextracted.push_back({record.culture, record.variant, record.sample_index});
      continue;
    }
    for (const auto& phrase : res.phrases) {
      auto norm = filter.normalize_and_filter(phrase);
      if (!norm) continue;
      CandidateSymbol& cand = by_norm[*norm];
      cand.norm = *norm;
      cand.topic = topic.id;
      cand.surfaces.insert(phrase);
      cand.provenance.insert({record.culture, record.variant, record.sample_index});
    }
  }
  for (auto& [norm, cand] : by_norm) out.candidates.push_back(std::move(cand));
  return out;
}

std::vector<CandidateSymbol> merge_candidates(std::span<const CandidateSymbol> a,
                                              std::span<const CandidateSymbol> b) {
  std::map<std::string, CandidateSymbol> by_norm;
  for (auto part : {a, b}) {
    for (const auto& cand : part) {
      CandidateSymbol& dst = by_norm[cand.norm];
      dst.norm = cand.norm;
      dst.topic = cand.topic;
      dst.surfaces.insert(cand.surfaces.begin(), cand.surfaces.end());
      dst.provenance.insert(cand.provenance.begin(), cand.provenance.end());
    }
  }
  std::vector<CandidateSymbol> out;
  for (auto& [norm, cand] : by_norm) out.push_back(std::move(cand));
  return out;
}

}  // namespace culturekit::extraction
