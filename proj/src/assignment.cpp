#include "culturekit/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "culturekit/errors.hpp"
#include "culturekit/prompting.hpp"

namespace culturekit::assignment {

std::vector<double> softmax(std::span<const double> raw) {
  if (raw.empty()) throw UsageError("softmax: empty input");
  double mx = *std::max_element(raw.begin(), raw.end());
  std::vector<double> out(raw.size());
  double total = 0.0;
  for (size_t i = 0; i < raw.size(); ++i) {
    out[i] = std::exp(raw[i] - mx);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

nlohmann::json AssociationDistribution::to_json() const {
  return {{"symbol", symbol},
          {"topic", topic},
          {"calibrated", calibrated},
          {"probs", probs}};
}

AssociationDistribution compute_distribution(const std::string& symbol_norm,
                                             const roster::Topic& topic,
                                             const roster::Roster& roster,
                                             genclient::GenClient& scorer, bool calibrate) {
  AssociationDistribution dist;
  dist.symbol = symbol_norm;
  dist.topic = topic.id;
  dist.calibrated = calibrate;
  dist.raw_scores.reserve(roster.cultures().size());
  for (const auto& culture : roster.cultures()) {
    double raw =
        scorer.score_sentence(prompting::render_scoring_sentence(topic, symbol_norm, culture));
    if (calibrate)
      raw -= scorer.score_sentence(prompting::render_calibration_sentence(topic, culture));
    dist.raw_scores.push_back(raw);
  }
  dist.probs = softmax(dist.raw_scores);
  return dist;
}

nlohmann::json CultureSymbol::to_json() const {
  return {{"symbol", symbol},       {"culture", culture},
          {"topic", topic},         {"model_id", model_id},
          {"association", association}, {"provenance_count", provenance_count}};
}

CultureSymbol CultureSymbol::from_json(const nlohmann::json& j) {
  CultureSymbol s;
  s.symbol = j.at("symbol").get<std::string>();
  s.culture = j.at("culture").get<std::string>();
  s.topic = j.at("topic").get<std::string>();
  s.model_id = j.at("model_id").get<std::string>();
  s.association = j.at("association").get<double>();
  s.provenance_count = j.at("provenance_count").get<int>();
  return s;
}

ThresholdMode threshold_mode_from_string(std::string_view s) {
  if (s == "softmax_mean") return ThresholdMode::softmax_mean;
  if (s == "raw_mean") return ThresholdMode::raw_mean;
  throw ConfigError("unknown assignment threshold mode '" + std::string(s) + "'");
}

std::string to_string(ThresholdMode mode) {
  return mode == ThresholdMode::softmax_mean ? "softmax_mean" : "raw_mean";
}

std::vector<CultureSymbol> assign(const AssociationDistribution& dist,
                                  const extraction::CandidateSymbol& candidate,
                                  const roster::Roster& roster, const std::string& model_id,
                                  ThresholdMode mode) {
  if (dist.symbol != candidate.norm)
    throw UsageError("assign: distribution is for '" + dist.symbol + "', candidate is '" +
                     candidate.norm + "'");
  const auto& cultures = roster.cultures();
  if (dist.probs.size() != cultures.size())
    throw UsageError("assign: distribution size does not match roster");

  // Conditioned provenance only; agnostic and demographic generations do not
  // establish that a symbol appeared "in the generations for that culture".
  std::map<std::string, int> conditioned_count;
  for (const auto& p : candidate.provenance)
    if (p.culture && p.variant == prompting::Variant::conditioned)
      ++conditioned_count[*p.culture];

  double threshold;
  const std::vector<double>* values;
  if (mode == ThresholdMode::softmax_mean) {
    // The distribution is normalized, so its mean is exactly 1/n.
    threshold = 1.0 / static_cast<double>(dist.probs.size());
    values = &dist.probs;
  } else {
    double sum = 0.0;
    for (double v : dist.raw_scores) sum += v;
    threshold = sum / static_cast<double>(dist.raw_scores.size());
    values = &dist.raw_scores;
  }

  std::vector<CultureSymbol> out;
  for (size_t i = 0; i < cultures.size(); ++i) {
    if ((*values)[i] <= threshold) continue;
    auto it = conditioned_count.find(cultures[i].id);
    if (it == conditioned_count.end()) continue;
    CultureSymbol s;
    s.symbol = candidate.norm;
    s.culture = cultures[i].id;
    s.topic = dist.topic;
    s.model_id = model_id;
    s.association = dist.probs[i];
    s.provenance_count = it->second;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace culturekit::assignment
