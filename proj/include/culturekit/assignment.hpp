#pragma once

#include <span>
#include <string>
#include <vector>

#include "culturekit/extraction.hpp"
#include "culturekit/genclient.hpp"
#include "culturekit/roster.hpp"

namespace culturekit::assignment {

// Numerically stable softmax (max-subtracted). Uniform input yields exactly
// 1/n per entry.
std::vector<double> softmax(std::span<const double> raw);

struct AssociationDistribution {
  std::string symbol;  // candidate norm
  std::string topic;
  std::vector<double> raw_scores;  // sentence logprobs, calibrated if requested
  std::vector<double> probs;       // softmax over all roster cultures
  bool calibrated = false;

  nlohmann::json to_json() const;
};

// Scores "<scoring sentence for (topic, symbol, culture)>" for every culture
// and softmaxes. With calibrate set, each culture's calibration-sentence
// logprob is subtracted first. Any single-culture scoring failure aborts the
// distribution; a partial softmax is meaningless.
AssociationDistribution compute_distribution(const std::string& symbol_norm,
                                             const roster::Topic& topic,
                                             const roster::Roster& roster,
                                             genclient::GenClient& scorer, bool calibrate);

struct CultureSymbol {
  std::string symbol;
  std::string culture;
  std::string topic;
  std::string model_id;
  double association = 0.0;  // the softmax probability
  int provenance_count = 0;  // conditioned generations of that culture containing it

  nlohmann::json to_json() const;
  static CultureSymbol from_json(const nlohmann::json& j);
};

enum class ThresholdMode {
  softmax_mean,  // probs[c] > 1/n (mean of a normalized distribution)
  raw_mean,      // raw_scores[c] > mean(raw_scores)
};

ThresholdMode threshold_mode_from_string(std::string_view s);
std::string to_string(ThresholdMode mode);

// Emits one CultureSymbol per culture whose association is above the mean AND
// that appears in the candidate's culture-conditioned provenance. Symbols may
// map to multiple cultures.
std::vector<CultureSymbol> assign(const AssociationDistribution& dist,
                                  const extraction::CandidateSymbol& candidate,
                                  const roster::Roster& roster, const std::string& model_id,
                                  ThresholdMode mode = ThresholdMode::softmax_mean);

}  // namespace culturekit::assignment
