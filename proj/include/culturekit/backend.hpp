#pragma once

#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

namespace culturekit::genclient {

struct SamplingParams {
  double temperature = 1.0;
  double top_p = 0.95;
  int top_k = 50;
  int max_tokens = 30;
  std::string stop = ".";
  int n = 1;

  // Identity of a single sample excludes n (n is how many you ask for,
  // not what a sample is).
  std::string canonical() const;
  std::string digest() const;

  static SamplingParams from_json(const nlohmann::json& j);
  static SamplingParams from_json(const nlohmann::json& j, const SamplingParams& defaults);
  nlohmann::json to_json() const;
};

struct BackendCapabilities {
  bool supports_sampling = true;
  bool supports_logprobs = false;
  int max_batch_n = 1;
};

// One LLM endpoint. sample() performs exactly one upstream call and returns
// params.n continuations for sample slots starting at start_index (the index
// only matters to deterministic backends; remote ones ignore it).
class Backend {
 public:
  virtual ~Backend() = default;
  virtual const std::string& model_id() const = 0;
  virtual BackendCapabilities capabilities() const = 0;
  virtual std::vector<std::string> sample(const std::string& prompt,
                                          const SamplingParams& params, int start_index) = 0;
  // Sum of token log-probabilities of the full sentence.
  virtual double score(const std::string& sentence) = 0;
};

// Dispatches on config["backend"]: "mock" or "http".
std::unique_ptr<Backend> make_backend(const nlohmann::json& config);

}  // namespace culturekit::genclient
