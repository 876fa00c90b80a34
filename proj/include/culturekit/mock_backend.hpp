#pragma once

#include <atomic>
#include <map>
#include <string>
#include <vector>

#include "culturekit/backend.hpp"

namespace culturekit::genclient {

// Deterministic in-process backend driven by a fixture:
//   {
//     "model_id": "mock-a",
//     "supports_sampling": true,
//     "supports_logprobs": true,
//     "max_batch_n": 10,
//     "continuations": {"<prompt>": ["...", "..."]},   // cycled when short
//     "token_logprobs": {"couscous": -1.5},
//     "default_token_logprob": -10.0,
//     "missing_prompt": "error" | "empty" | "synthesize",
//     "fail_first_attempts": 0       // transport failures before succeeding
//   }
// score() tokenizes the sentence into lowercased alphanumeric runs and sums
// the table entries (default for unlisted tokens).
class MockBackend : public Backend {
 public:
  explicit MockBackend(const nlohmann::json& config);

  const std::string& model_id() const override { return model_id_; }
  BackendCapabilities capabilities() const override { return caps_; }
  std::vector<std::string> sample(const std::string& prompt, const SamplingParams& params,
                                  int start_index) override;
  double score(const std::string& sentence) override;

  uint64_t sample_calls() const { return sample_calls_.load(); }
  uint64_t score_calls() const { return score_calls_.load(); }

 private:
  void maybe_fail();

  std::string model_id_;
  BackendCapabilities caps_;
  std::map<std::string, std::vector<std::string>> continuations_;
  std::map<std::string, double> token_logprobs_;
  double default_token_logprob_ = -10.0;
  std::string missing_prompt_ = "error";
  std::atomic<int> fail_remaining_{0};
  std::atomic<uint64_t> sample_calls_{0};
  std::atomic<uint64_t> score_calls_{0};
};

}  // namespace culturekit::genclient
