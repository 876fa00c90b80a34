#include "culturekit/mock_backend.hpp"

#include "culturekit/digest.hpp"
#include "culturekit/errors.hpp"
#include "culturekit/text.hpp"

namespace culturekit::genclient {

MockBackend::MockBackend(const nlohmann::json& config) {
  model_id_ = config.value("model_id", std::string("mock"));
  caps_.supports_sampling = config.value("supports_sampling", true);
  caps_.supports_logprobs = config.value("supports_logprobs", true);
  caps_.max_batch_n = config.value("max_batch_n", 10);
  if (caps_.max_batch_n < 1) throw ConfigError("mock backend: max_batch_n must be positive");

  if (config.contains("continuations")) {
    for (const auto& [prompt, list] : config["continuations"].items()) {
      std::vector<std::string> conts;
      for (const auto& c : list) conts.push_back(c.get<std::string>());
      continuations_[prompt] = std::move(conts);
    }
  }
  if (config.contains("token_logprobs")) {
    for (const auto& [tok, lp] : config["token_logprobs"].items())
      token_logprobs_[text::lower_ascii(tok)] = lp.get<double>();
  }
  default_token_logprob_ = config.value("default_token_logprob", -10.0);
  missing_prompt_ = config.value("missing_prompt", std::string("error"));
  fail_remaining_ = config.value("fail_first_attempts", 0);
}

void MockBackend::maybe_fail() {
  int remaining = fail_remaining_.load();
  while (remaining > 0) {
    if (fail_remaining_.compare_exchange_weak(remaining, remaining - 1))
      throw TransportError("mock backend: injected transport failure");
  }
}

std::vector<std::string> MockBackend::sample(const std::string& prompt,
                                             const SamplingParams& params, int start_index) {
  sample_calls_.fetch_add(1);
  maybe_fail();
  std::vector<std::string> out;
  out.reserve(static_cast<size_t>(params.n));
  auto it = continuations_.find(prompt);
  if (it == continuations_.end()) {
    if (missing_prompt_ == "error")
      throw DataError("mock backend: no continuations configured for prompt: " + prompt);
    for (int i = 0; i < params.n; ++i) {
      if (missing_prompt_ == "empty") {
        out.emplace_back();
      } else {  // synthesize
        std::string tag = digest::sha256_hex(prompt).substr(0, 8);
        out.push_back(" sample " + tag + " " + std::to_string(start_index + i) + ".");
      }
    }
    return out;
  }
  const auto& list = it->second;
  if (list.empty()) throw DataError("mock backend: empty continuation list for prompt");
  for (int i = 0; i < params.n; ++i)
    out.push_back(list[static_cast<size_t>(start_index + i) % list.size()]);
  return out;
}

double MockBackend::score(const std::string& sentence) {
  score_calls_.fetch_add(1);
  maybe_fail();
  double total = 0.0;
  for (const auto& tok : text::word_tokens(sentence)) {
    auto it = token_logprobs_.find(tok);
    total += it == token_logprobs_.end() ? default_token_logprob_ : it->second;
  }
  return total;
}

}  // namespace culturekit::genclient
