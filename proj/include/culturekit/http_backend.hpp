#pragma once

#include <memory>
#include <string>

#include "culturekit/backend.hpp"

namespace culturekit::genclient {

// Client for hosted-LLM HTTP APIs: a chat endpoint for sampling and a
// completions endpoint with echoed logprobs for scoring. The API key is read
// from the environment variable named in the config, never from the config
// itself.
//
//   {
//     "backend": "http",
//     "model_id": "gpt-4",            // identity used for caching/records
//     "model_name": "gpt-4",          // name sent on the wire
//     "base_url": "https://api.openai.com",
//     "api_key_env": "OPENAI_API_KEY",   // "" disables the auth header
//     "chat_path": "/v1/chat/completions",
//     "completions_path": "/v1/completions",
//     "supports_logprobs": false,
//     "max_batch_n": 10,
//     "timeout_s": 120
//   }
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(const nlohmann::json& config);
  ~HttpBackend() override;

  const std::string& model_id() const override { return model_id_; }
  BackendCapabilities capabilities() const override { return caps_; }
  std::vector<std::string> sample(const std::string& prompt, const SamplingParams& params,
                                  int start_index) override;
  double score(const std::string& sentence) override;

 private:
  nlohmann::json post_json(const std::string& path, const nlohmann::json& body);

  std::string model_id_;
  std::string model_name_;
  std::string base_url_;
  std::string api_key_;
  std::string chat_path_;
  std::string completions_path_;
  int timeout_s_ = 120;
  BackendCapabilities caps_;
};

}  // namespace culturekit::genclient
