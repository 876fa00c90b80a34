#include "culturekit/http_backend.hpp"

#include <cstdlib>

#include "culturekit/errors.hpp"
#include "httplib.h"

namespace culturekit::genclient {

HttpBackend::HttpBackend(const nlohmann::json& config) {
  model_id_ = config.value("model_id", std::string());
  if (model_id_.empty()) throw ConfigError("http backend: model_id is required");
  model_name_ = config.value("model_name", model_id_);
  base_url_ = config.value("base_url", std::string());
  if (base_url_.empty()) throw ConfigError("http backend: base_url is required");
  chat_path_ = config.value("chat_path", std::string("/v1/chat/completions"));
  completions_path_ = config.value("completions_path", std::string("/v1/completions"));
  timeout_s_ = config.value("timeout_s", 120);
  caps_.supports_sampling = config.value("supports_sampling", true);
  caps_.supports_logprobs = config.value("supports_logprobs", false);
  caps_.max_batch_n = config.value("max_batch_n", 10);
  if (caps_.max_batch_n < 1) throw ConfigError("http backend: max_batch_n must be positive");

  std::string key_env = config.value("api_key_env", std::string());
  if (!key_env.empty()) {
    const char* key = std::getenv(key_env.c_str());
    if (!key || !*key)
      throw ConfigError("http backend: environment variable " + key_env + " is not set");
    api_key_ = key;
  }
}

HttpBackend::~HttpBackend() = default;

nlohmann::json HttpBackend::post_json(const std::string& path, const nlohmann::json& body) {
  httplib::Client client(base_url_);
  client.set_connection_timeout(timeout_s_);
  client.set_read_timeout(timeout_s_);
  client.set_write_timeout(timeout_s_);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  auto res = client.Post(path, headers, body.dump(), "application/json");
  if (!res)
    throw TransportError("POST " + base_url_ + path + ": " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw TransportError("POST " + base_url_ + path + ": HTTP " +
                         std::to_string(res->status) + " " + res->body.substr(0, 300));
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::parse_error& e) {
    throw TransportError("POST " + base_url_ + path + ": bad JSON in response: " + e.what());
  }
}

std::vector<std::string> HttpBackend::sample(const std::string& prompt,
                                             const SamplingParams& params, int /*start_index*/) {
  nlohmann::json body = {
      {"model", model_name_},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
      {"temperature", params.temperature},
      {"top_p", params.top_p},
      {"top_k", params.top_k},
      {"max_tokens", params.max_tokens},
      {"n", params.n},
  };
  if (!params.stop.empty()) body["stop"] = nlohmann::json::array({params.stop});

  nlohmann::json res = post_json(chat_path_, body);
  if (!res.contains("choices") || !res["choices"].is_array())
    throw TransportError("chat response has no choices array");
  std::vector<std::string> out;
  for (const auto& choice : res["choices"]) {
    std::string content;
    if (choice.contains("message") && choice["message"].contains("content") &&
        choice["message"]["content"].is_string())
      content = choice["message"]["content"].get<std::string>();
    out.push_back(std::move(content));  // empty content = refusal, recorded upstream
  }
  return out;
}

double HttpBackend::score(const std::string& sentence) {
  nlohmann::json body = {
      {"model", model_name_}, {"prompt", sentence}, {"max_tokens", 0},
      {"echo", true},         {"logprobs", 0},
  };
  nlohmann::json res = post_json(completions_path_, body);
  if (!res.contains("choices") || res["choices"].empty())
    throw TransportError("completions response has no choices");
  const auto& choice = res["choices"][0];
  if (!choice.contains("logprobs") || choice["logprobs"].is_null() ||
      !choice["logprobs"].contains("token_logprobs"))
    throw CapabilityError("backend '" + model_id_ +
                          "' returned no token logprobs; scoring is unsupported on this "
                          "endpoint");
  double total = 0.0;
  for (const auto& lp : choice["logprobs"]["token_logprobs"]) {
    if (!lp.is_null()) total += lp.get<double>();  // first token has no conditional logprob
  }
  return total;
}

}  // namespace culturekit::genclient
