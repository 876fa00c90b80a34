#include "culturekit/backend.hpp"

#include "culturekit/digest.hpp"
#include "culturekit/errors.hpp"
#include "culturekit/http_backend.hpp"
#include "culturekit/io.hpp"
#include "culturekit/mock_backend.hpp"

namespace culturekit::genclient {

std::string SamplingParams::canonical() const {
  return "temperature=" + io::format_double(temperature) + ";top_p=" + io::format_double(top_p) +
         ";top_k=" + std::to_string(top_k) + ";max_tokens=" + std::to_string(max_tokens) +
         ";stop=" + stop;
}

std::string SamplingParams::digest() const { return digest::sha256_hex(canonical()); }

SamplingParams SamplingParams::from_json(const nlohmann::json& j) {
  return from_json(j, SamplingParams{});
}

SamplingParams SamplingParams::from_json(const nlohmann::json& j, const SamplingParams& defaults) {
  SamplingParams p = defaults;
  p.temperature = j.value("temperature", p.temperature);
  p.top_p = j.value("top_p", p.top_p);
  p.top_k = j.value("top_k", p.top_k);
  p.max_tokens = j.value("max_tokens", p.max_tokens);
  p.stop = j.value("stop", p.stop);
  p.n = j.value("n", p.n);
  if (p.top_p <= 0.0 || p.top_p > 1.0) throw ConfigError("sampling: top_p must be in (0, 1]");
  if (p.top_k < 1) throw ConfigError("sampling: top_k must be positive");
  if (p.max_tokens < 1) throw ConfigError("sampling: max_tokens must be positive");
  if (p.n < 1) throw ConfigError("sampling: n must be positive");
  return p;
}

nlohmann::json SamplingParams::to_json() const {
  return {{"temperature", temperature}, {"top_p", top_p},   {"top_k", top_k},
          {"max_tokens", max_tokens},   {"stop", stop},     {"n", n}};
}

std::unique_ptr<Backend> make_backend(const nlohmann::json& config) {
  std::string kind = config.value("backend", std::string());
  if (kind == "mock") return std::make_unique<MockBackend>(config);
  if (kind == "http") return std::make_unique<HttpBackend>(config);
  throw ConfigError("unknown backend kind '" + kind + "' (expected \"mock\" or \"http\")");
}

}  // namespace culturekit::genclient
