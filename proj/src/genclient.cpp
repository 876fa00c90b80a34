#include "culturekit/genclient.hpp"

#include <chrono>
#include <fstream>
#include <thread>

#include "culturekit/digest.hpp"
#include "culturekit/errors.hpp"
#include "culturekit/io.hpp"
#include "culturekit/text.hpp"

namespace culturekit::genclient {

Truncation truncate_to_first_sentence(std::string_view raw) {
  std::string s = text::trim(raw);
  size_t pos = s.find('.');
  if (pos == std::string::npos) return {s, false};
  return {s.substr(0, pos + 1), true};
}

nlohmann::json GenerationRecord::to_json() const {
  nlohmann::json j;
  j["culture"] = culture ? nlohmann::json(*culture) : nlohmann::json(nullptr);
  j["topic"] = topic;
  j["variant"] = prompting::to_string(variant);
  j["sample_index"] = sample_index;
  j["text"] = text;
  j["raw_text"] = raw_text;
  j["complete"] = complete;
  j["refusal"] = refusal;
  j["model_id"] = model_id;
  j["params_digest"] = params_digest;
  j["created_at"] = created_at;
  return j;
}

GenerationRecord GenerationRecord::from_json(const nlohmann::json& j) {
  GenerationRecord r;
  if (!j.at("culture").is_null()) r.culture = j.at("culture").get<std::string>();
  r.topic = j.at("topic").get<std::string>();
  r.variant = prompting::variant_from_string(j.at("variant").get<std::string>());
  r.sample_index = j.at("sample_index").get<int>();
  r.text = j.at("text").get<std::string>();
  r.raw_text = j.at("raw_text").get<std::string>();
  r.complete = j.at("complete").get<bool>();
  r.refusal = j.at("refusal").get<bool>();
  r.model_id = j.at("model_id").get<std::string>();
  r.params_digest = j.at("params_digest").get<std::string>();
  r.created_at = j.at("created_at").get<std::string>();
  return r;
}

RequestLog::RequestLog(std::filesystem::path path) : path_(std::move(path)) {
  auto dir = path_.parent_path();
  if (!dir.empty()) std::filesystem::create_directories(dir);
}

void RequestLog::append(const nlohmann::json& entry) {
  std::lock_guard lock(mu_);
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  if (!out) throw DataError("cannot append to request log: " + path_.string());
  out << entry.dump() << '\n';
}

std::vector<nlohmann::json> RequestLog::read(const std::filesystem::path& path) {
  return io::read_jsonl(path);
}

GenClient::GenClient(Backend& backend, GenerationCache& cache, RequestLog* log,
                     GenClientOptions options)
    : backend_(backend), cache_(cache), log_(log), options_(options) {}

void GenClient::pace() {
  if (options_.min_request_interval_ms <= 0) return;
  std::lock_guard lock(pace_mu_);
  auto interval = std::chrono::milliseconds(options_.min_request_interval_ms);
  auto now = std::chrono::steady_clock::now();
  if (last_request_.time_since_epoch().count() != 0 && now - last_request_ < interval)
    std::this_thread::sleep_for(interval - (now - last_request_));
  last_request_ = std::chrono::steady_clock::now();
}

template <typename Fn>
auto GenClient::with_retry(const std::string& what, Fn&& fn) {
  std::string attempt_log;
  int backoff_ms = options_.retry_backoff_ms;
  for (int attempt = 1;; ++attempt) {
    try {
      pace();
      upstream_calls_.fetch_add(1);
      return fn();
    } catch (const TransportError& e) {
      attempt_log += "attempt " + std::to_string(attempt) + ": " + e.what() + "; ";
      if (attempt >= options_.max_retries)
        throw TransportError(what + " failed after " + std::to_string(attempt) +
                             " attempts [" + attempt_log + "]");
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
      backoff_ms *= 2;
    }
  }
}

std::vector<SampleResult> GenClient::sample(const std::string& prompt, SamplingParams params) {
  BackendCapabilities caps = backend_.capabilities();
  if (!caps.supports_sampling)
    throw CapabilityError("backend '" + backend_.model_id() + "' does not support sampling");
  if (params.n < 1) throw UsageError("sample: n must be positive");

  int total = params.n;
  std::vector<std::optional<SampleResult>> slots(static_cast<size_t>(total));
  for (int i = 0; i < total; ++i) {
    auto hit = cache_.get(GenerationCache::sample_key(backend_.model_id(), prompt, params, i));
    if (hit) {
      slots[static_cast<size_t>(i)] =
          SampleResult{hit->at("text").get<std::string>(),
                       hit->at("created_at").get<std::string>(), true};
      cache_hits_.fetch_add(1);
    }
  }

  // Contiguous runs of missing slots become upstream batches of at most
  // max_batch_n samples each.
  int i = 0;
  while (i < total) {
    if (slots[static_cast<size_t>(i)]) {
      ++i;
      continue;
    }
    int run_end = i;
    while (run_end < total && !slots[static_cast<size_t>(run_end)]) ++run_end;
    for (int start = i; start < run_end; start += caps.max_batch_n) {
      int batch_n = std::min(caps.max_batch_n, run_end - start);
      SamplingParams batch = params;
      batch.n = batch_n;
      auto texts = with_retry("sampling '" + prompt.substr(0, 60) + "'", [&] {
        return backend_.sample(prompt, batch, start);
      });
      if (static_cast<int>(texts.size()) != batch_n)
        throw TransportError("backend returned " + std::to_string(texts.size()) +
                             " continuations, expected " + std::to_string(batch_n));
      if (log_) {
        log_->append({{"type", "sample"},
                      {"model", backend_.model_id()},
                      {"prompt_sha256", digest::sha256_hex(prompt)},
                      {"temperature", batch.temperature},
                      {"top_p", batch.top_p},
                      {"top_k", batch.top_k},
                      {"max_tokens", batch.max_tokens},
                      {"stop", batch.stop},
                      {"n", batch.n},
                      {"start_index", start}});
      }
      std::string created = io::now_utc_iso8601();
      for (int k = 0; k < batch_n; ++k) {
        int slot = start + k;
        nlohmann::json entry = {{"text", texts[static_cast<size_t>(k)]},
                                {"created_at", created}};
        cache_.put(GenerationCache::sample_key(backend_.model_id(), prompt, params, slot),
                   entry);
        slots[static_cast<size_t>(slot)] =
            SampleResult{texts[static_cast<size_t>(k)], created, false};
      }
    }
    i = run_end;
  }

  std::vector<SampleResult> out;
  out.reserve(static_cast<size_t>(total));
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

double GenClient::score_sentence(const std::string& sentence) {
  if (text::trim(sentence).empty()) throw UsageError("score_sentence: empty sentence");
  BackendCapabilities caps = backend_.capabilities();
  if (!caps.supports_logprobs)
    throw CapabilityError(
        "backend '" + backend_.model_id() +
        "' does not expose token log-probabilities; skip symbol assignment for this model "
        "and run downstream analytics on candidate symbols (config key "
        "models[].supports_logprobs)");

  std::string key = GenerationCache::score_key(backend_.model_id(), sentence);
  if (auto hit = cache_.get(key)) {
    cache_hits_.fetch_add(1);
    return hit->at("logprob").get<double>();
  }
  double value = with_retry("scoring", [&] { return backend_.score(sentence); });
  if (log_) {
    log_->append({{"type", "score"},
                  {"model", backend_.model_id()},
                  {"sentence_sha256", digest::sha256_hex(sentence)},
                  {"logprob", value}});
  }
  cache_.put(key, {{"logprob", value}});
  return value;
}

}  // namespace culturekit::genclient
