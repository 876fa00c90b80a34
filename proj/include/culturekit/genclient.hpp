#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "culturekit/backend.hpp"
#include "culturekit/cache.hpp"
#include "culturekit/prompting.hpp"

namespace culturekit::genclient {

struct Truncation {
  std::string text;
  bool complete = true;  // false when no terminating "." was found
};

// Prefix up to and including the first "."; abbreviations are not
// special-cased. Leading/trailing whitespace is dropped first, which makes
// the operation idempotent.
Truncation truncate_to_first_sentence(std::string_view raw);

struct GenerationRecord {
  std::optional<std::string> culture;  // culture id; empty = agnostic
  std::string topic;
  prompting::Variant variant = prompting::Variant::conditioned;
  int sample_index = 0;
  std::string text;      // truncated continuation
  std::string raw_text;  // as returned by the backend
  bool complete = true;
  bool refusal = false;  // empty payload; excluded from extraction
  std::string model_id;
  std::string params_digest;
  std::string created_at;

  nlohmann::json to_json() const;
  static GenerationRecord from_json(const nlohmann::json& j);
};

// Append-only JSONL log of upstream calls (one row per backend request).
class RequestLog {
 public:
  explicit RequestLog(std::filesystem::path path);
  void append(const nlohmann::json& entry);
  static std::vector<nlohmann::json> read(const std::filesystem::path& path);

 private:
  std::filesystem::path path_;
  std::mutex mu_;
};

struct SampleResult {
  std::string raw_text;
  std::string created_at;
  bool from_cache = false;
};

struct GenClientOptions {
  int max_retries = 3;           // upstream attempts per call
  int retry_backoff_ms = 50;     // doubled per attempt
  int min_request_interval_ms = 0;
};

// Cache-backed access to one backend: batching for sampling, retries with an
// attempt log, request logging, cache-hit accounting. The cache is consulted
// per sample slot, so a completed prompt never touches the backend again.
class GenClient {
 public:
  GenClient(Backend& backend, GenerationCache& cache, RequestLog* log = nullptr,
            GenClientOptions options = {});

  // params.n is the total wanted; upstream calls carry at most max_batch_n.
  std::vector<SampleResult> sample(const std::string& prompt, SamplingParams params);

  double score_sentence(const std::string& sentence);

  Backend& backend() { return backend_; }
  uint64_t upstream_calls() const { return upstream_calls_.load(); }
  uint64_t cache_hits() const { return cache_hits_.load(); }

 private:
  template <typename Fn>
  auto with_retry(const std::string& what, Fn&& fn);
  void pace();

  Backend& backend_;
  GenerationCache& cache_;
  RequestLog* log_;
  GenClientOptions options_;
  std::atomic<uint64_t> upstream_calls_{0};
  std::atomic<uint64_t> cache_hits_{0};
  std::mutex pace_mu_;
  std::chrono::steady_clock::time_point last_request_{};
};

}  // namespace culturekit::genclient
