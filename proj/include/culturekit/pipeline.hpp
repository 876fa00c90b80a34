#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "culturekit/assignment.hpp"
#include "culturekit/backend.hpp"
#include "culturekit/corpusscan.hpp"
#include "culturekit/genclient.hpp"
#include "culturekit/roster.hpp"
#include "json.hpp"

namespace culturekit::pipeline {

struct ModelConfig {
  std::string id;
  nlohmann::json backend;  // passed to genclient::make_backend
  bool calibrate = false;
  int parallelism = 2;
  genclient::GenClientOptions client_options;

  // What the config declares, without constructing the backend.
  bool declared_logprobs() const;
};

struct DemographicConfig {
  std::vector<std::string> cultures;
  std::vector<prompting::Variant> variants;  // default: age17, age70, male, female
};

// Loaded from a JSON file; relative paths resolve against the config's
// directory. Secrets never live here; backends read keys from the
// environment variable named in their block.
struct Config {
  std::filesystem::path roster_path;
  std::vector<std::string> cultures;  // resolved subset; defaults to the full roster
  std::vector<std::string> topics;
  int n_samples = 100;
  genclient::SamplingParams sampling;            // generation defaults per the data card
  genclient::SamplingParams extractor_sampling;  // greedy, longer budget
  int extractor_parallelism = 4;
  std::vector<ModelConfig> models;
  nlohmann::json extractor_backend;
  DemographicConfig demographic;
  assignment::ThresholdMode threshold_mode = assignment::ThresholdMode::softmax_mean;
  bool dump_distributions = false;
  std::filesystem::path cooccurrence_csv;  // optional; enables the correlation table
  std::filesystem::path cache_dir;         // optional; defaults to <workspace>/cache

  std::filesystem::path corpus_dir;  // scan-corpus inputs
  corpusscan::CorpusFormat corpus_format = corpusscan::CorpusFormat::lines;
  std::filesystem::path pattern_file;  // optional; defaults to roster-derived patterns
  int scan_parallelism = 2;

  static Config load(const std::filesystem::path& path);

  const ModelConfig& model(std::string_view id) const;
};

// Directory layout of one run. All artifacts are written atomically and
// tracked in manifest.json with content digests.
class Workspace {
 public:
  explicit Workspace(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path records_path(const std::string& model, const std::string& group,
                                     const std::string& topic) const;
  std::filesystem::path shortfall_path(const std::string& model,
                                       const std::string& group) const;
  std::filesystem::path candidates_path(const std::string& model,
                                        const std::string& topic) const;
  std::filesystem::path unextracted_path(const std::string& model) const;
  std::filesystem::path symbols_path(const std::string& model, const std::string& topic) const;
  std::filesystem::path distributions_path(const std::string& model,
                                           const std::string& topic) const;
  std::filesystem::path marks_dir() const { return root_ / "marks"; }
  std::filesystem::path metrics_dir() const { return root_ / "metrics"; }
  std::filesystem::path counts_dir() const { return root_ / "counts"; }
  std::filesystem::path report_dir() const { return root_ / "report"; }
  std::filesystem::path request_log_path() const { return root_ / "logs" / "requests.jsonl"; }
  std::filesystem::path manifest_path() const { return root_ / "manifest.json"; }

  nlohmann::json load_manifest() const;
  void save_manifest(const nlohmann::json& manifest) const;

 private:
  std::filesystem::path root_;
};

// One stage at a time per workspace.
class WorkspaceLock {
 public:
  explicit WorkspaceLock(const Workspace& ws);
  ~WorkspaceLock();
  WorkspaceLock(const WorkspaceLock&) = delete;
  WorkspaceLock& operator=(const WorkspaceLock&) = delete;

 private:
  std::filesystem::path path_;
};

inline constexpr const char* kStageNames[] = {
    "generate",  "generate-agnostic", "generate-demographic", "extract", "assign",
    "mark",      "metrics",           "scan-corpus",          "report"};

// Runs one stage against the workspace. Returns 0 on success and 3 when the
// stage completed partially (shortfall markers written; rerun to resume).
// Dependency, configuration, and backend failures throw.
int run_stage(const std::string& stage, const Config& config,
              const std::filesystem::path& workspace_root);

}  // namespace culturekit::pipeline
