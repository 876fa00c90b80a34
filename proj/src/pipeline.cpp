#include "culturekit/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <set>

#include "culturekit/digest.hpp"
#include "culturekit/errors.hpp"
#include "culturekit/extraction.hpp"
#include "culturekit/io.hpp"
#include "culturekit/markedness.hpp"
#include "culturekit/metrics.hpp"
#include "culturekit/parallel.hpp"
#include "culturekit/text.hpp"

namespace culturekit::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Config

bool ModelConfig::declared_logprobs() const {
  std::string kind = backend.value("backend", std::string());
  bool dflt = kind == "mock";  // the mock scores by default; http endpoints do not
  return backend.value("supports_logprobs", dflt);
}

namespace {

fs::path resolve_path(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

Config Config::load(const fs::path& path) {
  json doc;
  try {
    doc = json::parse(io::read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  fs::path base = path.parent_path();

  Config cfg;
  if (!doc.contains("roster") || !doc["roster"].is_string())
    throw ConfigError(path.string() + ": missing 'roster' path");
  cfg.roster_path = resolve_path(base, doc["roster"].get<std::string>());

  for (const auto& c : doc.value("cultures", json::array()))
    cfg.cultures.push_back(c.get<std::string>());
  for (const auto& t : doc.value("topics", json::array()))
    cfg.topics.push_back(t.get<std::string>());

  cfg.n_samples = doc.value("n_samples", 100);
  if (cfg.n_samples < 1) throw ConfigError(path.string() + ": n_samples must be positive");

  cfg.sampling = genclient::SamplingParams::from_json(doc.value("sampling", json::object()));
  genclient::SamplingParams extractor_defaults;
  extractor_defaults.temperature = 0.0;
  extractor_defaults.top_p = 1.0;
  extractor_defaults.top_k = 1;
  extractor_defaults.max_tokens = 100;
  extractor_defaults.stop = "";
  cfg.extractor_sampling = genclient::SamplingParams::from_json(
      doc.value("extractor_sampling", json::object()), extractor_defaults);
  cfg.extractor_parallelism = doc.value("extractor_parallelism", 4);

  if (!doc.contains("models") || !doc["models"].is_array() || doc["models"].empty())
    throw ConfigError(path.string() + ": 'models' must be a nonempty array");
  for (const auto& m : doc["models"]) {
    ModelConfig model;
    model.id = m.value("id", std::string());
    if (model.id.empty()) throw ConfigError(path.string() + ": every model needs an 'id'");
    if (!m.contains("backend") || !m["backend"].is_object())
      throw ConfigError(path.string() + ": model '" + model.id + "' needs a 'backend' object");
    model.backend = m["backend"];
    model.backend["model_id"] = model.id;
    model.calibrate = m.value("calibrate", false);
    model.parallelism = m.value("parallelism", 2);
    model.client_options.max_retries = m.value("max_retries", 3);
    model.client_options.retry_backoff_ms = m.value("retry_backoff_ms", 50);
    model.client_options.min_request_interval_ms = m.value("min_request_interval_ms", 0);
    cfg.models.push_back(std::move(model));
  }

  if (doc.contains("extractor")) {
    if (!doc["extractor"].is_object() || !doc["extractor"].contains("backend"))
      throw ConfigError(path.string() + ": 'extractor' needs a 'backend' object");
    cfg.extractor_backend = doc["extractor"]["backend"];
    if (doc["extractor"].contains("id"))
      cfg.extractor_backend["model_id"] = doc["extractor"]["id"];
  }

  if (doc.contains("demographic")) {
    const auto& d = doc["demographic"];
    for (const auto& c : d.value("cultures", json::array()))
      cfg.demographic.cultures.push_back(c.get<std::string>());
    for (const auto& v : d.value("variants", json::array()))
      cfg.demographic.variants.push_back(
          prompting::variant_from_string(v.get<std::string>()));
  }
  if (cfg.demographic.variants.empty())
    cfg.demographic.variants = {prompting::Variant::age17, prompting::Variant::age70,
                                prompting::Variant::male, prompting::Variant::female};
  for (auto v : cfg.demographic.variants)
    if (v == prompting::Variant::conditioned || v == prompting::Variant::agnostic)
      throw ConfigError(path.string() + ": demographic variants must be age/gender variants");

  cfg.threshold_mode = assignment::threshold_mode_from_string(
      doc.value("assignment_threshold", std::string("softmax_mean")));
  cfg.dump_distributions = doc.value("dump_distributions", false);
  cfg.cooccurrence_csv = resolve_path(base, doc.value("cooccurrence_csv", std::string()));
  cfg.cache_dir = resolve_path(base, doc.value("cache_dir", std::string()));

  cfg.corpus_dir = resolve_path(base, doc.value("corpus_dir", std::string()));
  cfg.corpus_format =
      corpusscan::corpus_format_from_string(doc.value("corpus_format", std::string("lines")));
  cfg.pattern_file = resolve_path(base, doc.value("pattern_file", std::string()));
  cfg.scan_parallelism = doc.value("scan_parallelism", 2);
  return cfg;
}

const ModelConfig& Config::model(std::string_view id) const {
  for (const auto& m : models)
    if (m.id == id) return m;
  throw ConfigError("no model '" + std::string(id) + "' in config");
}

// ---------------------------------------------------------------------------
// Workspace

Workspace::Workspace(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_);
}

fs::path Workspace::records_path(const std::string& model, const std::string& group,
                                 const std::string& topic) const {
  return root_ / "records" / model / group / (topic + ".jsonl");
}

fs::path Workspace::shortfall_path(const std::string& model, const std::string& group) const {
  return root_ / "records" / model / group / "_shortfall.json";
}

fs::path Workspace::candidates_path(const std::string& model, const std::string& topic) const {
  return root_ / "candidates" / model / (topic + ".jsonl");
}

fs::path Workspace::unextracted_path(const std::string& model) const {
  return root_ / "candidates" / model / "_unextracted.json";
}

fs::path Workspace::symbols_path(const std::string& model, const std::string& topic) const {
  return root_ / "symbols" / model / (topic + ".jsonl");
}

fs::path Workspace::distributions_path(const std::string& model,
                                       const std::string& topic) const {
  return root_ / "distributions" / model / (topic + ".jsonl");
}

json Workspace::load_manifest() const {
  if (!fs::exists(manifest_path())) return {{"stages", json::object()}};
  try {
    return json::parse(io::read_file(manifest_path()));
  } catch (const json::parse_error& e) {
    throw DataError(manifest_path().string() + ": " + e.what());
  }
}

void Workspace::save_manifest(const json& manifest) const {
  io::atomic_write_file(manifest_path(), manifest.dump(2) + "\n");
}

WorkspaceLock::WorkspaceLock(const Workspace& ws) : path_(ws.root() / "lock") {
  int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0)
    throw UsageError("workspace " + ws.root().string() +
                     " is locked by another stage (remove 'lock' if stale)");
  std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] ssize_t n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

WorkspaceLock::~WorkspaceLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

// ---------------------------------------------------------------------------
// Stage bookkeeping

namespace {

std::vector<std::string> run_cultures(const Config& cfg, const roster::Roster& roster) {
  if (cfg.cultures.empty()) {
    std::vector<std::string> out;
    for (const auto& c : roster.cultures()) out.push_back(c.id);
    return out;
  }
  for (const auto& id : cfg.cultures) roster.culture(id);  // validates
  return cfg.cultures;
}

std::vector<std::string> run_topics(const Config& cfg, const roster::Roster& roster) {
  if (cfg.topics.empty()) {
    std::vector<std::string> out;
    for (const auto& t : roster.topics()) out.push_back(t.id);
    return out;
  }
  for (const auto& id : cfg.topics) roster.topic(id);
  return cfg.topics;
}

std::string rel(const Workspace& ws, const fs::path& p) {
  return fs::relative(p, ws.root()).string();
}

json digest_outputs(const Workspace& ws, const std::vector<fs::path>& files) {
  json out = json::object();
  for (const auto& f : files) out[rel(ws, f)] = digest::sha256_file(f);
  return out;
}

bool outputs_intact(const Workspace& ws, const json& outputs) {
  for (const auto& [relpath, sha] : outputs.items()) {
    fs::path p = ws.root() / relpath;
    if (!fs::exists(p) || digest::sha256_file(p) != sha.get<std::string>()) return false;
  }
  return true;
}

bool stage_up_to_date(const Workspace& ws, const json& manifest, const std::string& key,
                      const std::string& fingerprint) {
  auto stages = manifest.find("stages");
  if (stages == manifest.end()) return false;
  auto entry = stages->find(key);
  if (entry == stages->end()) return false;
  if (!entry->value("complete", false)) return false;
  if (entry->value("fingerprint", std::string()) != fingerprint) return false;
  return outputs_intact(ws, entry->value("outputs", json::object()));
}

void record_stage(Workspace& ws, json& manifest, const std::string& key,
                  const std::string& fingerprint, const std::vector<fs::path>& outputs,
                  bool complete, json extra = json::object()) {
  json entry = {{"complete", complete},
                {"fingerprint", fingerprint},
                {"outputs", digest_outputs(ws, outputs)}};
  for (const auto& [k, v] : extra.items()) entry[k] = v;
  manifest["stages"][key] = std::move(entry);
  ws.save_manifest(manifest);
}

// Dependency gate: the stage must exist, be complete, and its artifacts must
// still match their recorded digests.
const json& require_stage(const Workspace& ws, const json& manifest, const std::string& key) {
  auto stages = manifest.find("stages");
  if (stages == manifest.end() || !stages->contains(key))
    throw DependencyError("stage '" + key + "' has not run; run it first");
  const json& entry = (*stages)[key];
  if (!entry.value("complete", false))
    throw DependencyError("stage '" + key + "' is incomplete; rerun it to resume");
  if (!outputs_intact(ws, entry.value("outputs", json::object())))
    throw DependencyError("artifacts of stage '" + key +
                          "' changed on disk since it ran; rerun it");
  return entry;
}

const json* find_complete_stage(const Workspace& ws, const json& manifest,
                                const std::string& key) {
  auto stages = manifest.find("stages");
  if (stages == manifest.end() || !stages->contains(key)) return nullptr;
  // Present but unfinished or tampered is an error, not silent absence.
  return &require_stage(ws, manifest, key);
}

struct ClientBundle {
  std::unique_ptr<genclient::Backend> backend;
  std::unique_ptr<genclient::GenerationCache> cache;
  std::unique_ptr<genclient::RequestLog> log;
  std::unique_ptr<genclient::GenClient> client;
};

ClientBundle make_client(const json& backend_config, const Config& cfg, const Workspace& ws,
                         const genclient::GenClientOptions& options) {
  ClientBundle b;
  b.backend = genclient::make_backend(backend_config);
  fs::path cache_dir = cfg.cache_dir.empty() ? ws.root() / "cache" : cfg.cache_dir;
  b.cache = std::make_unique<genclient::GenerationCache>(cache_dir);
  b.log = std::make_unique<genclient::RequestLog>(ws.request_log_path());
  b.client = std::make_unique<genclient::GenClient>(*b.backend, *b.cache, b.log.get(), options);
  return b;
}

std::string fingerprint_of(const json& j) { return digest::sha256_hex(j.dump()); }

// ---------------------------------------------------------------------------
// Generation stages

struct GenerationJob {
  std::optional<std::string> culture;
  prompting::Variant variant;
};

std::string group_for_stage(const std::string& stage) {
  if (stage == "generate") return "conditioned";
  if (stage == "generate-agnostic") return "agnostic";
  return "demographic";
}

bool run_generation_for_model(const std::string& stage, const Config& cfg, Workspace& ws,
                              json& manifest, const roster::Roster& roster,
                              const ModelConfig& model, const std::string& roster_digest) {
  std::string group = group_for_stage(stage);
  std::string key = stage + "/" + model.id;
  auto cultures = run_cultures(cfg, roster);
  auto topics = run_topics(cfg, roster);

  std::vector<GenerationJob> jobs;
  if (stage == "generate") {
    for (const auto& c : cultures) jobs.push_back({c, prompting::Variant::conditioned});
  } else if (stage == "generate-agnostic") {
    jobs.push_back({std::nullopt, prompting::Variant::agnostic});
  } else {
    if (cfg.demographic.cultures.empty())
      throw ConfigError("generate-demographic needs demographic.cultures in the config");
    for (const auto& c : cfg.demographic.cultures) {
      roster.culture(c);
      for (auto v : cfg.demographic.variants) jobs.push_back({c, v});
    }
  }

  json fp = {{"stage", stage},
             {"roster", roster_digest},
             {"cultures", cultures},
             {"topics", topics},
             {"n_samples", cfg.n_samples},
             {"sampling", cfg.sampling.to_json()},
             {"backend", model.backend},
             {"demographic_cultures", cfg.demographic.cultures}};
  std::string fingerprint = fingerprint_of(fp);
  if (stage_up_to_date(ws, manifest, key, fingerprint)) {
    std::cerr << "[" << key << "] up to date, skipping\n";
    return false;
  }

  ClientBundle bundle = make_client(model.backend, cfg, ws, model.client_options);
  genclient::SamplingParams params = cfg.sampling;
  params.n = cfg.n_samples;
  std::string params_digest = params.digest();

  std::vector<fs::path> outputs;
  json shortfalls = json::array();
  for (const auto& topic_id : topics) {
    const roster::Topic& topic = roster.topic(topic_id);
    std::vector<std::vector<genclient::GenerationRecord>> per_job(jobs.size());
    std::vector<json> job_errors(jobs.size());

    parallel::for_each_index(jobs.size(), model.parallelism, [&](size_t i) {
      const GenerationJob& job = jobs[i];
      const roster::Culture* culture =
          job.culture ? &roster.culture(*job.culture) : nullptr;
      std::string prompt = prompting::render_generation_prompt(topic, culture, job.variant);
      std::vector<genclient::SampleResult> samples;
      try {
        samples = bundle.client->sample(prompt, params);
      } catch (const TransportError& e) {
        job_errors[i] = {{"culture", job.culture ? json(*job.culture) : json(nullptr)},
                         {"variant", prompting::to_string(job.variant)},
                         {"topic", topic_id},
                         {"error", e.what()}};
        return;
      }
      for (size_t k = 0; k < samples.size(); ++k) {
        genclient::GenerationRecord rec;
        rec.culture = job.culture;
        rec.topic = topic_id;
        rec.variant = job.variant;
        rec.sample_index = static_cast<int>(k);
        rec.raw_text = samples[k].raw_text;
        auto trunc = genclient::truncate_to_first_sentence(samples[k].raw_text);
        rec.refusal = trunc.text.empty();
        rec.text = trunc.text;
        rec.complete = trunc.complete;
        rec.model_id = model.id;
        rec.params_digest = params_digest;
        rec.created_at = samples[k].created_at;
        per_job[i].push_back(std::move(rec));
      }
    });

    std::vector<json> rows;
    for (size_t i = 0; i < jobs.size(); ++i) {
      if (!job_errors[i].is_null()) {
        shortfalls.push_back(job_errors[i]);
        continue;
      }
      for (const auto& rec : per_job[i]) rows.push_back(rec.to_json());
    }
    fs::path out = ws.records_path(model.id, group, topic_id);
    io::write_jsonl(out, rows);
    outputs.push_back(out);
  }

  bool partial = !shortfalls.empty();
  if (partial) {
    fs::path marker = ws.shortfall_path(model.id, group);
    io::atomic_write_file(marker, json{{"shortfalls", shortfalls}}.dump(2) + "\n");
    outputs.push_back(marker);
    std::cerr << "[" << key << "] " << shortfalls.size()
              << " prompt(s) failed; stage is resumable\n";
  } else {
    // A completed rerun means any stale shortfall marker no longer applies.
    std::error_code ec;
    fs::remove(ws.shortfall_path(model.id, group), ec);
  }
  record_stage(ws, manifest, key, fingerprint, outputs, !partial);
  return partial;
}

int run_generation_stage(const std::string& stage, const Config& cfg, Workspace& ws) {
  roster::Roster roster = roster::Roster::load(cfg.roster_path);
  std::string roster_digest = digest::sha256_file(cfg.roster_path);
  json manifest = ws.load_manifest();
  manifest["roster_version"] = roster.version();
  manifest["roster_sha256"] = roster_digest;
  bool partial = false;
  for (const auto& model : cfg.models)
    partial |= run_generation_for_model(stage, cfg, ws, manifest, roster, model, roster_digest);
  return partial ? 3 : 0;
}

// ---------------------------------------------------------------------------
// Extract

std::vector<genclient::GenerationRecord> read_records(const fs::path& path) {
  std::vector<genclient::GenerationRecord> out;
  for (const auto& row : io::read_jsonl(path))
    out.push_back(genclient::GenerationRecord::from_json(row));
  return out;
}

// Record files of every generation group whose stage completed for the model.
// "generate" is mandatory; agnostic and demographic groups join when present.
std::vector<std::pair<std::string, fs::path>> record_files_for(
    const Workspace& ws, const json& manifest, const std::string& model_id,
    const std::vector<std::string>& topics) {
  std::vector<std::pair<std::string, fs::path>> files;  // (topic, path)
  const char* stages[] = {"generate", "generate-agnostic", "generate-demographic"};
  for (const char* stage : stages) {
    std::string key = std::string(stage) + "/" + model_id;
    const json* entry = std::string(stage) == "generate"
                            ? &require_stage(ws, manifest, key)
                            : find_complete_stage(ws, manifest, key);
    if (!entry) continue;
    std::string group = group_for_stage(stage);
    for (const auto& topic : topics) {
      fs::path p = ws.records_path(model_id, group, topic);
      if (fs::exists(p)) files.emplace_back(topic, p);
    }
  }
  return files;
}

int run_extract_stage(const Config& cfg, Workspace& ws) {
  if (cfg.extractor_backend.is_null() || cfg.extractor_backend.empty())
    throw ConfigError("extract stage needs an 'extractor' backend in the config");
  roster::Roster roster = roster::Roster::load(cfg.roster_path);
  json manifest = ws.load_manifest();
  auto topics = run_topics(cfg, roster);

  bool partial = false;
  for (const auto& model : cfg.models) {
    std::string key = "extract/" + model.id;
    auto files = record_files_for(ws, manifest, model.id, topics);
    json input_digests = json::object();
    for (const auto& [topic, path] : files)
      input_digests[rel(ws, path)] = digest::sha256_file(path);
    json fp = {{"stage", "extract"},
               {"inputs", input_digests},
               {"extractor", cfg.extractor_backend},
               {"extractor_sampling", cfg.extractor_sampling.to_json()}};
    std::string fingerprint = fingerprint_of(fp);
    if (stage_up_to_date(ws, manifest, key, fingerprint)) {
      std::cerr << "[" << key << "] up to date, skipping\n";
      continue;
    }

    ClientBundle extractor = make_client(cfg.extractor_backend, cfg, ws, {});
    std::vector<fs::path> outputs;
    json unextracted_all = json::array();
    for (const auto& topic_id : topics) {
      std::vector<genclient::GenerationRecord> records;
      for (const auto& [topic, path] : files) {
        if (topic != topic_id) continue;
        auto part = read_records(path);
        records.insert(records.end(), part.begin(), part.end());
      }
      auto outcome = extraction::extract_candidates(records, *extractor.client, roster,
                                                    roster.topic(topic_id),
                                                    cfg.extractor_sampling,
                                                    cfg.extractor_parallelism);
      std::vector<json> rows;
      for (const auto& cand : outcome.candidates) rows.push_back(cand.to_json());
      fs::path out = ws.candidates_path(model.id, topic_id);
      io::write_jsonl(out, rows);
      outputs.push_back(out);
      for (const auto& ref : outcome.unextracted) {
        unextracted_all.push_back(
            {{"topic", topic_id},
             {"culture", ref.culture ? json(*ref.culture) : json(nullptr)},
             {"variant", prompting::to_string(ref.variant)},
             {"sample_index", ref.sample_index}});
      }
    }
    bool model_partial = !unextracted_all.empty();
    if (model_partial) {
      fs::path marker = ws.unextracted_path(model.id);
      io::atomic_write_file(marker, json{{"unextracted", unextracted_all}}.dump(2) + "\n");
      outputs.push_back(marker);
      std::cerr << "[" << key << "] " << unextracted_all.size()
                << " record(s) unextracted; stage is resumable\n";
    }
    record_stage(ws, manifest, key, fingerprint, outputs, !model_partial);
    partial |= model_partial;
  }
  return partial ? 3 : 0;
}

// ---------------------------------------------------------------------------
// Assign

std::vector<extraction::CandidateSymbol> read_candidates(const fs::path& path) {
  std::vector<extraction::CandidateSymbol> out;
  for (const auto& row : io::read_jsonl(path))
    out.push_back(extraction::CandidateSymbol::from_json(row));
  return out;
}

int run_assign_stage(const Config& cfg, Workspace& ws) {
  roster::Roster roster = roster::Roster::load(cfg.roster_path);
  json manifest = ws.load_manifest();
  auto topics = run_topics(cfg, roster);

  int assignable = 0;
  for (const auto& model : cfg.models) {
    if (!model.declared_logprobs()) {
      std::cerr << "[assign/" << model.id << "] backend '" << model.id
                << "' does not expose token log-probabilities; skipping assignment, "
                   "downstream analytics will use candidate symbols\n";
      continue;
    }
    ++assignable;
    std::string key = "assign/" + model.id;
    require_stage(ws, manifest, "extract/" + model.id);

    json input_digests = json::object();
    for (const auto& topic : topics) {
      fs::path p = ws.candidates_path(model.id, topic);
      input_digests[rel(ws, p)] = digest::sha256_file(p);
    }
    json fp = {{"stage", "assign"},
               {"inputs", input_digests},
               {"backend", model.backend},
               {"calibrate", model.calibrate},
               {"threshold", assignment::to_string(cfg.threshold_mode)},
               {"dump_distributions", cfg.dump_distributions}};
    std::string fingerprint = fingerprint_of(fp);
    if (stage_up_to_date(ws, manifest, key, fingerprint)) {
      std::cerr << "[" << key << "] up to date, skipping\n";
      continue;
    }

    ClientBundle bundle = make_client(model.backend, cfg, ws, model.client_options);
    std::vector<fs::path> outputs;
    for (const auto& topic_id : topics) {
      const roster::Topic& topic = roster.topic(topic_id);
      auto candidates = read_candidates(ws.candidates_path(model.id, topic_id));

      // Only candidates seen in culture-conditioned generations are rankable.
      std::vector<const extraction::CandidateSymbol*> rankable;
      for (const auto& cand : candidates) {
        bool conditioned = false;
        for (const auto& p : cand.provenance)
          if (p.culture && p.variant == prompting::Variant::conditioned) conditioned = true;
        if (conditioned) rankable.push_back(&cand);
      }

      std::vector<std::vector<assignment::CultureSymbol>> per_cand(rankable.size());
      std::vector<json> per_dist(rankable.size());
      parallel::for_each_index(rankable.size(), model.parallelism, [&](size_t i) {
        auto dist = assignment::compute_distribution(rankable[i]->norm, topic, roster,
                                                     *bundle.client, model.calibrate);
        per_cand[i] =
            assignment::assign(dist, *rankable[i], roster, model.id, cfg.threshold_mode);
        if (cfg.dump_distributions) per_dist[i] = dist.to_json();
      });

      std::vector<json> rows;
      for (const auto& group : per_cand)
        for (const auto& sym : group) rows.push_back(sym.to_json());
      fs::path out = ws.symbols_path(model.id, topic_id);
      io::write_jsonl(out, rows);
      outputs.push_back(out);
      if (cfg.dump_distributions) {
        fs::path dout = ws.distributions_path(model.id, topic_id);
        io::write_jsonl(dout, per_dist);
        outputs.push_back(dout);
      }
    }
    record_stage(ws, manifest, key, fingerprint, outputs, true);
  }
  if (assignable == 0)
    throw CapabilityError(
        "no configured backend exposes token log-probabilities; assignment cannot run "
        "(config key models[].supports_logprobs) — downstream analytics proceed on "
        "candidate symbols");
  return 0;
}

// ---------------------------------------------------------------------------
// Mark

int run_mark_stage(const Config& cfg, Workspace& ws) {
  roster::Roster roster = roster::Roster::load(cfg.roster_path);
  json manifest = ws.load_manifest();
  auto topics = run_topics(cfg, roster);

  std::vector<markedness::MarkednessTables> per_model;
  json input_digests = json::object();
  for (const auto& model : cfg.models) {
    require_stage(ws, manifest, "generate/" + model.id);
    std::vector<genclient::GenerationRecord> records;
    for (const auto& [topic, path] : record_files_for(ws, manifest, model.id, topics)) {
      auto part = read_records(path);
      records.insert(records.end(), part.begin(), part.end());
      input_digests[rel(ws, path)] = digest::sha256_file(path);
    }
    per_model.push_back(markedness::aggregate_markedness(records, roster));
  }
  json fp = {{"stage", "mark"}, {"inputs", input_digests}};
  std::string fingerprint = fingerprint_of(fp);
  if (stage_up_to_date(ws, manifest, "mark", fingerprint)) {
    std::cerr << "[mark] up to date, skipping\n";
    return 0;
  }

  io::CsvWriter rows_csv;
  rows_csv.row({"model", "topic", "culture", "region", "total", "vocab_marked",
                "paren_marked"});
  for (const auto& tables : per_model) {
    for (const auto& row : tables.rows) {
      std::string culture = row.culture.value_or("");
      std::string region = row.culture ? roster.culture(*row.culture).region : "";
      rows_csv.row({row.model_id, row.topic, culture, region, std::to_string(row.total),
                    std::to_string(row.vocab_marked), std::to_string(row.paren_marked)});
    }
  }
  io::CsvWriter region_csv;
  region_csv.row({"model", "topic", "region", "cultures", "total_mean", "vocab_marked_mean",
                  "paren_marked_mean"});
  for (const auto& tables : per_model) {
    for (const auto& row : tables.region_rows) {
      region_csv.row({row.model_id, row.topic, row.region, std::to_string(row.cultures),
                      io::format_double(row.total_mean),
                      io::format_double(row.vocab_marked_mean),
                      io::format_double(row.paren_marked_mean)});
    }
  }
  fs::path rows_path = ws.marks_dir() / "markedness.csv";
  fs::path region_path = ws.marks_dir() / "markedness_regions.csv";
  io::atomic_write_file(rows_path, rows_csv.str());
  io::atomic_write_file(region_path, region_csv.str());
  record_stage(ws, manifest, "mark", fingerprint, {rows_path, region_path}, true);
  return 0;
}

// ---------------------------------------------------------------------------
// Metrics

std::vector<assignment::CultureSymbol> read_symbols(const fs::path& path) {
  std::vector<assignment::CultureSymbol> out;
  for (const auto& row : io::read_jsonl(path))
    out.push_back(assignment::CultureSymbol::from_json(row));
  return out;
}

struct ModelSymbolView {
  std::string symbol_source;  // "assigned" or "candidates"
  // (topic, culture) -> norms the analytics treat as the culture's symbols
  std::map<std::pair<std::string, std::string>, std::set<std::string>> per_culture;
  std::map<std::string, std::set<std::string>> agnostic;   // topic -> norms
  std::map<std::string, std::set<std::string>> all_known;  // topic -> conditioned+agnostic norms
  // (topic, variant, culture) -> norms generated under the demographic condition
  std::map<std::tuple<std::string, std::string, std::string>, std::set<std::string>> condition;
};

ModelSymbolView build_symbol_view(const Config& cfg, Workspace& ws, const json& manifest,
                                  const ModelConfig& model,
                                  const std::vector<std::string>& topics,
                                  json& input_digests) {
  ModelSymbolView view;
  require_stage(ws, manifest, "extract/" + model.id);
  bool assigned = model.declared_logprobs();
  view.symbol_source = assigned ? "assigned" : "candidates";
  if (assigned) require_stage(ws, manifest, "assign/" + model.id);

  for (const auto& topic : topics) {
    fs::path cpath = ws.candidates_path(model.id, topic);
    input_digests[rel(ws, cpath)] = digest::sha256_file(cpath);
    auto candidates = read_candidates(cpath);
    for (const auto& cand : candidates) {
      for (const auto& p : cand.provenance) {
        if (p.variant == prompting::Variant::agnostic) {
          view.agnostic[topic].insert(cand.norm);
          view.all_known[topic].insert(cand.norm);
        } else if (p.variant == prompting::Variant::conditioned) {
          view.all_known[topic].insert(cand.norm);
          if (!assigned && p.culture)
            view.per_culture[{topic, *p.culture}].insert(cand.norm);
        } else if (p.culture) {
          view.condition[{topic, prompting::to_string(p.variant), *p.culture}].insert(
              cand.norm);
        }
      }
    }
    if (assigned) {
      fs::path spath = ws.symbols_path(model.id, topic);
      input_digests[rel(ws, spath)] = digest::sha256_file(spath);
      for (const auto& sym : read_symbols(spath))
        view.per_culture[{topic, sym.culture}].insert(sym.symbol);
    }
  }
  return view;
}

struct MeanVar {
  int n = 0;
  double mean = 0.0;
  double variance = 0.0;  // population variance
};

MeanVar mean_variance(const std::vector<double>& values) {
  MeanVar mv;
  mv.n = static_cast<int>(values.size());
  if (values.empty()) return mv;
  for (double v : values) mv.mean += v;
  mv.mean /= static_cast<double>(values.size());
  for (double v : values) mv.variance += (v - mv.mean) * (v - mv.mean);
  mv.variance /= static_cast<double>(values.size());
  return mv;
}

int run_metrics_stage(const Config& cfg, Workspace& ws) {
  roster::Roster roster = roster::Roster::load(cfg.roster_path);
  json manifest = ws.load_manifest();
  auto cultures = run_cultures(cfg, roster);
  auto topics = run_topics(cfg, roster);
  std::vector<std::string> model_ids;
  for (const auto& m : cfg.models) model_ids.push_back(m.id);

  json input_digests = json::object();
  std::map<std::string, ModelSymbolView> views;
  for (const auto& model : cfg.models)
    views.emplace(model.id, build_symbol_view(cfg, ws, manifest, model, topics, input_digests));

  json fp = {{"stage", "metrics"},
             {"inputs", input_digests},
             {"cultures", cultures},
             {"topics", topics},
             {"demographic_cultures", cfg.demographic.cultures},
             {"cooccurrence",
              cfg.cooccurrence_csv.empty() ? "" : digest::sha256_file(cfg.cooccurrence_csv)}};
  std::string fingerprint = fingerprint_of(fp);
  if (stage_up_to_date(ws, manifest, "metrics", fingerprint)) {
    std::cerr << "[metrics] up to date, skipping\n";
    return 0;
  }

  // Diversity (per culture and region rollups).
  std::vector<metrics::SymbolRef> refs;
  for (const auto& [model_id, view] : views)
    for (const auto& [key, norms] : view.per_culture)
      for (const auto& norm : norms)
        refs.push_back({model_id, key.first, key.second, norm});
  metrics::DiversityTable div =
      metrics::diversity(refs, roster, cultures, topics, model_ids);

  io::CsvWriter div_csv;
  div_csv.row({"model", "topic", "scope", "name", "region", "count"});
  for (const auto& [key, count] : div.entries) {
    const auto& [model, topic, culture] = key;
    div_csv.row({model, topic, "culture", culture, roster.culture(culture).region,
                 std::to_string(count)});
  }
  for (const auto& [key, mean] : div.region_rollups) {
    const auto& [model, topic, region] = key;
    div_csv.row({model, topic, "region", region, "", io::format_double(mean)});
  }

  // Overlap with culture-agnostic generations.
  io::CsvWriter overlap_csv;
  overlap_csv.row({"model", "topic", "culture", "culture_symbols", "agnostic_symbols",
                   "overlapping", "overlap_rate"});
  for (const auto& [model_id, view] : views) {
    for (const auto& topic : topics) {
      auto ag_it = view.agnostic.find(topic);
      const std::set<std::string> empty;
      const auto& agnostic = ag_it == view.agnostic.end() ? empty : ag_it->second;
      for (const auto& culture : cultures) {
        auto it = view.per_culture.find({topic, culture});
        const auto& own = it == view.per_culture.end() ? empty : it->second;
        size_t common = 0;
        for (const auto& s : own) common += agnostic.count(s);
        auto rate = metrics::overlap_rate(own, agnostic);
        overlap_csv.row({model_id, topic, culture, std::to_string(own.size()),
                         std::to_string(agnostic.size()), std::to_string(common),
                         rate ? io::format_double(*rate) : ""});
      }
    }
  }

  // Demographic ablation, aggregated over the configured cultures.
  io::CsvWriter abl_csv;
  abl_csv.row({"model", "topic", "variant", "cultures", "hit_rate_mean", "hit_rate_variance",
               "new_rate_mean", "new_rate_variance"});
  for (const auto& [model_id, view] : views) {
    for (const auto& topic : topics) {
      for (auto variant : cfg.demographic.variants) {
        std::string vname = prompting::to_string(variant);
        std::vector<double> hits, news;
        for (const auto& culture : cfg.demographic.cultures) {
          const std::set<std::string> empty;
          auto cit = view.condition.find({topic, vname, culture});
          const auto& condition = cit == view.condition.end() ? empty : cit->second;
          auto nit = view.per_culture.find({topic, culture});
          const auto& neutral = nit == view.per_culture.end() ? empty : nit->second;
          auto kit = view.all_known.find(topic);
          const auto& known = kit == view.all_known.end() ? empty : kit->second;
          auto rates = metrics::ablation_rates(condition, neutral, known);
          if (rates.hit_rate) hits.push_back(*rates.hit_rate);
          if (rates.new_rate) news.push_back(*rates.new_rate);
        }
        if (cfg.demographic.cultures.empty()) continue;
        MeanVar h = mean_variance(hits), nw = mean_variance(news);
        abl_csv.row({model_id, topic, vname,
                     std::to_string(cfg.demographic.cultures.size()),
                     h.n ? io::format_double(h.mean) : "",
                     h.n ? io::format_double(h.variance) : "",
                     nw.n ? io::format_double(nw.mean) : "",
                     nw.n ? io::format_double(nw.variance) : ""});
      }
    }
  }

  // Correlation against corpus co-occurrence counts, when provided.
  io::CsvWriter corr_csv;
  corr_csv.row({"model", "topic", "tau", "n", "strength"});
  if (!cfg.cooccurrence_csv.empty()) {
    auto counts = corpusscan::load_culture_topic_csv(cfg.cooccurrence_csv);
    auto results =
        metrics::correlate_diversity_frequency(div, counts, cultures, topics, model_ids);
    for (const auto& r : results)
      corr_csv.row({r.model_id, r.topic, io::format_double(r.tau), std::to_string(r.n),
                    r.strength_label});
  }

  fs::path div_path = ws.metrics_dir() / "diversity.csv";
  fs::path overlap_path = ws.metrics_dir() / "overlap.csv";
  fs::path abl_path = ws.metrics_dir() / "ablation.csv";
  fs::path corr_path = ws.metrics_dir() / "correlation.csv";
  io::atomic_write_file(div_path, div_csv.str());
  io::atomic_write_file(overlap_path, overlap_csv.str());
  io::atomic_write_file(abl_path, abl_csv.str());
  io::atomic_write_file(corr_path, corr_csv.str());

  json extra = json::object();
  for (const auto& [model_id, view] : views)
    extra["symbol_source"][model_id] = view.symbol_source;
  record_stage(ws, manifest, "metrics", fingerprint,
               {div_path, overlap_path, abl_path, corr_path}, true, extra);
  return 0;
}

// ---------------------------------------------------------------------------
// Corpus scan

int run_scan_corpus_stage(const Config& cfg, Workspace& ws) {
  if (cfg.corpus_dir.empty())
    throw ConfigError("scan-corpus needs 'corpus_dir' in the config");
  roster::Roster roster = roster::Roster::load(cfg.roster_path);
  json manifest = ws.load_manifest();

  corpusscan::PatternSet patterns = cfg.pattern_file.empty()
                                        ? corpusscan::PatternSet::from_roster(roster)
                                        : corpusscan::PatternSet::load(cfg.pattern_file);

  // Corpus identity = sorted (path, size) listing; cheap and catches
  // additions, removals and truncations.
  json listing = json::array();
  std::vector<fs::path> shard_paths;
  for (const auto& entry : fs::recursive_directory_iterator(cfg.corpus_dir))
    if (entry.is_regular_file()) shard_paths.push_back(entry.path());
  std::sort(shard_paths.begin(), shard_paths.end());
  for (const auto& p : shard_paths)
    listing.push_back({{"path", p.string()}, {"size", fs::file_size(p)}});
  json fp = {{"stage", "scan-corpus"},
             {"corpus", listing},
             {"format", cfg.corpus_format == corpusscan::CorpusFormat::lines
                            ? "lines"
                            : "length-prefixed"},
             {"patterns", fingerprint_of(patterns.to_json())}};
  std::string fingerprint = fingerprint_of(fp);
  if (stage_up_to_date(ws, manifest, "scan-corpus", fingerprint)) {
    std::cerr << "[scan-corpus] up to date, skipping\n";
    return 0;
  }

  corpusscan::MultiPatternMatcher matcher(patterns);
  corpusscan::ScanOptions options;
  options.format = cfg.corpus_format;
  options.parallelism = cfg.scan_parallelism;
  options.progress = [](size_t done, size_t total) {
    if (done == total || done % 64 == 0)
      std::cerr << "[scan-corpus] " << done << "/" << total << " shards\n";
  };
  corpusscan::CooccurrenceCounts counts =
      corpusscan::scan_corpus(cfg.corpus_dir, matcher, options);

  for (const auto& failure : counts.failed_shards)
    std::cerr << "[scan-corpus] warning: " << failure << "\n";
  std::cerr << "[scan-corpus] " << counts.docs_scanned << " documents, "
            << counts.bytes_scanned << " bytes, " << counts.warnings << " warnings\n";

  // Culture-only vs culture-topic agreement, reported per topic.
  for (const auto& topic : roster.topics()) {
    std::vector<double> x, y;
    for (const auto& culture : roster.cultures()) {
      auto ci = counts.culture_docs.find(culture.id);
      auto ti = counts.culture_topic_docs.find({culture.id, topic.id});
      x.push_back(ci == counts.culture_docs.end() ? 0.0 : static_cast<double>(ci->second));
      y.push_back(ti == counts.culture_topic_docs.end() ? 0.0
                                                        : static_cast<double>(ti->second));
    }
    try {
      std::cerr << "[scan-corpus] spearman(culture, culture+" << topic.id
                << ") = " << io::format_double(metrics::spearman_rho(x, y)) << "\n";
    } catch (const UndefinedCorrelationError&) {
      std::cerr << "[scan-corpus] spearman(culture, culture+" << topic.id << ") = n/a\n";
    }
  }

  fs::path culture_path = ws.counts_dir() / "cooccurrence_culture.csv";
  fs::path pair_path = ws.counts_dir() / "cooccurrence_culture_topic.csv";
  io::atomic_write_file(culture_path, corpusscan::culture_counts_csv(counts));
  io::atomic_write_file(pair_path, corpusscan::culture_topic_counts_csv(counts));
  record_stage(ws, manifest, "scan-corpus", fingerprint, {culture_path, pair_path},
               counts.warnings == 0,
               {{"docs_scanned", counts.docs_scanned},
                {"bytes_scanned", counts.bytes_scanned},
                {"warnings", counts.warnings}});
  return counts.warnings == 0 ? 0 : 3;
}

// ---------------------------------------------------------------------------
// Report

int run_report_stage(const Config& cfg, Workspace& ws) {
  roster::Roster roster = roster::Roster::load(cfg.roster_path);
  json manifest = ws.load_manifest();
  const json& mark_entry = require_stage(ws, manifest, "mark");
  const json& metrics_entry = require_stage(ws, manifest, "metrics");
  auto topics = run_topics(cfg, roster);

  json fp = {{"stage", "report"},
             {"mark", mark_entry.value("outputs", json::object())},
             {"metrics", metrics_entry.value("outputs", json::object())}};
  std::string fingerprint = fingerprint_of(fp);
  if (stage_up_to_date(ws, manifest, "report", fingerprint)) {
    std::cerr << "[report] up to date, skipping\n";
    return 0;
  }

  std::vector<fs::path> outputs;
  auto copy_csv = [&](const fs::path& src) {
    fs::path dst = ws.report_dir() / src.filename();
    io::atomic_write_file(dst, io::read_file(src));
    outputs.push_back(dst);
  };
  copy_csv(ws.marks_dir() / "markedness.csv");
  copy_csv(ws.marks_dir() / "markedness_regions.csv");
  copy_csv(ws.metrics_dir() / "diversity.csv");
  copy_csv(ws.metrics_dir() / "overlap.csv");
  copy_csv(ws.metrics_dir() / "ablation.csv");
  copy_csv(ws.metrics_dir() / "correlation.csv");

  // Refusals per (model, topic), counted from the record files.
  json refusals = json::object();
  for (const auto& model : cfg.models) {
    json per_topic = json::object();
    for (const auto& topic : topics) per_topic[topic] = 0;
    for (const auto& [topic, path] : record_files_for(ws, manifest, model.id, topics)) {
      long count = 0;
      for (const auto& rec : read_records(path)) count += rec.refusal ? 1 : 0;
      per_topic[topic] = per_topic[topic].get<long>() + count;
    }
    refusals[model.id] = per_topic;
  }

  json models_meta = json::array();
  for (const auto& model : cfg.models) {
    std::string source = "candidates";
    if (manifest["stages"].contains("metrics") &&
        manifest["stages"]["metrics"].contains("symbol_source") &&
        manifest["stages"]["metrics"]["symbol_source"].contains(model.id))
      source = manifest["stages"]["metrics"]["symbol_source"][model.id].get<std::string>();
    models_meta.push_back({{"id", model.id},
                           {"calibrate", model.calibrate},
                           {"supports_logprobs", model.declared_logprobs()},
                           {"symbol_source", source}});
  }

  json meta = {
      {"roster_version", roster.version()},
      {"roster_sha256", digest::sha256_file(cfg.roster_path)},
      {"n_samples", cfg.n_samples},
      {"sampling", cfg.sampling.to_json()},
      {"assignment_threshold", assignment::to_string(cfg.threshold_mode)},
      {"correlation_variant", "kendall-tau-b"},
      {"ablation_dispersion", "population-variance"},
      {"prompt_spacing",
       "single space between the instruction head, the nationality sentence, and the tail"},
      {"models", models_meta},
      {"refusals", refusals},
  };
  fs::path meta_path = ws.report_dir() / "run_metadata.json";
  io::atomic_write_file(meta_path, meta.dump(2) + "\n");
  outputs.push_back(meta_path);

  record_stage(ws, manifest, "report", fingerprint, outputs, true);
  return 0;
}

}  // namespace

// ---------------------------------------------------------------------------

int run_stage(const std::string& stage, const Config& config,
              const fs::path& workspace_root) {
  Workspace ws(workspace_root);
  WorkspaceLock lock(ws);
  if (stage == "generate" || stage == "generate-agnostic" || stage == "generate-demographic")
    return run_generation_stage(stage, config, ws);
  if (stage == "extract") return run_extract_stage(config, ws);
  if (stage == "assign") return run_assign_stage(config, ws);
  if (stage == "mark") return run_mark_stage(config, ws);
  if (stage == "metrics") return run_metrics_stage(config, ws);
  if (stage == "scan-corpus") return run_scan_corpus_stage(config, ws);
  if (stage == "report") return run_report_stage(config, ws);
  throw UsageError("unknown stage '" + stage + "'");
}

}  // namespace culturekit::pipeline
