#pragma once

// Shared deterministic pipeline fixture: three cultures, two topics, four
// samples each, one mock generator/scorer and one mock extractor. Every
// expected analytic value below is computed by hand from the continuation
// lists and frozen here.

#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "culturekit/genclient.hpp"
#include "culturekit/io.hpp"
#include "culturekit/prompting.hpp"
#include "culturekit/roster.hpp"
#include "json.hpp"

namespace ckfix {

namespace fs = std::filesystem;
using nlohmann::json;
using culturekit::prompting::Variant;

struct Fixture {
  fs::path root;
  fs::path config_path;
  fs::path cache_dir;
  json config;
};

inline const culturekit::roster::Roster& fixture_roster() {
  static culturekit::roster::Roster r =
      culturekit::roster::Roster::load(CK_SOURCE_DIR "/data/roster.json");
  return r;
}

// Continuations per (topic, culture-or-"", variant), four samples each, and
// the extractor's reply per extracted phrase list.
struct Job {
  const char* topic;
  const char* culture;  // "" = agnostic
  Variant variant;
  std::vector<const char*> continuations;        // raw; "" = refusal
  std::vector<const char*> extractor_responses;  // aligned; "" = none (refusal slot)
};

inline const std::vector<Job>& fixture_jobs() {
  static const std::vector<Job> jobs = {
      {"food", "algeria", Variant::conditioned,
       {" couscous.", " couscous and tagine. Also bread.", " traditional Algerian cuisine.",
        " harira (a rich lentil soup)."},
       {"couscous", "couscous; tagine", "traditional Algerian cuisine",
        "harira (a rich lentil soup)"}},
      {"food", "japan", Variant::conditioned,
       {" sushi.", " ramen.", " sushi and ramen.", ""},
       {"sushi", "ramen", "sushi; ramen", ""}},
      {"food", "france", Variant::conditioned,
       {" baguette.", " baguette and cheese.", " escargot.", " baguette."},
       {"baguette", "baguette; cheese", "escargot", "baguette"}},
      {"food", "", Variant::agnostic,
       {" pizza.", " sushi.", " baguette.", " couscous (a North African dish)."},
       {"pizza", "sushi", "baguette", "couscous (a North African dish)"}},
      {"food", "algeria", Variant::age17,
       {" couscous.", " bubble tea.", " harira.", " couscous."},
       {"couscous", "bubble tea", "harira", "couscous"}},
      {"food", "algeria", Variant::male,
       {" couscous.", " tagine.", " merguez.", " couscous."},
       {"couscous", "tagine", "merguez", "couscous"}},

      {"clothing", "algeria", Variant::conditioned,
       {" a djellaba.", " a kaftan.", " traditional Algerian clothing.", " a djellaba."},
       {"djellaba", "kaftan", "traditional Algerian clothing", "djellaba"}},
      {"clothing", "japan", Variant::conditioned,
       {" a kimono.", " a kimono.", " a yukata.", ""},
       {"kimono", "kimono", "yukata", ""}},
      {"clothing", "france", Variant::conditioned,
       {" a beret.", " a scarf.", " jeans.", " jeans and a scarf."},
       {"beret", "scarf", "jeans", "jeans; scarf"}},
      {"clothing", "", Variant::agnostic,
       {" jeans.", " a t-shirt.", " sneakers.", " a suit."},
       {"jeans", "t-shirt", "sneakers", "suit"}},
      {"clothing", "algeria", Variant::age17,
       {" jeans.", " a djellaba.", " sneakers.", " jeans."},
       {"jeans", "djellaba", "sneakers", "jeans"}},
      {"clothing", "algeria", Variant::male,
       {" a thobe.", " jeans.", " a kaftan.", " jeans."},
       {"thobe", "jeans", "kaftan", "jeans"}},
  };
  return jobs;
}

// Hand-computed expectations, frozen.
struct Expected {
  // (topic, culture) -> distinct symbols
  std::map<std::pair<std::string, std::string>, long> diversity = {
      {{"food", "algeria"}, 3},     {{"food", "japan"}, 2},     {{"food", "france"}, 3},
      {{"clothing", "algeria"}, 2}, {{"clothing", "japan"}, 2}, {{"clothing", "france"}, 3},
  };
  // (topic, culture) -> overlap rate with agnostic symbols
  std::map<std::pair<std::string, std::string>, double> overlap = {
      {{"food", "algeria"}, 1.0 / 3.0},  {{"food", "japan"}, 0.5},
      {{"food", "france"}, 1.0 / 3.0},   {{"clothing", "algeria"}, 0.0},
      {{"clothing", "japan"}, 0.0},      {{"clothing", "france"}, 1.0 / 3.0},
  };
  // (topic, variant) -> (hit mean, new mean); one demographic culture, so
  // mean == the rate and variance == 0
  std::map<std::pair<std::string, std::string>, std::pair<double, double>> ablation = {
      {{"food", "age17"}, {2.0 / 3.0, 1.0 / 3.0}},
      {{"food", "male"}, {2.0 / 3.0, 1.0 / 3.0}},
      {{"clothing", "age17"}, {0.5, 0.0}},
      {{"clothing", "male"}, {0.5, 1.0 / 3.0}},
  };
  // (topic, culture-or-"") -> (total, vocab, paren)
  std::map<std::pair<std::string, std::string>, std::tuple<long, long, long>> marks = {
      {{"food", "algeria"}, {4, 1, 1}},  {{"food", "japan"}, {3, 0, 0}},
      {{"food", "france"}, {4, 0, 0}},   {{"food", ""}, {4, 0, 1}},
      {{"clothing", "algeria"}, {4, 1, 0}}, {{"clothing", "japan"}, {3, 0, 0}},
      {{"clothing", "france"}, {4, 0, 0}},  {{"clothing", ""}, {4, 0, 0}},
  };
  // topic -> (tau, n, label)
  std::map<std::string, std::tuple<double, int, std::string>> correlation = {
      {"food", {0.0, 3, "weak"}},
      {"clothing", {2.0 / std::sqrt(6.0), 3, "moderate-to-strong"}},
  };
  // topic -> refusal count
  std::map<std::string, long> refusals = {{"food", 1}, {"clothing", 1}};
};

inline json mock_model_backend(bool supports_logprobs) {
  const auto& roster = fixture_roster();
  json continuations = json::object();
  for (const auto& job : fixture_jobs()) {
    const auto& topic = roster.topic(job.topic);
    const culturekit::roster::Culture* culture =
        *job.culture ? &roster.culture(job.culture) : nullptr;
    std::string prompt =
        culturekit::prompting::render_generation_prompt(topic, culture, job.variant);
    json list = json::array();
    for (const char* c : job.continuations) list.push_back(c);
    continuations[prompt] = list;
  }
  return {{"backend", "mock"},
          {"supports_sampling", true},
          {"supports_logprobs", supports_logprobs},
          {"max_batch_n", 2},
          {"continuations", continuations},
          {"token_logprobs", {{"algerian", -1.0}, {"japanese", -2.0}, {"french", -3.0}}},
          {"default_token_logprob", -15.0}};
}

inline json mock_extractor_backend() {
  const auto& roster = fixture_roster();
  json continuations = json::object();
  for (const auto& job : fixture_jobs()) {
    const auto& topic = roster.topic(job.topic);
    for (size_t i = 0; i < job.continuations.size(); ++i) {
      std::string raw = job.continuations[i];
      auto trunc = culturekit::genclient::truncate_to_first_sentence(raw);
      if (trunc.text.empty()) continue;  // refusal, never extracted
      std::string sentence =
          culturekit::prompting::generation_tail(topic, job.variant) + " " + trunc.text;
      std::string prompt = culturekit::prompting::render_extraction_prompt(topic, sentence);
      continuations[prompt] = json::array({job.extractor_responses[i]});
    }
  }
  return {{"backend", "mock"},
          {"supports_sampling", true},
          {"supports_logprobs", false},
          {"max_batch_n", 1},
          {"continuations", continuations}};
}

inline std::string counts_csv() {
  return "culture,topic,docs\n"
         "algeria,food,30\n"
         "japan,food,20\n"
         "france,food,10\n"
         "algeria,clothing,5\n"
         "japan,clothing,15\n"
         "france,clothing,25\n";
}

// Writes config + aux files under root. The cache lives at root/cache unless
// a different directory is supplied (sharing it between workspaces replays
// records byte-identically).
inline Fixture make_fixture(const fs::path& root, bool logprobs_model = true,
                            const fs::path& shared_cache = {}) {
  Fixture f;
  f.root = root;
  fs::create_directories(root);
  f.cache_dir = shared_cache.empty() ? root / "cache" : shared_cache;

  culturekit::io::atomic_write_file(root / "counts.csv", counts_csv());

  f.config = {
      {"roster", std::string(CK_SOURCE_DIR "/data/roster.json")},
      {"cultures", {"algeria", "japan", "france"}},
      {"topics", {"food", "clothing"}},
      {"n_samples", 4},
      {"models",
       {{{"id", "mock-m"},
         {"backend", mock_model_backend(logprobs_model)},
         {"calibrate", false},
         {"parallelism", 2}}}},
      {"extractor", {{"id", "mock-x"}, {"backend", mock_extractor_backend()}}},
      {"demographic",
       {{"cultures", {"algeria"}}, {"variants", {"age17", "male"}}}},
      {"cooccurrence_csv", (root / "counts.csv").string()},
      {"cache_dir", f.cache_dir.string()},
  };
  f.config_path = root / "config.json";
  culturekit::io::atomic_write_file(f.config_path, f.config.dump(2) + "\n");
  return f;
}

inline const std::vector<std::string>& all_stages() {
  static const std::vector<std::string> stages = {
      "generate", "generate-agnostic", "generate-demographic", "extract",
      "assign",   "mark",              "metrics",              "report"};
  return stages;
}

}  // namespace ckfix
