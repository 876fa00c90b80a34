#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <random>

#include "culturekit/errors.hpp"
#include "culturekit/extraction.hpp"
#include "culturekit/mock_backend.hpp"
#include "culturekit/text.hpp"
#include "doctest.h"

using namespace culturekit;
using namespace culturekit::extraction;
namespace fs = std::filesystem;

namespace {

const roster::Roster& bundled() {
  static roster::Roster r = roster::Roster::load(CK_SOURCE_DIR "/data/roster.json");
  return r;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("ck_extr_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

genclient::GenerationRecord make_record(const std::string& topic,
                                        std::optional<std::string> culture,
                                        const std::string& text, int index,
                                        prompting::Variant variant = prompting::Variant::conditioned) {
  genclient::GenerationRecord r;
  r.culture = std::move(culture);
  r.topic = topic;
  r.variant = variant;
  r.sample_index = index;
  r.text = text;
  r.raw_text = " " + text;
  r.complete = true;
  r.model_id = "m";
  r.params_digest = "d";
  r.created_at = "t";
  return r;
}

genclient::SamplingParams extractor_params() {
  genclient::SamplingParams p;
  p.temperature = 0.0;
  p.top_p = 1.0;
  p.top_k = 1;
  p.max_tokens = 100;
  p.stop = "";
  return p;
}

}  // namespace

TEST_CASE("responses split on semicolons with trimming") {
  auto phrases = parse_extractor_response("songs by Vitas; Ariana Grande");
  REQUIRE(phrases.size() == 2);
  CHECK(phrases[0] == "songs by Vitas");
  CHECK(phrases[1] == "Ariana Grande");
}

TEST_CASE("None responses yield nothing") {
  CHECK(parse_extractor_response("None").empty());
  CHECK(parse_extractor_response("none").empty());
  CHECK(parse_extractor_response(" None ").empty());
  CHECK(parse_extractor_response("None; None").empty());
}

TEST_CASE("empty segments are dropped") {
  CHECK(parse_extractor_response(";;").empty());
  CHECK(parse_extractor_response("").empty());
  auto phrases = parse_extractor_response("; couscous ;");
  REQUIRE(phrases.size() == 1);
  CHECK(phrases[0] == "couscous");
}

TEST_CASE("garbage responses pass through as phrases for the filter") {
  auto phrases = parse_extractor_response("I think the answer is banana");
  REQUIRE(phrases.size() == 1);
  CHECK(phrases[0] == "I think the answer is banana");
}

TEST_CASE("a phrase of only stop tokens, culture names and topic words is rejected") {
  const auto& r = bundled();
  PhraseFilter music(r, r.topic("favorite_music"));
  CHECK_FALSE(music.normalize_and_filter("traditional Albanian music").has_value());
  CHECK_FALSE(music.normalize_and_filter("typical songs").has_value());
  CHECK_FALSE(music.normalize_and_filter("Albanian").has_value());
  auto ok = music.normalize_and_filter("songs by Vitas");
  REQUIRE(ok.has_value());
  CHECK(*ok == "songs by vitas");
}

TEST_CASE("multi-word culture names are filtered as phrases") {
  const auto& r = bundled();
  PhraseFilter food(r, r.topic("food"));
  CHECK_FALSE(food.normalize_and_filter("traditional United States food").has_value());
  CHECK_FALSE(food.normalize_and_filter("classic New Zealander dish").has_value());
  CHECK(food.normalize_and_filter("New Zealand lamb").has_value());  // "lamb" survives
}

TEST_CASE("trailing parenthesized explanations are stripped from norms") {
  const auto& r = bundled();
  PhraseFilter food(r, r.topic("food"));
  auto norm = food.normalize_and_filter("harira (a rich lentil soup)");
  REQUIRE(norm.has_value());
  CHECK(*norm == "harira");
}

TEST_CASE("normalization folds case, collapses whitespace and strips punctuation") {
  CHECK(normalize_phrase("  Songs  BY   Vitas. ") == "songs by vitas");
  CHECK(normalize_phrase("\"kimono\"") == "kimono");
  CHECK(normalize_phrase("harira (a rich lentil soup) (really)") == "harira");
  CHECK(normalize_phrase("") == "");
}

TEST_CASE("normalization is idempotent") {
  const char* inputs[] = {"  Songs  BY   Vitas. ", "harira (a soup)", "\"K-pop!\"",
                          "t-shirt", "a (b) c", "(x)"};
  for (const char* in : inputs) {
    std::string once = normalize_phrase(in);
    CHECK(normalize_phrase(once) == once);
  }
}

TEST_CASE("no records extract to an empty candidate set") {
  TempDir tmp;
  const auto& r = bundled();
  nlohmann::json backend_cfg = {{"model_id", "x"}, {"missing_prompt", "error"}};
  genclient::MockBackend backend(backend_cfg);
  genclient::GenerationCache cache(tmp.path / "cache");
  genclient::GenClient client(backend, cache);
  auto outcome = extract_candidates({}, client, r, r.topic("food"), extractor_params(), 2);
  CHECK(outcome.candidates.empty());
  CHECK(outcome.unextracted.empty());
}

TEST_CASE("identical norms from two records merge with unioned provenance") {
  TempDir tmp;
  const auto& r = bundled();
  const auto& topic = r.topic("food");

  std::vector<genclient::GenerationRecord> records = {
      make_record("food", "algeria", "couscous.", 0),
      make_record("food", "algeria", "couscous with vegetables.", 1),
  };
  nlohmann::json conts = nlohmann::json::object();
  for (const auto& rec : records) {
    std::string sentence =
        prompting::generation_tail(topic, rec.variant) + " " + rec.text;
    conts[prompting::render_extraction_prompt(topic, sentence)] =
        nlohmann::json::array({"couscous"});
  }
  nlohmann::json backend_cfg = {{"model_id", "x"}, {"continuations", conts}};
  genclient::MockBackend backend(backend_cfg);
  genclient::GenerationCache cache(tmp.path / "cache");
  genclient::GenClient client(backend, cache);

  auto outcome = extract_candidates(records, client, r, topic, extractor_params(), 2);
  REQUIRE(outcome.candidates.size() == 1);
  const auto& cand = outcome.candidates[0];
  CHECK(cand.norm == "couscous");
  CHECK(cand.provenance.size() == 2);
  CHECK(outcome.refusals_skipped == 0);
}

TEST_CASE("refusal records are skipped, extractor failures are marked unextracted") {
  TempDir tmp;
  const auto& r = bundled();
  const auto& topic = r.topic("food");
  auto refusal = make_record("food", "algeria", "", 0);
  refusal.refusal = true;
  std::vector<genclient::GenerationRecord> records = {refusal,
                                                      make_record("food", "japan", "sushi.", 1)};
  // No continuations configured and missing_prompt=error: the extractor call
  // for the sushi record fails as a data error, not transport, so make a
  // transport-failing mock instead.
  nlohmann::json conts = nlohmann::json::object();
  std::string sentence = prompting::generation_tail(topic, prompting::Variant::conditioned) +
                         " " + records[1].text;
  conts[prompting::render_extraction_prompt(topic, sentence)] =
      nlohmann::json::array({"sushi"});
  nlohmann::json cfg = {{"model_id", "x"},
                        {"continuations", conts},
                        {"fail_first_attempts", 100}};
  genclient::MockBackend backend(cfg);
  genclient::GenerationCache cache(tmp.path / "cache");
  genclient::GenClientOptions opts;
  opts.max_retries = 2;
  opts.retry_backoff_ms = 1;
  genclient::GenClient client(backend, cache, nullptr, opts);

  auto outcome = extract_candidates(records, client, r, topic, extractor_params(), 1);
  CHECK(outcome.refusals_skipped == 1);
  REQUIRE(outcome.unextracted.size() == 1);
  CHECK(outcome.unextracted[0].culture == std::optional<std::string>("japan"));
  CHECK(outcome.candidates.empty());
}

TEST_CASE("extraction over a concatenation equals the merge of the parts") {
  TempDir tmp;
  const auto& r = bundled();
  const auto& topic = r.topic("clothing");

  std::vector<genclient::GenerationRecord> part_a = {
      make_record("clothing", "japan", "a kimono.", 0),
      make_record("clothing", "france", "a beret.", 0),
  };
  std::vector<genclient::GenerationRecord> part_b = {
      make_record("clothing", "japan", "a kimono and sandals.", 1),
  };
  nlohmann::json conts = nlohmann::json::object();
  auto add = [&](const genclient::GenerationRecord& rec, const char* response) {
    std::string sentence =
        prompting::generation_tail(topic, rec.variant) + " " + rec.text;
    conts[prompting::render_extraction_prompt(topic, sentence)] =
        nlohmann::json::array({response});
  };
  add(part_a[0], "kimono");
  add(part_a[1], "beret");
  add(part_b[0], "kimono; sandals");
  nlohmann::json backend_cfg = {{"model_id", "x"}, {"continuations", conts}};
  genclient::MockBackend backend(backend_cfg);
  genclient::GenerationCache cache(tmp.path / "cache");
  genclient::GenClient client(backend, cache);

  std::vector<genclient::GenerationRecord> whole = part_a;
  whole.insert(whole.end(), part_b.begin(), part_b.end());

  auto all = extract_candidates(whole, client, r, topic, extractor_params(), 2).candidates;
  auto a = extract_candidates(part_a, client, r, topic, extractor_params(), 2).candidates;
  auto b = extract_candidates(part_b, client, r, topic, extractor_params(), 2).candidates;
  auto merged = merge_candidates(a, b);

  REQUIRE(all.size() == merged.size());
  for (size_t i = 0; i < all.size(); ++i) {
    CHECK(all[i].norm == merged[i].norm);
    CHECK(all[i].provenance == merged[i].provenance);
    CHECK(all[i].surfaces == merged[i].surfaces);
  }
}

TEST_CASE("provenance points at records whose extractor response listed the surface") {
  TempDir tmp;
  const auto& r = bundled();
  const auto& topic = r.topic("food");
  std::vector<genclient::GenerationRecord> records = {
      make_record("food", "algeria", "couscous and tagine.", 0)};
  nlohmann::json conts = nlohmann::json::object();
  std::string sentence = prompting::generation_tail(topic, prompting::Variant::conditioned) +
                         " " + records[0].text;
  conts[prompting::render_extraction_prompt(topic, sentence)] =
      nlohmann::json::array({"couscous; tagine"});
  nlohmann::json backend_cfg = {{"model_id", "x"}, {"continuations", conts}};
  genclient::MockBackend backend(backend_cfg);
  genclient::GenerationCache cache(tmp.path / "cache");
  genclient::GenClient client(backend, cache);
  auto outcome = extract_candidates(records, client, r, topic, extractor_params(), 1);
  REQUIRE(outcome.candidates.size() == 2);
  // Every surface is findable in the source record by a case-insensitive scan.
  for (const auto& cand : outcome.candidates) {
    for (const auto& surface : cand.surfaces) {
      std::string lower_text = text::lower_ascii(records[0].text);
      CHECK(lower_text.find(text::lower_ascii(surface)) != std::string::npos);
    }
  }
}

TEST_CASE("candidate json round-trips") {
  CandidateSymbol c;
  c.norm = "couscous";
  c.topic = "food";
  c.surfaces = {"couscous", "Couscous"};
  c.provenance = {{std::optional<std::string>("algeria"), prompting::Variant::conditioned, 0},
                  {std::nullopt, prompting::Variant::agnostic, 3}};
  auto j = c.to_json();
  auto back = CandidateSymbol::from_json(j);
  CHECK(back.norm == c.norm);
  CHECK(back.surfaces == c.surfaces);
  CHECK(back.provenance == c.provenance);
  CHECK(back.to_json() == j);
}
