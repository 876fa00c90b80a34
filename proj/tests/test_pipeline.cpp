#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>

#include "culturekit/errors.hpp"
#include "culturekit/io.hpp"
#include "culturekit/pipeline.hpp"
#include "doctest.h"
#include "fixture.hpp"

using namespace culturekit;
using namespace culturekit::pipeline;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("ck_pipe_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::map<std::string, std::vector<std::string>> csv_by_header(const fs::path& path) {
  auto rows = io::parse_csv(io::read_file(path));
  REQUIRE(!rows.empty());
  std::map<std::string, std::vector<std::string>> out;
  for (size_t c = 0; c < rows[0].size(); ++c) {
    for (size_t i = 1; i < rows.size(); ++i) out[rows[0][c]].push_back(rows[i][c]);
  }
  return out;
}

// row lookup helper: returns the row (as header->value) where all the given
// key columns match.
std::map<std::string, std::string> find_row(
    const fs::path& path, const std::map<std::string, std::string>& where) {
  auto rows = io::parse_csv(io::read_file(path));
  REQUIRE(!rows.empty());
  const auto& header = rows[0];
  for (size_t i = 1; i < rows.size(); ++i) {
    bool match = true;
    for (const auto& [col, want] : where) {
      auto it = std::find(header.begin(), header.end(), col);
      REQUIRE(it != header.end());
      size_t idx = static_cast<size_t>(it - header.begin());
      if (rows[i][idx] != want) match = false;
    }
    if (match) {
      std::map<std::string, std::string> out;
      for (size_t c = 0; c < header.size(); ++c) out[header[c]] = rows[i][c];
      return out;
    }
  }
  FAIL("no row matching filter in " << path.string());
  return {};
}

}  // namespace

TEST_CASE("full mock pipeline produces the hand-computed analytics") {
  TempDir tmp;
  auto fixture = ckfix::make_fixture(tmp.path / "fx");
  Config config = Config::load(fixture.config_path);
  fs::path ws = tmp.path / "ws";

  for (const auto& stage : ckfix::all_stages())
    CHECK(run_stage(stage, config, ws) == 0);

  ckfix::Expected expected;
  fs::path report = ws / "report";

  {  // the report directory holds six CSVs plus metadata
    const char* files[] = {"markedness.csv", "markedness_regions.csv", "diversity.csv",
                           "overlap.csv",    "ablation.csv",           "correlation.csv",
                           "run_metadata.json"};
    size_t count = 0;
    for (const char* f : files) {
      CHECK(fs::exists(report / f));
      ++count;
    }
    size_t on_disk = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(report)) ++on_disk;
    CHECK(on_disk == count);
  }

  {  // diversity matches the hand counts
    for (const auto& [key, want] : expected.diversity) {
      auto row = find_row(report / "diversity.csv",
                          {{"topic", key.first}, {"name", key.second}, {"scope", "culture"}});
      CHECK(row["count"] == std::to_string(want));
    }
    auto region = find_row(report / "diversity.csv",
                           {{"topic", "food"}, {"name", "African-Islamic"}});
    CHECK(std::stod(region["count"]) == doctest::Approx(3.0));
  }

  {  // overlap matches the hand rates
    for (const auto& [key, want] : expected.overlap) {
      auto row = find_row(report / "overlap.csv",
                          {{"topic", key.first}, {"culture", key.second}});
      CHECK(std::stod(row["overlap_rate"]) == doctest::Approx(want).epsilon(1e-12));
    }
  }

  {  // ablation matches the hand rates with zero variance
    for (const auto& [key, want] : expected.ablation) {
      auto row = find_row(report / "ablation.csv",
                          {{"topic", key.first}, {"variant", key.second}});
      CHECK(std::stod(row["hit_rate_mean"]) == doctest::Approx(want.first).epsilon(1e-12));
      CHECK(std::stod(row["new_rate_mean"]) == doctest::Approx(want.second).epsilon(1e-12));
      CHECK(std::stod(row["hit_rate_variance"]) == doctest::Approx(0.0));
      CHECK(std::stod(row["new_rate_variance"]) == doctest::Approx(0.0));
    }
  }

  {  // markedness matches the hand counts
    for (const auto& [key, want] : expected.marks) {
      auto row = find_row(report / "markedness.csv",
                          {{"topic", key.first}, {"culture", key.second}});
      CHECK(row["total"] == std::to_string(std::get<0>(want)));
      CHECK(row["vocab_marked"] == std::to_string(std::get<1>(want)));
      CHECK(row["paren_marked"] == std::to_string(std::get<2>(want)));
    }
  }

  {  // correlation matches the hand tau values
    for (const auto& [topic, want] : expected.correlation) {
      auto row = find_row(report / "correlation.csv", {{"topic", topic}});
      CHECK(std::stod(row["tau"]) == doctest::Approx(std::get<0>(want)).epsilon(1e-12));
      CHECK(row["n"] == std::to_string(std::get<1>(want)));
      CHECK(row["strength"] == std::get<2>(want));
    }
  }

  {  // metadata carries refusal counts, calibration flag and symbol source
    auto meta = nlohmann::json::parse(io::read_file(report / "run_metadata.json"));
    for (const auto& [topic, n] : expected.refusals)
      CHECK(meta.at("refusals").at("mock-m").at(topic).get<long>() == n);
    CHECK(meta.at("models")[0].at("calibrate") == false);
    CHECK(meta.at("models")[0].at("supports_logprobs") == true);
    CHECK(meta.at("models")[0].at("symbol_source") == "assigned");
    CHECK(meta.at("sampling").at("temperature") == 1.0);
    CHECK(meta.at("assignment_threshold") == "softmax_mean");
  }

  {  // rerunning a completed stage is a no-op
    std::string manifest_before = io::read_file(ws / "manifest.json");
    CHECK(run_stage("generate", config, ws) == 0);
    CHECK(run_stage("metrics", config, ws) == 0);
    CHECK(io::read_file(ws / "manifest.json") == manifest_before);
  }
}

TEST_CASE("stage dependencies are enforced with actionable errors") {
  TempDir tmp;
  auto fixture = ckfix::make_fixture(tmp.path / "fx");
  Config config = Config::load(fixture.config_path);
  fs::path ws = tmp.path / "ws";

  try {
    run_stage("extract", config, ws);
    FAIL("expected DependencyError");
  } catch (const DependencyError& e) {
    CHECK(std::string(e.what()).find("generate/mock-m") != std::string::npos);
  }
  CHECK_THROWS_AS(run_stage("assign", config, ws), DependencyError);
  CHECK_THROWS_AS(run_stage("report", config, ws), DependencyError);
}

TEST_CASE("a backend without logprobs gates assignment and falls back to candidates") {
  TempDir tmp;
  auto fixture = ckfix::make_fixture(tmp.path / "fx", /*logprobs_model=*/false);
  Config config = Config::load(fixture.config_path);
  fs::path ws = tmp.path / "ws";

  CHECK(run_stage("generate", config, ws) == 0);
  CHECK(run_stage("generate-agnostic", config, ws) == 0);
  CHECK(run_stage("generate-demographic", config, ws) == 0);
  CHECK(run_stage("extract", config, ws) == 0);

  try {
    run_stage("assign", config, ws);
    FAIL("expected CapabilityError");
  } catch (const CapabilityError& e) {
    std::string msg = e.what();
    CHECK(msg.find("log-probabilities") != std::string::npos);
    CHECK(msg.find("supports_logprobs") != std::string::npos);
    CHECK(msg.find("candidate symbols") != std::string::npos);
  }

  // The pipeline proceeds on candidate symbols.
  CHECK(run_stage("mark", config, ws) == 0);
  CHECK(run_stage("metrics", config, ws) == 0);
  CHECK(run_stage("report", config, ws) == 0);
  auto meta = nlohmann::json::parse(io::read_file(ws / "report" / "run_metadata.json"));
  CHECK(meta.at("models")[0].at("symbol_source") == "candidates");

  // In this fixture every assigned symbol also has conditioned provenance in
  // exactly its own culture, so the fallback diversity equals the hand
  // counts too.
  ckfix::Expected expected;
  for (const auto& [key, want] : expected.diversity) {
    auto row = find_row(ws / "report" / "diversity.csv",
                        {{"topic", key.first}, {"name", key.second}, {"scope", "culture"}});
    CHECK(row["count"] == std::to_string(want));
  }
}

TEST_CASE("transport shortfalls mark the stage partial and resumable") {
  TempDir tmp;
  auto fixture = ckfix::make_fixture(tmp.path / "fx");
  // Break the first two upstream calls; with one retry each, the first two
  // jobs (sequential, parallelism 1) fall short.
  nlohmann::json config_json = fixture.config;
  config_json["models"][0]["backend"]["fail_first_attempts"] = 2;
  config_json["models"][0]["parallelism"] = 1;
  config_json["models"][0]["max_retries"] = 1;
  config_json["models"][0]["retry_backoff_ms"] = 1;
  fs::path broken_config = tmp.path / "fx" / "config_broken.json";
  io::atomic_write_file(broken_config, config_json.dump(2));

  fs::path ws = tmp.path / "ws";
  Config broken = Config::load(broken_config);
  CHECK(run_stage("generate", broken, ws) == 3);
  fs::path marker = ws / "records" / "mock-m" / "conditioned" / "_shortfall.json";
  CHECK(fs::exists(marker));
  auto shortfall = nlohmann::json::parse(io::read_file(marker));
  CHECK(shortfall.at("shortfalls").size() == 2);

  // extract refuses to run on a partial generate
  Config config = Config::load(fixture.config_path);
  CHECK_THROWS_AS(run_stage("extract", broken, ws), DependencyError);

  // Rerun with a healthy backend: cached samples replay, missing ones fill in.
  CHECK(run_stage("generate", config, ws) == 0);
  CHECK_FALSE(fs::exists(marker));
  CHECK(run_stage("generate-agnostic", config, ws) == 0);
  CHECK(run_stage("generate-demographic", config, ws) == 0);
  CHECK(run_stage("extract", config, ws) == 0);
}

TEST_CASE("the workspace lock admits one stage at a time") {
  TempDir tmp;
  auto fixture = ckfix::make_fixture(tmp.path / "fx");
  Config config = Config::load(fixture.config_path);
  fs::path ws = tmp.path / "ws";
  fs::create_directories(ws);
  { std::ofstream(ws / "lock") << "held\n"; }
  CHECK_THROWS_AS(run_stage("generate", config, ws), UsageError);
  fs::remove(ws / "lock");
  CHECK(run_stage("generate", config, ws) == 0);
}

TEST_CASE("config validation catches malformed inputs") {
  TempDir tmp;
  io::atomic_write_file(tmp.path / "bad.json", "{not json");
  CHECK_THROWS_AS(Config::load(tmp.path / "bad.json"), ConfigError);

  io::atomic_write_file(tmp.path / "empty.json", "{}");
  CHECK_THROWS_AS(Config::load(tmp.path / "empty.json"), ConfigError);

  nlohmann::json no_models = {{"roster", "r.json"}, {"models", nlohmann::json::array()}};
  io::atomic_write_file(tmp.path / "nomodels.json", no_models.dump());
  CHECK_THROWS_AS(Config::load(tmp.path / "nomodels.json"), ConfigError);
}
