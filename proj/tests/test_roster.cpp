#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <set>

#include "culturekit/errors.hpp"
#include "culturekit/roster.hpp"
#include "doctest.h"

using culturekit::ValidationError;
using culturekit::roster::Roster;

static const char* kRosterPath = CK_SOURCE_DIR "/data/roster.json";

TEST_CASE("bundled roster loads with expected shape") {
  Roster r = Roster::load(kRosterPath);
  CHECK(r.cultures().size() == 110);
  CHECK(r.regions().size() == 12);
  CHECK(r.topics().size() == 8);
}

TEST_CASE("algeria resolves to its region and demonym") {
  Roster r = Roster::load(kRosterPath);
  const auto& c = r.culture("algeria");
  CHECK(c.country_name == "Algeria");
  CHECK(c.demonym == "Algerian");
  CHECK(c.region == "African-Islamic");
}

TEST_CASE("demonyms are a bijection onto cultures") {
  Roster r = Roster::load(kRosterPath);
  std::set<std::string> seen;
  for (const auto& c : r.cultures()) {
    CHECK(!c.demonym.empty());
    CHECK(seen.insert(c.demonym).second);
    const auto* back = r.find_culture_by_demonym(c.demonym);
    REQUIRE(back != nullptr);
    CHECK(back->id == c.id);
  }
}

TEST_CASE("expected topic ids and region labels are all present") {
  Roster r = Roster::load(kRosterPath);
  const char* topic_ids[] = {"favorite_music", "music_instrument",   "exercise_routine",
                             "favorite_show_or_movie", "food",       "picture",
                             "statue",         "clothing"};
  for (const char* id : topic_ids) CHECK(r.find_topic(id) != nullptr);

  std::set<std::string> regions;
  for (const auto& reg : r.regions()) regions.insert(reg.name);
  const char* labels[] = {"Eastern-European", "African-Islamic", "Western-European",
                          "Latin-American",   "English-Speaking", "Central-Asian",
                          "South-Asian",      "Baltic",          "Nordic",
                          "East-Asian",       "Southeast-Asian", "Middle-Eastern"};
  for (const char* label : labels) CHECK(regions.count(label) == 1);
}

TEST_CASE("every culture belongs to exactly one region and the union covers all") {
  Roster r = Roster::load(kRosterPath);
  std::set<std::string> members;
  size_t total = 0;
  for (const auto& reg : r.regions()) {
    total += reg.members.size();
    for (const auto& id : reg.members) CHECK(members.insert(id).second);
  }
  CHECK(total == r.cultures().size());
  CHECK(members.size() == r.cultures().size());
}

TEST_CASE("finland sits in the nordic region only") {
  Roster r = Roster::load(kRosterPath);
  CHECK(r.culture("finland").region == "Nordic");
}

TEST_CASE("serialize then load round-trips to identical bytes") {
  Roster r = Roster::load(kRosterPath);
  std::string s1 = r.serialize();
  Roster r2 = Roster::from_json_text(s1, "mem");
  CHECK(r2.serialize() == s1);
}

TEST_CASE("empty culture list is rejected") {
  const char* doc = R"({"version":"1","regions":["X"],"cultures":[],
      "topics":[{"id":"t","display":"t","generation_template":"a",
                 "scoring_template":"[phrase] [culture]",
                 "calibration_sentence":"c","keywords":["k"]}]})";
  CHECK_THROWS_AS(Roster::from_json_text(doc, "mem"), ValidationError);
}

TEST_CASE("duplicate culture ids are rejected") {
  const char* doc = R"({"version":"1","regions":["X"],
      "cultures":[{"id":"a","country":"A","demonym":"An","region":"X"},
                  {"id":"a","country":"B","demonym":"Bn","region":"X"}],
      "topics":[{"id":"t","display":"t","generation_template":"a",
                 "scoring_template":"[phrase] [culture]",
                 "calibration_sentence":"c","keywords":["k"]}]})";
  CHECK_THROWS_AS(Roster::from_json_text(doc, "mem"), ValidationError);
}

TEST_CASE("missing fields produce a schema error naming the entry") {
  const char* doc = R"({"version":"1","regions":["X"],
      "cultures":[{"id":"a","country":"A","region":"X"}],
      "topics":[]})";
  try {
    Roster::from_json_text(doc, "mem");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("cultures[0]") != std::string::npos);
    CHECK(std::string(e.what()).find("demonym") != std::string::npos);
  }
}

TEST_CASE("keyword lists are nonempty for every topic") {
  Roster r = Roster::load(kRosterPath);
  for (const auto& t : r.topics()) CHECK(!t.keywords.empty());
}
