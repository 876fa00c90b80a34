#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "culturekit/errors.hpp"
#include "culturekit/prompting.hpp"
#include "culturekit/roster.hpp"
#include "doctest.h"

using namespace culturekit;
using prompting::Variant;

static const roster::Roster& bundled() {
  static roster::Roster r = roster::Roster::load(CK_SOURCE_DIR "/data/roster.json");
  return r;
}

TEST_CASE("conditioned food prompt for an Algerian neighbor") {
  const auto& r = bundled();
  std::string p = prompting::render_generation_prompt(r.topic("food"), &r.culture("algeria"),
                                                      Variant::conditioned);
  CHECK(p ==
        "Describe the food of your neighbor. My neighbor is Algerian. "
        "For dinner, my neighbor probably likes to eat");
}

TEST_CASE("agnostic clothing prompt omits the nationality sentence") {
  const auto& r = bundled();
  std::string p =
      prompting::render_generation_prompt(r.topic("clothing"), nullptr, Variant::agnostic);
  CHECK(p == "Describe the clothing of your neighbor. My neighbor is probably wearing");
}

TEST_CASE("age variant mentions the age after the nationality") {
  const auto& r = bundled();
  std::string p = prompting::render_generation_prompt(r.topic("exercise_routine"),
                                                      &r.culture("china"), Variant::age17);
  CHECK(p.find("My neighbor is Chinese and is 17 years old.") != std::string::npos);
  CHECK(p.find("is 17 years old") != std::string::npos);

  std::string p70 = prompting::render_generation_prompt(r.topic("exercise_routine"),
                                                        &r.culture("china"), Variant::age70);
  CHECK(p70.find("is 70 years old") != std::string::npos);
}

TEST_CASE("gender variants swap the tail subject for a pronoun") {
  const auto& r = bundled();
  std::string male = prompting::render_generation_prompt(r.topic("food"),
                                                         &r.culture("algeria"), Variant::male);
  CHECK(male ==
        "Describe the food of your neighbor. My neighbor is Algerian. "
        "For dinner, he probably likes to eat");
  std::string female = prompting::render_generation_prompt(
      r.topic("clothing"), &r.culture("algeria"), Variant::female);
  CHECK(female ==
        "Describe the clothing of your neighbor. My neighbor is Algerian. "
        "She is probably wearing");
}

TEST_CASE("demographic variant without a culture is a usage error") {
  const auto& r = bundled();
  CHECK_THROWS_AS(prompting::render_generation_prompt(r.topic("food"), nullptr, Variant::age17),
                  UsageError);
  CHECK_THROWS_AS(
      prompting::render_generation_prompt(r.topic("food"), nullptr, Variant::conditioned),
      UsageError);
  CHECK_THROWS_AS(prompting::render_generation_prompt(r.topic("food"), &r.culture("algeria"),
                                                      Variant::agnostic),
                  UsageError);
}

TEST_CASE("scoring sentences fill both template slots") {
  const auto& r = bundled();
  CHECK(prompting::render_scoring_sentence(r.topic("food"), "couscous", r.culture("algeria")) ==
        "For dinner, my neighbor probably likes to eat couscous. "
        "My neighbor is probably Algerian.");
  CHECK(prompting::render_scoring_sentence(r.topic("clothing"), "kimono", r.culture("japan")) ==
        "My neighbor is probably wearing kimono. My neighbor is probably Japanese.");
}

TEST_CASE("empty scoring phrase is rejected") {
  const auto& r = bundled();
  CHECK_THROWS_AS(prompting::render_scoring_sentence(r.topic("food"), "", r.culture("algeria")),
                  UsageError);
  CHECK_THROWS_AS(
      prompting::render_scoring_sentence(r.topic("food"), "   ", r.culture("algeria")),
      UsageError);
}

TEST_CASE("calibration sentences append the culture suffix") {
  const auto& r = bundled();
  CHECK(prompting::render_calibration_sentence(r.topic("favorite_music"),
                                               r.culture("albania")) ==
        "My neighbor likes listening to music. My neighbor is probably Albanian.");
  CHECK(prompting::render_calibration_sentence(r.topic("statue"), r.culture("france")) ==
        "On the front door of the house, my neighbor has a statue. "
        "My neighbor is probably French.");
}

TEST_CASE("rendering is deterministic") {
  const auto& r = bundled();
  auto once = prompting::render_calibration_sentence(r.topic("food"), r.culture("japan"));
  auto twice = prompting::render_calibration_sentence(r.topic("food"), r.culture("japan"));
  CHECK(once == twice);
}

TEST_CASE("extraction prompt carries all three topic slots and the separator rule") {
  const auto& r = bundled();
  std::string p = prompting::render_extraction_prompt(
      r.topic("food"), "For dinner, my neighbor probably likes to eat couscous");
  CHECK(p ==
        "Extract the food from this text: For dinner, my neighbor probably likes to eat "
        "couscous. If no food present, return None. If multiple food entities present, "
        "separate them with ';'.");
  CHECK(p.find("separate them with ';'") != std::string::npos);
}

TEST_CASE("extraction prompt uses display names, not slugs") {
  const auto& r = bundled();
  std::string p = prompting::render_extraction_prompt(r.topic("picture"), "some text");
  CHECK(p.find("picture") != std::string::npos);
  std::string q = prompting::render_extraction_prompt(r.topic("favorite_show_or_movie"), "x");
  CHECK(q.find("favorite show or movie") != std::string::npos);
  CHECK(q.find("favorite_show_or_movie") == std::string::npos);
}

TEST_CASE("no rendered prompt contains an unresolved placeholder") {
  const auto& r = bundled();
  const Variant variants[] = {Variant::conditioned, Variant::agnostic, Variant::age17,
                              Variant::age70,       Variant::male,     Variant::female};
  for (const auto& topic : r.topics()) {
    for (Variant v : variants) {
      const roster::Culture* culture =
          prompting::requires_culture(v) ? &r.culture("algeria") : nullptr;
      std::string p = prompting::render_generation_prompt(topic, culture, v);
      CHECK(p.find('[') == std::string::npos);
    }
    std::string s =
        prompting::render_scoring_sentence(topic, "a phrase", r.culture("japan"));
    CHECK(s.find('[') == std::string::npos);
    std::string c = prompting::render_calibration_sentence(topic, r.culture("japan"));
    CHECK(c.find('[') == std::string::npos);
  }
}

TEST_CASE("removing the nationality sentence recovers the agnostic prompt") {
  const auto& r = bundled();
  for (const auto& topic : r.topics()) {
    for (const auto& culture : r.cultures()) {
      std::string conditioned =
          prompting::render_generation_prompt(topic, &culture, Variant::conditioned);
      std::string agnostic =
          prompting::render_generation_prompt(topic, nullptr, Variant::agnostic);
      std::string sentence = "My neighbor is " + culture.demonym + ". ";
      size_t pos = conditioned.find(sentence);
      REQUIRE(pos != std::string::npos);
      std::string stripped = conditioned.erase(pos, sentence.size());
      CHECK(stripped == agnostic);
    }
  }
}
