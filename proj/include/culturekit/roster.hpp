#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace culturekit::roster {

struct Culture {
  std::string id;            // stable slug, e.g. "algeria"
  std::string country_name;  // "Algeria"
  std::string demonym;       // "Algerian", the adjective prompts use
  std::string region;        // one of the roster's region labels
};

struct Region {
  std::string name;
  std::vector<std::string> members;  // culture ids, in roster order
};

struct Topic {
  std::string id;            // slug, e.g. "favorite_music"
  std::string display_name;  // form used inside instruction text, e.g. "favorite music"
  std::string generation_template;   // continuation tail the model completes
  std::string scoring_template;      // with [phrase] and [culture] slots
  std::string calibration_sentence;  // symbol-free topic sentence
  std::vector<std::string> keywords;
};

// Immutable after load; safe to share across threads.
class Roster {
 public:
  static Roster load(const std::filesystem::path& path);
  static Roster from_json_text(std::string_view json_text, const std::string& origin);

  // Canonical byte representation; load(serialize()) round-trips exactly.
  std::string serialize() const;

  const std::string& version() const { return version_; }
  const std::vector<Culture>& cultures() const { return cultures_; }
  const std::vector<Region>& regions() const { return regions_; }
  const std::vector<Topic>& topics() const { return topics_; }

  const Culture* find_culture(std::string_view id) const;
  const Culture& culture(std::string_view id) const;  // throws DataError if absent
  const Culture* find_culture_by_demonym(std::string_view demonym) const;
  const Topic* find_topic(std::string_view id) const;
  const Topic& topic(std::string_view id) const;

  size_t culture_index(std::string_view id) const;  // position in cultures()

 private:
  void validate(const std::string& origin) const;
  void build_indexes();

  std::string version_;
  std::vector<Culture> cultures_;
  std::vector<Region> regions_;
  std::vector<Topic> topics_;
  std::map<std::string, size_t, std::less<>> culture_by_id_;
  std::map<std::string, size_t, std::less<>> culture_by_demonym_;
  std::map<std::string, size_t, std::less<>> topic_by_id_;
};

}  // namespace culturekit::roster
