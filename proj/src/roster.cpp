#include "culturekit/roster.hpp"

#include <set>

#include "culturekit/errors.hpp"
#include "culturekit/io.hpp"
#include "json.hpp"

namespace culturekit::roster {

using nlohmann::json;

namespace {

std::string get_string(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string())
    throw ValidationError(where + ": missing or non-string field '" + key + "'");
  return it->get<std::string>();
}

}  // namespace

Roster Roster::load(const std::filesystem::path& path) {
  return from_json_text(io::read_file(path), path.string());
}

Roster Roster::from_json_text(std::string_view json_text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(origin + ": " + e.what());
  }
  if (!doc.is_object()) throw ValidationError(origin + ": roster root must be an object");

  Roster r;
  r.version_ = doc.value("version", std::string("0"));

  if (!doc.contains("regions") || !doc["regions"].is_array())
    throw ValidationError(origin + ": missing 'regions' array");
  for (const auto& name : doc["regions"]) {
    if (!name.is_string()) throw ValidationError(origin + ": region names must be strings");
    r.regions_.push_back(Region{name.get<std::string>(), {}});
  }

  if (!doc.contains("cultures") || !doc["cultures"].is_array())
    throw ValidationError(origin + ": missing 'cultures' array");
  size_t i = 0;
  for (const auto& c : doc["cultures"]) {
    std::string where = origin + ": cultures[" + std::to_string(i++) + "]";
    if (!c.is_object()) throw ValidationError(where + ": must be an object");
    Culture culture;
    culture.id = get_string(c, "id", where);
    culture.country_name = get_string(c, "country", where);
    culture.demonym = get_string(c, "demonym", where);
    culture.region = get_string(c, "region", where);
    r.cultures_.push_back(std::move(culture));
  }

  if (!doc.contains("topics") || !doc["topics"].is_array())
    throw ValidationError(origin + ": missing 'topics' array");
  i = 0;
  for (const auto& t : doc["topics"]) {
    std::string where = origin + ": topics[" + std::to_string(i++) + "]";
    if (!t.is_object()) throw ValidationError(where + ": must be an object");
    Topic topic;
    topic.id = get_string(t, "id", where);
    topic.display_name = get_string(t, "display", where);
    topic.generation_template = get_string(t, "generation_template", where);
    topic.scoring_template = get_string(t, "scoring_template", where);
    topic.calibration_sentence = get_string(t, "calibration_sentence", where);
    auto kw = t.find("keywords");
    if (kw == t.end() || !kw->is_array())
      throw ValidationError(where + ": missing 'keywords' array");
    for (const auto& k : *kw) {
      if (!k.is_string()) throw ValidationError(where + ": keywords must be strings");
      topic.keywords.push_back(k.get<std::string>());
    }
    r.topics_.push_back(std::move(topic));
  }

  r.validate(origin);
  r.build_indexes();
  return r;
}

void Roster::validate(const std::string& origin) const {
  if (cultures_.empty()) throw ValidationError(origin + ": roster has no cultures");
  if (regions_.empty()) throw ValidationError(origin + ": roster has no regions");
  if (topics_.empty()) throw ValidationError(origin + ": roster has no topics");

  std::set<std::string> region_names;
  for (const auto& reg : regions_) {
    if (reg.name.empty()) throw ValidationError(origin + ": empty region name");
    if (!region_names.insert(reg.name).second)
      throw ValidationError(origin + ": duplicate region '" + reg.name + "'");
  }

  std::set<std::string> ids, demonyms;
  for (const auto& c : cultures_) {
    if (c.id.empty() || c.country_name.empty() || c.demonym.empty())
      throw ValidationError(origin + ": culture '" + c.id + "' has empty fields");
    if (!ids.insert(c.id).second)
      throw ValidationError(origin + ": duplicate culture id '" + c.id + "'");
    if (!demonyms.insert(c.demonym).second)
      throw ValidationError(origin + ": duplicate demonym '" + c.demonym + "'");
    if (!region_names.count(c.region))
      throw ValidationError(origin + ": culture '" + c.id + "' references unknown region '" +
                            c.region + "'");
  }

  std::set<std::string> topic_ids;
  for (const auto& t : topics_) {
    if (!topic_ids.insert(t.id).second)
      throw ValidationError(origin + ": duplicate topic id '" + t.id + "'");
    if (t.display_name.empty())
      throw ValidationError(origin + ": topic '" + t.id + "' has empty display name");
    if (t.generation_template.empty() ||
        t.generation_template.find('[') != std::string::npos)
      throw ValidationError(origin + ": topic '" + t.id +
                            "' generation template must be slot-free and nonempty");
    if (t.scoring_template.find("[phrase]") == std::string::npos ||
        t.scoring_template.find("[culture]") == std::string::npos)
      throw ValidationError(origin + ": topic '" + t.id +
                            "' scoring template needs [phrase] and [culture] slots");
    if (t.calibration_sentence.empty())
      throw ValidationError(origin + ": topic '" + t.id + "' has no calibration sentence");
    if (t.keywords.empty())
      throw ValidationError(origin + ": topic '" + t.id + "' has an empty keyword list");
  }
}

void Roster::build_indexes() {
  std::map<std::string, size_t> region_pos;
  for (size_t i = 0; i < regions_.size(); ++i) region_pos[regions_[i].name] = i;
  for (size_t i = 0; i < cultures_.size(); ++i) {
    culture_by_id_[cultures_[i].id] = i;
    culture_by_demonym_[cultures_[i].demonym] = i;
    regions_[region_pos[cultures_[i].region]].members.push_back(cultures_[i].id);
  }
  for (size_t i = 0; i < topics_.size(); ++i) topic_by_id_[topics_[i].id] = i;
}

std::string Roster::serialize() const {
  json doc;
  doc["version"] = version_;
  doc["regions"] = json::array();
  for (const auto& r : regions_) doc["regions"].push_back(r.name);
  doc["cultures"] = json::array();
  for (const auto& c : cultures_) {
    doc["cultures"].push_back(
        {{"id", c.id}, {"country", c.country_name}, {"demonym", c.demonym}, {"region", c.region}});
  }
  doc["topics"] = json::array();
  for (const auto& t : topics_) {
    doc["topics"].push_back({{"id", t.id},
                             {"display", t.display_name},
                             {"generation_template", t.generation_template},
                             {"scoring_template", t.scoring_template},
                             {"calibration_sentence", t.calibration_sentence},
                             {"keywords", t.keywords}});
  }
  return doc.dump(2) + "\n";
}

const Culture* Roster::find_culture(std::string_view id) const {
  auto it = culture_by_id_.find(id);
  return it == culture_by_id_.end() ? nullptr : &cultures_[it->second];
}

const Culture& Roster::culture(std::string_view id) const {
  const Culture* c = find_culture(id);
  if (!c) throw DataError("unknown culture id '" + std::string(id) + "'");
  return *c;
}

const Culture* Roster::find_culture_by_demonym(std::string_view demonym) const {
  auto it = culture_by_demonym_.find(demonym);
  return it == culture_by_demonym_.end() ? nullptr : &cultures_[it->second];
}

const Topic* Roster::find_topic(std::string_view id) const {
  auto it = topic_by_id_.find(id);
  return it == topic_by_id_.end() ? nullptr : &topics_[it->second];
}

const Topic& Roster::topic(std::string_view id) const {
  const Topic* t = find_topic(id);
  if (!t) throw DataError("unknown topic id '" + std::string(id) + "'");
  return *t;
}

size_t Roster::culture_index(std::string_view id) const {
  auto it = culture_by_id_.find(id);
  if (it == culture_by_id_.end())
    throw DataError("unknown culture id '" + std::string(id) + "'");
  return it->second;
}

}  // namespace culturekit::roster
