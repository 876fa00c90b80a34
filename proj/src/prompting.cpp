#include "culturekit/prompting.hpp"

#include "culturekit/errors.hpp"
#include "culturekit/text.hpp"

namespace culturekit::prompting {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::conditioned: return "conditioned";
    case Variant::agnostic: return "agnostic";
    case Variant::age17: return "age17";
    case Variant::age70: return "age70";
    case Variant::male: return "male";
    case Variant::female: return "female";
  }
  return "conditioned";
}

Variant variant_from_string(std::string_view s) {
  if (s == "conditioned") return Variant::conditioned;
  if (s == "agnostic") return Variant::agnostic;
  if (s == "age17") return Variant::age17;
  if (s == "age70") return Variant::age70;
  if (s == "male") return Variant::male;
  if (s == "female") return Variant::female;
  throw UsageError("unknown prompt variant '" + std::string(s) + "'");
}

bool requires_culture(Variant v) { return v != Variant::agnostic; }

std::string instruction_head(const roster::Topic& topic) {
  return "Describe the " + topic.display_name + " of your neighbor.";
}

namespace {

std::string replace_subject_with_pronoun(const std::string& tail, const std::string& pronoun) {
  static const std::string subject = "my neighbor";
  std::string folded = text::lower_ascii(tail);
  size_t pos = folded.find(subject);
  if (pos == std::string::npos) return tail;
  std::string p = pronoun;
  if (pos == 0) p[0] = static_cast<char>(p[0] - 'a' + 'A');
  return tail.substr(0, pos) + p + tail.substr(pos + subject.size());
}

std::string nationality_sentence(const roster::Culture& culture, Variant variant) {
  switch (variant) {
    case Variant::age17:
      return "My neighbor is " + culture.demonym + " and is 17 years old.";
    case Variant::age70:
      return "My neighbor is " + culture.demonym + " and is 70 years old.";
    default:
      return "My neighbor is " + culture.demonym + ".";
  }
}

}  // namespace

std::string generation_tail(const roster::Topic& topic, Variant variant) {
  switch (variant) {
    case Variant::male:
      return replace_subject_with_pronoun(topic.generation_template, "he");
    case Variant::female:
      return replace_subject_with_pronoun(topic.generation_template, "she");
    default:
      return topic.generation_template;
  }
}

std::string render_generation_prompt(const roster::Topic& topic,
                                     const roster::Culture* culture, Variant variant) {
  if (requires_culture(variant) && culture == nullptr)
    throw UsageError("variant '" + to_string(variant) + "' requires a culture");
  if (!requires_culture(variant) && culture != nullptr)
    throw UsageError("agnostic prompts must not name a culture");

  std::string prompt = instruction_head(topic) + " ";
  if (culture) prompt += nationality_sentence(*culture, variant) + " ";
  prompt += generation_tail(topic, variant);
  return prompt;
}

std::string render_scoring_sentence(const roster::Topic& topic, std::string_view phrase,
                                    const roster::Culture& culture) {
  if (text::trim(phrase).empty()) throw UsageError("scoring phrase must be nonempty");
  std::string s = topic.scoring_template;
  size_t pos = s.find("[phrase]");
  s.replace(pos, 8, phrase);
  pos = s.find("[culture]");
  s.replace(pos, 9, culture.demonym);
  return s;
}

std::string render_calibration_sentence(const roster::Topic& topic,
                                        const roster::Culture& culture) {
  return topic.calibration_sentence + ". My neighbor is probably " + culture.demonym + ".";
}

std::string render_extraction_prompt(const roster::Topic& topic, std::string_view sentence) {
  const std::string& t = topic.display_name;
  std::string body = text::trim(sentence);
  std::string out = "Extract the " + t + " from this text: ";
  out += body;
  if (body.empty() || body.back() != '.') out += '.';
  out += " If no " + t + " present, return None.";
  out += " If multiple " + t + " entities present, separate them with ';'.";
  return out;
}

}  // namespace culturekit::prompting
