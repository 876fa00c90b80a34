#pragma once

#include <string>
#include <string_view>

#include "culturekit/roster.hpp"

namespace culturekit::prompting {

enum class Variant { conditioned, agnostic, age17, age70, male, female };

std::string to_string(Variant v);
Variant variant_from_string(std::string_view s);

// Every variant except agnostic names a culture.
bool requires_culture(Variant v);

// "Describe the <topic> of your neighbor."
std::string instruction_head(const roster::Topic& topic);

// The continuation tail the model completes. Gender variants replace the
// tail's "my neighbor" subject with the pronoun.
std::string generation_tail(const roster::Topic& topic, Variant variant);

// Full prompt: instruction head, optional nationality sentence, tail.
// culture must be null for agnostic and non-null otherwise.
std::string render_generation_prompt(const roster::Topic& topic,
                                     const roster::Culture* culture, Variant variant);

// "<tail> <phrase>. My neighbor is probably <demonym>."
std::string render_scoring_sentence(const roster::Topic& topic, std::string_view phrase,
                                    const roster::Culture& culture);

// Symbol-free topic sentence with the same culture suffix as scoring
// sentences, used to neutralize a backend's prior over cultures.
std::string render_calibration_sentence(const roster::Topic& topic,
                                        const roster::Culture& culture);

std::string render_extraction_prompt(const roster::Topic& topic, std::string_view sentence);

}  // namespace culturekit::prompting
