#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace culturekit::text {

// ASCII-only folding; bytes >= 0x80 pass through untouched.
std::string lower_ascii(std::string_view s);

std::string trim(std::string_view s);

// Runs of whitespace collapse to a single space; leading/trailing removed.
std::string collapse_ws(std::string_view s);

bool is_word_char(unsigned char c);

// Case-insensitive whole-word (or whole-phrase) search. Boundaries are
// transitions between alphanumeric and non-alphanumeric bytes, so
// "traditionally" does not contain the word "traditional".
bool contains_word_ci(std::string_view haystack, std::string_view phrase);

std::vector<std::string> split(std::string_view s, char sep);

// Lowercased alphanumeric runs; everything else is a separator
// ("t-shirt" -> {"t", "shirt"}).
std::vector<std::string> word_tokens(std::string_view s);

}  // namespace culturekit::text
