#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "culturekit/backend.hpp"
#include "json.hpp"

namespace culturekit::genclient {

// Content-addressed store of backend responses, one JSON file per key under
// <dir>/<k[0:2]>/<k>.json. Writes are atomic, so concurrent puts of the same
// key resolve last-write-wins. Safe to share between workspaces.
class GenerationCache {
 public:
  explicit GenerationCache(std::filesystem::path dir);

  std::optional<nlohmann::json> get(const std::string& key) const;
  void put(const std::string& key, const nlohmann::json& value) const;

  static std::string sample_key(const std::string& model_id, const std::string& prompt,
                                const SamplingParams& params, int sample_index);
  static std::string score_key(const std::string& model_id, const std::string& sentence);

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path path_for(const std::string& key) const;
  std::filesystem::path dir_;
};

}  // namespace culturekit::genclient
