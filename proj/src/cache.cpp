#include "culturekit/cache.hpp"

#include <fstream>

#include "culturekit/digest.hpp"
#include "culturekit/errors.hpp"
#include "culturekit/io.hpp"

namespace culturekit::genclient {

namespace fs = std::filesystem;

GenerationCache::GenerationCache(fs::path dir) : dir_(std::move(dir)) {
  fs::create_directories(dir_);
}

fs::path GenerationCache::path_for(const std::string& key) const {
  return dir_ / key.substr(0, 2) / (key + ".json");
}

std::optional<nlohmann::json> GenerationCache::get(const std::string& key) const {
  fs::path p = path_for(key);
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("corrupt cache entry " + p.string() + ": " + e.what());
  }
}

void GenerationCache::put(const std::string& key, const nlohmann::json& value) const {
  io::atomic_write_file(path_for(key), value.dump());
}

std::string GenerationCache::sample_key(const std::string& model_id, const std::string& prompt,
                                        const SamplingParams& params, int sample_index) {
  std::string material = "sample\n" + model_id + "\n" + params.canonical() + "\n" +
                         std::to_string(sample_index) + "\n" + prompt;
  return digest::sha256_hex(material);
}

std::string GenerationCache::score_key(const std::string& model_id,
                                       const std::string& sentence) {
  return digest::sha256_hex("score\n" + model_id + "\n" + sentence);
}

}  // namespace culturekit::genclient
