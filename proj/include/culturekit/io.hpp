#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace culturekit::io {

std::string read_file(const std::filesystem::path& path);

// Writes via a temp file in the same directory followed by rename, so readers
// never observe a half-written artifact. Creates parent directories.
void atomic_write_file(const std::filesystem::path& path, std::string_view content);

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& rows);

// Shortest round-trip decimal form, stable across runs.
std::string format_double(double v);

// Minimal RFC-4180 style writer; fields are quoted only when needed.
class CsvWriter {
 public:
  void row(const std::vector<std::string>& fields);
  const std::string& str() const { return out_; }

 private:
  std::string out_;
};

// Parses a CSV produced by CsvWriter (quotes and embedded commas supported).
std::vector<std::vector<std::string>> parse_csv(std::string_view content);

std::string now_utc_iso8601();

}  // namespace culturekit::io
