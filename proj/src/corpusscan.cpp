#include "culturekit/corpusscan.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <deque>
#include <mutex>
#include <set>

#include "culturekit/errors.hpp"
#include "culturekit/io.hpp"
#include "culturekit/parallel.hpp"
#include "culturekit/text.hpp"

namespace culturekit::corpusscan {

namespace fs = std::filesystem;

PatternSet PatternSet::from_roster(const roster::Roster& roster) {
  PatternSet set;
  for (const auto& c : roster.cultures()) {
    set.patterns.push_back({c.demonym, PatternClass::demonym, c.id});
    set.patterns.push_back({c.country_name, PatternClass::country_name, c.id});
  }
  for (const auto& t : roster.topics())
    for (const auto& k : t.keywords)
      set.patterns.push_back({k, PatternClass::topic_keyword, t.id});

  auto key = [](const Pattern& p) {
    return std::tuple(text::lower_ascii(p.needle), p.cls, p.owner);
  };
  std::sort(set.patterns.begin(), set.patterns.end(),
            [&](const Pattern& a, const Pattern& b) { return key(a) < key(b); });
  set.patterns.erase(std::unique(set.patterns.begin(), set.patterns.end(),
                                 [&](const Pattern& a, const Pattern& b) {
                                   return key(a) == key(b);
                                 }),
                     set.patterns.end());
  for (const auto& p : set.patterns)
    if (text::trim(p.needle).empty())
      throw ValidationError("pattern set contains an empty pattern for '" + p.owner + "'");
  return set;
}

namespace {

PatternClass pattern_class_from_string(std::string_view s) {
  if (s == "demonym") return PatternClass::demonym;
  if (s == "country_name") return PatternClass::country_name;
  if (s == "topic_keyword") return PatternClass::topic_keyword;
  throw ValidationError("unknown pattern class '" + std::string(s) + "'");
}

std::string to_string(PatternClass cls) {
  switch (cls) {
    case PatternClass::demonym: return "demonym";
    case PatternClass::country_name: return "country_name";
    case PatternClass::topic_keyword: return "topic_keyword";
  }
  return "demonym";
}

}  // namespace

PatternSet PatternSet::load(const fs::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  PatternSet set;
  for (const auto& p : doc.at("patterns")) {
    Pattern pat;
    pat.needle = p.at("needle").get<std::string>();
    pat.cls = pattern_class_from_string(p.at("class").get<std::string>());
    pat.owner = p.at("owner").get<std::string>();
    if (text::trim(pat.needle).empty())
      throw ValidationError(path.string() + ": empty pattern for '" + pat.owner + "'");
    set.patterns.push_back(std::move(pat));
  }
  if (set.patterns.empty()) throw ValidationError(path.string() + ": no patterns");
  return set;
}

nlohmann::json PatternSet::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : patterns)
    arr.push_back({{"needle", p.needle}, {"class", to_string(p.cls)}, {"owner", p.owner}});
  return {{"patterns", arr}};
}

namespace {

inline unsigned char fold_byte(unsigned char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<unsigned char>(c - 'A' + 'a') : c;
}

}  // namespace

MultiPatternMatcher::MultiPatternMatcher(const PatternSet& set) : patterns_(set.patterns) {
  if (patterns_.empty()) throw ValidationError("matcher needs at least one pattern");

  auto new_node = [&] {
    Node n;
    n.next.fill(-1);
    nodes_.push_back(std::move(n));
    return static_cast<int32_t>(nodes_.size() - 1);
  };
  new_node();  // root = 0

  // Trie over folded pattern bytes.
  pattern_len_.reserve(patterns_.size());
  for (size_t pid = 0; pid < patterns_.size(); ++pid) {
    std::string needle = text::lower_ascii(patterns_[pid].needle);
    pattern_len_.push_back(needle.size());
    int32_t cur = 0;
    for (unsigned char c : needle) {
      if (nodes_[static_cast<size_t>(cur)].next[c] < 0) {
        int32_t nxt = new_node();
        nodes_[static_cast<size_t>(cur)].next[c] = nxt;
      }
      cur = nodes_[static_cast<size_t>(cur)].next[c];
    }
    nodes_[static_cast<size_t>(cur)].outputs.push_back(static_cast<int32_t>(pid));
  }

  // BFS fail links, flattened into a full goto table; outputs of the fail
  // target are merged in so matching never walks fail chains.
  std::vector<int32_t> fail(nodes_.size(), 0);
  std::deque<int32_t> queue;
  for (int c = 0; c < 256; ++c) {
    int32_t nxt = nodes_[0].next[c];
    if (nxt < 0) {
      nodes_[0].next[c] = 0;
    } else {
      fail[static_cast<size_t>(nxt)] = 0;
      queue.push_back(nxt);
    }
  }
  while (!queue.empty()) {
    int32_t u = queue.front();
    queue.pop_front();
    const auto& fail_outputs = nodes_[static_cast<size_t>(fail[static_cast<size_t>(u)])].outputs;
    auto& u_outputs = nodes_[static_cast<size_t>(u)].outputs;
    u_outputs.insert(u_outputs.end(), fail_outputs.begin(), fail_outputs.end());
    for (int c = 0; c < 256; ++c) {
      int32_t v = nodes_[static_cast<size_t>(u)].next[c];
      int32_t f = nodes_[static_cast<size_t>(fail[static_cast<size_t>(u)])].next[c];
      if (v < 0) {
        nodes_[static_cast<size_t>(u)].next[c] = f;
      } else {
        fail[static_cast<size_t>(v)] = f;
        queue.push_back(v);
      }
    }
  }
}

DocMatches MultiPatternMatcher::match_document(std::string_view doc) const {
  DocMatches m;
  int32_t state = 0;
  for (size_t i = 0; i < doc.size(); ++i) {
    state = nodes_[static_cast<size_t>(state)].next[fold_byte(
        static_cast<unsigned char>(doc[i]))];
    for (int32_t pid : nodes_[static_cast<size_t>(state)].outputs) {
      size_t len = pattern_len_[static_cast<size_t>(pid)];
      size_t start = i + 1 - len;
      bool left_ok =
          start == 0 || !text::is_word_char(static_cast<unsigned char>(doc[start - 1]));
      bool right_ok =
          i + 1 == doc.size() || !text::is_word_char(static_cast<unsigned char>(doc[i + 1]));
      if (!left_ok || !right_ok) continue;
      const Pattern& p = patterns_[static_cast<size_t>(pid)];
      switch (p.cls) {
        case PatternClass::demonym:
          m.cultures.insert(p.owner);
          m.cultures_demonym.insert(p.owner);
          break;
        case PatternClass::country_name:
          m.cultures.insert(p.owner);
          m.cultures_country.insert(p.owner);
          break;
        case PatternClass::topic_keyword:
          m.topics.insert(p.owner);
          break;
      }
    }
  }
  return m;
}

void CooccurrenceCounts::add_document(const DocMatches& m, size_t doc_bytes) {
  ++docs_scanned;
  bytes_scanned += static_cast<long long>(doc_bytes);
  for (const auto& c : m.cultures) ++culture_docs[c];
  for (const auto& c : m.cultures_demonym) ++culture_docs_demonym[c];
  for (const auto& c : m.cultures_country) ++culture_docs_country[c];
  for (const auto& c : m.cultures)
    for (const auto& t : m.topics) ++culture_topic_docs[{c, t}];
}

void CooccurrenceCounts::merge(const CooccurrenceCounts& other) {
  for (const auto& [k, v] : other.culture_docs) culture_docs[k] += v;
  for (const auto& [k, v] : other.culture_docs_demonym) culture_docs_demonym[k] += v;
  for (const auto& [k, v] : other.culture_docs_country) culture_docs_country[k] += v;
  for (const auto& [k, v] : other.culture_topic_docs) culture_topic_docs[k] += v;
  docs_scanned += other.docs_scanned;
  bytes_scanned += other.bytes_scanned;
  warnings += other.warnings;
  failed_shards.insert(failed_shards.end(), other.failed_shards.begin(),
                       other.failed_shards.end());
}

CorpusFormat corpus_format_from_string(std::string_view s) {
  if (s == "lines") return CorpusFormat::lines;
  if (s == "length-prefixed") return CorpusFormat::length_prefixed;
  throw ConfigError("unknown corpus format '" + std::string(s) +
                    "' (expected \"lines\" or \"length-prefixed\")");
}

CooccurrenceCounts scan_payload(std::string_view payload, const MultiPatternMatcher& matcher,
                                CorpusFormat format) {
  CooccurrenceCounts counts;
  if (format == CorpusFormat::lines) {
    size_t start = 0;
    while (start <= payload.size()) {
      size_t nl = payload.find('\n', start);
      size_t end = nl == std::string_view::npos ? payload.size() : nl;
      std::string_view doc = payload.substr(start, end - start);
      if (!doc.empty()) counts.add_document(matcher.match_document(doc), doc.size());
      if (nl == std::string_view::npos) break;
      start = nl + 1;
    }
  } else {
    size_t pos = 0;
    while (pos < payload.size()) {
      size_t nl = payload.find('\n', pos);
      if (nl == std::string_view::npos)
        throw DataError("length-prefixed shard: truncated length header");
      size_t len = 0;
      for (size_t i = pos; i < nl; ++i) {
        char c = payload[i];
        if (c < '0' || c > '9')
          throw DataError("length-prefixed shard: malformed length header");
        len = len * 10 + static_cast<size_t>(c - '0');
      }
      if (nl == pos) throw DataError("length-prefixed shard: empty length header");
      if (nl + 1 + len > payload.size())
        throw DataError("length-prefixed shard: payload shorter than declared length");
      std::string_view doc = payload.substr(nl + 1, len);
      counts.add_document(matcher.match_document(doc), doc.size());
      pos = nl + 1 + len;
    }
  }
  return counts;
}

std::string decode_shard(const fs::path& path) {
  std::string raw = io::read_file(path);
  if (raw.size() < 2 || static_cast<unsigned char>(raw[0]) != 0x1f ||
      static_cast<unsigned char>(raw[1]) != 0x8b)
    return raw;

  z_stream zs{};
  if (inflateInit2(&zs, 15 + 16) != Z_OK)  // +16: gzip wrapper
    throw DataError("gzip: inflateInit failed for " + path.string());
  std::string out;
  std::array<char, 1 << 16> buf;
  zs.next_in = reinterpret_cast<Bytef*>(raw.data());
  zs.avail_in = static_cast<uInt>(raw.size());
  int ret = Z_OK;
  do {
    zs.next_out = reinterpret_cast<Bytef*>(buf.data());
    zs.avail_out = static_cast<uInt>(buf.size());
    ret = inflate(&zs, Z_NO_FLUSH);
    if (ret != Z_OK && ret != Z_STREAM_END) {
      inflateEnd(&zs);
      throw DataError("gzip: corrupt stream in " + path.string());
    }
    out.append(buf.data(), buf.size() - zs.avail_out);
  } while (ret != Z_STREAM_END);
  inflateEnd(&zs);
  return out;
}

CooccurrenceCounts scan_corpus(const fs::path& corpus_dir, const MultiPatternMatcher& matcher,
                               const ScanOptions& options) {
  if (!fs::exists(corpus_dir))
    throw DataError("corpus directory does not exist: " + corpus_dir.string());
  std::vector<fs::path> shards;
  for (const auto& entry : fs::recursive_directory_iterator(corpus_dir))
    if (entry.is_regular_file()) shards.push_back(entry.path());
  std::sort(shards.begin(), shards.end());

  std::vector<CooccurrenceCounts> partials(shards.size());
  std::mutex progress_mu;
  size_t done = 0;
  parallel::for_each_index(shards.size(), options.parallelism, [&](size_t i) {
    try {
      std::string payload = decode_shard(shards[i]);
      partials[i] = scan_payload(payload, matcher, options.format);
    } catch (const Error& e) {
      partials[i].warnings = 1;
      partials[i].failed_shards.push_back(shards[i].string() + ": " + e.what());
    }
    if (options.progress) {
      std::lock_guard lock(progress_mu);
      options.progress(++done, shards.size());
    }
  });

  CooccurrenceCounts total;
  for (const auto& p : partials) total.merge(p);
  std::sort(total.failed_shards.begin(), total.failed_shards.end());
  return total;
}

std::string culture_counts_csv(const CooccurrenceCounts& counts) {
  io::CsvWriter csv;
  csv.row({"culture", "docs", "docs_demonym", "docs_country"});
  std::set<std::string> cultures;
  for (const auto& [k, v] : counts.culture_docs) cultures.insert(k);
  for (const auto& c : cultures) {
    auto get = [&](const std::map<std::string, long>& m) {
      auto it = m.find(c);
      return it == m.end() ? 0L : it->second;
    };
    csv.row({c, std::to_string(get(counts.culture_docs)),
             std::to_string(get(counts.culture_docs_demonym)),
             std::to_string(get(counts.culture_docs_country))});
  }
  return csv.str();
}

std::string culture_topic_counts_csv(const CooccurrenceCounts& counts) {
  io::CsvWriter csv;
  csv.row({"culture", "topic", "docs"});
  for (const auto& [key, v] : counts.culture_topic_docs)
    csv.row({key.first, key.second, std::to_string(v)});
  return csv.str();
}

std::map<std::pair<std::string, std::string>, long> load_culture_topic_csv(
    const fs::path& path) {
  auto rows = io::parse_csv(io::read_file(path));
  if (rows.empty()) throw DataError(path.string() + ": empty co-occurrence CSV");
  std::map<std::pair<std::string, std::string>, long> out;
  for (size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() < 3)
      throw DataError(path.string() + ": row " + std::to_string(i + 1) + " has too few fields");
    out[{row[0], row[1]}] = std::stol(row[2]);
  }
  return out;
}

}  // namespace culturekit::corpusscan
