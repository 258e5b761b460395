#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <unordered_set>
#include <variant>
#include <vector>

#include <json.hpp>

#include "dialogkit/errors.hpp"
#include "dialogkit/text/anonymize.hpp"
#include "dialogkit/text/normalize.hpp"

namespace dialogkit::text {

enum class Source { kaggle, hf, reddit, twitter, apa };

inline std::string_view to_string(Source s) {
  switch (s) {
    case Source::kaggle: return "kaggle";
    case Source::hf: return "hf";
    case Source::reddit: return "reddit";
    case Source::twitter: return "twitter";
    case Source::apa: return "apa";
  }
  return "unknown";
}

inline std::optional<Source> parse_source(std::string_view s) {
  for (Source v : {Source::kaggle, Source::hf, Source::reddit, Source::twitter, Source::apa})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

struct RawRecord {
  std::string id;
  Source source;
  std::string prompt;
  std::string response;
};

struct ConversationPair {
  std::string id;
  Source source;
  std::vector<std::string> prompt_tokens;
  std::vector<std::string> response_tokens;
  std::string prompt_text;
  std::string response_text;
};

// Exact token membership; one lowercase term per line, '#' comments and blanks ignored.
class Lexicon {
 public:
  Lexicon() = default;
  explicit Lexicon(std::unordered_set<std::string> terms) : terms_(std::move(terms)) {}

  static Lexicon load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read lexicon file: " + path.string());
    std::unordered_set<std::string> terms;
    std::string line;
    while (std::getline(in, line)) {
      while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.pop_back();
      const auto first = line.find_first_not_of(" \t");
      if (first == std::string::npos || line[first] == '#') continue;
      std::string term = line.substr(first);
      std::transform(term.begin(), term.end(), term.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      terms.insert(std::move(term));
    }
    return Lexicon(std::move(terms));
  }

  bool contains(const std::string& token) const {
    if (terms_.count(token)) return true;
    std::string lower = token;
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return terms_.count(lower) > 0;
  }

  std::size_t size() const { return terms_.size(); }

 private:
  std::unordered_set<std::string> terms_;
};

struct PipelineConfig {
  int min_words = 10;
  int max_seq_len = 512;
  Lexicon offensive;
  PiiRules pii_rules = default_pii_rules();
  bool lowercase = true;
  bool strip_nontext = true;

  void validate() const {
    if (min_words < 1) throw ConfigError("min_words must be >= 1");
    if (max_seq_len < 1) throw ConfigError("max_seq_len must be >= 1");
    if (pii_rules.empty()) throw ConfigError("pii_rules must not be empty");
  }

  NormalizeOptions normalize_options() const { return {lowercase, strip_nontext}; }

  // Keys: min_words, max_seq_len, offensive_lexicon (path, relative to base_dir),
  // pii_rules [{pattern, class}], lowercase, strip_nontext. Missing keys keep defaults.
  static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
    PipelineConfig cfg;
    try {
      cfg.min_words = j.value("min_words", cfg.min_words);
      cfg.max_seq_len = j.value("max_seq_len", cfg.max_seq_len);
      cfg.lowercase = j.value("lowercase", cfg.lowercase);
      cfg.strip_nontext = j.value("strip_nontext", cfg.strip_nontext);
      if (j.contains("offensive_lexicon")) {
        std::filesystem::path p = j.at("offensive_lexicon").get<std::string>();
        if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
        cfg.offensive = Lexicon::load(p);
      }
      if (j.contains("pii_rules")) {
        cfg.pii_rules.clear();
        for (const auto& r : j.at("pii_rules")) {
          const auto cls_name = r.at("class").get<std::string>();
          const auto cls = parse_pii_class(cls_name);
          if (!cls) throw ConfigError("unknown PII class: " + cls_name);
          cfg.pii_rules.emplace_back(r.at("pattern").get<std::string>(), *cls);
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("invalid pipeline config: ") + e.what());
    }
    cfg.validate();
    return cfg;
  }
};

enum class DropReason { parse_error, empty_side, offensive, too_short };

inline constexpr std::array<DropReason, 4> kAllDropReasons = {DropReason::parse_error, DropReason::empty_side,
                                                              DropReason::offensive, DropReason::too_short};

inline std::string_view to_string(DropReason r) {
  switch (r) {
    case DropReason::parse_error: return "PARSE_ERROR";
    case DropReason::empty_side: return "EMPTY_SIDE";
    case DropReason::offensive: return "OFFENSIVE";
    case DropReason::too_short: return "TOO_SHORT";
  }
  return "UNKNOWN";
}

struct Keep {
  bool prompt_truncated = false;
  bool response_truncated = false;
};
struct Drop {
  DropReason reason;
};
using FilterDecision = std::variant<Keep, Drop>;

/// Applies the quality rules to an already normalized pair. Rule precedence:
/// empty side, then offensive term, then short response. Over-long sides are
/// truncated in place to max_seq_len tokens.
inline FilterDecision filter_record(ConversationPair& pair, const PipelineConfig& cfg) {
  if (pair.prompt_tokens.empty() || pair.response_tokens.empty()) return Drop{DropReason::empty_side};
  auto offensive = [&](const std::vector<std::string>& tokens) {
    return std::any_of(tokens.begin(), tokens.end(), [&](const std::string& t) { return cfg.offensive.contains(t); });
  };
  if (offensive(pair.prompt_tokens) || offensive(pair.response_tokens)) return Drop{DropReason::offensive};
  if (pair.response_tokens.size() < static_cast<std::size_t>(cfg.min_words)) return Drop{DropReason::too_short};

  Keep keep;
  const auto cap = static_cast<std::size_t>(cfg.max_seq_len);
  if (pair.prompt_tokens.size() > cap) {
    pair.prompt_tokens.resize(cap);
    pair.prompt_text = join_tokens(pair.prompt_tokens);
    keep.prompt_truncated = true;
  }
  if (pair.response_tokens.size() > cap) {
    pair.response_tokens.resize(cap);
    pair.response_text = join_tokens(pair.response_tokens);
    keep.response_truncated = true;
  }
  return keep;
}

struct PipelineStats {
  std::size_t read = 0;
  std::size_t kept = 0;
  std::map<DropReason, std::size_t> dropped;
  AnonymizationReport anonymization;

  std::size_t dropped_total() const {
    std::size_t n = 0;
    for (const auto& [r, c] : dropped) n += c;
    return n;
  }

  void merge(const PipelineStats& other) {
    read += other.read;
    kept += other.kept;
    for (const auto& [r, c] : other.dropped) dropped[r] += c;
    anonymization.merge(other.anonymization);
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["read"] = read;
    j["kept"] = kept;
    nlohmann::ordered_json d = nlohmann::ordered_json::object();
    for (DropReason r : kAllDropReasons) {
      auto it = dropped.find(r);
      d[std::string(to_string(r))] = it == dropped.end() ? 0 : it->second;
    }
    j["dropped"] = d;
    nlohmann::ordered_json red = nlohmann::ordered_json::object();
    for (PiiClass c : kAllPiiClasses) {
      auto it = anonymization.redactions_by_class.find(c);
      red[std::string(to_string(c))] = it == anonymization.redactions_by_class.end() ? 0 : it->second;
    }
    j["redactions"] = red;
    j["records_touched"] = anonymization.records_touched;
    return j;
  }
};

/// Parses one JSONL line into a RawRecord; nullopt if malformed.
inline std::optional<RawRecord> parse_raw_record(const std::string& line) {
  const auto j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  auto str = [&](const char* key) -> std::optional<std::string> {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) return std::nullopt;
    return it->get<std::string>();
  };
  auto id = str("id");
  auto source = str("source");
  auto prompt = str("prompt");
  auto response = str("response");
  if (!id || id->empty() || !source || !prompt || !response) return std::nullopt;
  const auto src = parse_source(*source);
  if (!src) return std::nullopt;
  return RawRecord{std::move(*id), *src, std::move(*prompt), std::move(*response)};
}

struct RecordOutcome {
  std::optional<ConversationPair> pair;
  PipelineStats stats;
};

/// Full per-record path: anonymize the raw text, normalize, tokenize, filter.
inline RecordOutcome process_record(const RawRecord& rec, const PipelineConfig& cfg) {
  RecordOutcome out;
  out.stats.read = 1;
  auto side = [&](const std::string& raw, std::vector<std::string>& tokens, std::string& text) {
    auto masked = anonymize(raw, cfg.pii_rules);
    for (const auto& r : masked.redactions) ++out.stats.anonymization.redactions_by_class[r.pii_class];
    text = normalize_text(masked.text, cfg.normalize_options());
    tokens = tokenize(text);
    return !masked.redactions.empty();
  };
  ConversationPair pair{rec.id, rec.source, {}, {}, {}, {}};
  const bool touched_prompt = side(rec.prompt, pair.prompt_tokens, pair.prompt_text);
  const bool touched_response = side(rec.response, pair.response_tokens, pair.response_text);
  if (touched_prompt || touched_response) out.stats.anonymization.records_touched = 1;

  const auto decision = filter_record(pair, cfg);
  if (const auto* drop = std::get_if<Drop>(&decision)) {
    out.stats.dropped[drop->reason] = 1;
  } else {
    out.stats.kept = 1;
    out.pair = std::move(pair);
  }
  return out;
}

inline nlohmann::ordered_json to_json(const ConversationPair& p) {
  nlohmann::ordered_json j;
  j["id"] = p.id;
  j["source"] = std::string(to_string(p.source));
  j["prompt"] = p.prompt_text;
  j["response"] = p.response_text;
  j["prompt_tokens"] = p.prompt_tokens;
  j["response_tokens"] = p.response_tokens;
  return j;
}

inline ConversationPair pair_from_json(const nlohmann::json& j) {
  ConversationPair p;
  p.id = j.at("id").get<std::string>();
  const auto src = parse_source(j.at("source").get<std::string>());
  if (!src) throw ArgumentError("unknown source in corpus record " + p.id);
  p.source = *src;
  p.prompt_text = j.value("prompt", std::string{});
  p.response_text = j.value("response", std::string{});
  p.prompt_tokens = j.at("prompt_tokens").get<std::vector<std::string>>();
  p.response_tokens = j.at("response_tokens").get<std::vector<std::string>>();
  return p;
}

/// Reads a processed corpus (pipeline output) from a JSONL file.
inline std::vector<ConversationPair> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open corpus file: " + path.string());
  std::vector<ConversationPair> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      pairs.push_back(pair_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ArgumentError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return pairs;
}

struct PipelineOptions {
  // 0 picks hardware concurrency. Output order is input order regardless.
  unsigned threads = 1;
  std::size_t chunk_lines = 4096;
};

/// Streams JSONL records from `in` to `out`, returning aggregate stats.
/// Malformed lines (bad JSON, missing keys, unknown source, repeated id) are
/// counted as PARSE_ERROR; stream failures raise IoError with the byte offset.
inline PipelineStats run_pipeline(std::istream& in, std::ostream& out, const PipelineConfig& cfg,
                                  const PipelineOptions& opts = {}) {
  cfg.validate();
  PipelineStats stats;
  std::unordered_set<std::string> seen_ids;
  std::uint64_t offset = 0;
  const unsigned threads = opts.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : opts.threads;

  std::vector<std::string> lines;
  auto flush = [&] {
    std::vector<std::optional<RawRecord>> parsed(lines.size());
    for (std::size_t i = 0; i < lines.size(); ++i) {
      parsed[i] = parse_raw_record(lines[i]);
      if (parsed[i] && !seen_ids.insert(parsed[i]->id).second) parsed[i].reset();
    }
    std::vector<RecordOutcome> outcomes(lines.size());
    auto work = [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        if (parsed[i]) {
          outcomes[i] = process_record(*parsed[i], cfg);
        } else {
          outcomes[i].stats.read = 1;
          outcomes[i].stats.dropped[DropReason::parse_error] = 1;
        }
      }
    };
    if (threads <= 1 || lines.size() < 2 * threads) {
      work(0, lines.size());
    } else {
      std::vector<std::future<void>> jobs;
      const std::size_t per = (lines.size() + threads - 1) / threads;
      for (std::size_t b = 0; b < lines.size(); b += per)
        jobs.push_back(std::async(std::launch::async, work, b, std::min(lines.size(), b + per)));
      for (auto& f : jobs) f.get();
    }
    for (auto& o : outcomes) {
      stats.merge(o.stats);
      if (o.pair) {
        out << to_json(*o.pair).dump() << '\n';
        if (!out) throw IoError("failed writing pipeline output", offset);
      }
    }
    lines.clear();
  };

  std::string line;
  while (std::getline(in, line)) {
    offset += line.size() + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    lines.push_back(std::move(line));
    if (lines.size() >= opts.chunk_lines) flush();
  }
  if (in.bad()) throw IoError("failed reading pipeline input", offset);
  flush();
  return stats;
}

}  // namespace dialogkit::text
