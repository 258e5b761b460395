#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "dialogkit/errors.hpp"
#include "dialogkit/text/normalize.hpp"

namespace dialogkit::text {

enum class PiiClass { email, phone, url, handle, username, number_id };

inline constexpr std::array<PiiClass, 6> kAllPiiClasses = {
    PiiClass::email, PiiClass::phone, PiiClass::url, PiiClass::handle, PiiClass::username, PiiClass::number_id};

inline std::string_view to_string(PiiClass c) {
  switch (c) {
    case PiiClass::email: return "EMAIL";
    case PiiClass::phone: return "PHONE";
    case PiiClass::url: return "URL";
    case PiiClass::handle: return "HANDLE";
    case PiiClass::username: return "USERNAME";
    case PiiClass::number_id: return "NUMBER_ID";
  }
  return "UNKNOWN";
}

inline std::optional<PiiClass> parse_pii_class(std::string_view s) {
  for (PiiClass c : kAllPiiClasses)
    if (to_string(c) == s) return c;
  return std::nullopt;
}

inline std::string placeholder(PiiClass c) { return "[REDACTED:" + std::string(to_string(c)) + "]"; }

class PiiRule {
 public:
  PiiRule(std::string pattern, PiiClass cls) : pattern_(std::move(pattern)), cls_(cls) {
    try {
      regex_ = std::regex(pattern_, std::regex::ECMAScript | std::regex::icase | std::regex::optimize);
    } catch (const std::regex_error& e) {
      throw ConfigError("malformed PII pattern for " + std::string(to_string(cls)) + ": '" + pattern_ +
                        "': " + e.what());
    }
  }

  const std::string& pattern() const { return pattern_; }
  PiiClass pii_class() const { return cls_; }
  const std::regex& regex() const { return regex_; }

 private:
  std::string pattern_;
  PiiClass cls_;
  std::regex regex_;
};

using PiiRules = std::vector<PiiRule>;

/// Default priority order: email, url, phone, @handle, u/username, bare 6+ digit ids.
inline PiiRules default_pii_rules() {
  PiiRules rules;
  rules.emplace_back(R"([a-z0-9._%+\-]+@[a-z0-9\-]+(?:\.[a-z0-9\-]+)*\.[a-z]{2,})", PiiClass::email);
  rules.emplace_back(R"((?:https?://|www\.)[^\s<>"']+)", PiiClass::url);
  rules.emplace_back(R"(\+?\(?\d(?:[\s.\-()]{0,2}\d){6,})", PiiClass::phone);
  rules.emplace_back(R"(@[a-z0-9_]{1,30})", PiiClass::handle);
  rules.emplace_back(R"(\bu/[a-z0-9_\-]{2,30})", PiiClass::username);
  rules.emplace_back(R"(\b\d{6,}\b)", PiiClass::number_id);
  return rules;
}

struct Redaction {
  PiiClass pii_class;
  std::size_t span_length;
};

struct AnonymizeResult {
  std::string text;
  std::vector<Redaction> redactions;
};

namespace detail {

struct Segment {
  std::string text;
  bool masked = false;
};

// Splits text into free spans and existing placeholders. Placeholders are
// never rescanned, so earlier redactions always win.
inline std::vector<Segment> split_placeholders(std::string_view s) {
  std::vector<Segment> out;
  std::string free;
  std::size_t pos = 0;
  while (pos < s.size()) {
    if (const std::size_t len = placeholder_length(s, pos); len > 0) {
      if (!free.empty()) out.push_back({std::move(free), false});
      free.clear();
      out.push_back({std::string(s.substr(pos, len)), true});
      pos += len;
    } else {
      free.push_back(s[pos++]);
    }
  }
  if (!free.empty()) out.push_back({std::move(free), false});
  return out;
}

// Replaces every non-empty match of one rule inside a free segment.
inline bool apply_rule(const PiiRule& rule, std::vector<Segment>& segments, std::vector<Redaction>& log) {
  bool changed = false;
  std::vector<Segment> next;
  next.reserve(segments.size());
  for (auto& seg : segments) {
    if (seg.masked) {
      next.push_back(std::move(seg));
      continue;
    }
    const std::string& s = seg.text;
    std::size_t cursor = 0;
    for (auto it = std::sregex_iterator(s.begin(), s.end(), rule.regex()); it != std::sregex_iterator(); ++it) {
      const auto& m = *it;
      if (m.length(0) == 0) continue;
      const auto start = static_cast<std::size_t>(m.position(0));
      if (start < cursor) continue;
      if (start > cursor) next.push_back({s.substr(cursor, start - cursor), false});
      next.push_back({placeholder(rule.pii_class()), true});
      log.push_back({rule.pii_class(), static_cast<std::size_t>(m.length(0))});
      cursor = start + static_cast<std::size_t>(m.length(0));
      changed = true;
    }
    if (cursor < s.size()) next.push_back({s.substr(cursor), false});
  }
  segments = std::move(next);
  return changed;
}

}  // namespace detail

/// Masks every match of the rules, in priority order, with "[REDACTED:<CLASS>]".
/// Iterates to a fixpoint so the result is itself left unchanged by a rerun.
inline AnonymizeResult anonymize(std::string_view text, const PiiRules& rules) {
  AnonymizeResult result;
  auto segments = detail::split_placeholders(text);
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& rule : rules) changed = detail::apply_rule(rule, segments, result.redactions) || changed;
  }
  for (auto& seg : segments) result.text += seg.text;
  return result;
}

/// True if any rule matches outside existing placeholders.
inline bool contains_pii(std::string_view text, const PiiRules& rules) {
  for (const auto& seg : detail::split_placeholders(text)) {
    if (seg.masked) continue;
    for (const auto& rule : rules)
      if (std::regex_search(seg.text, rule.regex())) return true;
  }
  return false;
}

struct AnonymizationReport {
  std::map<PiiClass, std::size_t> redactions_by_class;
  std::size_t records_touched = 0;

  std::size_t total() const {
    std::size_t sum = 0;
    for (const auto& [cls, n] : redactions_by_class) sum += n;
    return sum;
  }

  void merge(const AnonymizationReport& other) {
    for (const auto& [cls, n] : other.redactions_by_class) redactions_by_class[cls] += n;
    records_touched += other.records_touched;
  }
};

}  // namespace dialogkit::text
