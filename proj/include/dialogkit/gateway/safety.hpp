#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "dialogkit/errors.hpp"
#include "dialogkit/text/normalize.hpp"

namespace dialogkit::gateway {

/// Lowercase word tokens: maximal runs of letters, digits and apostrophes.
/// Everything else separates, so "Self-Harm!" yields {"self", "harm"}.
inline std::vector<std::string> word_tokens(std::string_view s) {
  namespace d = text::detail;
  std::vector<std::string> out;
  std::string cur;
  std::size_t pos = 0;
  while (pos < s.size()) {
    const char32_t cp = d::next_code_point(s, pos);
    if (d::is_letter(cp) || d::is_digit(cp)) {
      d::append_utf8(cur, d::to_lower(cp));
    } else if (d::is_apostrophe(cp) && !cur.empty()) {
      cur.push_back('\'');
    } else if (!cur.empty()) {
      while (!cur.empty() && cur.back() == '\'') cur.pop_back();
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    }
  }
  while (!cur.empty() && cur.back() == '\'') cur.pop_back();
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

using Phrase = std::vector<std::string>;

/// True when `phrase` occurs as a contiguous run of whole tokens.
inline bool contains_phrase(const std::vector<std::string>& tokens, const Phrase& phrase) {
  if (phrase.empty() || phrase.size() > tokens.size()) return false;
  return std::search(tokens.begin(), tokens.end(), phrase.begin(), phrase.end()) != tokens.end();
}

namespace detail {

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read lexicon " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

}  // namespace detail

/// Terms whose presence blocks a message outright. One term per line; '#'
/// starts a comment; multi-word terms match as whole-token phrases.
class Blocklist {
 public:
  Blocklist() = default;
  explicit Blocklist(const std::vector<std::string>& terms) {
    for (const auto& t : terms) add(t);
  }

  static Blocklist load(const std::string& path) {
    Blocklist b;
    for (const auto& line : detail::read_lines(path)) b.add(line);
    if (b.terms_.empty()) throw ConfigError("blocklist " + path + " has no terms");
    return b;
  }

  std::vector<std::string> matches(const std::vector<std::string>& tokens) const {
    std::vector<std::string> hit;
    for (const auto& [phrase, term] : terms_)
      if (contains_phrase(tokens, phrase)) hit.push_back(term);
    return hit;
  }

  std::size_t size() const { return terms_.size(); }

 private:
  void add(std::string_view line) {
    const auto hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    auto phrase = word_tokens(line);
    if (phrase.empty()) return;
    std::string term;
    for (const auto& w : phrase) term += (term.empty() ? "" : " ") + w;
    terms_.emplace(std::move(phrase), std::move(term));
  }

  std::map<Phrase, std::string> terms_;
};

/// Category-tagged trigger terms. File format: "[category]" header lines,
/// then one term per line belonging to the most recent header.
class TriggerLexicon {
 public:
  TriggerLexicon() = default;
  explicit TriggerLexicon(const std::map<std::string, std::vector<std::string>>& categories) {
    for (const auto& [cat, terms] : categories)
      for (const auto& t : terms) add(cat, t);
  }

  static TriggerLexicon load(const std::string& path) {
    TriggerLexicon lex;
    std::string category;
    std::size_t lineno = 0;
    for (auto line : detail::read_lines(path)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      const auto t = std::string(trim_ascii(line));
      if (t.empty()) continue;
      if (t.front() == '[') {
        if (t.back() != ']' || t.size() < 3)
          throw ConfigError("malformed category header at " + path + ":" + std::to_string(lineno));
        category = t.substr(1, t.size() - 2);
        continue;
      }
      if (category.empty())
        throw ConfigError("trigger term before any [category] header at " + path + ":" + std::to_string(lineno));
      lex.add(category, t);
    }
    if (lex.terms_.empty()) throw ConfigError("trigger lexicon " + path + " has no terms");
    return lex;
  }

  /// Sorted, de-duplicated categories with at least one matching term.
  std::vector<std::string> categories_matching(const std::vector<std::string>& tokens) const {
    std::set<std::string> cats;
    for (const auto& [phrase, cat] : terms_)
      if (contains_phrase(tokens, phrase)) cats.insert(cat);
    return {cats.begin(), cats.end()};
  }

  std::size_t size() const { return terms_.size(); }

 private:
  static std::string_view trim_ascii(std::string_view s) {
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    return s.substr(b, s.find_last_not_of(ws) - b + 1);
  }

  void add(const std::string& category, std::string_view term) {
    auto phrase = word_tokens(term);
    if (!phrase.empty()) terms_.emplace_back(std::move(phrase), category);
  }

  std::vector<std::pair<Phrase, std::string>> terms_;
};

enum class SafetyAction { pass, warn, block };

struct SafetyVerdict {
  SafetyAction action = SafetyAction::pass;
  // Category tags for warn; empty otherwise.
  std::vector<std::string> tags;
  // Matched terms. In-process only; never logged or returned to clients.
  std::vector<std::string> matched;
};

/// Blocklist hit blocks; otherwise trigger-category hits warn; otherwise pass.
inline SafetyVerdict safety_check(std::string_view text, const Blocklist& blocklist, const TriggerLexicon& triggers) {
  const auto tokens = word_tokens(text);
  SafetyVerdict v;
  v.matched = blocklist.matches(tokens);
  if (!v.matched.empty()) {
    v.action = SafetyAction::block;
    return v;
  }
  v.tags = triggers.categories_matching(tokens);
  if (!v.tags.empty()) v.action = SafetyAction::warn;
  return v;
}

}  // namespace dialogkit::gateway
