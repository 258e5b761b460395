#pragma once

#include <cctype>
#include <string>
#include <string_view>

#include "dialogkit/gateway/prompt.hpp"
#include "dialogkit/gateway/types.hpp"

namespace dialogkit::gateway {

inline constexpr const char* kDefaultFallback =
    "I'm not able to respond to that right now. Please try rephrasing, or reach out to someone you trust.";

namespace detail {

inline bool starts_with_icase(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(s[i])) != std::tolower(static_cast<unsigned char>(prefix[i])))
      return false;
  return true;
}

}  // namespace detail

/// Cleans raw backend text: drops an echoed prompt or system block and
/// leading role tags, cuts any hallucinated next user turn, trims, and
/// limits to `max_words` words ending at the last sentence boundary when one
/// exists. Empty results become `fallback`.
inline std::string postprocess_reply(std::string_view raw, int max_words, const PromptTemplate& tpl = {},
                                     std::string_view prompt = {}, const std::string& fallback = kDefaultFallback) {
  std::string_view s = raw;
  if (!prompt.empty() && s.substr(0, prompt.size()) == prompt) s.remove_prefix(prompt.size());
  s = trim(s);
  if (s.substr(0, 8) == "<system>") {
    const auto end = s.find("</system>");
    s = end == std::string_view::npos ? std::string_view{} : trim(s.substr(end + 9));
  }
  for (bool again = true; again;) {
    again = false;
    for (const auto& tag : {std::string_view(tpl.assistant_tag), std::string_view("assistant:")}) {
      if (detail::starts_with_icase(s, tag)) {
        s = trim(s.substr(tag.size()));
        again = true;
      }
    }
  }
  const std::string next_user = "\n" + tpl.user_tag;
  if (const auto cut = s.find(next_user); cut != std::string_view::npos) s = trim(s.substr(0, cut));

  // Word limit.
  std::size_t words = 0, pos = 0, end = s.size();
  while (pos < s.size()) {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos == s.size()) break;
    if (words == static_cast<std::size_t>(max_words)) {
      end = pos;
      break;
    }
    ++words;
    while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  }
  std::string_view kept = trim(s.substr(0, end));
  if (end < s.size()) {
    const auto boundary = kept.find_last_of(".!?");
    if (boundary != std::string_view::npos) kept = kept.substr(0, boundary + 1);
  }
  return kept.empty() ? fallback : std::string(kept);
}

}  // namespace dialogkit::gateway
