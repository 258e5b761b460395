#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace dialogkit::text {

struct NormalizeOptions {
  bool lowercase = true;
  bool strip_nontext = true;
};

namespace detail {

// Decodes one UTF-8 code point starting at `pos`, advancing it. Invalid bytes
// decode to U+FFFD and consume a single byte.
inline char32_t next_code_point(std::string_view s, std::size_t& pos) {
  const auto lead = static_cast<unsigned char>(s[pos]);
  auto cont = [&](std::size_t i) -> int {
    if (pos + i >= s.size()) return -1;
    const auto c = static_cast<unsigned char>(s[pos + i]);
    return (c & 0xC0) == 0x80 ? (c & 0x3F) : -1;
  };
  if (lead < 0x80) {
    ++pos;
    return lead;
  }
  int len = 0;
  char32_t cp = 0;
  if ((lead & 0xE0) == 0xC0) {
    len = 2;
    cp = lead & 0x1F;
  } else if ((lead & 0xF0) == 0xE0) {
    len = 3;
    cp = lead & 0x0F;
  } else if ((lead & 0xF8) == 0xF0) {
    len = 4;
    cp = lead & 0x07;
  } else {
    ++pos;
    return 0xFFFD;
  }
  for (int i = 1; i < len; ++i) {
    const int c = cont(static_cast<std::size_t>(i));
    if (c < 0) {
      ++pos;
      return 0xFFFD;
    }
    cp = (cp << 6) | static_cast<char32_t>(c);
  }
  pos += static_cast<std::size_t>(len);
  return cp;
}

inline void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

inline bool is_space(char32_t cp) {
  return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\f' || cp == '\v' ||
         cp == 0x00A0 || cp == 0x2028 || cp == 0x2029 || (cp >= 0x2000 && cp <= 0x200A) ||
         cp == 0x3000;
}

// Letters are ASCII plus the Latin-1 supplement and Latin Extended-A/B blocks.
// Other scripts are out of scope; locale-free so output is stable everywhere.
inline bool is_letter(char32_t cp) {
  if ((cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z')) return true;
  if (cp >= 0x00C0 && cp <= 0x024F) return cp != 0x00D7 && cp != 0x00F7;
  return false;
}

inline bool is_digit(char32_t cp) { return cp >= '0' && cp <= '9'; }

inline char32_t to_lower(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 32;
  if (cp >= 0x00C0 && cp <= 0x00DE && cp != 0x00D7) return cp + 32;
  if (cp >= 0x0100 && cp <= 0x0137 && cp % 2 == 0) return cp + 1;
  if (cp >= 0x0139 && cp <= 0x0148 && cp % 2 == 1) return cp + 1;
  if (cp >= 0x014A && cp <= 0x0177 && cp % 2 == 0) return cp + 1;
  return cp;
}

inline bool is_apostrophe(char32_t cp) { return cp == '\'' || cp == 0x2019; }

// Matches "[REDACTED:CLASS]" (any case) at `pos`; returns its byte length or 0.
inline std::size_t placeholder_length(std::string_view s, std::size_t pos) {
  constexpr std::string_view head = "[redacted:";
  if (s.size() - pos < head.size() + 2) return 0;
  for (std::size_t i = 0; i < head.size(); ++i) {
    char c = s[pos + i];
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + 32);
    if (c != head[i]) return 0;
  }
  std::size_t i = pos + head.size();
  const std::size_t body = i;
  while (i < s.size() && ((s[i] >= 'A' && s[i] <= 'Z') || (s[i] >= 'a' && s[i] <= 'z') || s[i] == '_'))
    ++i;
  if (i == body || i >= s.size() || s[i] != ']') return 0;
  return i + 1 - pos;
}

}  // namespace detail

/// Lowercases, drops everything except letters, digits, whitespace and
/// apostrophes, collapses whitespace runs and trims. Redaction placeholders
/// survive as single lowercase tokens so anonymization can run first.
inline std::string normalize_text(std::string_view raw, const NormalizeOptions& opts = {}) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  auto emit = [&](auto&& write) {
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    write();
  };

  std::size_t pos = 0;
  while (pos < raw.size()) {
    if (const std::size_t len = detail::placeholder_length(raw, pos); len > 0) {
      pending_space = true;
      emit([&] {
        for (std::size_t i = 0; i < len; ++i) {
          char c = raw[pos + i];
          if (opts.lowercase && c >= 'A' && c <= 'Z') c = static_cast<char>(c + 32);
          out.push_back(c);
        }
      });
      pos += len;
      pending_space = true;
      continue;
    }
    char32_t cp = detail::next_code_point(raw, pos);
    if (detail::is_space(cp)) {
      pending_space = true;
      continue;
    }
    if (detail::is_apostrophe(cp)) cp = '\'';
    const bool keep = !opts.strip_nontext || detail::is_letter(cp) || detail::is_digit(cp) || cp == '\'';
    if (!keep) continue;
    if (opts.lowercase) cp = detail::to_lower(cp);
    emit([&] { detail::append_utf8(out, cp); });
  }
  return out;
}

/// Splits normalized text into its maximal non-whitespace runs.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t' || text[i] == '\n' || text[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < text.size() && !(text[i] == ' ' || text[i] == '\t' || text[i] == '\n' || text[i] == '\r')) ++i;
    if (i > start) tokens.emplace_back(text.substr(start, i - start));
  }
  return tokens;
}

inline std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

}  // namespace dialogkit::text
