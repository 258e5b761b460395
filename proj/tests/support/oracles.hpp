#pragma once

// Brute-force reference implementations used only by tests. They share no
// code with the library: windows are enumerated into flat vectors and counted
// by linear scans.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace oracle {

using Tokens = std::vector<std::string>;

inline std::vector<Tokens> windows(const Tokens& t, std::size_t n) {
  std::vector<Tokens> out;
  for (std::size_t i = 0; i + n <= t.size(); ++i) out.emplace_back(t.begin() + i, t.begin() + i + n);
  return out;
}

inline std::size_t occurrences(const std::vector<Tokens>& ws, const Tokens& g) {
  return static_cast<std::size_t>(std::count(ws.begin(), ws.end(), g));
}

inline std::vector<Tokens> unique_of(const std::vector<Tokens>& ws) {
  std::vector<Tokens> u;
  for (const auto& w : ws)
    if (std::find(u.begin(), u.end(), w) == u.end()) u.push_back(w);
  return u;
}

inline double bleu(const Tokens& cand, const std::vector<Tokens>& refs, std::size_t max_n) {
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= max_n; ++n) {
    const auto cw = windows(cand, n);
    if (cw.empty()) return 0.0;
    std::size_t matched = 0;
    for (const auto& g : unique_of(cw)) {
      std::size_t best = 0;
      for (const auto& r : refs) best = std::max(best, occurrences(windows(r, n), g));
      matched += std::min(occurrences(cw, g), best);
    }
    if (matched == 0) return 0.0;
    log_sum += std::log(static_cast<double>(matched) / static_cast<double>(cw.size())) / static_cast<double>(max_n);
  }
  const double c = static_cast<double>(cand.size());
  double r = static_cast<double>(refs[0].size());
  for (const auto& ref : refs) {
    const double len = static_cast<double>(ref.size());
    if (std::abs(len - c) < std::abs(r - c) || (std::abs(len - c) == std::abs(r - c) && len < r)) r = len;
  }
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum);
}

inline double rouge(const Tokens& cand, const std::vector<Tokens>& refs, std::size_t n) {
  const auto cw = windows(cand, n);
  double num = 0.0, den = 0.0;
  for (const auto& r : refs) {
    const auto rw = windows(r, n);
    den += static_cast<double>(rw.size());
    for (const auto& g : unique_of(rw))
      num += static_cast<double>(std::min(occurrences(rw, g), occurrences(cw, g)));
  }
  return num / den;
}

inline double distinct(const std::vector<Tokens>& responses, std::size_t n) {
  std::vector<Tokens> all;
  for (const auto& r : responses)
    for (auto& w : windows(r, n)) all.push_back(std::move(w));
  return static_cast<double>(unique_of(all).size()) / static_cast<double>(all.size());
}

inline Tokens random_tokens(std::mt19937_64& rng, std::size_t max_len, int vocab, std::size_t min_len = 0) {
  std::uniform_int_distribution<std::size_t> len(min_len, max_len);
  std::uniform_int_distribution<int> sym(0, vocab - 1);
  Tokens t(len(rng));
  for (auto& s : t) s = std::string(1, static_cast<char>('a' + sym(rng)));
  return t;
}

}  // namespace oracle
