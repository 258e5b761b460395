#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dialogkit/errors.hpp"

namespace dialogkit::metrics {

using Token = std::string;
using Tokens = std::vector<Token>;
using NGram = std::vector<Token>;

struct NGramCounts {
  std::size_t n = 1;
  std::map<NGram, std::size_t> counts;
  std::size_t total = 0;

  std::size_t count(const NGram& gram) const {
    auto it = counts.find(gram);
    return it == counts.end() ? 0 : it->second;
  }
  std::size_t distinct() const { return counts.size(); }
};

/// Counts every contiguous window of `n` tokens.
inline NGramCounts ngram_counts(std::span<const Token> tokens, std::size_t n) {
  if (n == 0) throw ArgumentError("n-gram order must be >= 1");
  NGramCounts out;
  out.n = n;
  if (tokens.size() < n) return out;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++out.counts[NGram(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                       tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
    ++out.total;
  }
  return out;
}

}  // namespace dialogkit::metrics
