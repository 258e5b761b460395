#pragma once

#include <algorithm>
#include <set>
#include <span>

#include "dialogkit/errors.hpp"
#include "dialogkit/metrics/ngram.hpp"

namespace dialogkit::metrics {

/// ROUGE-N recall summed over the reference set in numerator and denominator.
inline double rouge_n(std::span<const Token> candidate, std::span<const Tokens> references, std::size_t n) {
  const auto cand = ngram_counts(candidate, n);
  std::size_t matched = 0;
  std::size_t total = 0;
  for (const auto& ref : references) {
    const auto rc = ngram_counts(ref, n);
    total += rc.total;
    for (const auto& [gram, c] : rc.counts) matched += std::min(c, cand.count(gram));
  }
  if (total == 0) throw ArgumentError("ROUGE-N: no reference has at least n tokens");
  return static_cast<double>(matched) / static_cast<double>(total);
}

enum class DistinctMode { pooled, per_response_mean };

/// Distinct-n: unique n-grams over total n-grams. Pooled across all responses
/// by default; per_response_mean averages over responses that have n-grams.
inline double distinct_n(std::span<const Tokens> responses, std::size_t n, DistinctMode mode = DistinctMode::pooled) {
  if (n == 0) throw ArgumentError("n-gram order must be >= 1");
  if (mode == DistinctMode::pooled) {
    std::set<NGram> unique;
    std::size_t total = 0;
    for (const auto& r : responses) {
      const auto c = ngram_counts(r, n);
      total += c.total;
      for (const auto& [gram, k] : c.counts) unique.insert(gram);
    }
    if (total == 0) throw ArgumentError("distinct-n: no response has at least n tokens");
    return static_cast<double>(unique.size()) / static_cast<double>(total);
  }
  double sum = 0.0;
  std::size_t used = 0;
  for (const auto& r : responses) {
    const auto c = ngram_counts(r, n);
    if (c.total == 0) continue;
    sum += static_cast<double>(c.distinct()) / static_cast<double>(c.total);
    ++used;
  }
  if (used == 0) throw ArgumentError("distinct-n: no response has at least n tokens");
  return sum / static_cast<double>(used);
}

}  // namespace dialogkit::metrics
