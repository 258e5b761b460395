#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <span>
#include <vector>

#include "dialogkit/errors.hpp"
#include "dialogkit/metrics/ngram.hpp"

namespace dialogkit::metrics {

enum class Smoothing { none, add_epsilon };

struct BleuConfig {
  std::size_t max_order = 4;
  // Empty means uniform 1/max_order.
  std::vector<double> weights;
  Smoothing smoothing = Smoothing::none;
  double epsilon = 1e-9;

  std::vector<double> resolved_weights() const {
    if (max_order == 0) throw ArgumentError("BLEU max_order must be >= 1");
    if (weights.empty()) return std::vector<double>(max_order, 1.0 / static_cast<double>(max_order));
    if (weights.size() != max_order) throw ArgumentError("BLEU weights must have max_order entries");
    double sum = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw ArgumentError("BLEU weights must be non-negative");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw ArgumentError("BLEU weights must sum to 1");
    return weights;
  }
};

struct BleuBreakdown {
  double score = 0.0;
  double brevity_penalty = 1.0;
  std::vector<double> precisions;
  std::size_t candidate_length = 0;
  std::size_t reference_length = 0;
};

/// Reference length closest to the candidate length; ties go to the shorter one.
inline std::size_t closest_reference_length(std::size_t candidate_length, std::span<const Tokens> references) {
  std::size_t best = references.front().size();
  for (const auto& ref : references) {
    const auto diff = [&](std::size_t len) {
      return len > candidate_length ? len - candidate_length : candidate_length - len;
    };
    if (diff(ref.size()) < diff(best) || (diff(ref.size()) == diff(best) && ref.size() < best)) best = ref.size();
  }
  return best;
}

/// Sentence BLEU with clipped n-gram precision and brevity penalty.
inline BleuBreakdown bleu_breakdown(std::span<const Token> candidate, std::span<const Tokens> references,
                                    const BleuConfig& cfg = {}) {
  if (candidate.empty()) throw ArgumentError("BLEU candidate must be non-empty");
  if (references.empty()) throw ArgumentError("BLEU needs at least one reference");
  const auto weights = cfg.resolved_weights();

  BleuBreakdown out;
  out.candidate_length = candidate.size();
  out.reference_length = closest_reference_length(candidate.size(), references);

  double log_sum = 0.0;
  bool zero = false;
  for (std::size_t n = 1; n <= cfg.max_order; ++n) {
    const auto cand = ngram_counts(candidate, n);
    std::map<NGram, std::size_t> max_ref;
    for (const auto& ref : references)
      for (const auto& [gram, c] : ngram_counts(ref, n).counts) max_ref[gram] = std::max(max_ref[gram], c);

    std::size_t matched = 0;
    for (const auto& [gram, c] : cand.counts) {
      auto it = max_ref.find(gram);
      if (it != max_ref.end()) matched += std::min(c, it->second);
    }

    double p = 0.0;
    if (cfg.smoothing == Smoothing::add_epsilon) {
      p = cand.total == 0 ? cfg.epsilon
                          : (static_cast<double>(matched) + cfg.epsilon) / (static_cast<double>(cand.total) + cfg.epsilon);
    } else if (cand.total > 0) {
      p = static_cast<double>(matched) / static_cast<double>(cand.total);
    }
    out.precisions.push_back(p);
    if (weights[n - 1] == 0.0) continue;
    if (p == 0.0) {
      zero = true;
    } else {
      log_sum += weights[n - 1] * std::log(p);
    }
  }

  const double c = static_cast<double>(out.candidate_length);
  const double r = static_cast<double>(out.reference_length);
  out.brevity_penalty = out.candidate_length > out.reference_length ? 1.0 : std::exp(1.0 - r / c);
  out.score = zero ? 0.0 : out.brevity_penalty * std::exp(log_sum);
  return out;
}

inline double bleu(std::span<const Token> candidate, std::span<const Tokens> references, const BleuConfig& cfg = {}) {
  return bleu_breakdown(candidate, references, cfg).score;
}

}  // namespace dialogkit::metrics
