#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dialogkit/errors.hpp"
#include "dialogkit/metrics/bleu.hpp"
#include "dialogkit/metrics/coherence.hpp"
#include "dialogkit/metrics/overlap.hpp"
#include "dialogkit/numeric.hpp"

namespace dialogkit::metrics {

/// exp(mean NLL) with natural-log NLLs.
inline double perplexity(std::span<const double> token_nlls) {
  if (token_nlls.empty()) throw ArgumentError("perplexity needs at least one token");
  CompensatedSum sum;
  for (double nll : token_nlls) {
    if (!std::isfinite(nll) || nll < 0.0) throw ArgumentError("token NLLs must be finite and non-negative");
    sum.add(nll);
  }
  return std::exp(sum.mean());
}

struct ScoredPair {
  Tokens candidate;
  std::vector<Tokens> references;
  // Untokenized candidate used for coherence; empty skips coherence for this pair.
  std::string candidate_text;
};

struct EvalConfig {
  BleuConfig bleu;
  DistinctMode distinct_mode = DistinctMode::pooled;
  SentenceSplitter splitter = split_sentences;
  SentenceEmbedder embedder = tf_embedder;
};

struct MetricReport {
  std::optional<double> bleu;
  std::optional<double> rouge_1;
  std::optional<double> rouge_2;
  std::optional<double> coherence;
  std::optional<double> distinct_1;
  std::optional<double> distinct_2;
  std::optional<double> perplexity;
  std::size_t n_pairs = 0;
  std::size_t skipped = 0;

  nlohmann::ordered_json to_json() const {
    auto opt = [](const std::optional<double>& v) -> nlohmann::ordered_json {
      return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
    };
    nlohmann::ordered_json j;
    j["bleu"] = opt(bleu);
    j["rouge_1"] = opt(rouge_1);
    j["rouge_2"] = opt(rouge_2);
    j["coherence"] = opt(coherence);
    j["distinct_1"] = opt(distinct_1);
    j["distinct_2"] = opt(distinct_2);
    j["perplexity"] = opt(perplexity);
    j["n_pairs"] = n_pairs;
    j["skipped"] = skipped;
    return j;
  }
};

/// Corpus report: BLEU and ROUGE averaged over scorable pairs (a pair that any
/// of them rejects is skipped as a whole), distinct pooled over `responses`,
/// coherence averaged over texts with at least two sentences. Summation runs
/// in input order with compensation, so reports are bit-stable.
inline MetricReport evaluate_corpus(std::span<const ScoredPair> pairs, std::span<const Tokens> responses,
                                    const EvalConfig& cfg = {}, std::span<const double> token_nlls = {}) {
  if (pairs.empty()) throw ArgumentError("evaluate_corpus needs at least one pair");
  MetricReport report;
  CompensatedSum bleu_sum, r1_sum, r2_sum, coh_sum;
  for (const auto& p : pairs) {
    try {
      const double b = bleu(p.candidate, p.references, cfg.bleu);
      const double r1 = rouge_n(p.candidate, p.references, 1);
      const double r2 = rouge_n(p.candidate, p.references, 2);
      bleu_sum.add(b);
      r1_sum.add(r1);
      r2_sum.add(r2);
      ++report.n_pairs;
    } catch (const ArgumentError&) {
      ++report.skipped;
    }
    if (!p.candidate_text.empty())
      if (auto c = coherence(p.candidate_text, cfg.splitter, cfg.embedder)) coh_sum.add(*c);
  }
  if (report.n_pairs > 0) {
    report.bleu = bleu_sum.mean();
    report.rouge_1 = r1_sum.mean();
    report.rouge_2 = r2_sum.mean();
  }
  if (coh_sum.count() > 0) report.coherence = coh_sum.mean();
  try {
    report.distinct_1 = distinct_n(responses, 1, cfg.distinct_mode);
  } catch (const ArgumentError&) {
  }
  try {
    report.distinct_2 = distinct_n(responses, 2, cfg.distinct_mode);
  } catch (const ArgumentError&) {
  }
  if (!token_nlls.empty()) report.perplexity = perplexity(token_nlls);
  return report;
}

inline MetricReport evaluate_corpus(std::span<const ScoredPair> pairs, const EvalConfig& cfg = {}) {
  std::vector<Tokens> responses;
  responses.reserve(pairs.size());
  for (const auto& p : pairs) responses.push_back(p.candidate);
  return evaluate_corpus(pairs, responses, cfg);
}

}  // namespace dialogkit::metrics
