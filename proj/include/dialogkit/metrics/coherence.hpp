#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dialogkit/metrics/ngram.hpp"
#include "dialogkit/numeric.hpp"
#include "dialogkit/text/normalize.hpp"

namespace dialogkit::metrics {

using EmbeddingVector = std::vector<double>;
using Vocabulary = std::map<Token, std::size_t>;

/// L2-normalized term-frequency vector; out-of-vocabulary tokens are ignored.
inline EmbeddingVector embed_tf(std::span<const Token> sentence, const Vocabulary& vocab) {
  EmbeddingVector v(vocab.size(), 0.0);
  for (const auto& tok : sentence)
    if (auto it = vocab.find(tok); it != vocab.end()) v[it->second] += 1.0;
  double sq = 0.0;
  for (double x : v) sq += x * x;
  if (sq == 0.0) return v;
  const double norm = std::sqrt(sq);
  for (double& x : v) x /= norm;
  return v;
}

/// Cosine similarity; defined as 0 when either vector is all-zero.
inline double cosine(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) dot += a[i] * b[i];
  for (double x : a) na += x * x;
  for (double x : b) nb += x * x;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

/// Splits on '.', '!' or '?' followed by whitespace or end of text. Each
/// sentence is tokenized with the corpus normalizer; empty sentences vanish.
inline std::vector<Tokens> split_sentences(std::string_view text) {
  std::vector<Tokens> out;
  std::size_t start = 0;
  auto flush = [&](std::size_t end) {
    auto toks = text::tokenize(text::normalize_text(text.substr(start, end - start)));
    if (!toks.empty()) out.push_back(std::move(toks));
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    const bool boundary = i + 1 == text.size() || text[i + 1] == ' ' || text[i + 1] == '\n' ||
                          text[i + 1] == '\t' || text[i + 1] == '\r';
    if (!boundary) continue;
    flush(i + 1);
    start = i + 1;
  }
  if (start < text.size()) flush(text.size());
  return out;
}

using SentenceSplitter = std::function<std::vector<Tokens>(std::string_view)>;
// Embeds every sentence of one text together so a text-local vocabulary works.
using SentenceEmbedder = std::function<std::vector<EmbeddingVector>(const std::vector<Tokens>&)>;

/// Term-frequency embedder over the vocabulary of the sentences themselves.
/// Cosines are unchanged by adding vocabulary entries absent from both sides.
inline std::vector<EmbeddingVector> tf_embedder(const std::vector<Tokens>& sentences) {
  Vocabulary vocab;
  for (const auto& s : sentences)
    for (const auto& t : s) vocab.emplace(t, 0);
  std::size_t idx = 0;
  for (auto& [tok, i] : vocab) i = idx++;
  std::vector<EmbeddingVector> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back(embed_tf(s, vocab));
  return out;
}

/// Mean cosine similarity between consecutive sentence vectors; nullopt when
/// the text has fewer than two sentences.
inline std::optional<double> coherence(std::string_view text, const SentenceSplitter& splitter = split_sentences,
                                       const SentenceEmbedder& embedder = tf_embedder) {
  const auto sentences = splitter(text);
  if (sentences.size() < 2) return std::nullopt;
  const auto vecs = embedder(sentences);
  CompensatedSum sum;
  for (std::size_t i = 0; i + 1 < vecs.size(); ++i) sum.add(cosine(vecs[i], vecs[i + 1]));
  return sum.mean();
}

}  // namespace dialogkit::metrics
