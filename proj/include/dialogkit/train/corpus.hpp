#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dialogkit/errors.hpp"
#include "dialogkit/numeric.hpp"
#include "dialogkit/train/tiny_lm.hpp"

namespace dialogkit::train {

struct TokenCorpus {
  int vocab_size = 0;
  std::vector<int> train;
  std::vector<int> validation;
};

/// Consecutive (prev, next) pairs of a token stream.
inline std::vector<Example> bigram_examples(std::span<const int> stream) {
  std::vector<Example> out;
  if (stream.size() < 2) return out;
  out.reserve(stream.size() - 1);
  for (std::size_t i = 0; i + 1 < stream.size(); ++i) out.push_back({stream[i], stream[i + 1]});
  return out;
}

/// Contiguous split: the trailing `val_fraction` of the stream is validation.
inline TokenCorpus split_stream(std::vector<int> stream, int vocab_size, double val_fraction) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ArgumentError("val_fraction must lie in (0, 1)");
  const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(stream.size()) * val_fraction));
  if (n_val < 2 || n_val + 2 > stream.size()) throw ArgumentError("stream too short to split");
  TokenCorpus c;
  c.vocab_size = vocab_size;
  c.validation.assign(stream.end() - static_cast<std::ptrdiff_t>(n_val), stream.end());
  stream.resize(stream.size() - n_val);
  c.train = std::move(stream);
  return c;
}

/// Row-stochastic transition matrix where each state has `fanout` successors.
inline std::vector<std::vector<double>> random_transitions(int vocab, int fanout, std::uint64_t seed) {
  if (vocab < 2 || fanout < 1 || fanout > vocab) throw ArgumentError("invalid Markov chain shape");
  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> p(vocab, std::vector<double>(vocab, 0.0));
  std::vector<int> states(vocab);
  for (int i = 0; i < vocab; ++i) states[i] = i;
  std::uniform_real_distribution<double> weight(0.5, 1.5);
  for (int s = 0; s < vocab; ++s) {
    std::shuffle(states.begin(), states.end(), rng);
    double total = 0.0;
    for (int k = 0; k < fanout; ++k) total += p[s][states[k]] = weight(rng);
    for (double& x : p[s]) x /= total;
  }
  return p;
}

/// First-order Markov token stream of `length` tokens.
inline std::vector<int> markov_stream(const std::vector<std::vector<double>>& transitions, std::size_t length,
                                      std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::discrete_distribution<int>> rows;
  for (const auto& row : transitions) rows.emplace_back(row.begin(), row.end());
  std::vector<int> out;
  out.reserve(length);
  int state = std::uniform_int_distribution<int>(0, static_cast<int>(transitions.size()) - 1)(rng);
  for (std::size_t i = 0; i < length; ++i) {
    out.push_back(state);
    state = rows[state](rng);
  }
  return out;
}

/// Standard desk-scale fixture: V=16, 10k tokens, 3 successors per state.
inline TokenCorpus markov_corpus(std::uint64_t seed = 7, int vocab = 16, std::size_t length = 10000,
                                 double val_fraction = 0.10, int fanout = 3) {
  const auto t = random_transitions(vocab, fanout, mix_seed(seed, 0));
  return split_stream(markov_stream(t, length, mix_seed(seed, 1)), vocab, val_fraction);
}

/// Perplexity of the maximum-likelihood unigram model fitted to `tokens`
/// and evaluated on the same tokens: exp of the empirical entropy.
inline double unigram_perplexity(std::span<const int> tokens) {
  if (tokens.empty()) throw ArgumentError("unigram perplexity of an empty stream");
  std::map<int, std::size_t> counts;
  for (int t : tokens) ++counts[t];
  const double n = static_cast<double>(tokens.size());
  CompensatedSum h;
  for (const auto& [tok, c] : counts) {
    const double p = static_cast<double>(c) / n;
    h.add(-p * std::log(p));
  }
  return std::exp(h.value());
}

/// exp(mean NLL) of the model over every bigram in `stream`.
inline double model_perplexity(const TinyLM& model, std::span<const int> stream) {
  if (stream.size() < 2) throw ArgumentError("perplexity needs at least two tokens");
  CompensatedSum nll;
  for (std::size_t i = 0; i + 1 < stream.size(); ++i) nll.add(model.nll(stream[i], stream[i + 1]));
  return std::exp(nll.mean());
}

/// String vocabulary with the special tokens placed after the sorted words.
class TokenVocabulary {
 public:
  static constexpr const char* kEos = "<eos>";
  static constexpr const char* kUnk = "<unk>";

  TokenVocabulary() = default;

  template <typename Range>
  static TokenVocabulary build(const Range& token_lists) {
    std::map<std::string, int> seen;
    for (const auto& list : token_lists)
      for (const auto& t : list) seen.emplace(t, 0);
    TokenVocabulary v;
    for (const auto& [w, _] : seen) v.add(w);
    v.add(kEos);
    v.add(kUnk);
    return v;
  }

  static TokenVocabulary from_words(const std::vector<std::string>& words) {
    TokenVocabulary v;
    for (const auto& w : words) v.add(w);
    if (!v.index_.count(kEos) || !v.index_.count(kUnk)) throw ArgumentError("vocabulary lacks special tokens");
    return v;
  }

  int id(const std::string& w) const {
    auto it = index_.find(w);
    return it == index_.end() ? index_.at(kUnk) : it->second;
  }
  const std::string& word(int id) const { return words_.at(static_cast<std::size_t>(id)); }
  int eos() const { return index_.at(kEos); }
  int unk() const { return index_.at(kUnk); }
  int size() const { return static_cast<int>(words_.size()); }
  const std::vector<std::string>& words() const { return words_; }

  std::vector<int> encode(const std::vector<std::string>& tokens) const {
    std::vector<int> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(id(t));
    return out;
  }

 private:
  void add(const std::string& w) {
    if (index_.emplace(w, static_cast<int>(words_.size())).second) words_.push_back(w);
  }

  std::vector<std::string> words_;
  std::map<std::string, int> index_;
};

}  // namespace dialogkit::train
