#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dialogkit/errors.hpp"
#include "dialogkit/train/lora.hpp"
#include "dialogkit/train/loss.hpp"
#include "dialogkit/train/optim.hpp"

namespace dialogkit::train {

// Next-token example: predict `next` from the previous token `prev`.
struct Example {
  int prev = 0;
  int next = 0;
};

class TinyLM;

// Additive loss term; returns its value and adds its gradient into `grads`.
using LossTerm = std::function<double(const TinyLM&, Gradients& grads)>;

struct ForwardOptions {
  double dropout = 0.0;
  double label_smoothing = 0.0;
  // Multiplies every gradient (dynamic loss scaling); the returned loss is unscaled.
  double loss_scale = 1.0;
  // Required when dropout > 0; masks are drawn example by example in order.
  std::mt19937_64* rng = nullptr;
  const LossTerm* extra_loss = nullptr;
};

struct LossAndGrad {
  double loss = 0.0;
  Gradients grads;
};

/// Two-layer next-token model: one-hot(prev) -> tanh(W1 x) -> dropout ->
/// W2 h + b2 -> softmax. W2 may carry a LoRA adapter. Parameter groups are
/// "input" (W1), "output" (W2, b2) and "adapter" (LoRA A, B).
class TinyLM {
 public:
  static constexpr std::size_t kW1 = 0;
  static constexpr std::size_t kW2 = 1;
  static constexpr std::size_t kB2 = 2;
  static constexpr std::size_t kLoraA = 3;
  static constexpr std::size_t kLoraB = 4;

  TinyLM() = default;

  /// W1 ~ N(0, 1); the readout (W2, b2) starts at zero, so an untrained model
  /// predicts the uniform distribution.
  TinyLM(int vocab, int hidden, std::uint64_t seed) : vocab_(vocab), hidden_(hidden) {
    if (vocab < 2 || hidden < 1) throw ArgumentError("TinyLM needs vocab >= 2 and hidden >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix w1(hidden, vocab);
    for (Eigen::Index j = 0; j < w1.cols(); ++j)
      for (Eigen::Index i = 0; i < w1.rows(); ++i) w1(i, j) = normal(rng);
    params_.push_back({"W1", "input", false, std::move(w1)});
    params_.push_back({"W2", "output", false, Matrix::Zero(vocab, hidden)});
    params_.push_back({"b2", "output", true, Matrix::Zero(vocab, 1)});
  }

  int vocab_size() const { return vocab_; }
  int hidden_size() const { return hidden_; }
  bool has_adapter() const { return params_.size() > kLoraA; }
  double lora_scaling() const { return lora_scaling_; }

  Parameters& parameters() { return params_; }
  const Parameters& parameters() const { return params_; }

  GroupSet groups() const {
    GroupSet g;
    for (const auto& p : params_) g.insert(p.group);
    return g;
  }

  void attach_adapter(const LoraAdapter& adapter) {
    if (has_adapter()) throw ArgumentError("TinyLM already has an adapter");
    adapter.check_composes(params_[kW2].value);
    lora_scaling_ = adapter.scaling();
    lora_rank_ = adapter.rank;
    lora_alpha_ = adapter.alpha;
    params_.push_back({"lora_A", "adapter", false, adapter.a});
    params_.push_back({"lora_B", "adapter", false, adapter.b});
  }

  std::optional<LoraAdapter> adapter() const {
    if (!has_adapter()) return std::nullopt;
    return LoraAdapter{lora_rank_, lora_alpha_, params_[kLoraA].value, params_[kLoraB].value, false};
  }

  /// Hidden activation for one context token (no dropout).
  Vector hidden(int prev) const {
    check_token(prev);
    return params_[kW1].value.col(prev).array().tanh();
  }

  Vector logits_from_hidden(const Vector& h) const {
    Vector z = params_[kW2].value * h + params_[kB2].value.col(0);
    if (has_adapter()) z += lora_scaling_ * (params_[kLoraB].value * (params_[kLoraA].value * h));
    return z;
  }

  Vector probabilities(int prev) const { return softmax(logits_from_hidden(hidden(prev))); }

  /// -ln p(next | prev), evaluation mode.
  double nll(int prev, int next) const {
    check_token(next);
    return -log_softmax(logits_from_hidden(hidden(prev)))[next];
  }

  /// Greedy continuation from `prev`; tokens in `banned` are never emitted.
  std::vector<int> greedy(int prev, std::size_t length, std::span<const int> banned = {}) const {
    std::vector<int> out;
    out.reserve(length);
    for (std::size_t i = 0; i < length; ++i) {
      Vector z = logits_from_hidden(hidden(prev));
      for (int b : banned) z[b] = -std::numeric_limits<double>::infinity();
      Eigen::Index best = 0;
      z.maxCoeff(&best);
      prev = static_cast<int>(best);
      out.push_back(prev);
    }
    return out;
  }

  /// Mean label-smoothed loss over the batch and its exact gradient.
  LossAndGrad loss_and_grad(std::span<const Example> batch, const ForwardOptions& opts) const {
    if (batch.empty()) throw ArgumentError("empty batch");
    if (opts.dropout > 0.0 && opts.rng == nullptr) throw ArgumentError("dropout requires a generator");
    if (!(opts.dropout >= 0.0 && opts.dropout < 1.0)) throw ArgumentError("dropout must lie in [0, 1)");

    LossAndGrad out;
    out.grads = zeros_like(params_);
    const Matrix& w2 = params_[kW2].value;
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    const double keep = 1.0 - opts.dropout;
    std::bernoulli_distribution keep_unit(keep);
    Vector mask(hidden_);

    for (const auto& ex : batch) {
      check_token(ex.prev);
      check_token(ex.next);
      const Vector h = hidden(ex.prev);
      if (opts.dropout > 0.0) {
        for (int i = 0; i < hidden_; ++i) mask[i] = keep_unit(*opts.rng) ? 1.0 / keep : 0.0;
      } else {
        mask.setOnes();
      }
      const Vector hd = h.cwiseProduct(mask);
      const Vector probs = softmax(logits_from_hidden(hd));
      const auto l = label_smoothed_ce(probs, ex.next, opts.label_smoothing);
      out.loss += l.loss * inv_b;

      const Vector g = l.grad_logits * (inv_b * opts.loss_scale);
      out.grads[kW2].noalias() += g * hd.transpose();
      out.grads[kB2].col(0) += g;
      Vector dhd = w2.transpose() * g;
      if (has_adapter()) {
        const Matrix& a = params_[kLoraA].value;
        const Matrix& b = params_[kLoraB].value;
        const Vector u = a * hd;
        const Vector bg = b.transpose() * g;
        out.grads[kLoraB].noalias() += lora_scaling_ * g * u.transpose();
        out.grads[kLoraA].noalias() += lora_scaling_ * bg * hd.transpose();
        dhd += lora_scaling_ * (a.transpose() * bg);
      }
      const Vector dpre = dhd.cwiseProduct(mask).cwiseProduct((1.0 - h.array().square()).matrix());
      out.grads[kW1].col(ex.prev) += dpre;
    }

    if (opts.extra_loss && *opts.extra_loss) {
      Gradients extra = zeros_like(params_);
      out.loss += (*opts.extra_loss)(*this, extra);
      for (std::size_t i = 0; i < extra.size(); ++i) out.grads[i] += extra[i] * opts.loss_scale;
    }
    return out;
  }

 private:
  void check_token(int t) const {
    if (t < 0 || t >= vocab_) throw ArgumentError("token id " + std::to_string(t) + " outside vocabulary");
  }

  int vocab_ = 0;
  int hidden_ = 0;
  int lora_rank_ = 0;
  double lora_alpha_ = 0.0;
  double lora_scaling_ = 0.0;
  Parameters params_;
};

}  // namespace dialogkit::train
