#pragma once

#include <cmath>
#include <limits>

#include "dialogkit/errors.hpp"
#include "dialogkit/train/optim.hpp"

namespace dialogkit::train {

/// Numerically stable softmax.
inline Vector softmax(const Vector& logits) {
  const double mx = logits.maxCoeff();
  Vector e = (logits.array() - mx).exp();
  return e / e.sum();
}

/// log-softmax, used where probabilities may underflow.
inline Vector log_softmax(const Vector& logits) {
  const double mx = logits.maxCoeff();
  const double lse = mx + std::log((logits.array() - mx).exp().sum());
  return logits.array() - lse;
}

inline Vector smoothed_target(Eigen::Index classes, Eigen::Index target, double epsilon) {
  Vector q = Vector::Constant(classes, epsilon / static_cast<double>(classes));
  q[target] += 1.0 - epsilon;
  return q;
}

struct SmoothedLoss {
  double loss = 0.0;
  // d loss / d logits = p - q, for logits feeding a softmax.
  Vector grad_logits;
  // Some p_k == 0 where q_k > 0; loss is +inf.
  bool infinite = false;
};

/// Cross-entropy against (1 - eps) * onehot(target) + eps / K.
inline SmoothedLoss label_smoothed_ce(const Vector& probs, Eigen::Index target, double epsilon) {
  const auto k = probs.size();
  if (k == 0 || target < 0 || target >= k) throw ArgumentError("label_smoothed_ce: target outside [0, K)");
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw ArgumentError("label smoothing must lie in [0, 1)");
  const Vector q = smoothed_target(k, target, epsilon);
  SmoothedLoss out;
  out.grad_logits = probs - q;
  for (Eigen::Index i = 0; i < k; ++i) {
    if (q[i] == 0.0) continue;
    if (probs[i] <= 0.0) {
      out.infinite = true;
      out.loss = std::numeric_limits<double>::infinity();
      return out;
    }
    out.loss -= q[i] * std::log(probs[i]);
  }
  return out;
}

}  // namespace dialogkit::train
