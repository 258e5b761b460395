#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dialogkit/errors.hpp"

namespace dialogkit::train {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Parameter {
  std::string name;
  std::string group;
  bool is_bias = false;
  Matrix value;
};

using Parameters = std::vector<Parameter>;
// One gradient tensor per parameter, in parameter order.
using Gradients = std::vector<Matrix>;
using GroupSet = std::set<std::string>;

inline Gradients zeros_like(const Parameters& params) {
  Gradients g;
  g.reserve(params.size());
  for (const auto& p : params) g.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
  return g;
}

inline void check_shapes(const Parameters& params, const Gradients& grads) {
  if (params.size() != grads.size()) throw ArgumentError("gradient count does not match parameter count");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i].value.rows() != grads[i].rows() || params[i].value.cols() != grads[i].cols())
      throw ArgumentError("gradient shape mismatch for " + params[i].name);
}

inline bool all_finite(const Gradients& grads) {
  for (const auto& g : grads)
    if (!g.allFinite()) return false;
  return true;
}

struct ClipResult {
  double global_norm = 0.0;
  // Non-finite gradient seen; gradients were left untouched.
  bool overflow = false;
};

/// Rescales all gradients jointly so their global L2 norm is at most max_norm.
inline ClipResult clip_gradients(Gradients& grads, double max_norm) {
  if (!(max_norm > 0.0)) throw ArgumentError("max_norm must be > 0");
  ClipResult r;
  if (!all_finite(grads)) {
    r.overflow = true;
    r.global_norm = std::numeric_limits<double>::infinity();
    return r;
  }
  double sq = 0.0;
  for (const auto& g : grads) sq += g.squaredNorm();
  r.global_norm = std::sqrt(sq);
  if (r.global_norm > max_norm) {
    const double scale = max_norm / r.global_norm;
    for (auto& g : grads) g *= scale;
  }
  return r;
}

/// Elementwise mean of micro-batch gradient sets.
inline Gradients accumulate(const std::vector<Gradients>& micro, std::size_t expected_steps) {
  if (micro.size() != expected_steps || micro.empty())
    throw ArgumentError("expected " + std::to_string(expected_steps) + " micro-batch gradient sets, got " +
                        std::to_string(micro.size()));
  Gradients sum = micro.front();
  for (std::size_t k = 1; k < micro.size(); ++k) {
    if (micro[k].size() != sum.size()) throw ArgumentError("micro-batch gradient sets differ in length");
    for (std::size_t i = 0; i < sum.size(); ++i) {
      if (micro[k][i].rows() != sum[i].rows() || micro[k][i].cols() != sum[i].cols())
        throw ArgumentError("micro-batch gradient shapes differ");
      sum[i] += micro[k][i];
    }
  }
  const double inv = 1.0 / static_cast<double>(micro.size());
  for (auto& g : sum) g *= inv;
  return sum;
}

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  Gradients m;
  Gradients v;
  // Per-parameter step counts; a group that starts frozen begins bias
  // correction from its first real update.
  std::vector<std::int64_t> t;

  static AdamState for_parameters(const Parameters& params) {
    AdamState s;
    s.m = zeros_like(params);
    s.v = zeros_like(params);
    s.t.assign(params.size(), 0);
    return s;
  }
};

/// Bias-corrected Adam with decoupled weight decay (skipped for biases).
/// Parameters whose group is in `frozen` are left bit-identical.
inline void adam_step(AdamState& state, Parameters& params, const Gradients& grads, double lr, double weight_decay,
                      const GroupSet& frozen = {}) {
  check_shapes(params, grads);
  if (state.m.empty()) {
    auto fresh = AdamState::for_parameters(params);
    state.m = std::move(fresh.m);
    state.v = std::move(fresh.v);
    state.t = std::move(fresh.t);
  }
  if (state.m.size() != params.size()) throw ArgumentError("Adam state does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (frozen.count(p.group)) continue;
    const auto& g = grads[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    const auto t = ++state.t[i];
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(t));
    if (!p.is_bias && weight_decay != 0.0) p.value *= (1.0 - lr * weight_decay);
    const Matrix denom = (v / bc2).cwiseSqrt().array() + state.eps;
    p.value -= lr * ((m / bc1).array() / denom.array()).matrix();
  }
}

}  // namespace dialogkit::train
