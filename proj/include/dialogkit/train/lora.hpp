#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "dialogkit/errors.hpp"
#include "dialogkit/train/optim.hpp"

namespace dialogkit::train {

/// Low-rank correction (alpha / rank) * B * A for a d_out x d_in base matrix.
struct LoraAdapter {
  int rank = 8;
  double alpha = 32.0;
  Matrix a;  // rank x d_in
  Matrix b;  // d_out x rank
  // Set once the adapter has been folded into a base matrix.
  bool merged = false;

  double scaling() const { return alpha / static_cast<double>(rank); }

  /// A ~ N(0, 1/rank), B = 0, so a fresh adapter is an exact no-op.
  static LoraAdapter init(Eigen::Index d_out, Eigen::Index d_in, int rank, double alpha, std::uint64_t seed) {
    if (rank < 1) throw ArgumentError("LoRA rank must be >= 1");
    LoraAdapter ad;
    ad.rank = rank;
    ad.alpha = alpha;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(rank)));
    ad.a = Matrix(rank, d_in);
    for (Eigen::Index j = 0; j < ad.a.cols(); ++j)
      for (Eigen::Index i = 0; i < ad.a.rows(); ++i) ad.a(i, j) = normal(rng);
    ad.b = Matrix::Zero(d_out, rank);
    return ad;
  }

  void check_composes(const Matrix& base) const {
    if (a.rows() != rank || b.cols() != rank) throw ArgumentError("LoRA factor shapes disagree with rank");
    if (a.cols() != base.cols() || b.rows() != base.rows())
      throw ArgumentError("LoRA adapter shape does not compose with base matrix");
  }
};

/// W x + (alpha / r) B (A x); W is never modified.
inline Vector lora_forward(const Matrix& base, const LoraAdapter& adapter, const Vector& x) {
  adapter.check_composes(base);
  if (x.size() != base.cols()) throw ArgumentError("input size does not match base matrix");
  return base * x + adapter.scaling() * (adapter.b * (adapter.a * x));
}

/// Returns W + (alpha / r) B A and marks the adapter merged. Merging the same
/// adapter again would add the correction twice, so it is rejected.
inline Matrix merge_lora(const Matrix& base, LoraAdapter& adapter) {
  adapter.check_composes(base);
  if (adapter.merged) throw ArgumentError("LoRA adapter is already merged");
  Matrix merged = base + adapter.scaling() * (adapter.b * adapter.a);
  adapter.merged = true;
  return merged;
}

}  // namespace dialogkit::train
