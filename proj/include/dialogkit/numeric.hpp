#pragma once

#include <cmath>
#include <cstdint>

namespace dialogkit {

// Neumaier-compensated running sum; order-stable for report averages.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      carry_ += (sum_ - t) + x;
    else
      carry_ += (x - t) + sum_;
    sum_ = t;
    ++count_;
  }

  double value() const { return sum_ + carry_; }
  std::uint64_t count() const { return count_; }
  double mean() const { return count_ == 0 ? 0.0 : value() / static_cast<double>(count_); }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
  std::uint64_t count_ = 0;
};

// SplitMix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace dialogkit
