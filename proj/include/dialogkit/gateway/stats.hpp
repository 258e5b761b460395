#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <string>

#include <json.hpp>

namespace dialogkit::gateway {

inline constexpr std::array<const char*, 5> kErrorClasses{"bad_request", "payload_too_large", "upstream_unavailable",
                                                          "upstream_protocol", "internal"};

/// Process-lifetime counters. Every field is an atomic, so recording never
/// takes a lock; snapshots may be momentarily inconsistent across fields.
class ServiceStats {
 public:
  // 1 ms buckets up to this bound; slower requests share one overflow bucket.
  static constexpr std::int64_t kMaxTrackedMs = 10000;

  void record(std::int64_t latency_ms, const std::string& error_class = {}) {
    requests_.fetch_add(1, std::memory_order_relaxed);
    if (!error_class.empty()) {
      std::size_t i = 0;
      while (i + 1 < kErrorClasses.size() && error_class != kErrorClasses[i]) ++i;
      errors_[i].fetch_add(1, std::memory_order_relaxed);
    }
    const auto ms = std::max<std::int64_t>(0, latency_ms);
    buckets_[static_cast<std::size_t>(std::min(ms, kMaxTrackedMs + 1))].fetch_add(1, std::memory_order_relaxed);
    auto seen = max_ms_.load(std::memory_order_relaxed);
    while (ms > seen && !max_ms_.compare_exchange_weak(seen, ms, std::memory_order_relaxed)) {
    }
  }

  /// Nearest-rank quantile in whole milliseconds; 0 before any request.
  std::int64_t quantile(double q) const {
    std::uint64_t total = 0;
    for (const auto& b : buckets_) total += b.load(std::memory_order_relaxed);
    if (total == 0) return 0;
    const auto rank = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(q * static_cast<double>(total))));
    std::uint64_t seen = 0;
    for (std::size_t i = 0; i < buckets_.size(); ++i) {
      seen += buckets_[i].load(std::memory_order_relaxed);
      if (seen >= rank) return i <= static_cast<std::size_t>(kMaxTrackedMs) ? static_cast<std::int64_t>(i) : max_ms_.load();
    }
    return max_ms_.load();
  }

  nlohmann::ordered_json snapshot() const {
    nlohmann::ordered_json j;
    j["requests"] = requests_.load();
    nlohmann::ordered_json errs;
    for (std::size_t i = 0; i < kErrorClasses.size(); ++i) errs[kErrorClasses[i]] = errors_[i].load();
    j["errors"] = errs;
    j["latency_ms"] = {{"p50", quantile(0.50)}, {"p90", quantile(0.90)}, {"p99", quantile(0.99)}};
    return j;
  }

 private:
  std::atomic<std::uint64_t> requests_{0};
  std::array<std::atomic<std::uint64_t>, kErrorClasses.size()> errors_{};
  std::array<std::atomic<std::uint64_t>, kMaxTrackedMs + 2> buckets_{};
  std::atomic<std::int64_t> max_ms_{0};
};

}  // namespace dialogkit::gateway
