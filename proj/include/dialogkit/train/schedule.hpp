#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "dialogkit/errors.hpp"

namespace dialogkit::train {

enum class ScheduleKind { warmup_linear_decay, dynamic_two_phase, constant };

/// Piecewise-linear learning-rate schedule.
///
/// warmup_linear_decay: 0 -> base_lr over [0, warmup_steps], then
///   base_lr -> 0 over [warmup_steps, total_steps].
/// dynamic_two_phase: base_lr -> peak_lr over [0, ramp_steps], then
///   peak_lr -> final_lr over [ramp_steps, total_steps].
/// constant: base_lr everywhere (may be 0; used for frozen-rate runs).
struct LrSchedule {
  ScheduleKind kind = ScheduleKind::warmup_linear_decay;
  double base_lr = 2e-5;
  std::int64_t warmup_steps = 500;
  std::int64_t total_steps = 0;
  double peak_lr = 5e-5;
  std::int64_t ramp_steps = 1000;
  double final_lr = 1e-6;

  static LrSchedule warmup_linear(std::int64_t total, double base = 2e-5, std::int64_t warmup = 500) {
    LrSchedule s;
    s.kind = ScheduleKind::warmup_linear_decay;
    s.base_lr = base;
    s.warmup_steps = warmup;
    s.total_steps = total;
    return s;
  }

  static LrSchedule dynamic(std::int64_t total, double start = 2e-5, double peak = 5e-5, std::int64_t ramp = 1000,
                            double final_rate = 1e-6) {
    LrSchedule s;
    s.kind = ScheduleKind::dynamic_two_phase;
    s.base_lr = start;
    s.peak_lr = peak;
    s.ramp_steps = ramp;
    s.final_lr = final_rate;
    s.total_steps = total;
    return s;
  }

  static LrSchedule constant_rate(std::int64_t total, double rate) {
    LrSchedule s;
    s.kind = ScheduleKind::constant;
    s.base_lr = rate;
    s.total_steps = total;
    return s;
  }

  void validate() const {
    if (total_steps < 1) throw ArgumentError("schedule total_steps must be >= 1");
    switch (kind) {
      case ScheduleKind::warmup_linear_decay:
        if (warmup_steps < 0 || warmup_steps > total_steps)
          throw ArgumentError("warmup_steps must lie in [0, total_steps]");
        if (!(base_lr > 0.0)) throw ArgumentError("base_lr must be > 0");
        break;
      case ScheduleKind::dynamic_two_phase:
        if (ramp_steps < 0 || ramp_steps >= total_steps) throw ArgumentError("ramp_steps must be < total_steps");
        if (!(base_lr > 0.0 && peak_lr > 0.0 && final_lr > 0.0))
          throw ArgumentError("dynamic schedule rates must be > 0");
        break;
      case ScheduleKind::constant:
        if (!(base_lr >= 0.0)) throw ArgumentError("constant rate must be >= 0");
        break;
    }
  }

  /// Steepest absolute per-step change across segments.
  double max_slope() const {
    auto slope = [](double from, double to, std::int64_t steps) {
      return steps <= 0 ? 0.0 : std::abs(to - from) / static_cast<double>(steps);
    };
    switch (kind) {
      case ScheduleKind::warmup_linear_decay:
        return std::max(slope(0.0, base_lr, warmup_steps), slope(base_lr, 0.0, total_steps - warmup_steps));
      case ScheduleKind::dynamic_two_phase:
        return std::max(slope(base_lr, peak_lr, ramp_steps), slope(peak_lr, final_lr, total_steps - ramp_steps));
      case ScheduleKind::constant:
        return 0.0;
    }
    return 0.0;
  }
};

namespace detail {

// Linear interpolation that returns the endpoints exactly.
inline double lerp_exact(double from, double to, std::int64_t pos, std::int64_t len) {
  if (pos <= 0) return from;
  if (pos >= len) return to;
  const double t = static_cast<double>(pos) / static_cast<double>(len);
  return from + (to - from) * t;
}

}  // namespace detail

inline double lr_at(const LrSchedule& s, std::int64_t step) {
  s.validate();
  if (step < 0 || step > s.total_steps)
    throw ArgumentError("step " + std::to_string(step) + " outside [0, " + std::to_string(s.total_steps) + "]");
  switch (s.kind) {
    case ScheduleKind::warmup_linear_decay:
      if (s.warmup_steps > 0 && step <= s.warmup_steps) return detail::lerp_exact(0.0, s.base_lr, step, s.warmup_steps);
      return detail::lerp_exact(s.base_lr, 0.0, step - s.warmup_steps, s.total_steps - s.warmup_steps);
    case ScheduleKind::dynamic_two_phase:
      if (s.ramp_steps > 0 && step <= s.ramp_steps) return detail::lerp_exact(s.base_lr, s.peak_lr, step, s.ramp_steps);
      return detail::lerp_exact(s.peak_lr, s.final_lr, step - s.ramp_steps, s.total_steps - s.ramp_steps);
    case ScheduleKind::constant:
      return s.base_lr;
  }
  return 0.0;
}

}  // namespace dialogkit::train
