#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dialogkit/errors.hpp"
#include "dialogkit/train/optim.hpp"

namespace dialogkit::train {

/// Dynamic loss-scale state machine: halve on overflow, double after
/// `growth_interval` consecutive finite steps.
struct LossScaler {
  double scale = 32768.0;
  std::int64_t growth_interval = 2000;
  double growth_factor = 2.0;
  double backoff_factor = 0.5;
  std::int64_t good_steps = 0;

  /// Returns true when the optimizer step must be skipped.
  bool update(bool overflow) {
    if (!(scale > 0.0)) throw ArgumentError("loss scale must be > 0");
    if (overflow) {
      scale *= backoff_factor;
      good_steps = 0;
      return true;
    }
    if (++good_steps >= growth_interval) {
      scale *= growth_factor;
      good_steps = 0;
    }
    return false;
  }
};

struct StopDecision {
  bool stop = false;
  std::int64_t best_step = -1;
  double best_metric = std::numeric_limits<double>::infinity();
};

/// Patience-based early stopping on a lower-is-better metric. Only a strictly
/// lower value counts as improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience = 3) : patience_(patience) {
    if (patience < 1) throw ArgumentError("patience must be >= 1");
  }

  StopDecision update(double metric, std::int64_t step) {
    if (!std::isfinite(metric)) throw ArgumentError("early-stopping metric must be finite");
    if (metric < best_metric_) {
      best_metric_ = metric;
      best_step_ = step;
      bad_rounds_ = 0;
    } else {
      ++bad_rounds_;
    }
    return {bad_rounds_ >= patience_, best_step_, best_metric_};
  }

  int bad_rounds() const { return bad_rounds_; }
  std::int64_t best_step() const { return best_step_; }
  double best_metric() const { return best_metric_; }

 private:
  int patience_;
  int bad_rounds_ = 0;
  std::int64_t best_step_ = -1;
  double best_metric_ = std::numeric_limits<double>::infinity();
};

struct UnfreezeStage {
  int epochs = 1;
  GroupSet trainable;
};

/// Ordered stages of (epochs, trainable groups); everything else is frozen.
class UnfreezePlan {
 public:
  UnfreezePlan() = default;
  explicit UnfreezePlan(std::vector<UnfreezeStage> stages) : stages_(std::move(stages)) {
    for (std::size_t i = 0; i < stages_.size(); ++i) {
      if (stages_[i].epochs < 1) throw ArgumentError("unfreeze stage must span at least one epoch");
      if (i > 0)
        for (const auto& g : stages_[i - 1].trainable)
          if (!stages_[i].trainable.count(g)) throw ArgumentError("unfreeze plan may not re-freeze group " + g);
    }
  }

  static UnfreezePlan all_trainable(int epochs, GroupSet groups) { return UnfreezePlan({{epochs, std::move(groups)}}); }

  /// Output layer alone for the first epochs, then everything; three epochs
  /// map to (2, {output}) then (1, {input, output}).
  static UnfreezePlan staged(int epochs, bool with_adapter = false) {
    GroupSet head{"output"};
    GroupSet all{"input", "output"};
    if (with_adapter) {
      head.insert("adapter");
      all.insert("adapter");
    }
    if (epochs < 2) return all_trainable(epochs, all);
    const int tail = std::max(1, epochs / 3);
    return UnfreezePlan({{epochs - tail, head}, {tail, all}});
  }

  const std::vector<UnfreezeStage>& stages() const { return stages_; }

  int total_epochs() const {
    int n = 0;
    for (const auto& s : stages_) n += s.epochs;
    return n;
  }

  const GroupSet& trainable_at(int epoch) const {
    int end = 0;
    for (const auto& s : stages_) {
      end += s.epochs;
      if (epoch < end) return s.trainable;
    }
    throw ArgumentError("epoch " + std::to_string(epoch) + " beyond unfreeze plan");
  }

  GroupSet frozen_at(int epoch, const GroupSet& all_groups) const {
    const auto& t = trainable_at(epoch);
    GroupSet frozen;
    for (const auto& g : all_groups)
      if (!t.count(g)) frozen.insert(g);
    return frozen;
  }

 private:
  std::vector<UnfreezeStage> stages_;
};

}  // namespace dialogkit::train
