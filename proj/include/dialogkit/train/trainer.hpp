#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dialogkit/errors.hpp"
#include "dialogkit/numeric.hpp"
#include "dialogkit/train/control.hpp"
#include "dialogkit/train/corpus.hpp"
#include "dialogkit/train/optim.hpp"
#include "dialogkit/train/schedule.hpp"
#include "dialogkit/train/tiny_lm.hpp"

namespace dialogkit::train {

struct TrainingConfig {
  int micro_batch = 32;
  int accum_steps = 4;
  int epochs = 3;
  double weight_decay = 0.01;
  double dropout = 0.1;
  double label_smoothing = 0.1;
  double clip_max_norm = 1.0;
  // 0 evaluates once per epoch.
  std::int64_t eval_every_steps = 0;
  int patience = 3;
  std::uint64_t seed = 0;
  double val_fraction = 0.10;
  // 0 means no cap; used for shortened tuning runs.
  std::int64_t max_steps = 0;
  // Abort after this many consecutive applied steps with a non-finite loss.
  int divergence_limit = 10;
  // Abort after this many consecutive overflow-skipped steps.
  int max_consecutive_skips = 64;

  int effective_batch() const { return micro_batch * accum_steps; }

  void validate() const {
    if (micro_batch < 1 || accum_steps < 1) throw ArgumentError("micro_batch and accum_steps must be >= 1");
    if (epochs < 1) throw ArgumentError("epochs must be >= 1");
    if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) throw ArgumentError("label_smoothing must lie in [0, 1)");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ArgumentError("dropout must lie in [0, 1)");
    if (!(clip_max_norm > 0.0)) throw ArgumentError("clip_max_norm must be > 0");
    if (patience < 1) throw ArgumentError("patience must be >= 1");
    if (eval_every_steps < 0 || max_steps < 0) throw ArgumentError("step counts must be >= 0");
  }
};

struct Scenario {
  std::vector<int> prompt;
  std::vector<int> response;
};

/// Mean next-token NLL of each scenario's response given its preceding token.
/// Read-only: draws no randomness and leaves the model untouched.
inline std::vector<double> scenario_monitor(const TinyLM& model, std::span<const Scenario> scenarios) {
  std::vector<double> out;
  out.reserve(scenarios.size());
  for (const auto& s : scenarios) {
    CompensatedSum nll;
    int prev = s.prompt.empty() ? -1 : s.prompt.back();
    for (int tok : s.response) {
      if (prev >= 0) nll.add(model.nll(prev, tok));
      prev = tok;
    }
    out.push_back(nll.count() == 0 ? std::numeric_limits<double>::quiet_NaN() : nll.mean());
  }
  return out;
}

struct EvalPoint {
  std::int64_t step = 0;
  double epoch = 0.0;
  double lr = 0.0;
  // Mean training loss over the steps since the previous evaluation (NaN at step 0).
  double train_loss = std::numeric_limits<double>::quiet_NaN();
  double val_perplexity = 0.0;
  std::vector<std::string> frozen_groups;
  double loss_scale = 0.0;
  std::vector<double> scenario_nll;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["step"] = step;
    j["epoch"] = epoch;
    j["lr"] = lr;
    j["loss"] = std::isfinite(train_loss) ? nlohmann::ordered_json(train_loss) : nlohmann::ordered_json(nullptr);
    j["val_perplexity"] = val_perplexity;
    j["frozen_groups"] = frozen_groups;
    j["loss_scale"] = loss_scale;
    if (!scenario_nll.empty()) {
      auto arr = nlohmann::ordered_json::array();
      for (double x : scenario_nll) arr.push_back(std::isfinite(x) ? nlohmann::ordered_json(x) : nullptr);
      j["scenario_nll"] = arr;
    }
    return j;
  }
};

struct TrainingHistory {
  std::vector<EvalPoint> evals;
  std::int64_t steps = 0;
  std::int64_t steps_per_epoch = 0;
  std::int64_t skipped_steps = 0;
  bool stopped_early = false;
  std::int64_t best_step = -1;
  double best_val_perplexity = std::numeric_limits<double>::infinity();

  std::string to_jsonl() const {
    std::string out;
    for (const auto& e : evals) out += e.to_json().dump() + "\n";
    return out;
  }
};

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainHooks {
  std::vector<Scenario> scenarios;
  LossTerm extra_loss;
  // Called after each evaluation with the model in its evaluated state.
  std::function<void(const EvalPoint&, const TinyLM&)> on_eval;
  LossScaler scaler;
};

/// Runs the full control loop. Per optimizer step: accum_steps micro-batches
/// of scaled forward/backward with seeded dropout, averaged; unscale and check
/// for overflow (skip and back off the scale if found); clip; Adam with
/// lr_at(step); advance. Evaluates at step 0, every eval_every_steps and at
/// each epoch end; the unfreeze plan is applied at epoch boundaries and early
/// stopping watches validation perplexity.
inline TrainingHistory train(TinyLM& model, const TokenCorpus& corpus, const TrainingConfig& cfg, LrSchedule schedule,
                             const UnfreezePlan& plan, TrainHooks hooks = {}) {
  cfg.validate();
  const auto examples = bigram_examples(corpus.train);
  const auto eff = static_cast<std::size_t>(cfg.effective_batch());
  if (examples.size() < eff) throw ArgumentError("corpus yields no complete effective batch");
  if (corpus.validation.size() < 2) throw ArgumentError("validation split needs at least two tokens");
  if (plan.total_epochs() != cfg.epochs)
    throw ArgumentError("unfreeze plan covers " + std::to_string(plan.total_epochs()) + " epochs, config has " +
                        std::to_string(cfg.epochs));

  TrainingHistory hist;
  hist.steps_per_epoch = static_cast<std::int64_t>(examples.size() / eff);
  std::int64_t total_steps = hist.steps_per_epoch * cfg.epochs;
  if (cfg.max_steps > 0) total_steps = std::min(total_steps, cfg.max_steps);
  if (schedule.total_steps == 0) schedule.total_steps = total_steps;
  if (schedule.total_steps < total_steps)
    throw ArgumentError("schedule total_steps (" + std::to_string(schedule.total_steps) + ") shorter than run (" +
                        std::to_string(total_steps) + ")");
  schedule.validate();
  const std::int64_t eval_every = cfg.eval_every_steps > 0 ? cfg.eval_every_steps : hist.steps_per_epoch;

  std::mt19937_64 rng(cfg.seed);
  AdamState adam = AdamState::for_parameters(model.parameters());
  EarlyStopping stopper(cfg.patience);
  LossScaler& scaler = hooks.scaler;
  const GroupSet all_groups = model.groups();
  GroupSet frozen = plan.frozen_at(0, all_groups);

  CompensatedSum window_loss;
  std::int64_t last_eval_step = -1;
  std::int64_t step = 0;

  auto evaluate = [&]() -> bool {
    if (step == last_eval_step) return false;
    last_eval_step = step;
    EvalPoint e;
    e.step = step;
    e.epoch = static_cast<double>(step) / static_cast<double>(hist.steps_per_epoch);
    e.lr = lr_at(schedule, std::min(step, schedule.total_steps));
    e.train_loss = window_loss.count() ? window_loss.mean() : std::numeric_limits<double>::quiet_NaN();
    e.val_perplexity = model_perplexity(model, corpus.validation);
    e.frozen_groups.assign(frozen.begin(), frozen.end());
    e.loss_scale = scaler.scale;
    if (!hooks.scenarios.empty()) e.scenario_nll = scenario_monitor(model, hooks.scenarios);
    window_loss = {};
    hist.evals.push_back(e);
    if (hooks.on_eval) hooks.on_eval(e, model);
    const auto d = stopper.update(e.val_perplexity, step);
    hist.best_step = d.best_step;
    hist.best_val_perplexity = d.best_metric;
    return d.stop;
  };

  ForwardOptions fwd;
  fwd.dropout = cfg.dropout;
  fwd.label_smoothing = cfg.label_smoothing;
  fwd.rng = &rng;
  fwd.extra_loss = hooks.extra_loss ? &hooks.extra_loss : nullptr;

  std::vector<std::size_t> order(examples.size());
  std::vector<Example> batch(static_cast<std::size_t>(cfg.micro_batch));
  int nonfinite_run = 0;
  int skip_run = 0;
  bool stop = evaluate();

  for (int epoch = 0; epoch < cfg.epochs && !stop && step < total_steps; ++epoch) {
    frozen = plan.frozen_at(epoch, all_groups);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    for (std::int64_t s = 0; s < hist.steps_per_epoch && !stop && step < total_steps; ++s) {
      const std::size_t base = static_cast<std::size_t>(s) * eff;
      bool applied = false;
      while (!applied) {
        fwd.loss_scale = scaler.scale;
        std::vector<Gradients> micro;
        micro.reserve(static_cast<std::size_t>(cfg.accum_steps));
        double step_loss = 0.0;
        for (int a = 0; a < cfg.accum_steps; ++a) {
          for (int i = 0; i < cfg.micro_batch; ++i)
            batch[static_cast<std::size_t>(i)] =
                examples[order[base + static_cast<std::size_t>(a * cfg.micro_batch + i)]];
          auto lg = model.loss_and_grad(batch, fwd);
          step_loss += lg.loss / static_cast<double>(cfg.accum_steps);
          micro.push_back(std::move(lg.grads));
        }
        Gradients grads = accumulate(micro, static_cast<std::size_t>(cfg.accum_steps));
        const double unscale = 1.0 / scaler.scale;
        for (auto& g : grads) g *= unscale;
        const auto clip = clip_gradients(grads, cfg.clip_max_norm);
        if (scaler.update(clip.overflow)) {
          ++hist.skipped_steps;
          if (++skip_run > cfg.max_consecutive_skips)
            throw DivergenceError("loss scaler skipped " + std::to_string(skip_run) + " consecutive steps at step " +
                                  std::to_string(step));
          continue;
        }
        skip_run = 0;
        adam_step(adam, model.parameters(), grads, lr_at(schedule, step), cfg.weight_decay, frozen);
        applied = true;
        ++step;
        if (std::isfinite(step_loss)) {
          nonfinite_run = 0;
          window_loss.add(step_loss);
        } else if (++nonfinite_run >= cfg.divergence_limit) {
          std::ostringstream msg;
          msg << "training diverged: non-finite loss for " << nonfinite_run << " consecutive steps (step " << step
              << ", lr " << lr_at(schedule, std::min(step, schedule.total_steps)) << ", loss scale " << scaler.scale
              << ")";
          throw DivergenceError(msg.str());
        }
      }
      if (step % eval_every == 0) stop = evaluate();
    }
    if (!stop) stop = evaluate();
  }
  if (!stop) evaluate();
  hist.steps = step;
  hist.stopped_early = stop;
  return hist;
}

}  // namespace dialogkit::train
