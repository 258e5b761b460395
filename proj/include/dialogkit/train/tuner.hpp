#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <random>
#include <thread>
#include <vector>

#include <json.hpp>

#include "dialogkit/errors.hpp"
#include "dialogkit/numeric.hpp"
#include "dialogkit/train/trainer.hpp"

namespace dialogkit::train {

struct SearchSpace {
  double lr_min = 1e-5;
  double lr_max = 5e-5;
  std::vector<int> micro_batches{16, 32, 64};
  std::vector<double> dropouts{0.1, 0.2, 0.3};
  std::vector<double> weight_decays{0.01, 0.1};

  void validate() const {
    if (!(lr_min > 0.0 && lr_max >= lr_min)) throw ArgumentError("learning-rate range must satisfy 0 < min <= max");
    if (micro_batches.empty() || dropouts.empty() || weight_decays.empty())
      throw ArgumentError("search space choices must be non-empty");
  }
};

struct TrialParams {
  double lr = 0.0;
  int micro_batch = 0;
  double dropout = 0.0;
  double weight_decay = 0.0;
};

struct TrialResult {
  int index = 0;
  std::uint64_t seed = 0;
  TrialParams params;
  double objective = 0.0;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["trial"] = index;
    j["seed"] = seed;
    j["lr"] = params.lr;
    j["micro_batch"] = params.micro_batch;
    j["dropout"] = params.dropout;
    j["weight_decay"] = params.weight_decay;
    j["objective"] = objective;
    return j;
  }
};

struct TuneResult {
  TrialResult best;
  std::vector<TrialResult> trials;
};

// Maps a sampled configuration and its derived seed to a value to minimize.
using TuneObjective = std::function<double(const TrialParams&, std::uint64_t seed)>;

/// Draws one configuration from a trial-private generator: log-uniform
/// learning rate, uniform categorical choices.
inline TrialParams sample_trial(const SearchSpace& space, std::uint64_t trial_seed) {
  std::mt19937_64 rng(trial_seed);
  std::uniform_real_distribution<double> u(std::log(space.lr_min), std::log(space.lr_max));
  auto pick = [&](const auto& choices) {
    return choices[std::uniform_int_distribution<std::size_t>(0, choices.size() - 1)(rng)];
  };
  TrialParams p;
  p.lr = space.lr_min == space.lr_max ? space.lr_min : std::exp(u(rng));
  p.micro_batch = pick(space.micro_batches);
  p.dropout = pick(space.dropouts);
  p.weight_decay = pick(space.weight_decays);
  return p;
}

/// Seeded random search. Each trial derives its own seed from (seed, index),
/// so results do not depend on execution order or thread count. Ties on the
/// objective resolve to the lowest trial index.
inline TuneResult tune(const SearchSpace& space, int n_trials, std::uint64_t seed, const TuneObjective& objective,
                       unsigned threads = 1) {
  if (n_trials < 1) throw ArgumentError("n_trials must be >= 1");
  space.validate();
  std::vector<TrialResult> trials(static_cast<std::size_t>(n_trials));
  auto run = [&](std::size_t i) {
    auto& t = trials[i];
    t.index = static_cast<int>(i);
    t.seed = mix_seed(seed, i);
    t.params = sample_trial(space, t.seed);
    t.objective = objective(t.params, t.seed);
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n_trials)));
  if (threads == 1) {
    for (std::size_t i = 0; i < trials.size(); ++i) run(i);
  } else {
    std::vector<std::future<void>> workers;
    for (unsigned w = 0; w < threads; ++w)
      workers.push_back(std::async(std::launch::async, [&, w] {
        for (std::size_t i = w; i < trials.size(); i += threads) run(i);
      }));
    for (auto& f : workers) f.get();
  }
  TuneResult r;
  r.trials = trials;
  r.best = *std::min_element(trials.begin(), trials.end(), [](const TrialResult& a, const TrialResult& b) {
    if (std::isnan(a.objective)) return false;
    if (std::isnan(b.objective)) return true;
    return a.objective < b.objective;
  });
  return r;
}

/// Objective used by the CLI: final validation perplexity of a shortened run
/// on `corpus`, warmup over the first tenth of the run.
inline TuneObjective shortened_training_objective(TokenCorpus corpus, TrainingConfig base, int hidden,
                                                  std::int64_t max_steps) {
  return [corpus = std::move(corpus), base, hidden, max_steps](const TrialParams& p, std::uint64_t seed) {
    TrainingConfig cfg = base;
    cfg.micro_batch = p.micro_batch;
    cfg.dropout = p.dropout;
    cfg.weight_decay = p.weight_decay;
    cfg.seed = seed;
    cfg.max_steps = max_steps;
    cfg.epochs = 1;
    cfg.eval_every_steps = 0;
    TinyLM model(corpus.vocab_size, hidden, mix_seed(seed, 99));
    const auto examples = bigram_examples(corpus.train).size();
    const auto per_epoch = static_cast<std::int64_t>(examples / static_cast<std::size_t>(cfg.effective_batch()));
    const std::int64_t total = std::max<std::int64_t>(1, std::min(per_epoch, max_steps > 0 ? max_steps : per_epoch));
    auto schedule = LrSchedule::warmup_linear(total, p.lr, total / 10);
    const auto hist = train(model, corpus, cfg, schedule, UnfreezePlan::all_trainable(1, model.groups()));
    return hist.evals.back().val_perplexity;
  };
}

}  // namespace dialogkit::train
