#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "dialogkit/train.hpp"

using namespace dialogkit;
using namespace dialogkit::train;

namespace {

// Settings pinned for the desk-scale corpus; the default 2e-5 rate does
// not move a 16-token model within three epochs.
TrainingConfig markov_config() {
  TrainingConfig c;
  c.seed = 1234;
  return c;
}

LrSchedule markov_schedule() { return LrSchedule::warmup_linear(0, 0.05, 20); }

// Unigram perplexity from raw counts, written out independently.
double counted_unigram_ppl(const std::vector<int>& toks) {
  std::map<int, double> c;
  for (int t : toks) c[t] += 1;
  double h = 0;
  for (auto& [_, n] : c) h -= n / toks.size() * std::log(n / toks.size());
  return std::exp(h);
}

std::vector<Scenario> markov_scenarios(const TokenCorpus& c, int n) {
  std::vector<Scenario> out;
  for (int i = 0; i < n; ++i) {
    const auto at = static_cast<std::size_t>(i * 50);
    out.push_back({{c.validation[at]}, {c.validation.begin() + at + 1, c.validation.begin() + at + 9}});
  }
  return out;
}

}  // namespace

TEST(Corpus, MarkovShapeAndBaseline) {
  const auto c = markov_corpus();
  EXPECT_EQ(c.train.size() + c.validation.size(), 10000u);
  EXPECT_EQ(c.validation.size(), 1000u);
  EXPECT_NEAR(unigram_perplexity(c.validation), counted_unigram_ppl(c.validation), 1e-12);
}

TEST(Trainer, MarkovBeatsUnigramBaseline) {
  const auto c = markov_corpus();
  TinyLM m(16, 16, 5);
  const auto hist = train::train(m, c, markov_config(), markov_schedule(), UnfreezePlan::staged(3));
  const double baseline = counted_unigram_ppl(c.validation);
  EXPECT_EQ(hist.steps, 3 * hist.steps_per_epoch);
  EXPECT_LT(hist.evals.back().val_perplexity, 0.9 * baseline)
      << "final " << hist.evals.back().val_perplexity << " baseline " << baseline;
  EXPECT_EQ(hist.evals.front().frozen_groups, (std::vector<std::string>{"input"}));
  EXPECT_TRUE(hist.evals.back().frozen_groups.empty());
}

TEST(Trainer, SameSeedGivesIdenticalHistory) {
  const auto c = markov_corpus();
  auto cfg = markov_config();
  cfg.eval_every_steps = 25;
  TinyLM a(16, 8, 5), b(16, 8, 5);
  const auto ha = train::train(a, c, cfg, markov_schedule(), UnfreezePlan::staged(3));
  const auto hb = train::train(b, c, cfg, markov_schedule(), UnfreezePlan::staged(3));
  EXPECT_EQ(ha.to_jsonl(), hb.to_jsonl());
  for (std::size_t k = 0; k < a.parameters().size(); ++k) EXPECT_EQ(a.parameters()[k].value, b.parameters()[k].value);
}

TEST(Trainer, ZeroLearningRateLeavesParametersBitIdentical) {
  const auto c = markov_corpus();
  auto cfg = markov_config();
  cfg.weight_decay = 0.1;
  TinyLM m(16, 8, 5);
  const auto before = m.parameters();
  train::train(m, c, cfg, LrSchedule::constant_rate(0, 0.0), UnfreezePlan::all_trainable(3, m.groups()));
  for (std::size_t k = 0; k < before.size(); ++k) EXPECT_EQ(m.parameters()[k].value, before[k].value);
}

TEST(Trainer, FrozenGroupsStayBitIdentical) {
  const auto c = markov_corpus();
  auto cfg = markov_config();
  cfg.epochs = 2;
  TinyLM m(16, 8, 5);
  const Matrix w1 = m.parameters()[TinyLM::kW1].value;
  train::train(m, c, cfg, markov_schedule(), UnfreezePlan({{2, {"output"}}}));
  EXPECT_EQ(m.parameters()[TinyLM::kW1].value, w1);
  EXPECT_NE(m.parameters()[TinyLM::kW2].value, Matrix::Zero(16, 8));
}

TEST(Trainer, AdapterOnlyTrainingChangesOnlyAdapter) {
  const auto c = markov_corpus();
  auto cfg = markov_config();
  cfg.epochs = 1;
  TinyLM m(16, 8, 5);
  m.parameters()[TinyLM::kW2].value.setConstant(0.01);
  m.attach_adapter(LoraAdapter::init(16, 8, 8, 32.0, 4));
  const auto before = m.parameters();
  train::train(m, c, cfg, markov_schedule(), UnfreezePlan({{1, {"adapter"}}}));
  for (std::size_t k = 0; k < before.size(); ++k) {
    if (before[k].group == "adapter")
      EXPECT_NE(m.parameters()[k].value, before[k].value) << before[k].name;
    else
      EXPECT_EQ(m.parameters()[k].value, before[k].value) << before[k].name;
  }
}

TEST(Trainer, ScenarioMonitorUntrainedIsLog16) {
  TinyLM m(16, 8, 5);
  const std::vector<Scenario> s{{{1, 2}, {3, 4, 5}}};
  const auto r = scenario_monitor(m, s);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_NEAR(r[0], std::log(16.0), 1e-15);
}

TEST(Trainer, MonitorDoesNotPerturbTrainingAndImproves) {
  const auto c = markov_corpus();
  const auto cfg = markov_config();
  TinyLM a(16, 16, 5), b(16, 16, 5);
  TrainHooks hooks;
  hooks.scenarios = markov_scenarios(c, 10);
  const auto untrained = scenario_monitor(a, hooks.scenarios);
  const auto with = train::train(a, c, cfg, markov_schedule(), UnfreezePlan::staged(3), hooks);
  const auto without = train::train(b, c, cfg, markov_schedule(), UnfreezePlan::staged(3));
  ASSERT_EQ(with.evals.size(), without.evals.size());
  for (std::size_t i = 0; i < with.evals.size(); ++i) {
    auto j = with.evals[i].to_json();
    j.erase("scenario_nll");
    EXPECT_EQ(j, without.evals[i].to_json()) << i;
  }
  const auto trained = with.evals.back().scenario_nll;
  ASSERT_EQ(trained.size(), 10u);
  int better = 0;
  for (int i = 0; i < 10; ++i) better += trained[i] <= untrained[i];
  EXPECT_GE(better, 8);
}

TEST(Trainer, EvaluationCadenceAndHistoryFields) {
  const auto c = markov_corpus();
  auto cfg = markov_config();
  cfg.eval_every_steps = 30;
  TinyLM m(16, 8, 5);
  const auto hist = train::train(m, c, cfg, markov_schedule(), UnfreezePlan::staged(3));
  EXPECT_EQ(hist.evals.front().step, 0);
  for (std::size_t i = 1; i < hist.evals.size(); ++i) EXPECT_GT(hist.evals[i].step, hist.evals[i - 1].step);
  std::istringstream lines(hist.to_jsonl());
  std::string line;
  std::getline(lines, line);
  const auto j = nlohmann::json::parse(line);
  for (const char* k : {"step", "epoch", "lr", "loss", "val_perplexity", "frozen_groups", "loss_scale"})
    EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_TRUE(j["loss"].is_null());
}

TEST(Trainer, EarlyStoppingHaltsRun) {
  const auto c = markov_corpus();
  auto cfg = markov_config();
  cfg.eval_every_steps = 1;
  cfg.patience = 1;
  TinyLM m(16, 8, 5);
  // A rate this large makes validation perplexity bounce almost immediately.
  const auto hist = train::train(m, c, cfg, LrSchedule::constant_rate(0, 5.0), UnfreezePlan::staged(3));
  EXPECT_TRUE(hist.stopped_early);
  EXPECT_LT(hist.steps, 3 * hist.steps_per_epoch);
  EXPECT_LE(hist.best_step, hist.evals.back().step);
}

TEST(Trainer, RejectsUnusableInputs) {
  TokenCorpus tiny{16, {1, 2, 3}, {1, 2}};
  TinyLM m(16, 4, 0);
  EXPECT_THROW(train::train(m, tiny, TrainingConfig{}, markov_schedule(), UnfreezePlan::staged(3)), ArgumentError);
  const auto c = markov_corpus();
  EXPECT_THROW(train::train(m, c, TrainingConfig{}, markov_schedule(), UnfreezePlan::staged(2)), ArgumentError);
  EXPECT_THROW(train::train(m, c, TrainingConfig{}, LrSchedule::warmup_linear(5, 0.01, 1), UnfreezePlan::staged(3)),
               ArgumentError);
}

TEST(Trainer, PersistentOverflowAborts) {
  const auto c = markov_corpus();
  auto cfg = markov_config();
  cfg.max_consecutive_skips = 5;
  TinyLM m(16, 4, 0);
  TrainHooks hooks;
  LossTerm poison = [](const TinyLM&, Gradients& g) {
    g[TinyLM::kB2](0, 0) = std::numeric_limits<double>::infinity();
    return 0.0;
  };
  hooks.extra_loss = poison;
  EXPECT_THROW(train::train(m, c, cfg, markov_schedule(), UnfreezePlan::staged(3), hooks), DivergenceError);
}

TEST(Tune, RequiresTrials) {
  EXPECT_THROW(tune(SearchSpace{}, 0, 1, [](const TrialParams&, std::uint64_t) { return 0.0; }), ArgumentError);
}

TEST(Tune, SingleTrialIsBest) {
  const auto r = tune(SearchSpace{}, 1, 9, [](const TrialParams& p, std::uint64_t) { return p.lr; });
  ASSERT_EQ(r.trials.size(), 1u);
  EXPECT_EQ(r.best.index, 0);
}

TEST(Tune, SamplesStayInSpaceAndAreOrderIndependent) {
  auto obj = [](const TrialParams& p, std::uint64_t) { return p.lr * p.dropout / p.micro_batch; };
  const auto serial = tune(SearchSpace{}, 40, 3, obj, 1);
  const auto parallel = tune(SearchSpace{}, 40, 3, obj, 4);
  for (std::size_t i = 0; i < serial.trials.size(); ++i) {
    const auto& t = serial.trials[i];
    EXPECT_EQ(t.to_json(), parallel.trials[i].to_json());
    EXPECT_GE(t.params.lr, 1e-5);
    EXPECT_LE(t.params.lr, 5e-5);
    EXPECT_TRUE(t.params.micro_batch == 16 || t.params.micro_batch == 32 || t.params.micro_batch == 64);
    EXPECT_TRUE(t.params.weight_decay == 0.01 || t.params.weight_decay == 0.1);
  }
  for (const auto& t : serial.trials) EXPECT_LE(serial.best.objective, t.objective);
}

TEST(Tune, CollapsedSpaceGivesIdenticalObjectives) {
  SearchSpace s;
  s.lr_min = s.lr_max = 3e-5;
  s.micro_batches = {32};
  s.dropouts = {0.0};
  s.weight_decays = {0.01};
  auto base = markov_config();
  base.accum_steps = 1;
  auto obj = shortened_training_objective(markov_corpus(), base, 8, 20);
  const auto r = tune(s, 5, 17, [&](const TrialParams& p, std::uint64_t) { return obj(p, 99); });
  for (const auto& t : r.trials) EXPECT_EQ(t.objective, r.trials[0].objective);
}

TEST(Tune, MarkovSearchBestNotAboveMedian) {
  SearchSpace s;
  s.lr_min = 1e-3;
  s.lr_max = 5e-2;
  auto base = markov_config();
  base.accum_steps = 1;
  const auto r = tune(s, 20, 5, shortened_training_objective(markov_corpus(), base, 8, 40), 4);
  std::vector<double> obj;
  for (const auto& t : r.trials) obj.push_back(t.objective);
  std::sort(obj.begin(), obj.end());
  EXPECT_LE(r.best.objective, obj[obj.size() / 2]);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  std::mt19937_64 rng(3);
  TinyLM m(9, 4, 2);
  m.attach_adapter(LoraAdapter::init(9, 4, 2, 8.0, 1));
  std::normal_distribution<double> n(0, 1);
  for (auto& p : m.parameters())
    for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = n(rng);
  std::stringstream buf;
  save_checkpoint(buf, m, {"a", "b"});
  const auto c = load_checkpoint(buf);
  ASSERT_EQ(c.model.parameters().size(), m.parameters().size());
  for (std::size_t k = 0; k < m.parameters().size(); ++k)
    EXPECT_EQ(c.model.parameters()[k].value, m.parameters()[k].value);
  EXPECT_EQ(c.vocab, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(c.model.lora_scaling(), 4.0);
}

TEST(Checkpoint, TruncationReportsOffset) {
  TinyLM m(4, 2, 0);
  std::stringstream buf;
  save_checkpoint(buf, m);
  std::string s = buf.str();
  s.resize(s.size() - 3);
  std::istringstream in(s);
  try {
    load_checkpoint(in);
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_GT(e.offset(), 0u);
  }
}
