#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dialogkit/errors.hpp"
#include "dialogkit/text/pipeline.hpp"
#include "dialogkit/train.hpp"

namespace dialogkit::cli {

/// Everything a training run needs besides the corpus, read from one JSON file:
///   {"model": {"hidden", "seed", "lora": {"rank", "alpha"}},
///    "training": {TrainingConfig fields},
///    "schedule": {"kind", "base_lr", "warmup_steps", "total_steps", "peak_lr", "ramp_steps", "final_lr"},
///    "unfreeze": "staged" | "all" | [{"epochs", "trainable": [...]}, ...],
///    "scenarios": N}
/// total_steps 0 (the default) is filled in from the corpus size.
struct TrainSetup {
  int hidden = 32;
  std::uint64_t model_seed = 1;
  std::optional<std::pair<int, double>> lora;
  train::TrainingConfig training;
  train::LrSchedule schedule = train::LrSchedule::warmup_linear(0);
  nlohmann::json unfreeze = "staged";
  int scenarios = 0;

  static TrainSetup from_json(const nlohmann::json& j) {
    TrainSetup s;
    try {
      if (j.contains("model")) {
        const auto& m = j.at("model");
        s.hidden = m.value("hidden", s.hidden);
        s.model_seed = m.value("seed", s.model_seed);
        if (m.contains("lora") && !m.at("lora").is_null())
          s.lora = std::make_pair(m.at("lora").value("rank", 8), m.at("lora").value("alpha", 32.0));
      }
      if (j.contains("training")) {
        const auto& t = j.at("training");
        auto& c = s.training;
        c.micro_batch = t.value("micro_batch", c.micro_batch);
        c.accum_steps = t.value("accum_steps", c.accum_steps);
        c.epochs = t.value("epochs", c.epochs);
        c.weight_decay = t.value("weight_decay", c.weight_decay);
        c.dropout = t.value("dropout", c.dropout);
        c.label_smoothing = t.value("label_smoothing", c.label_smoothing);
        c.clip_max_norm = t.value("clip_max_norm", c.clip_max_norm);
        c.eval_every_steps = t.value("eval_every_steps", c.eval_every_steps);
        c.patience = t.value("patience", c.patience);
        c.seed = t.value("seed", c.seed);
        c.val_fraction = t.value("val_fraction", c.val_fraction);
        c.max_steps = t.value("max_steps", c.max_steps);
      }
      if (j.contains("schedule")) {
        const auto& sc = j.at("schedule");
        auto& l = s.schedule;
        const auto kind = sc.value("kind", std::string("warmup_linear_decay"));
        if (kind == "warmup_linear_decay") {
          l.kind = train::ScheduleKind::warmup_linear_decay;
        } else if (kind == "dynamic_two_phase") {
          l.kind = train::ScheduleKind::dynamic_two_phase;
        } else if (kind == "constant") {
          l.kind = train::ScheduleKind::constant;
        } else {
          throw ConfigError("unknown schedule kind: " + kind);
        }
        l.base_lr = sc.value("base_lr", l.base_lr);
        l.warmup_steps = sc.value("warmup_steps", l.warmup_steps);
        l.total_steps = sc.value("total_steps", std::int64_t{0});
        l.peak_lr = sc.value("peak_lr", l.peak_lr);
        l.ramp_steps = sc.value("ramp_steps", l.ramp_steps);
        l.final_lr = sc.value("final_lr", l.final_lr);
      }
      if (j.contains("unfreeze")) s.unfreeze = j.at("unfreeze");
      s.scenarios = j.value("scenarios", s.scenarios);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("invalid training config: ") + e.what());
    }
    if (s.hidden < 1) throw ConfigError("model.hidden must be >= 1");
    if (s.scenarios < 0) throw ConfigError("scenarios must be >= 0");
    s.training.validate();
    return s;
  }

  static TrainSetup load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open config file: " + path.string());
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
  }

  train::UnfreezePlan plan(const train::GroupSet& groups) const {
    const bool with_adapter = lora.has_value();
    if (unfreeze.is_string()) {
      const auto name = unfreeze.get<std::string>();
      if (name == "staged") return train::UnfreezePlan::staged(training.epochs, with_adapter);
      if (name == "all") return train::UnfreezePlan::all_trainable(training.epochs, groups);
      throw ConfigError("unfreeze must be \"staged\", \"all\" or a stage list");
    }
    std::vector<train::UnfreezeStage> stages;
    try {
      for (const auto& st : unfreeze) {
        train::UnfreezeStage stage;
        stage.epochs = st.at("epochs").get<int>();
        for (const auto& g : st.at("trainable").get<std::vector<std::string>>()) {
          if (!groups.count(g)) throw ConfigError("unfreeze names unknown group: " + g);
          stage.trainable.insert(g);
        }
        stages.push_back(std::move(stage));
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("invalid unfreeze stage list: ") + e.what());
    }
    return train::UnfreezePlan(std::move(stages));
  }

  train::TinyLM make_model(int vocab) const {
    train::TinyLM m(vocab, hidden, model_seed);
    if (lora) m.attach_adapter(train::LoraAdapter::init(vocab, hidden, lora->first, lora->second, mix_seed(model_seed, 1)));
    return m;
  }
};

/// Processed conversation pairs turned into token streams. Pairs are split
/// in file order: the trailing val_fraction of pairs is validation.
struct DialogueCorpus {
  train::TokenVocabulary vocab;
  std::vector<text::ConversationPair> train_pairs;
  std::vector<text::ConversationPair> validation_pairs;
  train::TokenCorpus tokens;
};

inline std::vector<int> pair_stream(const std::vector<text::ConversationPair>& pairs,
                                    const train::TokenVocabulary& vocab) {
  std::vector<int> out;
  for (const auto& p : pairs) {
    for (const auto& t : p.prompt_tokens) out.push_back(vocab.id(t));
    for (const auto& t : p.response_tokens) out.push_back(vocab.id(t));
    out.push_back(vocab.eos());
  }
  return out;
}

inline DialogueCorpus build_dialogue_corpus(std::vector<text::ConversationPair> pairs, double val_fraction) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ArgumentError("val_fraction must lie in (0, 1)");
  const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(pairs.size()) * val_fraction));
  if (n_val < 1 || n_val >= pairs.size()) throw ArgumentError("corpus too small to split into train and validation");
  DialogueCorpus c;
  std::vector<std::vector<std::string>> lists;
  for (const auto& p : pairs) {
    lists.push_back(p.prompt_tokens);
    lists.push_back(p.response_tokens);
  }
  c.vocab = train::TokenVocabulary::build(lists);
  c.validation_pairs.assign(pairs.end() - static_cast<std::ptrdiff_t>(n_val), pairs.end());
  pairs.resize(pairs.size() - n_val);
  c.train_pairs = std::move(pairs);
  c.tokens.vocab_size = c.vocab.size();
  c.tokens.train = pair_stream(c.train_pairs, c.vocab);
  c.tokens.validation = pair_stream(c.validation_pairs, c.vocab);
  return c;
}

/// Validation pairs as monitor scenarios: response NLL given the prompt's last token.
inline std::vector<train::Scenario> dialogue_scenarios(const DialogueCorpus& c, int count) {
  std::vector<train::Scenario> out;
  for (const auto& p : c.validation_pairs) {
    if (static_cast<int>(out.size()) >= count) break;
    if (p.prompt_tokens.empty() || p.response_tokens.empty()) continue;
    out.push_back({c.vocab.encode(p.prompt_tokens), c.vocab.encode(p.response_tokens)});
  }
  return out;
}

}  // namespace dialogkit::cli
