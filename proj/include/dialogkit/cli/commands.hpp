#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dialogkit/cli/training_setup.hpp"
#include "dialogkit/errors.hpp"
#include "dialogkit/metrics.hpp"
#include "dialogkit/text/pipeline.hpp"
#include "dialogkit/train.hpp"

namespace dialogkit::cli {

namespace fs = std::filesystem;

inline nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + " is not valid JSON: " + e.what());
  }
}

inline std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing", 0);
  return out;
}

// ---- pipeline -------------------------------------------------------------

struct PipelineArgs {
  fs::path in;
  fs::path out;
  fs::path config;  // empty: defaults
  unsigned threads = 1;
};

inline text::PipelineStats pipeline_command(const PipelineArgs& a, std::ostream& out) {
  text::PipelineConfig cfg;
  if (!a.config.empty()) cfg = text::PipelineConfig::from_json(read_json_file(a.config), a.config.parent_path());
  std::ifstream in(a.in, std::ios::binary);
  if (!in) throw ArgumentError("cannot open " + a.in.string());
  auto dst = open_output(a.out);
  const auto stats = text::run_pipeline(in, dst, cfg, {a.threads});
  dst.flush();
  if (!dst) throw IoError("failed writing " + a.out.string(), 0);
  out << stats.to_json().dump(2) << '\n';
  return stats;
}

// ---- eval -----------------------------------------------------------------

inline metrics::Tokens tokens_of(const nlohmann::json& v) {
  if (v.is_string()) return text::tokenize(text::normalize_text(v.get<std::string>()));
  return v.get<metrics::Tokens>();
}

/// One line per pair: {"id", "candidate": text or tokens, "references": [text or tokens],
/// "nlls": [per-token NLL, optional]}. Text is normalized like the corpus.
inline metrics::MetricReport eval_file(const fs::path& pairs_path) {
  std::ifstream in(pairs_path);
  if (!in) throw ArgumentError("cannot open " + pairs_path.string());
  std::vector<metrics::ScoredPair> pairs;
  std::vector<double> nlls;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      metrics::ScoredPair p;
      const auto& cand = j.at("candidate");
      p.candidate = tokens_of(cand);
      p.candidate_text = cand.is_string() ? cand.get<std::string>() : text::join_tokens(p.candidate);
      for (const auto& r : j.at("references")) p.references.push_back(tokens_of(r));
      if (j.contains("nlls"))
        for (double x : j.at("nlls")) nlls.push_back(x);
      pairs.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw ArgumentError(pairs_path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (pairs.empty()) throw ArgumentError(pairs_path.string() + " holds no pairs");
  std::vector<metrics::Tokens> responses;
  for (const auto& p : pairs) responses.push_back(p.candidate);
  return metrics::evaluate_corpus(pairs, responses, {}, nlls);
}

inline metrics::MetricReport eval_command(const fs::path& pairs_path, const fs::path& out_path, std::ostream& out) {
  const auto report = eval_file(pairs_path);
  const auto doc = report.to_json().dump(2);
  auto dst = open_output(out_path);
  dst << doc << '\n';
  out << doc << '\n';
  return report;
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  fs::path corpus;
  fs::path config;
  fs::path history;
  std::optional<std::uint64_t> seed;
};

/// Checkpoints and the validation split live next to the history file.
inline fs::path checkpoint_dir(const fs::path& history) { return fs::path(history.string() + ".ckpt"); }

inline std::string checkpoint_name(std::int64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step-%06lld.bin", static_cast<long long>(step));
  return buf;
}

inline nlohmann::ordered_json train_command(const TrainArgs& a, std::ostream& out) {
  auto setup = TrainSetup::load(a.config);
  if (a.seed) {
    setup.training.seed = *a.seed;
    setup.model_seed = *a.seed;
  }
  auto corpus = build_dialogue_corpus(text::read_corpus(a.corpus), setup.training.val_fraction);
  auto model = setup.make_model(corpus.vocab.size());
  const auto plan = setup.plan(model.groups());

  const fs::path ckpt_dir = checkpoint_dir(a.history);
  fs::create_directories(ckpt_dir);
  {
    auto val = open_output(ckpt_dir / "validation.jsonl");
    for (const auto& p : corpus.validation_pairs) val << text::to_json(p).dump() << '\n';
  }
  auto hist_out = open_output(a.history);
  const std::string rel_dir = ckpt_dir.filename().string();

  train::TrainHooks hooks;
  hooks.scenarios = dialogue_scenarios(corpus, setup.scenarios);
  hooks.on_eval = [&](const train::EvalPoint& e, const train::TinyLM& m) {
    const auto name = checkpoint_name(e.step);
    train::save_checkpoint((ckpt_dir / name).string(), m, corpus.vocab.words());
    auto j = e.to_json();
    j["checkpoint"] = rel_dir + "/" + name;
    hist_out << j.dump() << '\n';
    hist_out.flush();
  };
  const auto hist = train::train(model, corpus.tokens, setup.training, setup.schedule, plan, std::move(hooks));
  if (!hist_out) throw IoError("failed writing " + a.history.string(), 0);

  nlohmann::ordered_json summary;
  summary["vocab_size"] = corpus.vocab.size();
  summary["train_pairs"] = corpus.train_pairs.size();
  summary["validation_pairs"] = corpus.validation_pairs.size();
  summary["steps"] = hist.steps;
  summary["steps_per_epoch"] = hist.steps_per_epoch;
  summary["evals"] = hist.evals.size();
  summary["skipped_steps"] = hist.skipped_steps;
  summary["stopped_early"] = hist.stopped_early;
  summary["best_step"] = hist.best_step;
  summary["best_val_perplexity"] = hist.best_val_perplexity;
  summary["final_val_perplexity"] = hist.evals.back().val_perplexity;
  out << summary.dump(2) << '\n';
  return summary;
}

// ---- tune -----------------------------------------------------------------

struct TuneArgs {
  int trials = 20;
  std::uint64_t seed = 0;
  fs::path corpus;  // empty: synthetic Markov corpus
  fs::path config;  // empty: default training config, hidden 16
  std::int64_t max_steps = 40;
  unsigned threads = 1;
  fs::path out;  // empty: stdout only
  std::optional<double> lr_min;
  std::optional<double> lr_max;
};

inline train::TuneResult tune_command(const TuneArgs& a, std::ostream& out) {
  TrainSetup setup;
  setup.hidden = 16;
  if (!a.config.empty()) setup = TrainSetup::load(a.config);
  train::TokenCorpus corpus = a.corpus.empty()
                                  ? train::markov_corpus()
                                  : build_dialogue_corpus(text::read_corpus(a.corpus), setup.training.val_fraction).tokens;
  train::SearchSpace space;
  if (a.lr_min) space.lr_min = *a.lr_min;
  if (a.lr_max) space.lr_max = *a.lr_max;
  const auto objective = train::shortened_training_objective(std::move(corpus), setup.training, setup.hidden, a.max_steps);
  const auto result = train::tune(space, a.trials, a.seed, objective, a.threads);

  nlohmann::ordered_json doc;
  doc["best"] = result.best.to_json();
  doc["trials"] = nlohmann::ordered_json::array();
  for (const auto& t : result.trials) doc["trials"].push_back(t.to_json());
  if (!a.out.empty()) {
    auto dst = open_output(a.out);
    for (const auto& t : result.trials) dst << t.to_json().dump() << '\n';
  }
  out << doc.dump(2) << '\n';
  return result;
}

// ---- curves ---------------------------------------------------------------

inline constexpr std::size_t kCoherenceChunk = 8;

/// Generated toy text carries no punctuation, so sentences are fixed-size
/// token chunks for coherence.
inline std::vector<metrics::Tokens> chunk_sentences(std::string_view s) {
  const auto toks = text::tokenize(s);
  std::vector<metrics::Tokens> out;
  for (std::size_t i = 0; i < toks.size(); i += kCoherenceChunk)
    out.emplace_back(toks.begin() + static_cast<std::ptrdiff_t>(i),
                     toks.begin() + static_cast<std::ptrdiff_t>(std::min(toks.size(), i + kCoherenceChunk)));
  return out;
}

struct CurveRow {
  double epoch = 0.0;
  std::int64_t step = 0;
  metrics::MetricReport report;
  double val_perplexity = 0.0;
};

/// Greedy responses of `model` to each validation prompt (conditioned on the
/// prompt's last token, as long as the reference), scored against the reference.
inline metrics::MetricReport score_generations(const train::TinyLM& model, const train::TokenVocabulary& vocab,
                                               const std::vector<text::ConversationPair>& validation) {
  const std::vector<int> banned{vocab.eos(), vocab.unk()};
  std::vector<metrics::ScoredPair> pairs;
  std::vector<metrics::Tokens> responses;
  for (const auto& p : validation) {
    if (p.prompt_tokens.empty() || p.response_tokens.empty()) continue;
    const auto ids = model.greedy(vocab.id(p.prompt_tokens.back()), p.response_tokens.size(), banned);
    metrics::ScoredPair sp;
    for (int id : ids) sp.candidate.push_back(vocab.word(id));
    sp.references.push_back(p.response_tokens);
    sp.candidate_text = text::join_tokens(sp.candidate);
    responses.push_back(sp.candidate);
    pairs.push_back(std::move(sp));
  }
  if (pairs.empty()) throw ArgumentError("validation split has no scorable pairs");
  metrics::EvalConfig cfg;
  cfg.splitter = chunk_sentences;
  return metrics::evaluate_corpus(pairs, responses, cfg);
}

inline std::vector<CurveRow> compute_curves(const fs::path& history) {
  std::ifstream in(history);
  if (!in) throw ArgumentError("cannot open " + history.string());
  const fs::path base = history.parent_path();
  const fs::path val_path = checkpoint_dir(history) / "validation.jsonl";
  if (!fs::exists(val_path)) throw ArgumentError("missing validation split " + val_path.string());
  const auto validation = text::read_corpus(val_path);

  std::vector<CurveRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("checkpoint")) throw ArgumentError("history line lacks a checkpoint: " + line);
    const fs::path ckpt = base / j.at("checkpoint").get<std::string>();
    if (!fs::exists(ckpt)) throw ArgumentError("missing checkpoint " + ckpt.string());
    const auto c = train::load_checkpoint(ckpt.string());
    const auto vocab = train::TokenVocabulary::from_words(c.vocab);
    CurveRow r;
    r.epoch = j.at("epoch").get<double>();
    r.step = j.at("step").get<std::int64_t>();
    r.val_perplexity = j.at("val_perplexity").get<double>();
    r.report = score_generations(c.model, vocab, validation);
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw ArgumentError(history.string() + " holds no evaluation points");
  return rows;
}

inline std::string curves_csv(const std::vector<CurveRow>& rows) {
  auto num = [](std::optional<double> v) -> std::string {
    if (!v) return "";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", *v);
    return buf;
  };
  std::string out = "epoch,bleu,rouge_1,coherence,distinct_1,distinct_2,val_perplexity\n";
  for (const auto& r : rows) {
    out += num(r.epoch) + ',' + num(r.report.bleu) + ',' + num(r.report.rouge_1) + ',' + num(r.report.coherence) +
           ',' + num(r.report.distinct_1) + ',' + num(r.report.distinct_2) + ',' + num(r.val_perplexity) + '\n';
  }
  return out;
}

inline std::vector<CurveRow> curves_command(const fs::path& history, const fs::path& out_path, std::ostream& out) {
  auto rows = compute_curves(history);
  const auto csv = curves_csv(rows);
  auto dst = open_output(out_path);
  dst << csv;
  if (!dst) throw IoError("failed writing " + out_path.string(), 0);
  out << csv;
  return rows;
}

}  // namespace dialogkit::cli
