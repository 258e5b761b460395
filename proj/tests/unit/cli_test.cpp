#include <gtest/gtest.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <signal.h>
#include <sstream>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>

#include "dialogkit/cli/app.hpp"

namespace fs = std::filesystem;
using namespace dialogkit;

namespace {

const fs::path kData = DIALOGKIT_DATA_DIR;

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("dialogkit-cli-" + std::to_string(rd()) + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "dialogkit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_file(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

// Toy corpus through the pipeline, then a training run; returns the history path.
fs::path train_toy(const fs::path& dir, const std::string& seed = "17") {
  const auto corpus = dir / "toy.jsonl";
  auto r = run({"pipeline", "--in", (kData / "fixtures/toy_dialogues.jsonl").string(), "--out", corpus.string(),
                "--config", (kData / "configs/toy_pipeline.json").string()});
  EXPECT_EQ(r.code, 0) << r.err;
  const auto history = dir / "history.jsonl";
  r = run({"train", "--corpus", corpus.string(), "--config", (kData / "configs/train.json").string(), "--history",
           history.string(), "--seed", seed});
  EXPECT_EQ(r.code, 0) << r.err;
  return history;
}

}  // namespace

TEST(Cli, UnknownSubcommandPrintsUsage) {
  const auto r = run({"frobnicate"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("frobnicate"), std::string::npos);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
}

TEST(Cli, NoSubcommandAndUnknownFlagAreValidationErrors) {
  EXPECT_EQ(run({}).code, 1);
  const auto r = run({"eval", "--pairs", (kData / "fixtures/raw_20.jsonl").string(), "--out", "x", "--nope"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--nope"), std::string::npos);
}

TEST(Cli, HelpExitsZero) {
  const auto r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("curves"), std::string::npos);
}

TEST(Cli, MissingFileNamesThePath) {
  TempDir t;
  const auto missing = (t.path / "absent.jsonl").string();
  const auto r = run({"pipeline", "--in", missing, "--out", (t.path / "o.jsonl").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find(missing), std::string::npos);
}

TEST(Cli, PipelineFixtureKeepsSeventeen) {
  TempDir t;
  const auto out = t.path / "p.jsonl";
  const auto r = run({"pipeline", "--in", (kData / "fixtures/raw_20.jsonl").string(), "--out", out.string(), "--config",
                      (kData / "configs/pipeline.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto stats = nlohmann::json::parse(r.out);
  EXPECT_EQ(stats["read"], 20);
  EXPECT_EQ(stats["kept"], 17);
  EXPECT_EQ(stats["redactions"]["EMAIL"], 3);
  EXPECT_EQ(text::read_corpus(out).size(), 17u);

  const auto again = t.path / "p2.jsonl";
  ASSERT_EQ(run({"pipeline", "--in", (kData / "fixtures/raw_20.jsonl").string(), "--out", again.string(), "--config",
                 (kData / "configs/pipeline.json").string(), "--threads", "4"})
                .code,
            0);
  EXPECT_EQ(slurp(out), slurp(again));
}

TEST(Cli, BadConfigIsValidationError) {
  TempDir t;
  write_file(t.path / "c.json", R"({"min_words": 0})");
  const auto r = run({"pipeline", "--in", (kData / "fixtures/raw_20.jsonl").string(), "--out",
                      (t.path / "o.jsonl").string(), "--config", (t.path / "c.json").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("min_words"), std::string::npos);
}

TEST(Cli, EvalIdentityGivesBleuOne) {
  TempDir t;
  write_file(t.path / "pairs.jsonl",
             R"({"id":"a","candidate":"The cat sat on the mat today.","references":["the cat sat on the mat today"]})"
             "\n"
             R"({"id":"b","candidate":["i","hear","you","and","i","am","here"],"references":[["i","hear","you","and","i","am","here"]]})"
             "\n");
  const auto out = t.path / "report.json";
  const auto r = run({"eval", "--pairs", (t.path / "pairs.jsonl").string(), "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = nlohmann::ordered_json::parse(slurp(out));
  EXPECT_EQ(report["bleu"].get<double>(), 1.0);
  EXPECT_EQ(report["rouge_1"].get<double>(), 1.0);
  EXPECT_EQ(report["n_pairs"], 2);
  std::vector<std::string> keys;
  for (const auto& [k, _] : report.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"bleu", "rouge_1", "rouge_2", "coherence", "distinct_1", "distinct_2",
                                            "perplexity", "n_pairs", "skipped"}));
  EXPECT_TRUE(report["perplexity"].is_null());
}

TEST(Cli, EvalPerplexityFromNlls) {
  TempDir t;
  write_file(t.path / "pairs.jsonl",
             R"({"id":"a","candidate":"a b","references":["a b"],"nlls":[1.0,1.0]})"
             "\n"
             R"({"id":"b","candidate":"a b","references":["a b"],"nlls":[1.0]})"
             "\n");
  const auto r = run({"eval", "--pairs", (t.path / "pairs.jsonl").string(), "--out", (t.path / "r.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(nlohmann::json::parse(r.out)["perplexity"].get<double>(), std::exp(1.0), 1e-12);
}

TEST(Cli, EvalMalformedLineIsValidationError) {
  TempDir t;
  write_file(t.path / "pairs.jsonl", "{\"candidate\": \"x\"}\n");
  const auto r = run({"eval", "--pairs", (t.path / "pairs.jsonl").string(), "--out", (t.path / "r.json").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("pairs.jsonl:1"), std::string::npos);
}

TEST(Cli, TrainWritesHistoryCheckpointsAndValidationSplit) {
  TempDir t;
  const auto history = train_toy(t.path);
  std::ifstream in(history);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    for (const char* k : {"step", "lr", "loss", "val_perplexity", "frozen_groups", "checkpoint"})
      EXPECT_TRUE(j.contains(k)) << k;
    const auto ckpt = t.path / j["checkpoint"].get<std::string>();
    ASSERT_TRUE(fs::exists(ckpt)) << ckpt;
    const auto c = train::load_checkpoint(ckpt.string());
    EXPECT_EQ(static_cast<int>(c.vocab.size()), c.model.vocab_size());
    ++lines;
  }
  EXPECT_EQ(lines, 4);  // step 0 plus three epoch ends
  EXPECT_EQ(text::read_corpus(cli::checkpoint_dir(history) / "validation.jsonl").size(), 36u);
}

TEST(Cli, TrainIsDeterministicForASeed) {
  TempDir a, b, c;
  const auto ha = train_toy(a.path, "5");
  const auto hb = train_toy(b.path, "5");
  const auto hc = train_toy(c.path, "6");
  EXPECT_EQ(slurp(ha), slurp(hb));
  EXPECT_NE(slurp(ha), slurp(hc));
  for (const auto& e : fs::directory_iterator(cli::checkpoint_dir(ha)))
    EXPECT_EQ(slurp(e.path()), slurp(cli::checkpoint_dir(hb) / e.path().filename())) << e.path();
}

TEST(Cli, TrainRejectsTinyCorpus) {
  TempDir t;
  auto r = run({"pipeline", "--in", (kData / "fixtures/raw_20.jsonl").string(), "--out",
                (t.path / "p.jsonl").string()});
  ASSERT_EQ(r.code, 0);
  write_file(t.path / "train.json", R"({"training": {"micro_batch": 512, "accum_steps": 4}})");
  r = run({"train", "--corpus", (t.path / "p.jsonl").string(), "--config", (t.path / "train.json").string(),
           "--history", (t.path / "h.jsonl").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("effective batch"), std::string::npos);
}

TEST(Cli, TrainConfigErrors) {
  TempDir t;
  write_file(t.path / "p.jsonl", "");
  for (const std::string cfg : {R"({"schedule": {"kind": "cosine"}})", R"({"unfreeze": "sometimes"})",
                                R"({"training": {"epochs": 0}})", R"({"model": {"hidden": 0}})", "{not json"}) {
    write_file(t.path / "train.json", cfg);
    const auto r = run({"train", "--corpus", (t.path / "p.jsonl").string(), "--config",
                        (t.path / "train.json").string(), "--history", (t.path / "h.jsonl").string()});
    EXPECT_EQ(r.code, 1) << cfg << ": " << r.err;
  }
}

TEST(Cli, TuneIsDeterministicAcrossThreadCounts) {
  TempDir t;
  const auto a = run({"tune", "--trials", "6", "--seed", "9", "--max-steps", "10"});
  const auto b = run({"tune", "--trials", "6", "--seed", "9", "--max-steps", "10", "--threads", "3", "--out",
                      (t.path / "trials.jsonl").string()});
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(a.out, b.out);
  const auto doc = nlohmann::json::parse(a.out);
  EXPECT_EQ(doc["trials"].size(), 6u);
  for (const auto& tr : doc["trials"]) {
    EXPECT_GE(tr["lr"].get<double>(), 1e-5);
    EXPECT_LE(tr["lr"].get<double>(), 5e-5);
    EXPECT_GE(tr["objective"].get<double>(), doc["best"]["objective"].get<double>());
  }
  std::ifstream in(t.path / "trials.jsonl");
  std::string line;
  int n = 0;
  while (std::getline(in, line)) ++n;
  EXPECT_EQ(n, 6);
  EXPECT_NE(run({"tune", "--trials", "6", "--seed", "10", "--max-steps", "10"}).out, a.out);
}

TEST(Cli, TuneRejectsBadArguments) {
  EXPECT_EQ(run({"tune", "--trials", "0", "--seed", "1"}).code, 1);
  EXPECT_EQ(run({"tune", "--seed", "1"}).code, 1);
  EXPECT_EQ(run({"tune", "--trials", "2", "--seed", "1", "--lr-min", "0.1", "--lr-max", "0.01"}).code, 1);
}

TEST(Cli, CurvesOneRowPerEvalPoint) {
  TempDir t;
  const auto history = train_toy(t.path);
  const auto out = t.path / "curves.csv";
  const auto r = run({"curves", "--history", history.string(), "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream csv(slurp(out));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "epoch,bleu,rouge_1,coherence,distinct_1,distinct_2,val_perplexity");
  double prev_epoch = -1.0;
  int rows = 0;
  while (std::getline(csv, line)) {
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 6) << line;
    const double epoch = std::stod(line.substr(0, line.find(',')));
    EXPECT_GE(epoch, prev_epoch);
    prev_epoch = epoch;
    ++rows;
  }
  EXPECT_EQ(rows, 4);
  EXPECT_EQ(slurp(out), r.out);
  // Same history, same bytes.
  const auto again = t.path / "curves2.csv";
  ASSERT_EQ(run({"curves", "--history", history.string(), "--out", again.string()}).code, 0);
  EXPECT_EQ(slurp(out), slurp(again));
}

TEST(Cli, CurvesMissingCheckpointIsValidationError) {
  TempDir t;
  const auto history = train_toy(t.path);
  fs::remove(cli::checkpoint_dir(history) / "step-000000.bin");
  const auto r = run({"curves", "--history", history.string(), "--out", (t.path / "c.csv").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("step-000000.bin"), std::string::npos);
}

TEST(Cli, ChunkSentences) {
  const auto s = cli::chunk_sentences("a b c d e f g h i j");
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].size(), 8u);
  EXPECT_EQ(s[1], (metrics::Tokens{"i", "j"}));
  EXPECT_TRUE(cli::chunk_sentences("").empty());
}

TEST(Cli, ServeRefusesPublicBindWithoutOverride) {
  TempDir t;
  auto j = nlohmann::json::parse(slurp(kData / "configs/gateway-echo.json"));
  j["server"]["bind"] = "0.0.0.0";
  j["safety"]["blocklist_path"] = (kData / "lexicons/blocklist.txt").string();
  j["safety"]["trigger_lexicon_path"] = (kData / "lexicons/triggers.txt").string();
  write_file(t.path / "g.json", j.dump());
  const auto r = run({"serve", "--config", (t.path / "g.json").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("insecure_override"), std::string::npos);
}

#ifdef DIALOGKIT_CLI_PATH
TEST(Cli, ServeRunsUntilInterrupted) {
  TempDir t;
  auto j = nlohmann::json::parse(slurp(kData / "configs/gateway-echo.json"));
  j["server"]["port"] = 0;
  j["safety"]["blocklist_path"] = (kData / "lexicons/blocklist.txt").string();
  j["safety"]["trigger_lexicon_path"] = (kData / "lexicons/triggers.txt").string();
  const auto cfg = (t.path / "g.json").string();
  write_file(cfg, j.dump());

  int pipefd[2];
  ASSERT_EQ(::pipe(pipefd), 0);
  const pid_t pid = ::fork();
  ASSERT_GE(pid, 0);
  if (pid == 0) {
    ::dup2(pipefd[1], 1);
    ::close(pipefd[0]);
    ::execl(DIALOGKIT_CLI_PATH, "dialogkit", "serve", "--config", cfg.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(pipefd[1]);
  std::string banner;
  char ch;
  while (::read(pipefd[0], &ch, 1) == 1 && ch != '\n') banner.push_back(ch);
  ::close(pipefd[0]);
  const auto colon = banner.rfind(':');
  ASSERT_NE(colon, std::string::npos) << banner;
  const int port = std::stoi(banner.substr(colon + 1));

  httplib::Client client("127.0.0.1", port);
  auto res = client.Get("/v1/health");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->body, R"({"status":"ok"})");
  res = client.Post("/v1/chat", R"({"message":"ping"})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(nlohmann::json::parse(res->body)["reply"], "MOCK: ping");

  ASSERT_EQ(::kill(pid, SIGINT), 0);
  int status = 0;
  ASSERT_EQ(::waitpid(pid, &status, 0), pid);
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 0);
}
#endif
