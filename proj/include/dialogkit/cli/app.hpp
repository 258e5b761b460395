#pragma once

#include <csignal>
#include <iostream>
#include <memory>
#include <ostream>
#include <pthread.h>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "dialogkit/cli/commands.hpp"
#include "dialogkit/gateway.hpp"
#include "dialogkit/train/trainer.hpp"

namespace dialogkit::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kRuntime = 2 };

/// Runs the gateway until SIGINT or SIGTERM. The signals are blocked before
/// the server starts its workers, so only the waiter thread receives them.
inline int serve_command(const fs::path& config, std::ostream& out, std::ostream& log) {
  gateway::ChatService service(gateway::GatewayConfig::load(config));
  gateway::GatewayServer server(service, &log);

  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  sigset_t previous;
  pthread_sigmask(SIG_BLOCK, &set, &previous);

  const int port = server.bind();
  out << "listening on " << service.config().bind << ':' << port << std::endl;
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    server.stop();
  });
  server.run();
  // run() only returns after stop(); a second signal releases a waiter that never fired.
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  pthread_sigmask(SIG_SETMASK, &previous, nullptr);
  return kOk;
}

/// Parses argv and runs one subcommand. Returns the process exit code.
inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"dialogkit: corpus cleaning, metrics, toy fine-tuning and the chat gateway", "dialogkit"};
  app.require_subcommand(1, 1);
  app.allow_extras(false);

  PipelineArgs pa;
  auto* pipeline = app.add_subcommand("pipeline", "Clean, anonymize and filter a raw JSONL corpus");
  pipeline->add_option("--in", pa.in, "Raw records (JSONL)")->required()->check(CLI::ExistingFile);
  pipeline->add_option("--out", pa.out, "Processed pairs (JSONL)")->required();
  pipeline->add_option("--config", pa.config, "Pipeline config (JSON)")->check(CLI::ExistingFile);
  pipeline->add_option("--threads", pa.threads, "Worker threads, 0 = all cores")->capture_default_str();

  fs::path pairs_path, eval_out;
  auto* eval = app.add_subcommand("eval", "Score candidate/reference pairs");
  eval->add_option("--pairs", pairs_path, "Pairs (JSONL)")->required()->check(CLI::ExistingFile);
  eval->add_option("--out", eval_out, "Report (JSON)")->required();

  TrainArgs ta;
  auto* trn = app.add_subcommand("train", "Fine-tune the toy model on a processed corpus");
  trn->add_option("--corpus", ta.corpus, "Processed pairs (JSONL)")->required()->check(CLI::ExistingFile);
  trn->add_option("--config", ta.config, "Training config (JSON)")->required()->check(CLI::ExistingFile);
  trn->add_option("--history", ta.history, "Evaluation history (JSONL)")->required();
  trn->add_option("--seed", ta.seed, "Overrides the config seeds");

  TuneArgs ua;
  auto* tun = app.add_subcommand("tune", "Random hyperparameter search over shortened runs");
  tun->add_option("--trials", ua.trials, "Number of trials")->required()->check(CLI::PositiveNumber);
  tun->add_option("--seed", ua.seed, "Search seed")->required();
  tun->add_option("--corpus", ua.corpus, "Processed pairs (JSONL); default synthetic Markov corpus")
      ->check(CLI::ExistingFile);
  tun->add_option("--config", ua.config, "Training config (JSON)")->check(CLI::ExistingFile);
  tun->add_option("--max-steps", ua.max_steps, "Optimizer steps per trial")->capture_default_str()->check(
      CLI::PositiveNumber);
  tun->add_option("--threads", ua.threads, "Parallel trials")->capture_default_str()->check(CLI::PositiveNumber);
  tun->add_option("--out", ua.out, "Per-trial results (JSONL)");
  tun->add_option("--lr-min", ua.lr_min, "Lower learning-rate bound");
  tun->add_option("--lr-max", ua.lr_max, "Upper learning-rate bound");

  fs::path serve_config;
  auto* serve = app.add_subcommand("serve", "Run the chat gateway until interrupted");
  serve->add_option("--config", serve_config, "Gateway config (JSON)")->required()->check(CLI::ExistingFile);

  fs::path history, curves_out;
  auto* curves = app.add_subcommand("curves", "Per-evaluation generation metrics from a training history");
  curves->add_option("--history", history, "History written by train (JSONL)")->required()->check(CLI::ExistingFile);
  curves->add_option("--out", curves_out, "Metric rows (CSV)")->required();

  if (argc > 1 && argv[1][0] != '-') {
    const std::string name = argv[1];
    bool known = false;
    for (const auto* sub : app.get_subcommands({})) known = known || sub->get_name() == name;
    if (!known) {
      err << "error: unknown subcommand: " << name << "\n\n" << app.help();
      return kValidation;
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kValidation;
  }

  try {
    if (*pipeline) pipeline_command(pa, out);
    if (*eval) eval_command(pairs_path, eval_out, out);
    if (*trn) train_command(ta, out);
    if (*tun) {
      if (ua.lr_min && ua.lr_max && *ua.lr_min > *ua.lr_max) throw ArgumentError("--lr-min exceeds --lr-max");
      tune_command(ua, out);
    }
    if (*serve) return serve_command(serve_config, out, err);
    if (*curves) curves_command(history, curves_out, out);
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kOk;
}

}  // namespace dialogkit::cli
