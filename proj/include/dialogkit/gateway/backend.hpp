#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <memory>
#include <semaphore>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
// <resolv.h> (pulled in by httplib) defines _res, which collides with Eigen parameter names.
#ifdef _res
#undef _res
#endif
#include <json.hpp>

#include "dialogkit/errors.hpp"
#include "dialogkit/gateway/safety.hpp"
#include "dialogkit/gateway/types.hpp"

namespace dialogkit::gateway {

struct GenerationRequest {
  std::string prompt;
  // The new user message, untemplated.
  std::string message;
  int max_tokens = ChatRequest::kDefaultMaxTokens;
};

class Backend {
 public:
  virtual ~Backend() = default;

  std::string generate(const GenerationRequest& req) {
    calls_.fetch_add(1, std::memory_order_relaxed);
    return do_generate(req);
  }

  std::uint64_t calls() const { return calls_.load(std::memory_order_relaxed); }

 protected:
  virtual std::string do_generate(const GenerationRequest& req) = 0;

 private:
  std::atomic<std::uint64_t> calls_{0};
};

class EchoBackend : public Backend {
 protected:
  std::string do_generate(const GenerationRequest& req) override { return "MOCK: " + std::string(trim(req.message)); }
};

struct CannedEntry {
  std::vector<std::string> keywords;
  std::string reply;
};

/// First entry with a keyword present in the message (whole tokens,
/// case-insensitive) wins; otherwise the fallback.
class CannedBackend : public Backend {
 public:
  CannedBackend(std::vector<CannedEntry> table, std::string fallback) : fallback_(std::move(fallback)) {
    if (fallback_.empty()) throw ConfigError("canned backend needs a fallback reply");
    for (auto& e : table) {
      if (e.reply.empty()) throw ConfigError("canned entry has an empty reply");
      Entry entry{{}, std::move(e.reply)};
      for (const auto& k : e.keywords) {
        auto phrase = word_tokens(k);
        if (!phrase.empty()) entry.keywords.push_back(std::move(phrase));
      }
      if (entry.keywords.empty()) throw ConfigError("canned entry has no keywords");
      table_.push_back(std::move(entry));
    }
  }

 protected:
  std::string do_generate(const GenerationRequest& req) override {
    const auto tokens = word_tokens(req.message);
    for (const auto& e : table_)
      for (const auto& k : e.keywords)
        if (contains_phrase(tokens, k)) return e.reply;
    return fallback_;
  }

 private:
  struct Entry {
    std::vector<Phrase> keywords;
    std::string reply;
  };
  std::vector<Entry> table_;
  std::string fallback_;
};

struct RemoteConfig {
  std::string base_url;
  std::string model;
  // Name of the environment variable holding the bearer token.
  std::string token_env;
  int timeout_ms = 30000;
  int max_retries = 2;
  int backoff_base_ms = 250;
  int max_concurrent = 8;

  void validate() const {
    if (base_url.empty() || model.empty() || token_env.empty())
      throw ConfigError("remote backend requires base_url, model and token_env");
    if (timeout_ms < 1 || max_retries < 0 || backoff_base_ms < 0 || max_concurrent < 1)
      throw ConfigError("remote backend limits out of range");
  }
};

/// Prediction-style HTTP backend. Retries connection failures and 5xx with
/// exponential backoff; bounds concurrent upstream calls.
class RemoteBackend : public Backend {
 public:
  explicit RemoteBackend(RemoteConfig cfg) : cfg_(std::move(cfg)), slots_(cfg_.max_concurrent) {
    cfg_.validate();
    const char* token = std::getenv(cfg_.token_env.c_str());
    if (token == nullptr || *token == '\0') throw ConfigError("environment variable " + cfg_.token_env + " is not set");
    token_ = token;
    const auto scheme_end = cfg_.base_url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("base_url needs a scheme: " + cfg_.base_url);
    const auto path_start = cfg_.base_url.find('/', scheme_end + 3);
    origin_ = cfg_.base_url.substr(0, path_start);
    path_ = (path_start == std::string::npos ? std::string() : cfg_.base_url.substr(path_start));
    while (!path_.empty() && path_.back() == '/') path_.pop_back();
    path_ += "/predictions";
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (origin_.rfind("https://", 0) == 0) throw ConfigError("https base_url requires a TLS-enabled build");
#endif
  }

  std::uint64_t attempts() const { return attempts_.load(); }

 protected:
  std::string do_generate(const GenerationRequest& req) override {
    Slot slot(slots_);
    nlohmann::json body{{"model", cfg_.model}, {"input", {{"prompt", req.prompt}, {"max_tokens", req.max_tokens}}}};
    const std::string payload = body.dump();
    const httplib::Headers headers{{"Authorization", "Bearer " + token_}};
    std::string last_failure = "no attempt made";
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
      if (attempt > 0)
        std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<std::int64_t>(cfg_.backoff_base_ms)
                                                              << (attempt - 1)));
      attempts_.fetch_add(1);
      httplib::Client cli(origin_);
      const auto t = std::chrono::milliseconds(cfg_.timeout_ms);
      cli.set_connection_timeout(t);
      cli.set_read_timeout(t);
      cli.set_write_timeout(t);
      auto res = cli.Post(path_, headers, payload, "application/json");
      if (!res) {
        last_failure = "connection failed: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status >= 500) {
        last_failure = "upstream status " + std::to_string(res->status);
        continue;
      }
      if (res->status < 200 || res->status >= 300)
        throw upstream_protocol("upstream rejected the request with status " + std::to_string(res->status));
      return parse_output(res->body);
    }
    throw upstream_unavailable("upstream unavailable after " + std::to_string(cfg_.max_retries + 1) +
                               " attempts: " + last_failure);
  }

 private:
  // Accepts {"output": str} or {"output": [str, ...]} (streamed chunks).
  static std::string parse_output(const std::string& body) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception&) {
      throw upstream_protocol("upstream response is not JSON");
    }
    if (!j.is_object() || !j.contains("output")) throw upstream_protocol("upstream response lacks \"output\"");
    const auto& out = j["output"];
    if (out.is_string()) return out.get<std::string>();
    if (out.is_array()) {
      std::string joined;
      for (const auto& piece : out) {
        if (!piece.is_string()) throw upstream_protocol("upstream output array holds a non-string");
        joined += piece.get<std::string>();
      }
      return joined;
    }
    throw upstream_protocol("upstream \"output\" is neither a string nor a list of strings");
  }

  struct Slot {
    explicit Slot(std::counting_semaphore<>& s) : sem(s) { sem.acquire(); }
    ~Slot() { sem.release(); }
    std::counting_semaphore<>& sem;
  };

  RemoteConfig cfg_;
  std::counting_semaphore<> slots_;
  std::string token_;
  std::string origin_;
  std::string path_;
  std::atomic<std::uint64_t> attempts_{0};
};

}  // namespace dialogkit::gateway
