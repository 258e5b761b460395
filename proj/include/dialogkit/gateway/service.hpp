#pragma once

#include <algorithm>
#include <chrono>
#include <memory>
#include <set>
#include <string>
#include <string_view>

#include <json.hpp>

#include "dialogkit/gateway/backend.hpp"
#include "dialogkit/gateway/config.hpp"
#include "dialogkit/gateway/postprocess.hpp"
#include "dialogkit/gateway/prompt.hpp"
#include "dialogkit/gateway/safety.hpp"
#include "dialogkit/gateway/stats.hpp"
#include "dialogkit/gateway/types.hpp"

namespace dialogkit::gateway {

inline constexpr const char* kCrisisCategory = "crisis";

struct HandleResult {
  int status = 200;
  std::string body;
};

/// Transport-independent chat pipeline: validate, inbound safety, prompt,
/// backend, clean-up, outbound safety, respond. Holds no per-conversation
/// state and writes nothing to disk; request text lives only on the stack.
class ChatService {
 public:
  ChatService(GatewayConfig cfg, std::unique_ptr<Backend> backend)
      : cfg_(std::move(cfg)),
        backend_(std::move(backend)),
        blocklist_(Blocklist::load(cfg_.blocklist_path)),
        triggers_(TriggerLexicon::load(cfg_.trigger_lexicon_path)) {
    if (!backend_) throw ConfigError("chat service needs a backend");
  }

  explicit ChatService(GatewayConfig cfg) : ChatService(cfg, make_backend(cfg.backend)) {}

  HandleResult handle_chat(std::string_view body) {
    const auto start = std::chrono::steady_clock::now();
    auto elapsed_ms = [&] {
      const auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start);
      return static_cast<std::int64_t>((ns.count() + 999'999) / 1'000'000);
    };
    try {
      ChatResponse resp = respond(ChatRequest::parse(body));
      resp.latency_ms = elapsed_ms();
      stats_.record(resp.latency_ms);
      return {200, resp.to_json().dump()};
    } catch (const HttpError& e) {
      stats_.record(elapsed_ms(), e.error_class());
      return {e.status(), error_body(e.error_class(), e.what())};
    } catch (const std::exception&) {
      stats_.record(elapsed_ms(), "internal");
      return {500, error_body("internal", "internal error")};
    }
  }

  std::string metrics_json() const { return stats_.snapshot().dump(); }
  static std::string health_json() { return R"({"status":"ok"})"; }

  const GatewayConfig& config() const { return cfg_; }
  const Backend& backend() const { return *backend_; }
  Backend& backend() { return *backend_; }

 private:
  ChatResponse respond(const ChatRequest& req) {
    ChatResponse r;
    r.disclosure = cfg_.messages.disclosure;
    const auto inbound = safety_check(req.message, blocklist_, triggers_);
    std::set<std::string> tags(inbound.tags.begin(), inbound.tags.end());
    if (inbound.action == SafetyAction::block) {
      r.blocked = true;
      r.reply = cfg_.messages.refusal;
      return r;
    }

    GenerationRequest g;
    g.prompt = render_prompt(req, template_, cfg_.prompt_cap);
    g.message = std::string(trim(req.message));
    g.max_tokens = req.max_tokens;
    const std::string raw = backend_->generate(g);
    std::string reply = postprocess_reply(raw, req.max_tokens, template_, g.prompt, cfg_.messages.fallback);

    const auto outbound = safety_check(reply, blocklist_, triggers_);
    if (outbound.action == SafetyAction::block) {
      r.blocked = true;
      r.reply = cfg_.messages.refusal;
      r.warnings.assign(tags.begin(), tags.end());
      return r;
    }
    tags.insert(outbound.tags.begin(), outbound.tags.end());
    if (tags.count(kCrisisCategory)) reply += "\n\n" + cfg_.messages.crisis_footer;
    r.reply = std::move(reply);
    r.warnings.assign(tags.begin(), tags.end());
    return r;
  }

  static std::string error_body(const std::string& cls, const std::string& what) {
    return nlohmann::ordered_json{{"error", cls}, {"message", what}}.dump();
  }

  GatewayConfig cfg_;
  std::unique_ptr<Backend> backend_;
  Blocklist blocklist_;
  TriggerLexicon triggers_;
  PromptTemplate template_;
  ServiceStats stats_;
};

}  // namespace dialogkit::gateway
