#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "dialogkit/errors.hpp"
#include "dialogkit/gateway/backend.hpp"
#include "dialogkit/gateway/postprocess.hpp"
#include "dialogkit/gateway/safety.hpp"

namespace dialogkit::gateway {

enum class BackendKind { mock, remote };
enum class MockMode { echo, canned };

struct BackendConfig {
  BackendKind kind = BackendKind::mock;
  MockMode mode = MockMode::echo;
  std::vector<CannedEntry> canned;
  std::string canned_fallback = "I'm here to listen. Could you tell me a little more about how you're feeling?";
  RemoteConfig remote;
};

struct ServiceMessages {
  std::string disclosure =
      "You are chatting with an AI assistant. It is not a human and not a substitute for professional mental "
      "health care.";
  std::string crisis_footer =
      "If you are in crisis or thinking about harming yourself, please contact local emergency services or a "
      "crisis line right away. In the US you can call or text 988.";
  std::string refusal =
      "I can't help with that request. If you are going through something difficult, you deserve support from a "
      "person: please contact local emergency services or a crisis line. In the US you can call or text 988.";
  std::string fallback = kDefaultFallback;
};

struct GatewayConfig {
  std::string bind = "127.0.0.1";
  int port = 8080;
  bool insecure_override = false;
  // Optional directory of static assets served at "/".
  std::string static_dir;
  BackendConfig backend;
  std::string blocklist_path;
  std::string trigger_lexicon_path;
  std::size_t prompt_cap = 8000;
  ServiceMessages messages;

  void validate() const {
    if (port < 0 || port > 65535) throw ConfigError("server.port out of range");
    if (prompt_cap < 64) throw ConfigError("limits.prompt_cap must be >= 64");
    if (blocklist_path.empty() || trigger_lexicon_path.empty())
      throw ConfigError("safety.blocklist_path and safety.trigger_lexicon_path are required");
    if (messages.disclosure.empty() || messages.refusal.empty() || messages.crisis_footer.empty() ||
        messages.fallback.empty())
      throw ConfigError("service messages must be non-empty");
    if (backend.kind == BackendKind::remote) backend.remote.validate();
  }

  static GatewayConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
    GatewayConfig c;
    auto resolve = [&](const std::string& p) {
      std::filesystem::path path(p);
      return (path.is_relative() && !base_dir.empty() ? base_dir / path : path).string();
    };
    try {
      if (j.contains("server")) {
        const auto& s = j.at("server");
        c.bind = s.value("bind", c.bind);
        c.port = s.value("port", c.port);
        c.insecure_override = s.value("insecure_override", c.insecure_override);
        if (s.contains("static_dir")) c.static_dir = resolve(s.at("static_dir").get<std::string>());
      }
      const auto& b = j.at("backend");
      const auto kind = b.at("kind").get<std::string>();
      if (kind == "mock") {
        c.backend.kind = BackendKind::mock;
        const auto& m = b.at("mock");
        const auto mode = m.at("mode").get<std::string>();
        if (mode == "echo") {
          c.backend.mode = MockMode::echo;
        } else if (mode == "canned") {
          c.backend.mode = MockMode::canned;
          for (const auto& e : m.at("canned"))
            c.backend.canned.push_back({e.at("keywords").get<std::vector<std::string>>(), e.at("reply").get<std::string>()});
          c.backend.canned_fallback = m.value("fallback", c.backend.canned_fallback);
        } else {
          throw ConfigError("backend.mock.mode must be echo or canned");
        }
      } else if (kind == "remote") {
        c.backend.kind = BackendKind::remote;
        const auto& r = b.at("remote");
        auto& rc = c.backend.remote;
        rc.base_url = r.at("base_url").get<std::string>();
        rc.model = r.at("model").get<std::string>();
        rc.token_env = r.at("token_env").get<std::string>();
        rc.timeout_ms = r.value("timeout_ms", rc.timeout_ms);
        rc.max_retries = r.value("max_retries", rc.max_retries);
        rc.backoff_base_ms = r.value("backoff_base_ms", rc.backoff_base_ms);
        if (r.contains("token")) throw ConfigError("auth tokens belong in the environment, not the config file");
      } else {
        throw ConfigError("backend.kind must be mock or remote");
      }
      const auto& sf = j.at("safety");
      c.blocklist_path = resolve(sf.at("blocklist_path").get<std::string>());
      c.trigger_lexicon_path = resolve(sf.at("trigger_lexicon_path").get<std::string>());
      if (j.contains("limits")) {
        const auto& l = j.at("limits");
        c.prompt_cap = l.value("prompt_cap", c.prompt_cap);
        c.backend.remote.max_concurrent = l.value("max_concurrent_upstream", c.backend.remote.max_concurrent);
      }
      if (j.contains("messages")) {
        const auto& m = j.at("messages");
        c.messages.disclosure = m.value("disclosure", c.messages.disclosure);
        c.messages.crisis_footer = m.value("crisis_footer", c.messages.crisis_footer);
        c.messages.refusal = m.value("refusal", c.messages.refusal);
        c.messages.fallback = m.value("fallback", c.messages.fallback);
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("invalid gateway config: ") + e.what());
    }
    c.validate();
    return c;
  }

  static GatewayConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read gateway config " + path.string());
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("gateway config " + path.string() + " is not valid JSON: " + e.what());
    }
    return from_json(j, path.parent_path());
  }
};

inline std::unique_ptr<Backend> make_backend(const BackendConfig& cfg) {
  if (cfg.kind == BackendKind::remote) return std::make_unique<RemoteBackend>(cfg.remote);
  if (cfg.mode == MockMode::canned) return std::make_unique<CannedBackend>(cfg.canned, cfg.canned_fallback);
  return std::make_unique<EchoBackend>();
}

}  // namespace dialogkit::gateway
