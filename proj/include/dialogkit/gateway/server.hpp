#pragma once

#include <filesystem>
#include <mutex>
#include <ostream>
#include <string>

#include <httplib.h>
// <resolv.h> (pulled in by httplib) defines _res, which collides with Eigen parameter names.
#ifdef _res
#undef _res
#endif

#include "dialogkit/errors.hpp"
#include "dialogkit/gateway/service.hpp"

namespace dialogkit::gateway {

inline bool is_loopback(const std::string& addr) {
  return addr == "localhost" || addr == "::1" || addr.rfind("127.", 0) == 0;
}

/// HTTP front for a ChatService. Access logs carry method, path, status and
/// latency only; bodies are never logged.
class GatewayServer {
 public:
  static constexpr std::size_t kMaxBodyBytes = 1 << 20;

  GatewayServer(ChatService& service, std::ostream* log = nullptr) : service_(service), log_(log) {
    const auto& cfg = service_.config();
    if (!is_loopback(cfg.bind) && !cfg.insecure_override)
      throw ConfigError("refusing to bind non-loopback address " + cfg.bind +
                        " without server.insecure_override; terminate TLS in front of the gateway");
    server_.set_payload_max_length(kMaxBodyBytes);
    server_.Post("/v1/chat", [this](const httplib::Request& req, httplib::Response& res) {
      const auto ct = req.get_header_value("Content-Type");
      if (ct.rfind("application/json", 0) != 0) {
        res.status = 415;
        res.set_content(R"({"error":"bad_request","message":"content type must be application/json"})",
                        "application/json");
        return;
      }
      auto out = service_.handle_chat(req.body);
      res.status = out.status;
      res.set_content(out.body, "application/json");
    });
    server_.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(ChatService::health_json(), "application/json");
    });
    server_.Get("/v1/metrics", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(service_.metrics_json(), "application/json");
    });
    if (!cfg.static_dir.empty()) {
      if (!std::filesystem::is_directory(cfg.static_dir))
        throw ConfigError("server.static_dir is not a directory: " + cfg.static_dir);
      server_.set_mount_point("/", cfg.static_dir);
    }
    server_.set_logger([this](const httplib::Request& req, const httplib::Response& res) {
      if (!log_) return;
      std::lock_guard<std::mutex> lock(log_mu_);
      *log_ << req.method << ' ' << req.path << ' ' << res.status << '\n';
    });
  }

  /// Binds the configured address; port 0 picks a free port. Returns the port.
  int bind() {
    const auto& cfg = service_.config();
    if (cfg.port == 0) {
      port_ = server_.bind_to_any_port(cfg.bind);
    } else if (server_.bind_to_port(cfg.bind, cfg.port)) {
      port_ = cfg.port;
    } else {
      port_ = -1;
    }
    if (port_ < 0) throw IoError("cannot bind " + cfg.bind + ":" + std::to_string(cfg.port), 0);
    return port_;
  }

  /// Serves until stop() is called. Requires bind().
  void run() {
    if (port_ < 0) throw ArgumentError("GatewayServer::run called before bind");
    server_.listen_after_bind();
  }

  void stop() { server_.stop(); }
  void wait_until_ready() { server_.wait_until_ready(); }
  int port() const { return port_; }

 private:
  ChatService& service_;
  std::ostream* log_;
  std::mutex log_mu_;
  httplib::Server server_;
  int port_ = -1;
};

}  // namespace dialogkit::gateway
