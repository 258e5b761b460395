#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dialogkit/errors.hpp"

namespace dialogkit::gateway {

/// Failure that maps to a specific HTTP status for the client.
class HttpError : public std::runtime_error {
 public:
  HttpError(int status, std::string error_class, const std::string& what)
      : std::runtime_error(what), status_(status), class_(std::move(error_class)) {}
  int status() const noexcept { return status_; }
  const std::string& error_class() const noexcept { return class_; }

 private:
  int status_;
  std::string class_;
};

inline HttpError bad_request(const std::string& what) { return {400, "bad_request", what}; }
inline HttpError payload_too_large(const std::string& what) { return {413, "payload_too_large", what}; }
inline HttpError upstream_unavailable(const std::string& what) { return {503, "upstream_unavailable", what}; }
inline HttpError upstream_protocol(const std::string& what) { return {502, "upstream_protocol", what}; }

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

enum class Role { user, assistant };

inline const char* to_string(Role r) { return r == Role::user ? "user" : "assistant"; }

struct Turn {
  Role role = Role::user;
  std::string content;
};

struct ChatRequest {
  static constexpr int kDefaultMaxTokens = 256;
  static constexpr int kMaxMaxTokens = 4096;

  std::string message;
  std::vector<Turn> history;
  int max_tokens = kDefaultMaxTokens;

  /// Throws a 400 HttpError on any schema violation. Unknown keys are
  /// rejected so clients cannot smuggle extra metadata through.
  static ChatRequest parse(std::string_view body) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception&) {
      throw bad_request("body is not valid JSON");
    }
    if (!j.is_object()) throw bad_request("body must be a JSON object");
    ChatRequest r;
    for (const auto& [key, value] : j.items()) {
      if (key == "message") {
        if (!value.is_string()) throw bad_request("message must be a string");
        r.message = value.get<std::string>();
      } else if (key == "history") {
        if (!value.is_array()) throw bad_request("history must be an array");
        for (const auto& t : value) {
          if (!t.is_object() || t.size() != 2 || !t.contains("role") || !t.contains("content") ||
              !t["role"].is_string() || !t["content"].is_string())
            throw bad_request("history turns must be {role, content} objects");
          const auto role = t["role"].get<std::string>();
          if (role != "user" && role != "assistant") throw bad_request("history role must be user or assistant");
          r.history.push_back({role == "user" ? Role::user : Role::assistant, t["content"].get<std::string>()});
        }
      } else if (key == "max_tokens") {
        if (!value.is_number_integer()) throw bad_request("max_tokens must be an integer");
        const auto n = value.get<std::int64_t>();
        if (n < 1 || n > kMaxMaxTokens)
          throw bad_request("max_tokens must lie in [1, " + std::to_string(kMaxMaxTokens) + "]");
        r.max_tokens = static_cast<int>(n);
      } else {
        throw bad_request("unknown field: " + key);
      }
    }
    if (!j.contains("message")) throw bad_request("message is required");
    r.validate();
    return r;
  }

  void validate() const {
    if (trim(message).empty()) throw bad_request("message is empty");
    for (std::size_t i = 0; i < history.size(); ++i)
      if (history[i].role != (i % 2 == 0 ? Role::user : Role::assistant))
        throw bad_request("history roles must alternate starting with user");
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["message"] = message;
    auto h = nlohmann::ordered_json::array();
    for (const auto& t : history) h.push_back({{"role", to_string(t.role)}, {"content", t.content}});
    j["history"] = h;
    j["max_tokens"] = max_tokens;
    return j;
  }
};

struct ChatResponse {
  std::string reply;
  std::int64_t latency_ms = 0;
  std::vector<std::string> warnings;
  std::string disclosure;
  bool blocked = false;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["reply"] = reply;
    j["latency_ms"] = latency_ms;
    j["warnings"] = warnings;
    j["disclosure"] = disclosure;
    j["blocked"] = blocked;
    return j;
  }
};

}  // namespace dialogkit::gateway
