#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "dialogkit/gateway/types.hpp"

namespace dialogkit::gateway {

struct PromptTemplate {
  std::string preamble =
      "You are a supportive AI assistant, not a human and not a licensed therapist. "
      "Tell users they are talking to an AI when asked. Respond with empathy, do not diagnose, "
      "never give instructions that could cause harm, and encourage professional help for serious concerns.";
  std::string user_tag = "User:";
  std::string assistant_tag = "Assistant:";

  std::string header() const { return "<system>" + preamble + "</system>\n"; }

  std::string turn(Role r, const std::string& content) const {
    return (r == Role::user ? user_tag : assistant_tag) + " " + content + "\n";
  }

  std::string tail(const std::string& message) const { return user_tag + " " + message + "\n" + assistant_tag; }
};

/// Renders header, history and the new message. History is dropped oldest
/// first, one user/assistant pair at a time, until the prompt fits `cap`
/// bytes; the new message is always kept. 413 when even that does not fit.
inline std::string render_prompt(const ChatRequest& req, const PromptTemplate& tpl, std::size_t cap) {
  const std::string head = tpl.header();
  const std::string tail = tpl.tail(std::string(trim(req.message)));
  if (head.size() + tail.size() > cap)
    throw payload_too_large("message exceeds the prompt cap of " + std::to_string(cap) + " bytes");
  std::vector<std::string> turns;
  std::size_t body = 0;
  for (const auto& t : req.history) {
    turns.push_back(tpl.turn(t.role, t.content));
    body += turns.back().size();
  }
  std::size_t first = 0;
  while (head.size() + body + tail.size() > cap) {
    const std::size_t drop = std::min<std::size_t>(2, turns.size() - first);
    for (std::size_t k = 0; k < drop; ++k) body -= turns[first + k].size();
    first += drop;
  }
  std::string out = head;
  for (std::size_t i = first; i < turns.size(); ++i) out += turns[i];
  out += tail;
  return out;
}

}  // namespace dialogkit::gateway
