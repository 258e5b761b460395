#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dialogkit {

// Caller passed values outside an operation's domain.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Bad configuration detected at load time (patterns, lexicons, config files).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unrecoverable I/O failure; carries the byte offset reached in the stream.
class IoError : public std::runtime_error {
 public:
  IoError(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace dialogkit
