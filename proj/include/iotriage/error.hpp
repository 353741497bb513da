#pragma once

#include <stdexcept>
#include <string>

namespace iotriage {

/// Failure classes surfaced by the CLI as distinct exit codes.
enum class ErrorKind { config, data, network, parse, internal };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error(ErrorKind::config, message) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& message) : Error(ErrorKind::data, message) {}
};

class NetworkError : public Error {
 public:
  explicit NetworkError(const std::string& message) : Error(ErrorKind::network, message) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& message) : Error(ErrorKind::parse, message) {}
};

/// Exit codes: 0 success, 1 internal, 2 config, 3 data, 4 network, 5 parse.
[[nodiscard]] constexpr int exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::config: return 2;
    case ErrorKind::data: return 3;
    case ErrorKind::network: return 4;
    case ErrorKind::parse: return 5;
    case ErrorKind::internal: return 1;
  }
  return 1;
}

}  // namespace iotriage
