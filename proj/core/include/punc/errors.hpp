#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace punc {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller violated an operation's precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration (bad values, missing fields, inconsistent options).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Text or binary input that does not parse. `line()` is 1-based, 0 when not applicable.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Anything that goes wrong talking to a model backend.
class BackendError : public Error {
 public:
  using Error::Error;
};

/// Connection failures and timeouts, after retries were exhausted.
class TransportError : public BackendError {
 public:
  using BackendError::BackendError;
};

/// The server answered with a structured error payload.
class ServerError : public BackendError {
 public:
  ServerError(int status, std::string code, const std::string& message, std::string request_id)
      : BackendError("server error " + std::to_string(status) + " [" + code + "] " + message +
                     (request_id.empty() ? "" : " (request " + request_id + ")")),
        status_(status),
        code_(std::move(code)),
        request_id_(std::move(request_id)) {}

  int status() const noexcept { return status_; }
  const std::string& code() const noexcept { return code_; }
  const std::string& request_id() const noexcept { return request_id_; }

 private:
  int status_;
  std::string code_;
  std::string request_id_;
};

/// A response that violates the wire protocol (unparseable body, non yes/no probe answer).
class ProtocolError : public BackendError {
 public:
  using BackendError::BackendError;
};

/// The backend does not implement the requested operation.
class CapabilityError : public BackendError {
 public:
  using BackendError::BackendError;
};

}  // namespace punc
