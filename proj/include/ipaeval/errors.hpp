#pragma once

#include <stdexcept>
#include <string>

namespace ipaeval {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A domain invariant or operation precondition was violated.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Input text (test definition, transcript, config file) could not be parsed.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Bad or incomplete run configuration (missing files, keys, credentials).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Extracted phase span is not an initial contiguous slice of the session.
class NonPrefixError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

enum class TransportFailure {
  network,       // connection refused, DNS, broken pipe
  timeout,       // connect or read timeout
  rate_limited,  // HTTP 429
  server_error,  // HTTP 5xx
  http_status,   // any other non-2xx status
  protocol,      // 2xx but the response envelope was unusable
};

inline const char* to_string(TransportFailure f) {
  switch (f) {
    case TransportFailure::network: return "network";
    case TransportFailure::timeout: return "timeout";
    case TransportFailure::rate_limited: return "rate_limited";
    case TransportFailure::server_error: return "server_error";
    case TransportFailure::http_status: return "http_status";
    case TransportFailure::protocol: return "protocol";
  }
  return "unknown";
}

/// Provider call failed below the decoding layer. Retryable kinds are
/// re-attempted by complete_with_retry; the rest surface immediately.
class TransportError : public Error {
 public:
  TransportError(TransportFailure kind, const std::string& message, int status = 0)
      : Error(message), kind(kind), status(status) {
    retryable = kind == TransportFailure::network || kind == TransportFailure::timeout ||
                kind == TransportFailure::rate_limited || kind == TransportFailure::server_error;
  }

  TransportFailure kind;
  bool retryable = false;
  int status = 0;  // HTTP status when applicable, else 0
};

}  // namespace ipaeval
