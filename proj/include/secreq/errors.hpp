#pragma once

#include <stdexcept>
#include <string>

namespace secreq {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input document (names the offending path where possible).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Input parsed but violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Bad or missing configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Prompt template asset missing a required slot.
class TemplateError : public Error {
 public:
  using Error::Error;
};

/// Failure talking to a remote chat or scoring service.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, bool retryable, int attempts = 0)
      : Error(what), retryable_(retryable), attempts_(attempts) {}

  bool retryable() const { return retryable_; }
  int attempts() const { return attempts_; }

 private:
  bool retryable_;
  int attempts_;
};

/// A mock received a request it has no canned response for.
class ScriptedMissError : public Error {
 public:
  using Error::Error;
};

}  // namespace secreq
