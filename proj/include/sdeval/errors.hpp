#pragma once

#include <stdexcept>
#include <string>

namespace sdeval {

// Base for every error raised by the harness. Callers that only need to
// report a failure can catch this; the subclasses exist so the service and
// CLI can map them onto status and exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidNameError : public Error {
 public:
  using Error::Error;
};

class InvalidLoopError : public Error {
 public:
  using Error::Error;
};

class LoopExplosionError : public Error {
 public:
  explicit LoopExplosionError(std::size_t cap)
      : Error("loop explosion: more than " + std::to_string(cap) +
              " simple feedback loops (cap " + std::to_string(cap) + ")"),
        cap_(cap) {}
  std::size_t cap() const noexcept { return cap_; }

 private:
  std::size_t cap_;
};

class GroundTruthError : public Error {
 public:
  using Error::Error;
};

class VocabularyError : public Error {
 public:
  using Error::Error;
};

class InvalidLengthError : public Error {
 public:
  using Error::Error;
};

// A precondition stated by an interface was broken by the caller.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// Text was not valid JSON.
class ParseError : public Error {
 public:
  using Error::Error;
};

// JSON was valid but did not match the expected document shape.
class SchemaError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class EngineNotFoundError : public Error {
 public:
  using Error::Error;
};

// Network failure, timeout, or exhausted retries.
class TransportError : public Error {
 public:
  using Error::Error;
};

// The provider answered with a non-retryable error or an unusable body.
class ProviderError : public Error {
 public:
  ProviderError(int status, std::string body)
      : Error("provider returned HTTP " + std::to_string(status) + ": " + body),
        status_(status),
        body_(std::move(body)) {}
  int status() const noexcept { return status_; }
  const std::string& body() const noexcept { return body_; }

 private:
  int status_;
  std::string body_;
};

}  // namespace sdeval
