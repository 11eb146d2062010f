#pragma once

#include <stdexcept>
#include <string>

namespace hazeval {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid or inconsistent configuration (run config, data tables, registry).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// An operation was called with inputs that violate its precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Network-level or 5xx failure talking to a provider. Retryable.
class TransportError : public Error {
 public:
  using Error::Error;
};

// Provider answered, but the answer is unusable (4xx, malformed body,
// missing capability, missing logprobs).
class ProviderError : public Error {
 public:
  using Error::Error;
};

// Model output did not satisfy the reply contract even after repair.
class ReplyError : public Error {
 public:
  using Error::Error;
};

}  // namespace hazeval
