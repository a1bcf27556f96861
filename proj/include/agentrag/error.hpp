#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace agentrag {

/// Base of every error raised by the library. `kind()` is a stable
/// machine-readable tag used by the CLI when printing error lines.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;

  virtual std::string_view kind() const noexcept { return "runtime"; }

  /// Rethrows a copy of this error, same dynamic type, with `context`
  /// prepended to the message.
  [[noreturn]] virtual void rethrow_with_context(std::string_view context) const {
    throw Error(prefixed(context));
  }

 protected:
  std::string prefixed(std::string_view context) const {
    return std::string(context) + ": " + what();
  }
};

#define AGENTRAG_ERROR_CLASS(Name, Tag)                                    \
  class Name : public Error {                                              \
   public:                                                                 \
    using Error::Error;                                                    \
    std::string_view kind() const noexcept override { return Tag; }        \
    [[noreturn]] void rethrow_with_context(std::string_view context)       \
        const override {                                                   \
      throw Name(prefixed(context));                                       \
    }                                                                      \
  }

/// File missing, unreadable or malformed.
AGENTRAG_ERROR_CLASS(LoadError, "load");
/// An invariant or precondition of a domain type was violated.
AGENTRAG_ERROR_CLASS(ValidationError, "validation");
/// Misconfiguration, e.g. no scripted transcript rule matched a prompt.
AGENTRAG_ERROR_CLASS(ConfigError, "config");
/// The provider answered with an error body. Never retried.
AGENTRAG_ERROR_CLASS(ProviderError, "provider");
/// Command-line misuse.
AGENTRAG_ERROR_CLASS(UsageError, "usage");

#undef AGENTRAG_ERROR_CLASS

/// Network-level failure (connection refused, timeout, 5xx/429). Retryable.
class TransportError : public Error {
 public:
  explicit TransportError(const std::string& message, int attempts = 1)
      : Error(message), attempts_(attempts) {}

  std::string_view kind() const noexcept override { return "transport"; }
  int attempts() const noexcept { return attempts_; }

  [[noreturn]] void rethrow_with_context(std::string_view context) const override {
    throw TransportError(prefixed(context), attempts_);
  }

 private:
  int attempts_;
};

/// Runs `fn`; any agentrag::Error escaping it is rethrown with `context`
/// prepended, preserving its dynamic type.
template <class Fn>
decltype(auto) with_error_context(std::string_view context, Fn&& fn) {
  try {
    return std::forward<Fn>(fn)();
  } catch (const Error& e) {
    e.rethrow_with_context(context);
  }
  throw;  // unreachable
}

}  // namespace agentrag
