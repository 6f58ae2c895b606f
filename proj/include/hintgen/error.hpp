#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hintgen {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed input record. Carries the 1-based line number when known.
class ParseError : public Error {
  public:
    ParseError(const std::string &what, std::size_t line = 0)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

class ValidationError : public Error {
  public:
    using Error::Error;
};

class StorageError : public Error {
  public:
    using Error::Error;
};

class NotFoundError : public Error {
  public:
    using Error::Error;
};

class ConflictError : public Error {
  public:
    using Error::Error;
};

class ConfigError : public Error {
  public:
    using Error::Error;
};

class CapabilityError : public Error {
  public:
    using Error::Error;
};

class BackendError : public Error {
  public:
    using Error::Error;
};

/// Illegal operation for the current dialogue phase.
class StateError : public Error {
  public:
    using Error::Error;
};

/// Wraps a failure with the name of the pipeline stage that produced it.
class StageError : public Error {
  public:
    StageError(std::string stage, const std::string &what)
        : Error(stage + ": " + what), stage_(std::move(stage)) {}

    const std::string &stage() const noexcept { return stage_; }

  private:
    std::string stage_;
};

} // namespace hintgen
