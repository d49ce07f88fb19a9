#pragma once

#include <stdexcept>
#include <string>

namespace sketchpart {

/// Invalid argument or violated precondition.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Inconsistent or unsupported configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite value where a finite one is required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file or payload. `line()` is 1-based, 0 when not line oriented.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Operation not valid in the current state (e.g. nothing to undo).
class StateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The input sketch has no ink.
class EmptySketchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The current shape has no parts to show.
class EmptyShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sketchpart
