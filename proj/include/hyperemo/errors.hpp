#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hyperemo {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values or otherwise malformed arguments.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// A point on or outside the unit ball was handed to a ball operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(const std::string& what, std::size_t expected, std::size_t got)
      : Error(what + ": expected dimension " + std::to_string(expected) + ", got " +
              std::to_string(got)),
        expected_(expected),
        got_(got) {}

  std::size_t expected() const noexcept { return expected_; }
  std::size_t got() const noexcept { return got_; }

 private:
  std::size_t expected_;
  std::size_t got_;
};

// Structured failure while parsing a taxonomy, evidence document, feature
// file or binary snapshot. `line` is 1-based; 0 when not line-oriented.
class LoadError : public Error {
 public:
  LoadError(std::string message, std::size_t line = 0, std::string subject = {})
      : Error(format(message, line, subject)),
        line_(line),
        subject_(std::move(subject)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& subject() const noexcept { return subject_; }

 private:
  static std::string format(const std::string& message, std::size_t line,
                            const std::string& subject) {
    std::string out;
    if (line > 0) out += "line " + std::to_string(line) + ": ";
    out += message;
    if (!subject.empty()) out += " ('" + subject + "')";
    return out;
  }

  std::size_t line_;
  std::string subject_;
};

class NotFound : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss.
class NumericalFailure : public Error {
 public:
  NumericalFailure(const std::string& what, std::size_t step)
      : Error(what + " at step " + std::to_string(step)), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace hyperemo
