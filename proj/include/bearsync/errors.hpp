#pragma once

#include <stdexcept>
#include <string>

namespace bearsync {

enum class ErrorKind {
  InvalidConfig,
  InvalidRotation,
  DegenerateMatrix,
  OutOfSupport,
  OutOfRange,
  TooShort,
  CoincidentRobots,
  TooFewMeasurements,
  SingularMarginalization,
  Infeasible,
  ZeroSolution,
  InconsistentLift,
  DegenerateSolution,
  Parse,
  Io,
};

const char* to_string(ErrorKind kind);

// Every failure in the library is reported through this type; callers switch
// on kind() rather than parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Parse failures carry the 1-based line number of the offending row.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& reason)
      : Error(ErrorKind::Parse, "line " + std::to_string(line) + ": " + reason), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace bearsync
