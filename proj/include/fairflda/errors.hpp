#pragma once

#include <stdexcept>
#include <string>

namespace fairflda {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mismatched shapes or grids between objects that must agree.
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// A caller-supplied argument is outside its documented domain.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// A required (group, label) cell is empty or too small for the estimator.
class DegenerateCellError : public Error {
 public:
  using Error::Error;
};

/// The requested truncation level uses eigenvalues at or below the floor.
class TruncationError : public Error {
 public:
  using Error::Error;
};

/// A closed form was requested for a model family that has none.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. `line` is 1-based, 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace fairflda
