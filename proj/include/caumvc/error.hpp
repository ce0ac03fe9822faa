#pragma once

#include <stdexcept>
#include <string>

namespace caumvc {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Arguments violate an operation's precondition (sizes, ranges, counts).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input. Carries the 1-based row/column of the offending cell.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t row, std::size_t col)
      : Error(what + " (row " + std::to_string(row) + ", col " + std::to_string(col) + ")"),
        row_(row),
        col_(col) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t col() const noexcept { return col_; }

 private:
  std::size_t row_;
  std::size_t col_;
};

/// Input is well-formed but numerically degenerate (e.g. an all-zero row under cosine).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// A checkpoint cannot be read or does not fit the data it is applied to.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failure.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A loss or gradient turned NaN/Inf during optimization.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace caumvc
