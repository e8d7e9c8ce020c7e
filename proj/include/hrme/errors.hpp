#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hrme {

// Base of every error this library throws. The CLI maps subfamilies to
// distinct exit codes (see tools/).
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};
struct LengthMismatch : DimensionMismatch {
  using DimensionMismatch::DimensionMismatch;
};
struct NotPositiveDefinite : Error {
  using Error::Error;
};
struct SingleClassError : Error {
  using Error::Error;
};
struct FitError : Error {
  using Error::Error;
};
struct EmptySplitError : Error {
  using Error::Error;
};
struct InvalidSpecError : Error {
  using Error::Error;
};
struct MissingTargetError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

// row/col are 1-based; row counts data rows, excluding the header.
struct ParseError : Error {
  std::size_t row = 0;
  std::size_t col = 0;
  ParseError(std::size_t r, std::size_t c, const std::string& what)
      : Error(what), row(r), col(c) {}
};

struct SchemaError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace hrme
