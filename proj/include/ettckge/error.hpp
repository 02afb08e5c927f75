#pragma once

#include <stdexcept>
#include <string>

namespace ettckge {

// Error taxonomy mirrored by the CLI exit codes:
//   usage -> 2, data/shape/format -> 3, numeric failure -> 4.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeError : Error {
  using Error::Error;
};

struct ParseError : Error {
  using Error::Error;
};

struct FormatError : Error {
  using Error::Error;
};

struct StructuralError : Error {
  using Error::Error;
};

struct ContractError : Error {
  using Error::Error;
};

struct NumericError : Error {
  using Error::Error;
};

}  // namespace ettckge
