#pragma once

#include <stdexcept>
#include <string>

namespace frwkv {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes.
struct DimensionError : Error {
  using Error::Error;
};

// Caller broke an operation precondition (non-scalar loss, bad axis, ...).
struct ContractError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

// Malformed or too-short input data.
struct DataError : Error {
  using Error::Error;
};

// NaN/Inf appeared in a state or loss.
struct NumericError : Error {
  using Error::Error;
};

// Analysis requested on a record set with missing cells.
struct IncompleteGridError : Error {
  using Error::Error;
};

}  // namespace frwkv
