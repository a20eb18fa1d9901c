#pragma once

#include <stdexcept>
#include <string>

namespace ppgmm {

/// Bad input data: parse failures, dimension mismatches, invalid files.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A computation that cannot proceed: non-PD matrices, degenerate fits,
/// rank-deficient bases.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid arguments or configuration supplied by the caller.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace ppgmm
