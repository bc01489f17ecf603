#pragma once

#include <stdexcept>
#include <string>

namespace diffdepth {

// Bad flags, bad config files, mismatched checkpoint/request combinations.
// CLI exit code 1.
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

// Missing or corrupt files, shape mismatches, out-of-domain values.
// CLI exit code 2.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values where finite ones are required (NaN loss, NaN inputs).
// CLI exit code 3.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace diffdepth
