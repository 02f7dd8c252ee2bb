#ifndef MORSEM_ERRORS_H
#define MORSEM_ERRORS_H

#include <stdexcept>
#include <string>

namespace morsem {

// Bad command lines or option combinations. CLI exit code 1.
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or inconsistent input data. CLI exit code 2.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite scores or other numeric breakdown. CLI exit code 3.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace morsem

#endif
