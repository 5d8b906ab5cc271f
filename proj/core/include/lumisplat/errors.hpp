#pragma once

#include <stdexcept>
#include <string>

namespace lumisplat {

// Bad or missing input data (files, directories, mismatched view sets).
// The CLI maps this to exit code 2.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure during optimization or evaluation (non-finite loss,
// singular color matrix past the guard). CLI exit code 3.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace lumisplat
