#pragma once

#include <stdexcept>
#include <string>

namespace spectral_spike {

// File could not be opened / read / written.
struct io_error : std::runtime_error {
  explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

// Input bytes/text do not form a valid matrix (ragged rows, bad magic,
// non-finite entries, ...).  Messages carry 1-based row/column positions
// where applicable.
struct format_error : std::runtime_error {
  explicit format_error(const std::string& what) : std::runtime_error(what) {}
};

// A numeric routine could not complete: Cholesky pivot failure, evaluation at
// a pole, eigensolver iteration cap, breakdown before a usable factorization,
// nonpositive weight, ...
struct numeric_error : std::runtime_error {
  explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace spectral_spike
