#pragma once

#include <stdexcept>
#include <string>

namespace lamward {

/// Shape or dimension disagreement between operands.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A NaN or infinity appeared where finite values are required.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad magic, unsupported version, truncated file or digest mismatch.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace lamward
