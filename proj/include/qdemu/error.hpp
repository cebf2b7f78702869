#pragma once

#include <stdexcept>

namespace qdemu {

// NaN, norm drift, divergence. The CLI maps it to exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qdemu
