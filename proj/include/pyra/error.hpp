#pragma once

#include <stdexcept>
#include <string>

namespace pyra {

// Error categories map onto the CLI exit codes: ConfigError -> 2,
// DataError -> 3, everything else -> 4.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace pyra
