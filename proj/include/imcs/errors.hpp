#pragma once

#include <stdexcept>

namespace imcs {

// Operand shapes disagree (matmul with mismatched inner dim, etc.).
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A scalar argument is outside its domain (temperature <= 0, ...).
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A row had (near-)zero norm where a direction was required.
struct DegenerateRowError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A computation produced or received a NaN/Inf.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A configuration value or combination was rejected.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// File or container-format failure.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace imcs
