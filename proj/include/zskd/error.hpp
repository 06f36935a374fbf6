#pragma once

#include <stdexcept>
#include <string>

namespace zskd {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shapes do not line up (matmul inner dims, batch sizes, ...).
class DimensionError : public Error {
public:
  using Error::Error;
};

// A numeric parameter is outside its valid range (temperature <= 0, ...).
class ParameterError : public Error {
public:
  using Error::Error;
};

// Input data violates a documented contract (id out of range, broken
// simplex, empty dataset, bad label).
class DataError : public Error {
public:
  using Error::Error;
};

// An API contract was violated by the caller (backward on a non-scalar,
// mismatched batch pairing).
class ContractError : public Error {
public:
  using Error::Error;
};

// Training diverged (NaN/Inf loss); message carries the step index.
class TrainingError : public Error {
public:
  using Error::Error;
};

// File or serialization failure, including format-version mismatches.
class IoError : public Error {
public:
  using Error::Error;
};

}  // namespace zskd
