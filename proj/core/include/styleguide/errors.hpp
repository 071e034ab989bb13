#pragma once

#include <stdexcept>
#include <string>

namespace styleguide {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes that are zero, negative, mismatched or too small for an operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration: out-of-range parameters, incompatible modes.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

// A quantity that would be divided by (or square-rooted from) something too close to zero.
class NumericGuardError : public Error {
 public:
  using Error::Error;
};

// A sampling chain or an optimization produced non-finite or runaway values.
class DivergedError : public Error {
 public:
  using Error::Error;
};

class DivergedChainError : public DivergedError {
 public:
  DivergedChainError(int step, int chain, const std::string& what)
      : DivergedError("chain " + std::to_string(chain) + " diverged at step " + std::to_string(step) + ": " + what),
        step_(step),
        chain_(chain) {}

  int step() const noexcept { return step_; }
  int chain() const noexcept { return chain_; }

 private:
  int step_;
  int chain_;
};

class TrainingDivergedError : public DivergedError {
 public:
  using DivergedError::DivergedError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace styleguide
