#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fountain {

/// Base class for violations of a physical or numerical precondition.
class PhysicsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The launch is too slow for the atom to reach the cavity.
class FountainTooLow : public PhysicsError {
 public:
  using PhysicsError::PhysicsError;
};

/// Integration step violates max(rate)·dt ≤ 0.1.
class StepSizeError : public PhysicsError {
 public:
  using PhysicsError::PhysicsError;
};

class GridTooCoarse : public PhysicsError {
 public:
  using PhysicsError::PhysicsError;
};

class InsufficientData : public PhysicsError {
 public:
  using PhysicsError::PhysicsError;
};

/// Servo offset left the capture range.
class LockLost : public PhysicsError {
 public:
  LockLost(const std::string& what, std::size_t cycle)
      : PhysicsError(what), cycle_(cycle) {}
  std::size_t cycle() const noexcept { return cycle_; }

 private:
  std::size_t cycle_;
};

}  // namespace fountain
