#pragma once

#include <stdexcept>
#include <string>

namespace checal {

// Error categories surfaced through the C API as status codes.
enum class Status : int {
  Ok = 0,
  InvalidInput = 1,
  DimensionMismatch = 2,
  DegenerateConfiguration = 3,
  NoConsensus = 4,
  EmptyBuffer = 5,
  InsufficientSamples = 6,
  VisibilityError = 7,
  TrainingDivergence = 8,
  ContractViolation = 9,
  IoError = 10,
  ConfigError = 11,
};

const char* status_name(Status s);

class Error : public std::runtime_error {
 public:
  Error(Status status, const std::string& message)
      : std::runtime_error(message), status_(status) {}

  Status status() const noexcept { return status_; }

 private:
  Status status_;
};

[[noreturn]] inline void fail(Status status, const std::string& message) {
  throw Error(status, message);
}

inline void require(bool condition, Status status, const std::string& message) {
  if (!condition) fail(status, message);
}

}  // namespace checal
