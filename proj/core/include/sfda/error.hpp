// Copyright 2026 The sfda Authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sfda {

enum class ErrorKind {
  kInvalidConfiguration,
  kInvalidInput,
  kDatasetConstruction,
  kPriorEstimation,
  kTrainingDiverged,
  kData,
  kFrozenParameterViolation,
};

std::string_view to_string(ErrorKind kind);

// Process exit status for an error of the given kind: 2 config, 3 data,
// 4 training divergence.
int exit_code(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

class TrainingDivergedError : public Error {
 public:
  TrainingDivergedError(long step, const std::string& what)
      : Error(ErrorKind::kTrainingDiverged,
              "training diverged at step " + std::to_string(step) + ": " +
                  what),
        step_(step) {}

  long step() const { return step_; }

 private:
  long step_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace sfda
