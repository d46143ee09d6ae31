// Copyright 2026 The sfda Authors.
// Licensed under the Apache License, Version 2.0.

#include "sfda/error.hpp"

namespace sfda {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidConfiguration:
      return "invalid-configuration";
    case ErrorKind::kInvalidInput:
      return "invalid-input";
    case ErrorKind::kDatasetConstruction:
      return "dataset-construction";
    case ErrorKind::kPriorEstimation:
      return "prior-estimation";
    case ErrorKind::kTrainingDiverged:
      return "training-diverged";
    case ErrorKind::kData:
      return "data";
    case ErrorKind::kFrozenParameterViolation:
      return "frozen-parameter-violation";
  }
  return "unknown";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidConfiguration:
      return 2;
    case ErrorKind::kPriorEstimation:
    case ErrorKind::kInvalidInput:
    case ErrorKind::kDatasetConstruction:
    case ErrorKind::kData:
      return 3;
    case ErrorKind::kTrainingDiverged:
    case ErrorKind::kFrozenParameterViolation:
      return 4;
  }
  return 1;
}

}  // namespace sfda
