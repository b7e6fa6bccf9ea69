#pragma once

#include <stdexcept>
#include <string>

namespace clinrec {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Mismatched vector or matrix dimensions.
struct ShapeError : Error {
  using Error::Error;
};

/// Caller violated a precondition (bad argument, wrong call order).
struct UsageError : Error {
  using Error::Error;
};

/// Non-finite values or divergence during optimization.
struct TrainingError : Error {
  using Error::Error;
};

/// Malformed, mismatched or wrongly versioned input file.
struct LoadError : Error {
  using Error::Error;
};

struct EvaluationError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace clinrec
