#pragma once

#include <stdexcept>
#include <string>

namespace mfuq {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid argument values (out-of-range probabilities, negative costs, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent configuration input.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Fewer samples or points than an operation requires.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

// Zero sample variance, degenerate surrogate spread, or rank deficiency
// where spread is required.
class DegenerateDataError : public Error {
 public:
  using Error::Error;
};

// Budget too small for the requested plan, or a charge would exceed it.
class BudgetError : public Error {
 public:
  using Error::Error;
};

// Sampling policy inapplicable (efficiency condition violated) or
// degenerate (no admissible sample counts).
class PolicyError : public Error {
 public:
  using Error::Error;
};

// Nonlinear or linear solve failed to converge; message carries residuals.
class SolverError : public Error {
 public:
  using Error::Error;
};

// File I/O failures, bad magic, or format-version mismatches.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace mfuq
