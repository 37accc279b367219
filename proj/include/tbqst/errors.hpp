#pragma once

#include <stdexcept>
#include <string>

namespace tbqst {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not fit together.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain of the operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition (Hermiticity, normalization) does not hold.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

class NotPsdError : public Error {
 public:
  using Error::Error;
};

/// The measurement set cannot determine the state (design-matrix rank too low).
class UnderdeterminedError : public Error {
 public:
  using Error::Error;
};

/// A count record is missing a key required by the measurement classes.
class IncompleteDataError : public Error {
 public:
  using Error::Error;
};

class CalibrationDataError : public Error {
 public:
  using Error::Error;
};

/// The pairwise "same operator" relation is not transitive at the tolerance.
class IntransitiveClassError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure that is not a contract violation of the caller.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file or document. `path` is a JSON pointer when known.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& path, const std::string& what)
      : Error(path.empty() ? what : path + ": " + what), path_(path) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace tbqst
