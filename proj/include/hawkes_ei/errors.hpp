#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace hawkes_ei {

// Root of the library error hierarchy. The subtrees map onto CLI exit codes:
// ConfigError / ValidationError -> 1, PreconditionError -> 2, RuntimeFailure -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed config file or usage problem.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg),
        line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_ = 0;
};

// A parameter record that violates the model's sign/positivity/shape rules.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& msg, std::string field)
      : Error(msg), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class SignViolation : public ValidationError {
 public:
  SignViolation(const std::string& field, const std::string& requirement)
      : ValidationError("sign constraint violated: " + field + " must be " + requirement,
                        field) {}
};

class NonPositiveRate : public ValidationError {
 public:
  explicit NonPositiveRate(const std::string& field)
      : ValidationError(field + " must be strictly positive", field) {}
};

class LengthMismatch : public ValidationError {
 public:
  LengthMismatch(const std::string& field, std::size_t expected, std::size_t got)
      : ValidationError(field + " must have length " + std::to_string(expected) +
                            ", got " + std::to_string(got),
                        field) {}
};

// Operation called outside its domain (e.g. drift analysis without the
// balance conditions). CLI exit code 2.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

class AssumptionViolated : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

class NotDegenerate : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

class SingularC : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

class HorizonNonPositive : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

// Failures that can only be detected while running. CLI exit code 3.
class RuntimeFailure : public Error {
 public:
  using Error::Error;
};

class ExplosionGuard : public RuntimeFailure {
 public:
  ExplosionGuard(std::uint64_t cap, double t)
      : RuntimeFailure("event count exceeded cap " + std::to_string(cap) +
                       " at t=" + std::to_string(t)),
        cap_(cap),
        time_(t) {}
  std::uint64_t cap() const noexcept { return cap_; }
  double time() const noexcept { return time_; }

 private:
  std::uint64_t cap_;
  double time_;
};

class DriftFailed : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class SingularFit : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

}  // namespace hawkes_ei
