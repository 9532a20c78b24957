#pragma once

#include <stdexcept>
#include <string>

namespace dagmip {

// Base for every error raised by the library. The CLI maps subclasses onto
// exit codes (see tools/dagmip.cpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed arguments: wrong dimensions, self-loops, bad thresholds, parse failures.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

class CycleError : public Error {
 public:
  using Error::Error;
};

class SizeError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

class InfeasibleError : public Error {
 public:
  using Error::Error;
};

}  // namespace dagmip
