#pragma once

#include <stdexcept>
#include <string>

namespace tcl2 {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input that violates a documented precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Delta = Omega = 0: the dressed basis and mixing angle are undefined.
class DegenerateSystemError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class InvalidStateError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Adaptive quadrature ran out of subdivisions before reaching its tolerance.
class QuadratureError : public Error {
 public:
  QuadratureError(const std::string& what, double achieved)
      : Error(what + " (achieved error estimate " + std::to_string(achieved) + ")"),
        achieved_error_(achieved) {}
  double achieved_error() const noexcept { return achieved_error_; }

 private:
  double achieved_error_;
};

/// The Markov horizon integral did not settle within tolerance.
class NonconvergentTailError : public Error {
 public:
  NonconvergentTailError(const std::string& what, double tail)
      : Error(what), tail_estimate_(tail) {}
  double tail_estimate() const noexcept { return tail_estimate_; }

 private:
  double tail_estimate_;
};

class StepSizeUnderflowError : public Error {
 public:
  StepSizeUnderflowError(const std::string& what, double t) : Error(what), time_(t) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

/// gamma(t) < 0 somewhere on the requested interval; jump unraveling is refused.
class NegativeRateError : public Error {
 public:
  NegativeRateError(const std::string& what, double t) : Error(what), time_(t) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

class NonSecularConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

}  // namespace tcl2
