#pragma once

#include <stdexcept>
#include <string>

namespace qergo {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid model or experiment parameters (non-stochastic matrix, negative rate, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain of a function (e.g. an MGF evaluated past its abscissa).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// The queue is critical or supercritical where a subcritical model is required.
class StabilityError : public Error {
 public:
  using Error::Error;
};

/// An exact computation that the chosen environment family cannot provide.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// Overflow or non-convergence in a numerical routine.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Rate fitting failed (too few usable points, log of zero, non-decaying data).
class FitError : public Error {
 public:
  using Error::Error;
};

/// A drift/minorization certificate could not be constructed.
class CertificationError : public Error {
 public:
  enum class Reason { Critical, Supercritical, GridResolution, MinorizationUnobtainable, MissingDensityFloor,
                      ThetaUnavailable };;

  CertificationError(Reason reason, const std::string& what) : Error(what), reason_(reason) {}

  Reason reason() const noexcept { return reason_; }

 private:
  Reason reason_;
};

}  // namespace qergo
