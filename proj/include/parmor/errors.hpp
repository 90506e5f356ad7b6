#pragma once

#include <stdexcept>
#include <string>

namespace parmor {

// Base class for every recoverable failure raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Shapes of two operands are incompatible.
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

// A matrix or scalar contains NaN or infinity where a finite value is required.
class NonFiniteValue : public Error {
 public:
  using Error::Error;
};

// An argument value is outside the documented domain of the operation.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// sigma(A) and sigma(S) come closer than the configured separation tolerance,
// so the Sylvester operator is (numerically) singular.
class SpectrumOverlap : public Error {
 public:
  using Error::Error;
};

// A dense factorization or iteration failed, or a residual exceeded its bound.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

// A matrix that must have full numerical rank does not.
class RankDeficient : public Error {
 public:
  using Error::Error;
};

// A dense fallback path would materialize more memory than its configured cap.
class SizeLimitExceeded : public Error {
 public:
  using Error::Error;
};

// Parameter value lies outside the system's declared parameter interval.
class ParameterOutOfRange : public Error {
 public:
  using Error::Error;
};

// Taylor coefficients were requested from a coefficient kind that has none.
class NonAnalyticCoefficient : public Error {
 public:
  using Error::Error;
};

// Transfer-function shift s lies on (or numerically near) sigma(A(p)).
class SingularShift : public Error {
 public:
  using Error::Error;
};

// Two generator frequencies coincide, so eigenvalues of S are not simple.
class DuplicateFrequency : public Error {
 public:
  using Error::Error;
};

// (S, L) is not observable.
class ObservabilityFailure : public Error {
 public:
  using Error::Error;
};

// (S, omega0) is not excitable: some oscillator block starts at rest.
class ExcitabilityFailure : public Error {
 public:
  using Error::Error;
};

// A matrix required to be Hurwitz has an eigenvalue with nonnegative real part.
class NotHurwitz : public Error {
 public:
  using Error::Error;
};

// Pi^T X Pi is singular and no regularization was requested.
class SingularGram : public Error {
 public:
  using Error::Error;
};

// Requested snapshot window is not covered by the recorded trajectory.
class WindowOutsideTrajectory : public Error {
 public:
  using Error::Error;
};

// Window sampling period aliases a generator frequency (multiple of pi/omega),
// which makes the regressor rank-deficient by construction.
class WindowAliased : public Error {
 public:
  using Error::Error;
};

class WindowTooShort : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// Integration produced a non-finite state.
class NonFiniteState : public Error {
 public:
  using Error::Error;
};

// An experiment configuration failed validation; message names the field path.
class ConfigInvalid : public Error {
 public:
  using Error::Error;
};

// File could not be read, written, or parsed.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace parmor
