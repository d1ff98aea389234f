#ifndef TRANSTAB_ERRORS_HPP
#define TRANSTAB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace transtab {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A state (or tangent) coordinate left the finite range during integration.
struct NonFiniteState : Error {
  using Error::Error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

/// Variational mode requested on a field with no analytic Jacobian.
struct JacobianUnavailable : Error {
  using Error::Error;
};

/// Newton failed to reach tolerance within the iteration budget.
struct NoConvergence : Error {
  using Error::Error;
};

/// Smallest Cauchy-Green eigenvalue collapsed below representable range.
struct SingularTensor : Error {
  using Error::Error;
};

struct BasisNotOrthonormal : Error {
  using Error::Error;
};

struct ZeroWindow : Error {
  using Error::Error;
};

struct AllCellsFailed : Error {
  using Error::Error;
};

/// Delay-difference baseline vanished (series starts at an equilibrium).
struct DegenerateBaseline : Error {
  using Error::Error;
};

struct OutOfRange : Error {
  using Error::Error;
};

struct NonUniformSampling : Error {
  using Error::Error;
};

struct ParseError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

}  // namespace transtab

#endif
