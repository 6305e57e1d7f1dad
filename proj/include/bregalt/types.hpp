#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace bregalt {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Error taxonomy. Everything derives from Error so callers can catch the
// library as a whole; the CLI maps the concrete types to exit codes.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Argument outside the generator domain, or an operation asked to evaluate
// where the defining formulas are not valid.
struct DomainError : Error {
  using Error::Error;
};

// Iterate of a run left (or touched) the interior of the generator domain.
struct DomainViolation : Error {
  using Error::Error;
};

struct EmptySample : Error {
  using Error::Error;
};

// Inner solver exhausted its iteration budget without reaching stationarity.
struct SolverFailure : Error {
  using Error::Error;
};

// Input sequence or trace shorter than the estimator requires.
struct TooShort : Error {
  using Error::Error;
};

// Point claimed to be a projection fails verification against the solver.
struct NotProjectedOn : Error {
  using Error::Error;
};

struct DegenerateBall : Error {
  using Error::Error;
};

struct InvalidModel : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

}  // namespace bregalt
