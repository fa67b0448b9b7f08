#pragma once

// Shared scalar/matrix aliases and error taxonomy for the ecodyn toolkit.
//
// Conventions used throughout:
//  - all rates (interaction weights, decay/churn rates) are per unit time;
//    horizons, breakpoints and step sizes are in the same time unit.
//  - matrices are dense, column-major (Eigen defaults); systems are desk
//    scale (n of order 10), so no sparse paths are provided.
//  - validation failures (bad shapes, out-of-range parameters) throw
//    std::invalid_argument; runtime numerical breakdowns throw one of the
//    NumericalError subtypes below so callers can tell them apart.

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace ecodyn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Base class for failures of a numerical procedure on valid input
// (non-convergence, branch-cut violations, overflow, ...).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// An iteration exhausted its step budget without meeting its tolerance.
class NonConvergenceError : public NumericalError {
 public:
  explicit NonConvergenceError(const std::string& what) : NumericalError(what) {}
};

// The principal matrix logarithm does not exist (eigenvalue on the closed
// negative real axis), or a discrete-time fit aliases for the given dt.
class LogBranchError : public NumericalError {
 public:
  explicit LogBranchError(const std::string& what) : NumericalError(what) {}
};

// A least-squares fit has directions its data cannot pin down.
class IdentifiabilityError : public std::runtime_error {
 public:
  explicit IdentifiabilityError(const std::string& what)
      : std::runtime_error(what) {}
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// Max-magnitude entry; used for scale-aware tolerances.
inline double max_abs(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

}  // namespace detail

}  // namespace ecodyn
