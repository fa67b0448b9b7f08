#pragma once

// Nonlinear companions to the linear tier:
//
//  - the saturating adoption model
//        d/dt alpha_i = (1 - alpha_i) sum_{j!=i} W_ij alpha_j
//                       - delta_i alpha_i - alpha_i sum_{j!=i} c_ij alpha_j
//    (bounded uptake plus pairwise crowding; no exogenous input channel),
//
//  - networked SIS adoption
//        d/dt x_i = beta (1 - x_i) sum_j A_ij x_j - delta x_i
//    whose extinction/persistence threshold sits at the effective spreading
//    rate tau_c = 1 / rho(A), tau = beta/delta.
//
// Both integrate with fixed-step classical RK4.  States are clamped to
// [0, 1] when a step marginally exceeds the invariant box; material clamps
// (beyond float dust) are counted and reported, and a clamp rate above 1% of
// component evaluations rejects the step size outright.

#include <cmath>
#include <string>
#include <vector>

#include "ecodyn/core_model.hpp"
#include "ecodyn/exact_solvers.hpp"
#include "ecodyn/matfun.hpp"
#include "ecodyn/types.hpp"

namespace ecodyn {

// Pairwise crowding/competition weights; same shape rules as interactions.
struct CrowdingMatrix {
  Matrix c;

  explicit CrowdingMatrix(Matrix m) : c(std::move(m)) {
    detail::require(c.rows() == c.cols() && c.rows() >= 1, "CrowdingMatrix: must be square");
    detail::require(c.allFinite(), "CrowdingMatrix: entries must be finite");
    for (Index i = 0; i < c.rows(); ++i) {
      detail::require(c(i, i) == 0.0, "CrowdingMatrix: diagonal must be exactly zero");
      for (Index j = 0; j < c.cols(); ++j)
        detail::require(c(i, j) >= 0.0, "CrowdingMatrix: negative crowding weight");
    }
  }

  static CrowdingMatrix none(Index n) { return CrowdingMatrix(Matrix::Zero(n, n)); }

  Index size() const { return c.rows(); }
};

// SIS adoption system on a weighted contact/compatibility graph.
struct AdoptionSystem {
  Matrix adjacency;
  double beta = 0.0;   // per-contact adoption rate
  double delta = 0.0;  // abandonment (churn) rate

  AdoptionSystem(Matrix a, double b, double d)
      : adjacency(std::move(a)), beta(b), delta(d) {
    detail::require(adjacency.rows() == adjacency.cols() && adjacency.rows() >= 1,
                    "AdoptionSystem: adjacency must be square");
    detail::require(adjacency.allFinite(), "AdoptionSystem: non-finite adjacency");
    detail::require((adjacency.array() >= 0.0).all(),
                    "AdoptionSystem: adjacency entries must be nonnegative");
    detail::require(std::isfinite(beta) && beta > 0.0, "AdoptionSystem: beta must be positive");
    detail::require(std::isfinite(delta) && delta > 0.0,
                    "AdoptionSystem: delta must be positive");
  }

  Index size() const { return adjacency.rows(); }
};

namespace detail {

inline void check_unit_box(const Vector& x, const char* who) {
  require((x.array() >= -1e-12).all() && (x.array() <= 1.0 + 1e-12).all(),
          std::string(who) + ": state outside [0, 1]");
}

}  // namespace detail

// Saturating vector field (validated entry point).
inline Vector saturating_rhs(const Vector& alpha, const InteractionMatrix& w,
                             const DecayVector& delta, const CrowdingMatrix& c) {
  detail::require(alpha.size() == w.size() && delta.size() == w.size() && c.size() == w.size(),
                  "saturating_rhs: dimension mismatch");
  detail::check_unit_box(alpha, "saturating_rhs");
  const Vector inflow = w.w * alpha;   // diag(W) = 0, so this is sum_{j != i}
  const Vector crowd = c.c * alpha;
  return (1.0 - alpha.array()) * inflow.array() - delta.rates.array() * alpha.array() -
         alpha.array() * crowd.array();
}

struct SaturatingRun {
  Trajectory trajectory;
  long clamp_events = 0;   // material clips beyond float dust
  long evaluations = 0;    // component evaluations (steps * n)
};

namespace detail {

template <class Rhs>
inline Vector rk4_step(const Rhs& f, const Vector& y, double h) {
  const Vector k1 = f(y);
  const Vector k2 = f(y + 0.5 * h * k1);
  const Vector k3 = f(y + 0.5 * h * k2);
  const Vector k4 = f(y + h * k3);
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Clamp to [0, 1]; returns the number of clips whose excess was material.
inline long clamp_unit_box(Vector& y) {
  long events = 0;
  for (Index i = 0; i < y.size(); ++i) {
    if (y[i] < 0.0) {
      if (y[i] < -1e-12) ++events;
      y[i] = 0.0;
    } else if (y[i] > 1.0) {
      if (y[i] > 1.0 + 1e-12) ++events;
      y[i] = 1.0;
    }
  }
  return events;
}

}  // namespace detail

// Fixed-step RK4 for the saturating model.  `step` is a target: the actual
// step is horizon/N for the smallest N with horizon/N <= step, so the final
// sample lands exactly on the horizon.
inline SaturatingRun integrate_saturating(const InteractionMatrix& w, const DecayVector& delta,
                                          const CrowdingMatrix& c, const Vector& alpha0,
                                          double horizon, double step) {
  detail::require(alpha0.size() == w.size(), "integrate_saturating: dimension mismatch");
  detail::require((alpha0.array() >= 0.0).all() && (alpha0.array() <= 1.0).all(),
                  "integrate_saturating: initial state outside [0, 1]");
  detail::require(std::isfinite(horizon) && horizon > 0.0,
                  "integrate_saturating: horizon must be positive");
  detail::require(std::isfinite(step) && step > 0.0 && step <= horizon,
                  "integrate_saturating: step must lie in (0, horizon]");

  const long n_steps = static_cast<long>(std::ceil(horizon / step - 1e-9));
  const double h = horizon / static_cast<double>(n_steps);
  auto rhs = [&](const Vector& y) -> Vector {
    const Vector inflow = w.w * y;
    const Vector crowd = c.c * y;
    return ((1.0 - y.array()) * inflow.array() - delta.rates.array() * y.array() -
            y.array() * crowd.array())
        .matrix();
  };

  SaturatingRun run;
  run.trajectory.mode = TrajectoryMode::Saturating;
  Vector y = alpha0;
  run.trajectory.times.push_back(0.0);
  run.trajectory.states.push_back(y);
  for (long k = 1; k <= n_steps; ++k) {
    y = detail::rk4_step(rhs, y, h);
    run.clamp_events += detail::clamp_unit_box(y);
    run.trajectory.times.push_back(h * static_cast<double>(k));
    run.trajectory.states.push_back(y);
  }
  run.evaluations = n_steps * static_cast<long>(w.size());
  if (run.clamp_events > run.evaluations / 100)
    throw NumericalError("integrate_saturating: clamp rate above 1% of evaluations (" +
                         std::to_string(run.clamp_events) + "/" +
                         std::to_string(run.evaluations) + "); reduce the step");
  run.trajectory.validate();
  return run;
}

// SIS vector field (validated entry point).
inline Vector sis_rhs(const Vector& x, const AdoptionSystem& sys) {
  detail::require(x.size() == sys.size(), "sis_rhs: dimension mismatch");
  detail::check_unit_box(x, "sis_rhs");
  const Vector pressure = sys.adjacency * x;
  return sys.beta * (1.0 - x.array()) * pressure.array() - sys.delta * x.array();
}

// Spreading-rate threshold tau_c = 1/rho(A).  An edgeless graph cannot
// sustain adoption at any finite rate, reported as +infinity.
inline double critical_tau(const Matrix& adjacency) {
  const SpectralRadiusResult sr = spectral_radius(adjacency);
  if (sr.radius <= 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 / sr.radius;
}

// Stability-tied default step for SIS integration.
inline double default_sis_step(const AdoptionSystem& sys) {
  const double rate = std::max(sys.delta, sys.beta * spectral_radius(sys.adjacency).radius);
  return 0.01 / rate;
}

enum class Persistence { Extinct, Persistent, Inconclusive };

inline const char* to_string(Persistence p) {
  switch (p) {
    case Persistence::Extinct: return "extinct";
    case Persistence::Persistent: return "persistent";
    case Persistence::Inconclusive: return "inconclusive";
  }
  return "?";
}

struct PersistenceResult {
  Persistence status = Persistence::Inconclusive;
  Vector final_state;
  double final_norm = 0.0;        // max-norm at the horizon
  double window_rel_change = 0.0; // relative movement over the last 10%
};

// Integrate to the horizon and classify:
//   extinct     ||x(T)||_inf < extinction_tol
//   persistent  settled to a nonzero point: relative change < 1e-9 over the
//               last 10% of the horizon
//   inconclusive otherwise (caller should extend the horizon)
// The horizon must cover at least 20 churn time constants, else the
// classification would be dominated by transients.
inline PersistenceResult classify_persistence(const AdoptionSystem& sys, const Vector& x0,
                                              double horizon, double extinction_tol = 1e-6,
                                              double step = 0.0) {
  detail::require(x0.size() == sys.size(), "classify_persistence: dimension mismatch");
  detail::require((x0.array() >= 0.0).all() && (x0.array() <= 1.0).all(),
                  "classify_persistence: initial state outside [0, 1]");
  detail::require(std::isfinite(horizon) && horizon * sys.delta >= 20.0,
                  "classify_persistence: horizon must cover >= 20 churn time constants");
  detail::require(extinction_tol > 0.0, "classify_persistence: tolerance must be positive");
  if (step <= 0.0) step = default_sis_step(sys);

  const long n_steps = static_cast<long>(std::ceil(horizon / step - 1e-9));
  const double h = horizon / static_cast<double>(n_steps);
  const long window_start = n_steps - std::max<long>(1, n_steps / 10);

  auto rhs = [&](const Vector& y) -> Vector {
    const Vector pressure = sys.adjacency * y;
    return (sys.beta * (1.0 - y.array()) * pressure.array() - sys.delta * y.array()).matrix();
  };

  Vector y = x0;
  Vector window_state = x0;
  for (long k = 1; k <= n_steps; ++k) {
    y = detail::rk4_step(rhs, y, h);
    detail::clamp_unit_box(y);
    if (k == window_start) window_state = y;
  }

  PersistenceResult out;
  out.final_state = y;
  out.final_norm = y.cwiseAbs().maxCoeff();
  out.window_rel_change =
      (y - window_state).cwiseAbs().maxCoeff() / std::max(out.final_norm, 1e-300);
  if (out.final_norm < extinction_tol)
    out.status = Persistence::Extinct;
  else if (out.window_rel_change < 1e-9)
    out.status = Persistence::Persistent;
  else
    out.status = Persistence::Inconclusive;
  return out;
}

struct SweepPoint {
  double tau = 0.0;
  Persistence status = Persistence::Inconclusive;
  double final_norm = 0.0;
};

// Sweep the effective rate tau = beta/delta (delta fixed at 1) across a
// grid.  Statuses must come out monotone -- extinct below, persistent above,
// with at most one transition; anything else indicates the integration
// resolution is inadequate for this grid and is flagged as such.
inline std::vector<SweepPoint> sweep_tau(const Matrix& adjacency,
                                         const std::vector<double>& tau_grid, const Vector& x0,
                                         double horizon, double extinction_tol = 1e-6) {
  detail::require(!tau_grid.empty(), "sweep_tau: empty grid");
  for (std::size_t k = 0; k < tau_grid.size(); ++k) {
    detail::require(std::isfinite(tau_grid[k]) && tau_grid[k] > 0.0,
                    "sweep_tau: rates must be positive");
    if (k > 0)
      detail::require(tau_grid[k] > tau_grid[k - 1], "sweep_tau: grid must be increasing");
  }

  std::vector<SweepPoint> out;
  out.reserve(tau_grid.size());
  for (double tau : tau_grid) {
    const AdoptionSystem sys(adjacency, /*beta=*/tau, /*delta=*/1.0);
    const PersistenceResult r = classify_persistence(sys, x0, horizon, extinction_tol);
    out.push_back({tau, r.status, r.final_norm});
  }

  // Monotonicity: no extinct point may follow a persistent one.
  bool seen_persistent = false;
  for (const SweepPoint& p : out) {
    if (p.status == Persistence::Persistent) seen_persistent = true;
    if (seen_persistent && p.status == Persistence::Extinct)
      throw NumericalError(
          "sweep_tau: non-monotone extinction/persistence classification; "
          "numerical resolution failure (extend horizon or refine step)");
  }
  return out;
}

struct ThresholdBracket {
  bool found = false;
  double lo = 0.0;  // largest tau classified extinct
  double hi = 0.0;  // smallest tau classified persistent
};

// Transition bracket of a sweep; inconclusive points may sit inside it.
inline ThresholdBracket transition_bracket(const std::vector<SweepPoint>& sweep) {
  ThresholdBracket b;
  bool has_lo = false, has_hi = false;
  for (const SweepPoint& p : sweep) {
    if (p.status == Persistence::Extinct) {
      b.lo = p.tau;
      has_lo = true;
    }
    if (p.status == Persistence::Persistent && !has_hi) {
      b.hi = p.tau;
      has_hi = true;
    }
  }
  b.found = has_lo && has_hi && b.lo < b.hi;
  return b;
}

}  // namespace ecodyn
