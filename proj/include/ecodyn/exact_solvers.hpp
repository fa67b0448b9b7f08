#pragma once

// Exact (matrix-exponential based) solution tiers for the linear influence
// dynamics d/dt alpha = M(t) alpha + u(t):
//
//   solve_scalar             n = 1 closed form, piecewise-constant input
//   solve_constant           constant M: alpha(dt) = E alpha0 + B u0
//   step_piecewise           one schedule segment, same formula
//   solve_schedule           piecewise-constant M: exact chaining at segment
//                            boundaries, interior samples re-solved from the
//                            last boundary (no step accumulation inside a
//                            segment)
//   transition_matrix_pb     Peano-Baker series for Phi(t, t0), composite
//                            3-point Gauss-Legendre nodes with cumulative
//                            inner integrals on the same node grid
//   transition_matrix_product  exponential-midpoint product integration,
//                            latest factor on the left
//   solve_time_varying       general M(t) via sub-interval propagators, or
//                            exp of the integrated generator when the path
//                            declares itself commuting
//
// All tiers preserve nonnegativity structurally: every propagator they apply
// is the exponential of a Metzler matrix (nonnegative entrywise), and every
// input term is a nonnegative matrix times a nonnegative vector.

#include <cmath>
#include <string>
#include <vector>

#include "ecodyn/core_model.hpp"
#include "ecodyn/matfun.hpp"
#include "ecodyn/quadrature.hpp"
#include "ecodyn/types.hpp"

namespace ecodyn {

enum class TrajectoryMode { Linear, Saturating, Sis };

inline const char* to_string(TrajectoryMode m) {
  switch (m) {
    case TrajectoryMode::Linear: return "linear";
    case TrajectoryMode::Saturating: return "saturating";
    case TrajectoryMode::Sis: return "sis";
  }
  return "?";
}

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  TrajectoryMode mode = TrajectoryMode::Linear;

  Index dim() const { return states.empty() ? 0 : states.front().size(); }

  // Sampled-invariant check: strictly increasing times, nonnegative states
  // (saturating mode additionally bounded by 1), shared dimension.
  void validate() const {
    detail::require(!times.empty() && times.size() == states.size(),
                    "Trajectory: times/states mismatch");
    const Index n = states.front().size();
    for (std::size_t k = 0; k < times.size(); ++k) {
      if (k > 0)
        detail::require(times[k] > times[k - 1], "Trajectory: times must be increasing");
      detail::require(states[k].size() == n, "Trajectory: inconsistent state dimension");
      detail::require((states[k].array() >= -1e-12).all(),
                      "Trajectory: negative state beyond tolerance");
      if (mode == TrajectoryMode::Saturating)
        detail::require((states[k].array() <= 1.0 + 1e-12).all(),
                        "Trajectory: saturating state above 1 beyond tolerance");
    }
  }

  InfluenceState at(std::size_t k) const { return {times[k], states[k]}; }
};

struct TransitionMatrix {
  double t_from = 0.0;
  double t_to = 0.0;
  Matrix phi;
};

// ── Scalar and constant-generator tiers ──────────────────────────────────

// n = 1 closed form: across a piece with constant input c,
//   x(t + h) = e^{a h} x(t) + c (e^{a h} - 1)/a     (h at a = 0),
// chained over the input's breakpoints.  expm1 keeps small-h accuracy.
inline Trajectory solve_scalar(double a, double x0, const InputSignal& u,
                               const std::vector<double>& t_grid) {
  detail::require(std::isfinite(a), "solve_scalar: decay must be finite");
  detail::require(x0 >= 0.0, "solve_scalar: negative initial state");
  detail::require(u.dim() == 1, "solve_scalar: input must be one-dimensional");
  detail::require(!t_grid.empty(), "solve_scalar: empty time grid");
  for (std::size_t k = 0; k + 1 < t_grid.size(); ++k)
    detail::require(t_grid[k] < t_grid[k + 1], "solve_scalar: grid must be increasing");

  auto advance = [a](double x, double c, double h) {
    const double g = std::expm1(a * h);  // e^{ah} - 1
    const double phi = (a == 0.0) ? h : g / a;
    return (g + 1.0) * x + c * phi;
  };

  Trajectory out;
  out.mode = TrajectoryMode::Linear;
  double t_cur = t_grid.front();
  double x = x0;
  out.times.push_back(t_cur);
  out.states.push_back(Vector::Constant(1, x));
  for (std::size_t k = 1; k < t_grid.size(); ++k) {
    const double t_next = t_grid[k];
    std::vector<double> cuts = u.breakpoints_in(t_cur, t_next);
    cuts.push_back(t_next);
    for (double s : cuts) {
      x = advance(x, u.value(t_cur)[0], s - t_cur);
      t_cur = s;
    }
    out.times.push_back(t_cur);
    out.states.push_back(Vector::Constant(1, x));
  }
  out.validate();
  return out;
}

// Duhamel step for constant (M, u): alpha(dt) = E alpha0 + B u0.
inline Vector solve_constant(const Generator& m, const Vector& alpha0, const Vector& u0,
                             double dt) {
  detail::require(alpha0.size() == m.size() && u0.size() == m.size(),
                  "solve_constant: dimension mismatch");
  detail::require((alpha0.array() >= 0.0).all(), "solve_constant: negative initial state");
  detail::require((u0.array() >= 0.0).all(), "solve_constant: negative input");
  detail::require(std::isfinite(dt) && dt >= 0.0, "solve_constant: dt must be >= 0");
  const ExpmIntegralResult eb = expm_integral(m.m, dt);
  return eb.e * alpha0 + eb.b * u0;
}

// One segment of a piecewise-constant plan.
inline Vector step_piecewise(const Schedule::Segment& seg, const Vector& alpha_in) {
  return solve_constant(seg.m, alpha_in, seg.u, seg.t_end - seg.t_start);
}

// Chain a schedule exactly.  Boundary states are chained segment by segment;
// each interior sample is re-solved from the boundary of its own segment so
// rounding does not accumulate across samples within a segment.
inline Trajectory solve_schedule(const Schedule& plan, const Vector& alpha0,
                                 double sample_dt) {
  detail::require(alpha0.size() == plan.dim(), "solve_schedule: dimension mismatch");
  detail::require((alpha0.array() >= 0.0).all(), "solve_schedule: negative initial state");
  detail::require(std::isfinite(sample_dt) && sample_dt > 0.0,
                  "solve_schedule: sample_dt must be positive");

  const double t0 = plan.t_begin();
  const double t_final = plan.t_end();
  const double tol = 1e-9 * std::max(1.0, std::abs(t_final));

  // Exact boundary chain.
  std::vector<Vector> boundary;  // state entering segment k
  boundary.push_back(alpha0);
  for (const auto& seg : plan.segments) boundary.push_back(step_piecewise(seg, boundary.back()));

  // Emission grid: t0 + j sample_dt, then the final time exactly.
  std::vector<double> grid;
  for (std::size_t j = 0;; ++j) {
    const double t = t0 + static_cast<double>(j) * sample_dt;
    if (t >= t_final - tol) break;
    grid.push_back(t);
  }
  grid.push_back(t_final);

  Trajectory out;
  out.mode = TrajectoryMode::Linear;
  for (double t : grid) {
    std::size_t k = 0;
    while (k + 1 < plan.segments.size() && t >= plan.segments[k].t_end) ++k;
    const auto& seg = plan.segments[k];
    out.times.push_back(t);
    out.states.push_back(
        solve_constant(seg.m, boundary[k], seg.u, t - seg.t_start));
  }
  out.validate();
  return out;
}

// ── State-transition matrices for time-varying generators ────────────────

struct PBOptions {
  int panels = 0;        // 0 = auto from ||M|| (t - t0)
  double tol = 1e-10;    // truncation threshold on a term's 1-norm
  int max_terms = 30;
};

namespace detail {

inline double path_norm_estimate(const GeneratorPath& path, double a, double b,
                                 int samples = 9) {
  double nrm = 0.0;
  for (int k = 0; k < samples; ++k)
    nrm = std::max(nrm, norm1(path(a + (b - a) * (k + 0.5) / samples)));
  return nrm;
}

}  // namespace detail

// Peano-Baker series
//   Phi(t, t0) = I + int M + int M int M + ...
// evaluated on a composite 3-point Gauss-Legendre grid.  Each nested term is
// the running integral of M(tau) times the previous term; running values at
// the nodes use the per-panel interpolatory partial weights, so the full-
// panel sums coincide with the standard rule.  Truncation when a term's
// norm drops below tol; a series that fails to converge in max_terms means
// the interval is too long and should be subdivided.
inline TransitionMatrix transition_matrix_pb(const GeneratorPath& path, double t0, double t,
                                             const PBOptions& opt = {}) {
  detail::require(t >= t0, "transition_matrix_pb: reversed interval");
  detail::require(t0 >= path.t_begin - 1e-12 && t <= path.t_end + 1e-12,
                  "transition_matrix_pb: interval outside path window");
  const Index n = path.n;
  if (t == t0) return {t0, t, Matrix::Identity(n, n)};

  const double len = t - t0;
  int panels = opt.panels;
  if (panels <= 0) {
    const double load = detail::path_norm_estimate(path, t0, t) * len;
    panels = std::min(2048, std::max(32, static_cast<int>(std::ceil(192.0 * load))));
  }

  static const quad::Rule rule = quad::gauss_legendre(3);
  static const std::vector<std::vector<double>> partial = quad::partial_weights(rule);
  const int q_per = static_cast<int>(rule.nodes.size());
  const double h = len / panels;

  // Cache generator evaluations at all nodes.
  std::vector<Matrix> m_at(static_cast<std::size_t>(panels) * q_per);
  for (int p = 0; p < panels; ++p) {
    const double a = t0 + p * h;
    for (int q = 0; q < q_per; ++q)
      m_at[p * q_per + q] = path(a + 0.5 * h * (rule.nodes[q] + 1.0));
  }

  const Matrix ident = Matrix::Identity(n, n);
  std::vector<Matrix> term_at(m_at.size(), ident);  // current term at the nodes
  Matrix phi = ident;

  for (int k = 1; k <= opt.max_terms; ++k) {
    // Integrand of the next term at every node.
    std::vector<Matrix> g(m_at.size());
    for (std::size_t q = 0; q < m_at.size(); ++q) g[q] = m_at[q] * term_at[q];

    // Running integral: full panels before, interpolatory partial inside.
    std::vector<Matrix> next(m_at.size());
    Matrix prefix = Matrix::Zero(n, n);
    for (int p = 0; p < panels; ++p) {
      for (int q = 0; q < q_per; ++q) {
        Matrix cum = prefix;
        for (int r = 0; r < q_per; ++r)
          cum += (0.5 * h * partial[q][r]) * g[p * q_per + r];
        next[p * q_per + q] = std::move(cum);
      }
      for (int r = 0; r < q_per; ++r) prefix += (0.5 * h * rule.weights[r]) * g[p * q_per + r];
    }

    phi += prefix;  // prefix now holds the full-interval integral = the term at t
    const double term_norm = detail::norm1(prefix);
    if (term_norm <= opt.tol) return {t0, t, phi};
    term_at = std::move(next);
  }
  throw NonConvergenceError(
      "transition_matrix_pb: series did not converge in " + std::to_string(opt.max_terms) +
      " terms; subdivide the interval");
}

// Exponential-midpoint product integration:
//   Phi ~= e^{M(mid_K) h} ... e^{M(mid_1) h}    (latest factor leftmost).
// Second-order accurate in h for smooth paths, exact for constant ones.
inline TransitionMatrix transition_matrix_product(const GeneratorPath& path, double t0,
                                                  double t, int substeps) {
  detail::require(t >= t0, "transition_matrix_product: reversed interval");
  detail::require(substeps >= 1, "transition_matrix_product: need at least one substep");
  detail::require(t0 >= path.t_begin - 1e-12 && t <= path.t_end + 1e-12,
                  "transition_matrix_product: interval outside path window");
  const Index n = path.n;
  Matrix phi = Matrix::Identity(n, n);
  const double h = (t - t0) / substeps;
  for (int k = 0; k < substeps; ++k) {
    const double mid = t0 + (k + 0.5) * h;
    phi = expm(path(mid) * h).value * phi;
  }
  return {t0, t, std::move(phi)};
}

// ── General time-varying tier ────────────────────────────────────────────

struct TVOptions {
  double target_step_load = 0.5;  // substeps chosen so h ||M|| <= this
  int min_substeps = 1;
  bool use_peano_baker = false;   // Peano-Baker per sub-interval (homogeneous part)
  double pb_tol = 1e-10;
  bool check_commuting = false;   // spot-check a commuting_hint before trusting it
};

namespace detail {

// Running integral of M over [a, b] evaluated at the composite GL nodes and
// at b; reused by the commuting (exp-of-integral) tier.
struct PathIntegral {
  std::vector<double> nodes;
  std::vector<Matrix> running;  // integral_a^{node}
  Matrix full;                  // integral_a^b
};

inline PathIntegral integrate_path(const GeneratorPath& path, double a, double b,
                                   int panels) {
  static const quad::Rule rule = quad::gauss_legendre(3);
  static const std::vector<std::vector<double>> partial = quad::partial_weights(rule);
  const int q_per = static_cast<int>(rule.nodes.size());
  const double h = (b - a) / panels;
  PathIntegral out;
  out.full = Matrix::Zero(path.n, path.n);
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * h;
    std::vector<Matrix> g(q_per);
    for (int q = 0; q < q_per; ++q) {
      const double tq = lo + 0.5 * h * (rule.nodes[q] + 1.0);
      g[q] = path(tq);
      out.nodes.push_back(tq);
    }
    for (int q = 0; q < q_per; ++q) {
      Matrix cum = out.full;
      for (int r = 0; r < q_per; ++r) cum += (0.5 * h * partial[q][r]) * g[r];
      out.running.push_back(std::move(cum));
    }
    for (int r = 0; r < q_per; ++r) out.full += (0.5 * h * rule.weights[r]) * g[r];
  }
  return out;
}

}  // namespace detail

// Propagate alpha through a time-varying generator, sampling at t_grid.
// Piecewise-constant inputs are split exactly at their breakpoints.  For a
// commuting path, Phi(t, s) = exp(integral_s^t M) is used directly; the
// inhomogeneous term is then a Gauss-Legendre sum of exp(tail integral)
// factors.  Otherwise each sub-interval uses the exponential-midpoint
// propagator (with its paired input integral), substeps sized so that
// h ||M|| stays below target_step_load.
inline Trajectory solve_time_varying(const GeneratorPath& path, const InputSignal& u,
                                     const Vector& alpha0,
                                     const std::vector<double>& t_grid,
                                     const TVOptions& opt = {}) {
  detail::require(!t_grid.empty(), "solve_time_varying: empty time grid");
  detail::require(alpha0.size() == path.n && u.dim() == path.n,
                  "solve_time_varying: dimension mismatch");
  detail::require((alpha0.array() >= 0.0).all(), "solve_time_varying: negative initial state");
  for (std::size_t k = 0; k + 1 < t_grid.size(); ++k)
    detail::require(t_grid[k] < t_grid[k + 1], "solve_time_varying: grid must be increasing");
  detail::require(t_grid.front() >= path.t_begin - 1e-12 && t_grid.back() <= path.t_end + 1e-12,
                  "solve_time_varying: grid outside path window");

  const bool commuting = path.commuting_hint;
  if (commuting && opt.check_commuting)
    detail::require(path.verify_commuting(), "solve_time_varying: commuting hint failed check");

  Trajectory out;
  out.mode = TrajectoryMode::Linear;
  Vector alpha = alpha0;
  out.times.push_back(t_grid.front());
  out.states.push_back(alpha);

  static const quad::Rule rule01 = quad::gauss_legendre01(3);

  for (std::size_t k = 1; k < t_grid.size(); ++k) {
    const double a = t_grid[k - 1];
    const double b = t_grid[k];
    // Exact split at input breakpoints: u is constant on each piece.
    std::vector<double> cuts = u.breakpoints_in(a, b);
    cuts.push_back(b);
    double lo = a;
    for (double hi : cuts) {
      const Vector& uc = u.value(lo);
      const double len = hi - lo;
      if (len <= 0.0) continue;
      const double load = detail::path_norm_estimate(path, lo, hi, 5) * len;

      if (commuting) {
        const int panels = std::min(1024, std::max(8, static_cast<int>(std::ceil(4.0 * load))));
        const detail::PathIntegral fi = detail::integrate_path(path, lo, hi, panels);
        // Homogeneous part: exp of the integrated generator.
        Vector next = expm(fi.full).value * alpha;
        // Input part: int_lo^hi exp(integral_s^hi M) u ds on the same nodes.
        for (std::size_t q = 0; q < fi.nodes.size(); ++q) {
          const int r = static_cast<int>(q) % 3;
          const double w = (hi - lo) / panels * rule01.weights[r];
          const Matrix tail = fi.full - fi.running[q];
          next += w * (expm(tail).value * uc);
        }
        alpha = std::move(next);
      } else {
        const int substeps =
            std::max(opt.min_substeps,
                     static_cast<int>(std::ceil(load / opt.target_step_load)));
        const double h = len / substeps;
        for (int j = 0; j < substeps; ++j) {
          const double s0 = lo + j * h;
          const Matrix mj = path(s0 + 0.5 * h);
          const ExpmIntegralResult eb = expm_integral(mj, h);
          if (opt.use_peano_baker) {
            PBOptions pbo;
            pbo.tol = opt.pb_tol;
            const TransitionMatrix tm = transition_matrix_pb(path, s0, s0 + h, pbo);
            alpha = tm.phi * alpha + eb.b * uc;
          } else {
            alpha = eb.e * alpha + eb.b * uc;
          }
        }
      }
      lo = hi;
    }
    out.times.push_back(b);
    out.states.push_back(alpha);
  }
  out.validate();
  return out;
}

}  // namespace ecodyn
