#pragma once

// Ecosystem-effect analyses built on the exact linear tiers:
//
//  - amplification: ratio of the coupled trajectory to the decoupled
//    (W = 0) baseline with identical churn, input and start.  For Metzler
//    coupling the ratio is >= 1 wherever it is defined; values below
//    1 - 1e-9 are flagged as positivity violations (they indicate a solver
//    bug, not a modeling outcome).
//  - downstream value q(s) = int_s^T Phi(t, s)^T w dt, the adjoint weight a
//    unit of activity at time s carries into the objective J = int w.alpha;
//    the first-order effect of perturbing (W, delta) decomposes over edges
//    and nodes as int q_i alpha_j and int q_i alpha_i.
//  - edge ROI ranking: first-order value per unit maintenance cost.
//  - network perception: u(N) = kappa log(1 + beta N) and its saturation
//    point N* = 1/beta - 1 (negative N* means marginal perceived utility
//    drops below the linear reference before the first add-on device).
//  - release-frequency amplification: closed form 1 + beta N_g S(S+1)/2
//    against the unrolled discrete recursion with accumulating add-on
//    batches (each release's add-ons persist through later steps).

#include <algorithm>
#include <cmath>
#include <vector>

#include "ecodyn/core_model.hpp"
#include "ecodyn/exact_solvers.hpp"
#include "ecodyn/matfun.hpp"
#include "ecodyn/quadrature.hpp"
#include "ecodyn/types.hpp"

namespace ecodyn {

// ── Baseline and amplification (ecosystem lift) ──────────────────────────

// Decoupled reference: W = 0, so each product decays/acquires independently.
// Componentwise scalar closed form chained across input breakpoints.
inline Trajectory baseline_trajectory(const DecayVector& delta, const InputSignal& u,
                                      const Vector& alpha0, const std::vector<double>& t_grid) {
  detail::require(alpha0.size() == delta.size() && u.dim() == delta.size(),
                  "baseline_trajectory: dimension mismatch");
  detail::require((alpha0.array() >= 0.0).all(), "baseline_trajectory: negative initial state");
  detail::require(!t_grid.empty(), "baseline_trajectory: empty time grid");
  for (std::size_t k = 0; k + 1 < t_grid.size(); ++k)
    detail::require(t_grid[k] < t_grid[k + 1], "baseline_trajectory: grid must be increasing");

  Trajectory out;
  out.mode = TrajectoryMode::Linear;
  Vector x = alpha0;
  double t_cur = t_grid.front();
  out.times.push_back(t_cur);
  out.states.push_back(x);
  for (std::size_t k = 1; k < t_grid.size(); ++k) {
    std::vector<double> cuts = u.breakpoints_in(t_cur, t_grid[k]);
    cuts.push_back(t_grid[k]);
    for (double s : cuts) {
      const double h = s - t_cur;
      const Vector& uc = u.value(t_cur);
      for (Index i = 0; i < x.size(); ++i) {
        const double g = std::expm1(-delta.rates[i] * h);
        x[i] = (g + 1.0) * x[i] - uc[i] * g / delta.rates[i];
      }
      t_cur = s;
    }
    out.times.push_back(t_cur);
    out.states.push_back(x);
  }
  out.validate();
  return out;
}

struct AmplificationReport {
  std::vector<double> times;
  Matrix values;                         // sample x product; NaN where absent
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> defined;
  double floor = 1e-12;

  struct Violation {
    std::size_t sample;
    Index product;
    double value;
  };
  std::vector<Violation> violations;     // defined ratios below 1 - 1e-9
};

// Pointwise ratio coupled/baseline on a shared grid.  Where the baseline
// sits at (numerical) zero the ratio is marked absent rather than forced.
inline AmplificationReport amplification(const Trajectory& coupled, const Trajectory& baseline,
                                         double floor = 1e-12) {
  detail::require(coupled.times.size() == baseline.times.size() &&
                      coupled.dim() == baseline.dim(),
                  "amplification: trajectories must share their grid");
  detail::require(floor > 0.0, "amplification: floor must be positive");
  for (std::size_t k = 0; k < coupled.times.size(); ++k)
    detail::require(std::abs(coupled.times[k] - baseline.times[k]) <=
                        1e-12 * std::max(1.0, std::abs(coupled.times[k])),
                    "amplification: trajectories must share their grid");

  const Index n = coupled.dim();
  const std::size_t m = coupled.times.size();
  AmplificationReport rep;
  rep.times = coupled.times;
  rep.floor = floor;
  rep.values = Matrix::Constant(static_cast<Index>(m), n,
                                std::numeric_limits<double>::quiet_NaN());
  rep.defined.setConstant(static_cast<Index>(m), n, false);
  for (std::size_t k = 0; k < m; ++k) {
    for (Index i = 0; i < n; ++i) {
      const double base = baseline.states[k][i];
      if (base > floor) {
        const double ratio = coupled.states[k][i] / base;
        rep.values(static_cast<Index>(k), i) = ratio;
        rep.defined(static_cast<Index>(k), i) = true;
        if (ratio < 1.0 - 1e-9) rep.violations.push_back({k, i, ratio});
      }
    }
  }
  return rep;
}

// J = int w . alpha dt by trapezoid on the trajectory's own grid.
inline double weighted_integral(const Vector& w, const Trajectory& traj) {
  detail::require(w.size() == traj.dim(), "weighted_integral: dimension mismatch");
  std::vector<double> f(traj.times.size());
  for (std::size_t k = 0; k < traj.times.size(); ++k) f[k] = w.dot(traj.states[k]);
  return quad::trapezoid(traj.times, f);
}

// Cumulative amplification: ratio of weighted trapezoid integrals.
inline double cumulative_amplification(const Vector& w, const Trajectory& coupled,
                                       const Trajectory& baseline) {
  detail::require((w.array() >= 0.0).all() && w.sum() > 0.0,
                  "cumulative_amplification: weights must be nonnegative and not all zero");
  const double denom = weighted_integral(w, baseline);
  detail::require(std::abs(denom) > 1e-300,
                  "cumulative_amplification: baseline integral is zero");
  return weighted_integral(w, coupled) / denom;
}

// ── Downstream value and first-order sensitivity ─────────────────────────

// q(s) = int_s^T Phi(t, s)^T w dt via the backward recursion
//   q(t_k) = Phi_k^T (q(t_{k+1}) + h/2 w) + h/2 w,
// which is the trapezoid rule with transition matrices composed cell by
// cell.  quad_points controls the uniform cell count.
inline Vector downstream_value(const GeneratorPath& path, const Vector& w, double s, double t_end,
                               int quad_points) {
  detail::require(w.size() == path.n, "downstream_value: dimension mismatch");
  detail::require(t_end >= s, "downstream_value: horizon before start");
  detail::require(s >= path.t_begin - 1e-12 && t_end <= path.t_end + 1e-12,
                  "downstream_value: window outside path domain");
  detail::require(quad_points >= 1, "downstream_value: need at least one cell");
  if (t_end == s) return Vector::Zero(path.n);

  const double h = (t_end - s) / quad_points;
  Vector q = Vector::Zero(path.n);
  for (int k = quad_points - 1; k >= 0; --k) {
    const double a = s + k * h;
    const Matrix mj = path(a + 0.5 * h);
    const double load = detail::norm1(mj) * h;
    Matrix phi;
    if (load <= 0.5) {
      phi = expm(mj * h).value;
    } else {
      phi = transition_matrix_product(path, a, a + h,
                                      static_cast<int>(std::ceil(load / 0.5)))
                .phi;
    }
    q = phi.transpose() * (q + 0.5 * h * w) + 0.5 * h * w;
  }
  return q;
}

struct SensitivityReport {
  Matrix edge_values;   // E_ij = int q_i alpha_j dt (i != j), value of edge j -> i
  Vector node_values;   // N_i  = int q_i alpha_i dt, cost of raising churn at i
  double delta_j = 0.0; // first-order change of J for the given perturbation
  double j_base = 0.0;  // J of the unperturbed system
  double quad_error = 0.0;  // grid-halving self-estimate (relative)
};

// First-order effect of a constant perturbation (dW, ddelta) on
// J = int_grid w . alpha dt for the constant-generator system (m, u, alpha0):
//   dJ = sum_{i != j} dW_ij E_ij - sum_i ddelta_i N_i.
// alpha is propagated exactly; q by the backward trapezoid recursion on the
// same grid; all integrals share that grid.  A halved-grid self-estimate
// above 1e-3 relative flags the grid as too coarse.
inline SensitivityReport sensitivity_delta_J(const Generator& m, const InputSignal& u,
                                             const Vector& alpha0, const Vector& w,
                                             const Matrix& d_lambda, const Vector& d_delta,
                                             const std::vector<double>& grid) {
  const Index n = m.size();
  detail::require(alpha0.size() == n && w.size() == n && u.dim() == n,
                  "sensitivity_delta_J: dimension mismatch");
  detail::require(d_lambda.rows() == n && d_lambda.cols() == n && d_delta.size() == n,
                  "sensitivity_delta_J: perturbation shape mismatch");
  for (Index i = 0; i < n; ++i)
    detail::require(d_lambda(i, i) == 0.0,
                    "sensitivity_delta_J: interaction perturbation must have zero diagonal");
  detail::require(grid.size() >= 5, "sensitivity_delta_J: grid too short for self-estimate");
  for (std::size_t k = 0; k + 1 < grid.size(); ++k)
    detail::require(grid[k] < grid[k + 1], "sensitivity_delta_J: grid must be increasing");

  const std::size_t g = grid.size();

  // Forward pass: exact alpha on the grid (inputs split at breakpoints).
  std::vector<Vector> alpha(g);
  alpha[0] = alpha0;
  for (std::size_t k = 1; k < g; ++k) {
    Vector x = alpha[k - 1];
    double t_cur = grid[k - 1];
    std::vector<double> cuts = u.breakpoints_in(grid[k - 1], grid[k]);
    cuts.push_back(grid[k]);
    for (double s : cuts) {
      const ExpmIntegralResult eb = expm_integral(m.m, s - t_cur);
      x = eb.e * x + eb.b * u.value(t_cur);
      t_cur = s;
    }
    alpha[k] = std::move(x);
  }

  // Backward pass: q on the grid.  Constant generator: one expm per distinct
  // cell width (uniform grids reuse a single propagator).
  std::vector<Vector> q(g);
  q[g - 1] = Vector::Zero(n);
  double cached_h = -1.0;
  Matrix cached_phi_t;
  for (std::size_t k = g - 1; k-- > 0;) {
    const double h = grid[k + 1] - grid[k];
    if (std::abs(h - cached_h) > 1e-15 * std::max(1.0, h)) {
      cached_phi_t = expm(m.m * h).value.transpose();
      cached_h = h;
    }
    q[k] = cached_phi_t * (q[k + 1] + 0.5 * h * w) + 0.5 * h * w;
  }

  auto integrate_products = [&](std::size_t stride) {
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < g; k += stride) idx.push_back(k);
    if (idx.back() != g - 1) idx.push_back(g - 1);
    Matrix edges = Matrix::Zero(n, n);
    Vector nodes = Vector::Zero(n);
    for (std::size_t a = 0; a + 1 < idx.size(); ++a) {
      const std::size_t k0 = idx[a], k1 = idx[a + 1];
      const double h = grid[k1] - grid[k0];
      edges += 0.5 * h *
               (q[k0] * alpha[k0].transpose() + q[k1] * alpha[k1].transpose());
      nodes += 0.5 * h *
               (q[k0].cwiseProduct(alpha[k0]) + q[k1].cwiseProduct(alpha[k1]));
    }
    edges.diagonal().setZero();
    return std::make_pair(edges, nodes);
  };

  auto [edges, nodes] = integrate_products(1);
  auto [edges2, nodes2] = integrate_products(2);

  double est = 0.0;
  const double scale = std::max({detail::max_abs(edges), nodes.cwiseAbs().maxCoeff(), 1e-300});
  est = std::max(est, (edges - edges2).cwiseAbs().maxCoeff() / (3.0 * scale));
  est = std::max(est, (nodes - nodes2).cwiseAbs().maxCoeff() / (3.0 * scale));
  detail::require(est <= 1e-3,
                  "sensitivity_delta_J: grid too coarse (quadrature self-estimate above 1e-3)");

  SensitivityReport rep;
  rep.edge_values = edges;
  rep.node_values = nodes;
  rep.quad_error = est;
  rep.delta_j = (d_lambda.array() * edges.array()).sum() - d_delta.dot(nodes);
  std::vector<double> jf(g);
  for (std::size_t k = 0; k < g; ++k) jf[k] = w.dot(alpha[k]);
  rep.j_base = quad::trapezoid(grid, jf);
  return rep;
}

struct EdgeRoi {
  Index to = 0;    // i: product receiving the influence
  Index from = 0;  // j: product providing it
  double edge_value = 0.0;
  double cost = 0.0;
  double roi = 0.0;
};

// Rank edges by first-order value per unit maintenance cost, descending;
// exact ROI ties break lexicographically on (to, from).
inline std::vector<EdgeRoi> edge_roi(const SensitivityReport& rep, const Matrix& costs) {
  const Index n = rep.edge_values.rows();
  detail::require(costs.rows() == n && costs.cols() == n, "edge_roi: cost shape mismatch");
  std::vector<EdgeRoi> out;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      detail::require(std::isfinite(costs(i, j)) && costs(i, j) > 0.0,
                      "edge_roi: edge costs must be positive");
      out.push_back({i, j, rep.edge_values(i, j), costs(i, j),
                     rep.edge_values(i, j) / costs(i, j)});
    }
  std::sort(out.begin(), out.end(), [](const EdgeRoi& a, const EdgeRoi& b) {
    if (a.roi != b.roi) return a.roi > b.roi;
    if (a.to != b.to) return a.to < b.to;
    return a.from < b.from;
  });
  return out;
}

// ── Network perception and release frequency ─────────────────────────────

struct PerceptionParams {
  double kappa = 1.0;  // perceived-utility scale
  double beta = 0.25;  // marginal ecosystem benefit per compatible device
};

// u(N) = kappa log(1 + beta N): concave perceived utility of N devices.
inline double perceived_utility(double n_devices, const PerceptionParams& p) {
  detail::require(std::isfinite(n_devices) && n_devices >= 0.0,
                  "perceived_utility: device count must be >= 0");
  detail::require(p.kappa > 0.0 && p.beta > 0.0,
                  "perceived_utility: parameters must be positive");
  return p.kappa * std::log1p(p.beta * n_devices);
}

// Marginal utility drops below the linear reference at N* = 1/beta - 1.
// beta > 1 makes N* negative: saturation before the first add-on device.
inline double saturation_point(double beta) {
  detail::require(std::isfinite(beta) && beta > 0.0, "saturation_point: beta must be positive");
  return 1.0 / beta - 1.0;
}

// Closed-form release-frequency amplification over S release steps with N_g
// add-ons shipped per release, each persisting through later steps:
//   A(S) = 1 + beta N_g S(S+1)/2.
inline double frequency_amplification(double beta_addon, double n_g, int s_steps) {
  detail::require(std::isfinite(beta_addon) && beta_addon >= 0.0,
                  "frequency_amplification: beta must be >= 0");
  detail::require(std::isfinite(n_g) && n_g >= 0.0,
                  "frequency_amplification: add-on count must be >= 0");
  detail::require(s_steps >= 0, "frequency_amplification: steps must be >= 0");
  const double s = static_cast<double>(s_steps);
  return 1.0 + beta_addon * n_g * 0.5 * s * (s + 1.0);
}

// Discrete counterpart: unroll alpha_{s+1} = A alpha_s + B (u + beta N_g
// (s+1) 1) against the add-on-free recursion and return the w-weighted
// ratio at step S.  One release cycle is one time unit (A, B from dt = 1);
// the factor (s+1) is the number of add-on batches alive during step s.
inline double frequency_amplification_discrete(const Generator& m, const Vector& u0,
                                               const Vector& alpha0, double beta_addon,
                                               double n_g, int s_steps, const Vector& w) {
  const Index n = m.size();
  detail::require(u0.size() == n && alpha0.size() == n && w.size() == n,
                  "frequency_amplification_discrete: dimension mismatch");
  detail::require((u0.array() >= 0.0).all() && (alpha0.array() >= 0.0).all(),
                  "frequency_amplification_discrete: negative input or state");
  detail::require((w.array() >= 0.0).all() && w.sum() > 0.0,
                  "frequency_amplification_discrete: weights must be nonnegative, not all zero");
  detail::require(beta_addon >= 0.0 && n_g >= 0.0,
                  "frequency_amplification_discrete: add-on parameters must be >= 0");
  detail::require(s_steps >= 1, "frequency_amplification_discrete: need at least one step");

  const ExpmIntegralResult eb = expm_integral(m.m, 1.0);
  const Vector ones = Vector::Ones(n);
  Vector base = alpha0, addon = alpha0;
  for (int s = 0; s < s_steps; ++s) {
    base = eb.e * base + eb.b * u0;
    addon = eb.e * addon + eb.b * (u0 + beta_addon * n_g * static_cast<double>(s + 1) * ones);
  }
  const double denom = w.dot(base);
  if (std::abs(denom) <= 1e-300)
    throw NumericalError("frequency_amplification_discrete: baseline weight reached zero");
  return w.dot(addon) / denom;
}

// Heuristic inverse of the closed form: recover beta_addon from two
// simulated amplification readings at different add-on counts (first-order
// linear fit in N_g; no error control, intended for rough calibration).
inline double fit_addon_strength(double amp1, double n_g1, double amp2, double n_g2,
                                 int s_steps) {
  detail::require(n_g1 != n_g2, "fit_addon_strength: need two distinct add-on counts");
  detail::require(s_steps >= 1, "fit_addon_strength: need at least one step");
  const double s = static_cast<double>(s_steps);
  const double slope = (amp2 - amp1) / (n_g2 - n_g1);
  return slope / (0.5 * s * (s + 1.0));
}

}  // namespace ecodyn
