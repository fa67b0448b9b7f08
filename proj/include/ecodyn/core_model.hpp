#pragma once

// Core model vocabulary for positive linear influence dynamics on a product
// ecosystem:
//
//     d/dt alpha(t) = M(t) alpha(t) + u(t),      M = W - diag(delta)
//
// where W holds nonnegative cross-product interaction weights (W_ij is the
// strength with which product j's activity feeds product i), delta holds
// strictly positive churn/decay rates, and u is an exogenous nonnegative
// acquisition input.  M is therefore Metzler (off-diagonal >= 0), which is
// what makes the nonnegative orthant forward invariant.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "ecodyn/types.hpp"

namespace ecodyn {

// ── Value types ──────────────────────────────────────────────────────────

// Nonnegative interaction weights with a structurally zero diagonal
// (self-influence is carried by the decay term, never by W).
struct InteractionMatrix {
  Matrix w;

  explicit InteractionMatrix(Matrix weights) : w(std::move(weights)) {
    detail::require(w.rows() == w.cols(), "InteractionMatrix: must be square");
    detail::require(w.rows() >= 1, "InteractionMatrix: need at least one product");
    detail::require(w.allFinite(), "InteractionMatrix: entries must be finite");
    for (Index i = 0; i < w.rows(); ++i) {
      detail::require(w(i, i) == 0.0, "InteractionMatrix: diagonal must be exactly zero");
      for (Index j = 0; j < w.cols(); ++j)
        detail::require(w(i, j) >= 0.0, "InteractionMatrix: negative interaction weight");
    }
  }

  Index size() const { return w.rows(); }
};

// Strictly positive churn rates, optionally derived from maintenance spend:
// rates = base + sensitivity .* costs (cutting maintenance raises churn).
struct DecayVector {
  Vector rates;

  explicit DecayVector(Vector r) : rates(std::move(r)) {
    detail::require(rates.size() >= 1, "DecayVector: empty");
    detail::require(rates.allFinite(), "DecayVector: rates must be finite");
    detail::require((rates.array() > 0.0).all(), "DecayVector: rates must be strictly positive");
  }

  static DecayVector from_costs(const Vector& base, const Vector& sensitivity,
                                const Vector& costs) {
    detail::require(base.size() == sensitivity.size() && base.size() == costs.size(),
                    "DecayVector: base/sensitivity/costs size mismatch");
    detail::require((base.array() > 0.0).all(), "DecayVector: base rates must be positive");
    detail::require((sensitivity.array() >= 0.0).all(),
                    "DecayVector: sensitivities must be nonnegative");
    detail::require((costs.array() >= 0.0).all(), "DecayVector: costs must be nonnegative");
    return DecayVector(base + sensitivity.cwiseProduct(costs));
  }

  Index size() const { return rates.size(); }
};

// A Metzler matrix: off-diagonal entries >= 0, diagonal unconstrained.
// When assembled from (W, delta) the diagonal is -delta_i < 0.
struct Generator {
  Matrix m;

  explicit Generator(Matrix a) : m(std::move(a)) {
    detail::require(m.rows() == m.cols(), "Generator: must be square");
    detail::require(m.rows() >= 1, "Generator: empty");
    detail::require(m.allFinite(), "Generator: entries must be finite");
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j)
        if (i != j)
          detail::require(m(i, j) >= 0.0, "Generator: negative off-diagonal (not Metzler)");
  }

  Index size() const { return m.rows(); }
};

// Piecewise-constant nonnegative input.  values[k] applies on the right-open
// interval [breakpoints[k], breakpoints[k+1]); the last value extends to
// +infinity.  Evaluation before the first breakpoint is a domain error.
struct InputSignal {
  std::vector<double> breakpoints;
  std::vector<Vector> values;

  InputSignal(std::vector<double> bp, std::vector<Vector> vals)
      : breakpoints(std::move(bp)), values(std::move(vals)) {
    detail::require(!breakpoints.empty(), "InputSignal: no breakpoints");
    detail::require(breakpoints.size() == values.size(),
                    "InputSignal: breakpoints/values size mismatch");
    for (std::size_t k = 0; k + 1 < breakpoints.size(); ++k)
      detail::require(breakpoints[k] < breakpoints[k + 1],
                      "InputSignal: breakpoints must be strictly increasing");
    const Index n = values.front().size();
    detail::require(n >= 1, "InputSignal: empty value vector");
    for (const Vector& v : values) {
      detail::require(v.size() == n, "InputSignal: inconsistent value dimensions");
      detail::require(v.allFinite(), "InputSignal: values must be finite");
      detail::require((v.array() >= 0.0).all(), "InputSignal: values must be nonnegative");
    }
  }

  // Constant signal defined for every time.
  static InputSignal constant(const Vector& v) {
    return InputSignal({-std::numeric_limits<double>::infinity()}, {v});
  }

  static InputSignal zero(Index n) { return constant(Vector::Zero(n)); }

  Index dim() const { return values.front().size(); }

  std::size_t piece_index(double t) const {
    if (t < breakpoints.front())
      throw std::domain_error("InputSignal: evaluation before the first breakpoint");
    // Last breakpoint <= t.
    auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), t);
    return static_cast<std::size_t>(it - breakpoints.begin()) - 1;
  }

  const Vector& value(double t) const { return values[piece_index(t)]; }

  // Breakpoints strictly inside (a, b), for splitting quadrature/stepping.
  std::vector<double> breakpoints_in(double a, double b) const {
    std::vector<double> out;
    for (double t : breakpoints)
      if (t > a && t < b) out.push_back(t);
    return out;
  }
};

// One sampled point of an influence trajectory.
struct InfluenceState {
  double time = 0.0;
  Vector alpha;
};

// Piecewise-constant operating plan: per segment a fixed generator and a
// fixed input level.  Segments must tile an interval without gaps/overlaps.
struct Schedule {
  struct Segment {
    double t_start;
    double t_end;
    Generator m;
    Vector u;
  };

  std::vector<Segment> segments;

  explicit Schedule(std::vector<Segment> segs) : segments(std::move(segs)) {
    detail::require(!segments.empty(), "Schedule: empty");
    const Index n = segments.front().m.size();
    for (std::size_t k = 0; k < segments.size(); ++k) {
      const Segment& s = segments[k];
      detail::require(s.t_end > s.t_start, "Schedule: segment must have positive length");
      detail::require(s.m.size() == n, "Schedule: inconsistent generator sizes");
      detail::require(s.u.size() == n, "Schedule: input dimension mismatch");
      detail::require((s.u.array() >= 0.0).all(), "Schedule: inputs must be nonnegative");
      if (k > 0) {
        const double gap = std::abs(s.t_start - segments[k - 1].t_end);
        detail::require(gap <= 1e-9 * std::max(1.0, std::abs(s.t_start)),
                        "Schedule: segments must be contiguous (gap/overlap found)");
      }
    }
  }

  Index dim() const { return segments.front().m.size(); }
  double t_begin() const { return segments.front().t_start; }
  double t_end() const { return segments.back().t_end; }

  // Segment owning time t (right-open; t_end belongs to the last segment).
  const Segment& at(double t) const {
    detail::require(t >= t_begin() && t <= t_end(), "Schedule: time outside plan");
    for (std::size_t k = 0; k + 1 < segments.size(); ++k)
      if (t < segments[k].t_end) return segments[k];
    return segments.back();
  }
};

// Time-varying generator t -> M(t) on a bounded window.  Every evaluation is
// checked to be Metzler of the declared size.  commuting_hint promises
// M(s) M(t) = M(t) M(s) for all s, t in the window, which unlocks the
// exp-of-integral solution tier; it is trusted but can be spot-checked.
struct GeneratorPath {
  std::function<Matrix(double)> eval;
  double t_begin = 0.0;
  double t_end = 0.0;
  Index n = 0;
  bool commuting_hint = false;

  GeneratorPath(std::function<Matrix(double)> f, double t0, double t1, Index size,
                bool commuting = false)
      : eval(std::move(f)), t_begin(t0), t_end(t1), n(size), commuting_hint(commuting) {
    detail::require(static_cast<bool>(eval), "GeneratorPath: missing evaluator");
    detail::require(t1 > t0, "GeneratorPath: window must have positive length");
    detail::require(n >= 1, "GeneratorPath: empty");
  }

  static GeneratorPath from_constant(const Generator& g, double t0, double t1) {
    Matrix m = g.m;
    return GeneratorPath([m](double) { return m; }, t0, t1, m.rows(), /*commuting=*/true);
  }

  static GeneratorPath from_schedule(const Schedule& plan) {
    Schedule copy = plan;
    return GeneratorPath([copy](double t) { return copy.at(t).m.m; }, plan.t_begin(),
                         plan.t_end(), plan.dim(), /*commuting=*/false);
  }

  Matrix operator()(double t) const {
    const double slack = 1e-9 * std::max(1.0, std::max(std::abs(t_begin), std::abs(t_end)));
    detail::require(t >= t_begin - slack && t <= t_end + slack,
                    "GeneratorPath: evaluation outside window");
    Matrix m = eval(t);
    detail::require(m.rows() == n && m.cols() == n, "GeneratorPath: evaluator size changed");
    detail::require(m.allFinite(), "GeneratorPath: evaluator returned non-finite entries");
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j)
        if (i != j && m(i, j) < 0.0)
          throw std::invalid_argument("GeneratorPath: evaluated matrix is not Metzler");
    return m;
  }

  // Spot-check the commuting promise on a deterministic sample of times.
  bool verify_commuting(double tol = 1e-10, int samples = 8) const {
    std::vector<Matrix> ms;
    for (int k = 0; k < samples; ++k) {
      const double t = t_begin + (t_end - t_begin) * (k + 0.5) / samples;
      ms.push_back((*this)(t));
    }
    for (std::size_t a = 0; a < ms.size(); ++a)
      for (std::size_t b = a + 1; b < ms.size(); ++b) {
        const double scale =
            std::max(ms[a].cwiseAbs().sum() * ms[b].cwiseAbs().sum(), 1e-300);
        const Matrix comm = ms[a] * ms[b] - ms[b] * ms[a];
        if (comm.cwiseAbs().maxCoeff() > tol * scale) return false;
      }
    return true;
  }
};

// ── Operations ───────────────────────────────────────────────────────────

// M = W - diag(delta).  Off-diagonals inherit W >= 0, diagonal is -delta < 0,
// so the result is Metzler with strictly negative diagonal.
inline Generator assemble_generator(const InteractionMatrix& w, const DecayVector& delta) {
  detail::require(w.size() == delta.size(), "assemble_generator: dimension mismatch");
  Matrix m = w.w;
  m.diagonal() = -delta.rates;
  return Generator(std::move(m));
}

struct HurwitzResult {
  bool hurwitz = false;
  double abscissa = 0.0;  // max_i Re(lambda_i(M)), the spectral abscissa
};

// Stability test: M is Hurwitz iff its spectral abscissa is < 0.  For a
// Metzler matrix the abscissa is itself an eigenvalue (Perron structure),
// but we report max Re over the full spectrum, which is the same number.
inline HurwitzResult is_hurwitz(const Generator& g) {
  if (g.size() == 1) return {g.m(0, 0) < 0.0, g.m(0, 0)};
  Eigen::EigenSolver<Matrix> es(g.m, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success)
    throw NonConvergenceError("is_hurwitz: eigenvalue iteration failed to converge");
  const double abscissa = es.eigenvalues().real().maxCoeff();
  return {abscissa < 0.0, abscissa};
}

// Long-run resting point of d/dt alpha = M alpha + u0:  alpha* = -M^{-1} u0.
// Requires M Hurwitz; Metzler + Hurwitz implies -M^{-1} >= 0 entrywise, so
// the result is nonnegative for nonnegative u0.
inline Vector equilibrium(const Generator& g, const Vector& u0) {
  detail::require(u0.size() == g.size(), "equilibrium: input dimension mismatch");
  detail::require((u0.array() >= 0.0).all(), "equilibrium: input must be nonnegative");
  const HurwitzResult h = is_hurwitz(g);
  detail::require(h.hurwitz, "equilibrium: generator is not Hurwitz (no stable resting point)");
  Eigen::FullPivLU<Matrix> lu(g.m);
  if (!lu.isInvertible())
    throw NumericalError("equilibrium: generator numerically singular");
  return lu.solve(-u0);
}

}  // namespace ecodyn
