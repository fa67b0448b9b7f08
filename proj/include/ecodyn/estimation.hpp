#pragma once

// Identification of the generator from uniformly sampled snapshots.
//
// The discrete-time map between snapshots is exact for constant (M, u):
//   alpha_{k+1} = A alpha_k + B u_k,   A = e^{M dt},  B = int_0^dt e^{M tau} dtau,
// so estimation proceeds as: least squares for (A, B) on the stacked
// regressor [alpha_k; u_k], then M = log(A)/dt.  A negative real eigenvalue
// of A means the sampling aliases the continuous dynamics (no principal
// logarithm); that is surfaced as a branch error advising a smaller dt.
//
// fit_sparse solves the regularized problem directly over Metzler-feasible
// generators, keeping B tied to M through the exponential-integral relation:
//   min_M sum_k || alpha_{k+1} - E(M) alpha_k - B(M) u_k ||^2
//         + l1 * sum_{i != j} M_ij     s.t. M_ij >= 0 (i != j)
// by proximal gradient.  Gradients of both channels are exact: the adjoint
// of the exponential's Frechet derivative is read off block-augmented
// exponentials (Van Loan blocks), so the method can converge to full
// precision rather than stalling at a linearization bias.

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "ecodyn/core_model.hpp"
#include "ecodyn/matfun.hpp"
#include "ecodyn/types.hpp"

namespace ecodyn {

// Uniformly spaced snapshots with the inputs held over each step.  The
// final input entry is padding so rows align with states; fits use
// inputs[0 .. m-2] only.
struct SnapshotSet {
  double dt = 0.0;
  std::vector<Vector> states;
  std::vector<Vector> inputs;

  SnapshotSet(double step, std::vector<Vector> alpha, std::vector<Vector> u)
      : dt(step), states(std::move(alpha)), inputs(std::move(u)) {
    detail::require(std::isfinite(dt) && dt > 0.0, "SnapshotSet: dt must be positive");
    detail::require(!states.empty(), "SnapshotSet: no snapshots");
    detail::require(states.size() == inputs.size(), "SnapshotSet: states/inputs mismatch");
    const Index n = states.front().size();
    detail::require(n >= 1, "SnapshotSet: empty state vector");
    for (std::size_t k = 0; k < states.size(); ++k) {
      detail::require(states[k].size() == n && inputs[k].size() == n,
                      "SnapshotSet: inconsistent dimensions");
      detail::require(states[k].allFinite() && inputs[k].allFinite(),
                      "SnapshotSet: non-finite data");
      detail::require((states[k].array() >= 0.0).all() && (inputs[k].array() >= 0.0).all(),
                      "SnapshotSet: snapshots and inputs must be nonnegative");
    }
  }

  Index dim() const { return states.front().size(); }
  std::size_t transitions() const { return states.size() - 1; }
};

// Exact forward simulation of the snapshot process (one expm_integral, then
// matrix-vector stepping).  steps = 0 yields the single initial snapshot.
inline SnapshotSet simulate_discrete(const Generator& m, const std::vector<Vector>& u_seq,
                                     const Vector& alpha0, double dt, int steps) {
  detail::require(steps >= 0, "simulate_discrete: steps must be >= 0");
  detail::require(static_cast<int>(u_seq.size()) == steps,
                  "simulate_discrete: need exactly one input per step");
  detail::require(alpha0.size() == m.size(), "simulate_discrete: dimension mismatch");
  detail::require((alpha0.array() >= 0.0).all(), "simulate_discrete: negative initial state");
  detail::require(std::isfinite(dt) && dt > 0.0, "simulate_discrete: dt must be positive");

  const ExpmIntegralResult eb = expm_integral(m.m, dt);
  std::vector<Vector> states{alpha0};
  std::vector<Vector> inputs;
  for (int k = 0; k < steps; ++k) {
    detail::require(u_seq[k].size() == m.size(), "simulate_discrete: input dimension mismatch");
    detail::require((u_seq[k].array() >= 0.0).all(), "simulate_discrete: negative input");
    states.push_back(eb.e * states.back() + eb.b * u_seq[k]);
    inputs.push_back(u_seq[k]);
  }
  inputs.push_back(steps > 0 ? u_seq.back() : Vector::Zero(m.size()));  // padding row
  return SnapshotSet(dt, std::move(states), std::move(inputs));
}

struct DiscreteFit {
  Matrix a_hat;
  Matrix b_hat;
  double residual_rms = 0.0;
  double rank_ratio = 0.0;   // sigma_min / sigma_max of the regressor
  bool b_identifiable = true;
};

// Least squares for (A, B).  The stacked regressor [alpha_k; u_k] must be
// well conditioned (smallest/largest singular value > rank_tol); a
// deficiency confined to the input coordinates (the u = 0 case) degrades
// gracefully to a state-only fit with B flagged unidentifiable, anything
// else is an identifiability failure reporting the unexcited directions.
inline DiscreteFit fit_discrete(const SnapshotSet& data, double rank_tol = 1e-10) {
  detail::require(std::isfinite(rank_tol) && rank_tol > 0.0,
                  "fit_discrete: rank tolerance must be positive");
  const Index n = data.dim();
  const Index k_tr = static_cast<Index>(data.transitions());
  if (data.states.size() < static_cast<std::size_t>(n) + 1)
    throw IdentifiabilityError(
        "fit_discrete: need at least n+1 snapshots for identifiability");

  Matrix x(2 * n, k_tr), y(n, k_tr);
  for (Index k = 0; k < k_tr; ++k) {
    x.block(0, k, n, 1) = data.states[k];
    x.block(n, k, n, 1) = data.inputs[k];
    y.col(k) = data.states[k + 1];
  }

  Eigen::JacobiSVD<Matrix> svd(x.transpose(), Eigen::ComputeThinU | Eigen::ComputeFullV);
  const Index n_sv = svd.singularValues().size();
  const double sv_max = n_sv > 0 ? svd.singularValues()[0] : 0.0;
  const double sv_min = (k_tr >= 2 * n && n_sv == 2 * n) ? svd.singularValues()[n_sv - 1] : 0.0;
  const double ratio = sv_max > 0.0 ? sv_min / sv_max : 0.0;

  DiscreteFit out;
  out.rank_ratio = ratio;

  if (ratio > rank_tol) {
    const Matrix theta = svd.solve(y.transpose()).transpose();  // [A B]
    out.a_hat = theta.leftCols(n);
    out.b_hat = theta.rightCols(n);
    out.residual_rms = (theta * x - y).norm() / std::sqrt(static_cast<double>(n * k_tr));
    return out;
  }

  // Collect unexcited regressor directions (singular value ~ 0, plus any
  // dimensions beyond the data rank).
  std::vector<Vector> deficient;
  for (Index i = 0; i < 2 * n; ++i) {
    const double sv = i < n_sv ? svd.singularValues()[i] : 0.0;
    if (sv <= rank_tol * std::max(sv_max, 1e-300)) deficient.push_back(svd.matrixV().col(i));
  }
  const bool input_only = [&] {
    for (const Vector& v : deficient)
      if (v.head(n).cwiseAbs().maxCoeff() > 1e-8) return false;
    return true;
  }();

  if (input_only) {
    // No input excitation: recover A from states alone, flag B.
    const Matrix xs = x.topRows(n);
    Eigen::JacobiSVD<Matrix> svds(xs.transpose(), Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double s_max = svds.singularValues()[0];
    const double s_min = (k_tr >= n) ? svds.singularValues()[svds.singularValues().size() - 1] : 0.0;
    if (s_max > 0.0 && s_min / s_max > rank_tol) {
      out.a_hat = svds.solve(y.transpose()).transpose();
      out.b_hat = Matrix::Zero(n, n);
      out.b_identifiable = false;
      out.residual_rms =
          (out.a_hat * xs - y).norm() / std::sqrt(static_cast<double>(n * k_tr));
      return out;
    }
  }

  std::string msg = "fit_discrete: regressor rank deficient; unexcited directions:";
  for (const Vector& v : deficient) {
    msg += " [";
    for (Index i = 0; i < v.size(); ++i) msg += (i ? "," : "") + std::to_string(v[i]);
    msg += "]";
  }
  throw IdentifiabilityError(msg);
}

// M = log(A)/dt.  The principal branch exists only when no eigenvalue of A
// touches the closed negative real axis; for snapshot data that failure
// mode *is* aliasing, so the error says so.
inline Matrix recover_generator(const Matrix& a_hat, double dt) {
  detail::require(std::isfinite(dt) && dt > 0.0, "recover_generator: dt must be positive");
  try {
    return logm(a_hat).value / dt;
  } catch (const LogBranchError&) {
    throw LogBranchError(
        "recover_generator: discrete map has spectrum on the negative real axis -- "
        "the sampling interval aliases the dynamics; use a smaller dt");
  }
}

struct MetzlerProjection {
  Matrix m;
  double violation = 0.0;  // largest clipped off-diagonal magnitude
};

// Nearest Metzler matrix (Frobenius sense): clip negative off-diagonals.
inline MetzlerProjection project_metzler(const Matrix& raw) {
  detail::require(raw.rows() == raw.cols(), "project_metzler: must be square");
  MetzlerProjection out;
  out.m = raw;
  for (Index i = 0; i < raw.rows(); ++i)
    for (Index j = 0; j < raw.cols(); ++j)
      if (i != j && out.m(i, j) < 0.0) {
        out.violation = std::max(out.violation, -out.m(i, j));
        out.m(i, j) = 0.0;
      }
  return out;
}

struct FitResult {
  Matrix m_hat;                   // Metzler generator estimate
  Matrix a_hat;                   // e^{M dt} at the estimate
  Matrix b_hat;                   // exponential integral at the estimate
  double residual_rms = 0.0;
  double metzler_violation = 0.0; // clipped magnitude (pipeline) or 0 (constrained fit)
  bool b_identifiable = true;
  int iterations = 0;
};

// Unregularized pipeline: least squares -> matrix log -> Metzler projection.
inline FitResult fit_generator(const SnapshotSet& data, double rank_tol = 1e-10) {
  const DiscreteFit df = fit_discrete(data, rank_tol);
  const MetzlerProjection proj = project_metzler(recover_generator(df.a_hat, data.dt));
  FitResult out;
  out.m_hat = proj.m;
  out.a_hat = df.a_hat;
  out.b_hat = df.b_hat;
  out.residual_rms = df.residual_rms;
  out.metzler_violation = proj.violation;
  out.b_identifiable = df.b_identifiable;
  return out;
}

namespace detail {

// D exp(X)[G]: Frechet derivative of the matrix exponential, from the
// (1,2) block of exp([[X, G], [0, X]]).
inline Matrix expm_frechet(const Matrix& x, const Matrix& g) {
  const Index n = x.rows();
  Matrix block = Matrix::Zero(2 * n, 2 * n);
  block.topLeftCorner(n, n) = x;
  block.topRightCorner(n, n) = g;
  block.bottomRightCorner(n, n) = x;
  return expm(block).value.topRightCorner(n, n);
}

// Adjoint of the B(M) = int_0^dt e^{M tau} dtau channel applied to G:
//   int_0^dt int_0^tau e^{M^T s} G e^{M^T (tau - s)} ds dtau,
// read off the (1,3) block of a Van Loan triple-block exponential.
inline Matrix expm_integral_adjoint(const Matrix& mt_dt, const Matrix& g, double dt) {
  const Index n = mt_dt.rows();
  Matrix block = Matrix::Zero(3 * n, 3 * n);
  block.topLeftCorner(n, n) = mt_dt;
  block.block(0, n, n, n) = g * dt;
  block.block(n, n, n, n) = mt_dt;
  block.block(n, 2 * n, n, n) = Matrix::Identity(n, n) * dt;
  return expm(block).value.topRightCorner(n, n);
}

}  // namespace detail

// Sparse Metzler fit by proximal gradient with backtracking.  l1_weight = 0
// reduces to the unregularized maximum-fidelity fit (and, on consistent
// data, to the fit_generator pipeline); large l1_weight empties the
// off-diagonal support.
inline FitResult fit_sparse(const SnapshotSet& data, double l1_weight,
                            int max_iterations = 20000, double rank_tol = 1e-10) {
  detail::require(std::isfinite(l1_weight) && l1_weight >= 0.0,
                  "fit_sparse: l1 weight must be >= 0");
  const Index n = data.dim();
  const Index k_tr = static_cast<Index>(data.transitions());
  if (data.states.size() < static_cast<std::size_t>(n) + 1)
    throw IdentifiabilityError(
        "fit_sparse: need at least n+1 snapshots for identifiability");
  const double dt = data.dt;

  // Warm start from the unregularized pipeline when it is available.
  Matrix m_cur;
  try {
    m_cur = fit_generator(data, rank_tol).m_hat;
  } catch (const std::exception&) {
    m_cur = Matrix::Zero(n, n);
  }

  auto smooth_objective = [&](const Matrix& m, Matrix* g_a, Matrix* g_b) {
    const ExpmIntegralResult eb = expm_integral(m, dt);
    double f = 0.0;
    if (g_a) g_a->setZero(n, n);
    if (g_b) g_b->setZero(n, n);
    for (Index k = 0; k < k_tr; ++k) {
      const Vector r = data.states[k + 1] - eb.e * data.states[k] - eb.b * data.inputs[k];
      f += r.squaredNorm();
      if (g_a) *g_a -= 2.0 * r * data.states[k].transpose();
      if (g_b) *g_b -= 2.0 * r * data.inputs[k].transpose();
    }
    return f;
  };
  auto penalty = [&](const Matrix& m) {
    double p = 0.0;
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j)
        if (i != j) p += std::abs(m(i, j));
    return l1_weight * p;
  };
  auto prox = [&](Matrix m, double eta) {
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j)
        if (i != j) m(i, j) = std::max(0.0, m(i, j) - eta * l1_weight);
    return m;
  };

  Matrix g_a(n, n), g_b(n, n);
  double f_cur = smooth_objective(m_cur, &g_a, &g_b);
  double obj_cur = f_cur + penalty(m_cur);
  double eta = 1.0;
  int it = 0;

  for (; it < max_iterations; ++it) {
    // Exact gradient of the smooth part through both channels.
    const Matrix mt_dt = m_cur.transpose() * dt;
    const Matrix grad = dt * detail::expm_frechet(mt_dt, g_a) +
                        detail::expm_integral_adjoint(mt_dt, g_b, dt);

    Matrix m_next;
    double f_next = 0.0;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      m_next = prox(m_cur - eta * grad, eta);
      f_next = smooth_objective(m_next, nullptr, nullptr);
      const Matrix step = m_next - m_cur;
      const double quad_bound =
          f_cur + (grad.array() * step.array()).sum() + step.squaredNorm() / (2.0 * eta);
      if (f_next <= quad_bound + 1e-15 * std::max(1.0, f_cur)) {
        accepted = true;
        break;
      }
      eta *= 0.5;
    }
    if (!accepted)
      throw NonConvergenceError("fit_sparse: backtracking failed to find a descent step");

    const double obj_next = f_next + penalty(m_next);
    const double step_size = (m_next - m_cur).cwiseAbs().maxCoeff();
    m_cur = m_next;
    const bool settled =
        std::abs(obj_cur - obj_next) <= 1e-10 * std::max(1.0, obj_cur) ||
        step_size <= 1e-15 * std::max(1.0, m_cur.cwiseAbs().maxCoeff());
    obj_cur = obj_next;
    f_cur = smooth_objective(m_cur, &g_a, &g_b);
    if (settled) break;
    eta *= 1.3;  // optimistic step growth, backtracking trims it again
  }
  if (it >= max_iterations)
    throw NonConvergenceError("fit_sparse: proximal gradient exhausted its iteration budget");

  const ExpmIntegralResult eb = expm_integral(m_cur, dt);
  FitResult out;
  out.m_hat = m_cur;
  out.a_hat = eb.e;
  out.b_hat = eb.b;
  out.residual_rms = std::sqrt(f_cur / static_cast<double>(n * k_tr));
  out.metzler_violation = 0.0;  // feasibility is enforced by the prox
  out.iterations = it + 1;
  return out;
}

}  // namespace ecodyn
