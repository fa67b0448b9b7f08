#pragma once

// Dense matrix-function kernels used by the exact solution tiers:
//
//   expm            scaling-and-squaring with the order-13 diagonal Pade
//                   approximant (theta_13 scaling threshold)
//   expm_integral   E = e^{M dt} and B = integral_0^dt e^{M tau} dtau via one
//                   exponential of the block matrix [[M, I], [0, 0]] -- valid
//                   for singular M, unlike the M^{-1}(E - I) identity
//   logm            inverse scaling-and-squaring: Denman-Beavers square roots
//                   until the spectrum clusters at 1, then a Gauss-Legendre
//                   (Pade) kernel for log(I + R), doubled back up
//   spectral_radius power iteration with a deterministic positive start and
//                   a dense-eigensolve fallback for peripheral-spectrum
//                   oscillation (e.g. bipartite adjacency)
//
// Everything is written for desk-scale dense matrices; no attempt is made at
// large-n performance.

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "ecodyn/quadrature.hpp"
#include "ecodyn/types.hpp"

namespace ecodyn {

struct MatFunResult {
  Matrix value;
  double est_error = 0.0;  // coarse backward-error estimate, always finite
};

namespace detail {

constexpr double kTheta13 = 5.371920351148152;  // Pade-13 scaling threshold
constexpr int kMaxSquarings = 64;

inline double norm1(const Matrix& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().colwise().sum().maxCoeff();
}

}  // namespace detail

// Matrix exponential, scaling-and-squaring with fixed Pade order 13.
// Backward-error-safe for ||2^{-s} A||_1 <= theta_13; the squaring count is
// reported when the input norm would overflow the scaling budget.
inline MatFunResult expm(const Matrix& a) {
  detail::require(a.rows() == a.cols() && a.rows() >= 1, "expm: need a nonempty square matrix");
  detail::require(a.allFinite(), "expm: non-finite entries");

  static const double b[14] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                               1187353796428800.0,  129060195264000.0,   10559470521600.0,
                               670442572800.0,      33522128640.0,       1323241920.0,
                               40840800.0,          960960.0,            16380.0,
                               182.0,               1.0};

  const Index n = a.rows();
  const double norm_a = detail::norm1(a);
  if (norm_a == 0.0) return {Matrix::Identity(n, n), 0.0};  // empty sum, exactly I
  int s = 0;
  if (norm_a > detail::kTheta13) {
    s = static_cast<int>(std::ceil(std::log2(norm_a / detail::kTheta13)));
    if (s > detail::kMaxSquarings)
      throw NumericalError("expm: norm " + std::to_string(norm_a) +
                           " requires scaling count " + std::to_string(s) +
                           " beyond budget " + std::to_string(detail::kMaxSquarings));
  }
  const Matrix as = a / std::pow(2.0, s);

  const Matrix ident = Matrix::Identity(n, n);
  const Matrix a2 = as * as;
  const Matrix a4 = a2 * a2;
  const Matrix a6 = a2 * a4;

  const Matrix u =
      as * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 +
            b[1] * ident);
  const Matrix v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 +
                   b[2] * a2 + b[0] * ident;

  Matrix value = Eigen::PartialPivLU<Matrix>(v - u).solve(v + u);
  for (int k = 0; k < s; ++k) value = value * value;

  if (!value.allFinite())
    throw NumericalError("expm: overflow after " + std::to_string(s) + " squarings (norm " +
                         std::to_string(norm_a) + ")");

  MatFunResult out;
  out.value = std::move(value);
  out.est_error =
      std::numeric_limits<double>::epsilon() * (1.0 + s) * std::max(1.0, norm_a);
  return out;
}

struct ExpmIntegralResult {
  Matrix e;  // e^{M dt}
  Matrix b;  // integral_0^dt e^{M tau} dtau
  double est_error = 0.0;
};

// One-step exact propagator pair for d/dt alpha = M alpha + u (u held):
//   alpha(dt) = E alpha(0) + B u.
// Computed from the top row of exp([[M, I],[0, 0]] dt), which stays valid
// when M is singular (the Laplacian corner case).
inline ExpmIntegralResult expm_integral(const Matrix& m, double dt) {
  detail::require(m.rows() == m.cols() && m.rows() >= 1,
                  "expm_integral: need a nonempty square matrix");
  detail::require(std::isfinite(dt) && dt >= 0.0, "expm_integral: dt must be >= 0");
  const Index n = m.rows();
  if (detail::norm1(m) == 0.0)  // constant integrand: E = I, B = dt I, exactly
    return {Matrix::Identity(n, n), dt * Matrix::Identity(n, n), 0.0};
  Matrix block = Matrix::Zero(2 * n, 2 * n);
  block.topLeftCorner(n, n) = m * dt;
  block.topRightCorner(n, n) = Matrix::Identity(n, n) * dt;
  MatFunResult full = expm(block);
  ExpmIntegralResult out;
  out.e = full.value.topLeftCorner(n, n);
  out.b = full.value.topRightCorner(n, n);
  out.est_error = full.est_error;
  return out;
}

namespace detail {

// Denman-Beavers iteration for the principal matrix square root.  Converges
// quadratically when no eigenvalue lies on the closed negative real axis
// (which logm has already checked).
inline Matrix sqrtm_db(const Matrix& a) {
  const Index n = a.rows();
  Matrix y = a;
  Matrix z = Matrix::Identity(n, n);
  const double scale = std::max(1.0, norm1(a));
  for (int it = 0; it < 60; ++it) {
    const Matrix yinv = Eigen::PartialPivLU<Matrix>(y).solve(Matrix::Identity(n, n));
    const Matrix zinv = Eigen::PartialPivLU<Matrix>(z).solve(Matrix::Identity(n, n));
    const Matrix ynext = 0.5 * (y + zinv);
    const Matrix znext = 0.5 * (z + yinv);
    const double diff = norm1(ynext - y);
    y = ynext;
    z = znext;
    if (!y.allFinite() || !z.allFinite())
      throw NonConvergenceError("logm: square-root iteration produced non-finite values");
    if (diff <= 1e-13 * std::max(scale, norm1(y))) return y;
  }
  throw NonConvergenceError("logm: square-root iteration exhausted its budget");
}

}  // namespace detail

// Principal matrix logarithm by inverse scaling-and-squaring.  Rejects any
// spectrum touching the closed negative real axis (no real principal branch
// there); that rejection is what surfaces sampling-rate aliasing upstream.
inline MatFunResult logm(const Matrix& a) {
  detail::require(a.rows() == a.cols() && a.rows() >= 1, "logm: need a nonempty square matrix");
  detail::require(a.allFinite(), "logm: non-finite entries");
  const Index n = a.rows();

  Eigen::EigenSolver<Matrix> es(a, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success)
    throw NonConvergenceError("logm: eigenvalue iteration failed to converge");
  double spectral_scale = 1.0;
  for (Index i = 0; i < n; ++i)
    spectral_scale = std::max(spectral_scale, std::abs(es.eigenvalues()[i]));
  for (Index i = 0; i < n; ++i) {
    const std::complex<double> ev = es.eigenvalues()[i];
    const bool on_real_axis = std::abs(ev.imag()) <= 1e-12 * spectral_scale;
    const bool near_zero = std::abs(ev) <= 1e-14 * spectral_scale;
    if (near_zero || (on_real_axis && ev.real() <= 0.0))
      throw LogBranchError(
          "logm: eigenvalue on the closed negative real axis; principal branch undefined");
  }

  const Matrix ident = Matrix::Identity(n, n);
  Matrix x = a;
  int k = 0;
  while (detail::norm1(x - ident) > 0.25) {
    x = detail::sqrtm_db(x);
    if (++k > 40)
      throw NonConvergenceError("logm: inverse scaling failed to contract the spectrum");
  }

  // log(I + R) = integral_0^1 R (I + s R)^{-1} ds; an 8-node Gauss-Legendre
  // evaluation of the integral is the [8/8] Pade approximant, with error
  // O(||R||^17) -- far below the round-trip tolerance at ||R|| <= 0.25.
  static const quad::Rule kernel = quad::gauss_legendre01(8);
  const Matrix r = x - ident;
  Matrix log_small = Matrix::Zero(n, n);
  for (std::size_t q = 0; q < kernel.nodes.size(); ++q) {
    const Matrix denom = ident + kernel.nodes[q] * r;
    log_small += kernel.weights[q] * Eigen::PartialPivLU<Matrix>(denom).solve(r).eval();
  }

  MatFunResult out;
  out.value = std::pow(2.0, k) * log_small;
  out.est_error = std::numeric_limits<double>::epsilon() * (1.0 + k) *
                  std::max(1.0, detail::norm1(out.value));
  return out;
}

struct SpectralRadiusResult {
  double radius = 0.0;
  Vector eigvec;  // Perron direction, nonnegative, normalized to unit sum
  int iterations = 0;
  bool dense_fallback = false;
};

namespace detail {

// Dense fallback for peripheral-spectrum cases the power iteration cannot
// settle (e.g. bipartite +/- lambda pairs).  Only for desk-scale n.
inline SpectralRadiusResult spectral_radius_dense(const Matrix& a, int iterations) {
  const Index n = a.rows();
  SpectralRadiusResult out;
  out.iterations = iterations;
  out.dense_fallback = true;

  const bool symmetric = (a - a.transpose()).cwiseAbs().maxCoeff() <=
                         1e-14 * std::max(1.0, max_abs(a));
  Vector v;
  if (symmetric) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(a);
    if (es.info() != Eigen::Success)
      throw NonConvergenceError("spectral_radius: dense symmetric eigensolve failed");
    // Perron-Frobenius: for nonnegative matrices the spectral radius is the
    // largest algebraic eigenvalue.
    out.radius = es.eigenvalues()[n - 1];
    v = es.eigenvectors().col(n - 1);
    if (v.sum() < 0.0) v = -v;
  } else {
    Eigen::EigenSolver<Matrix> es(a);
    if (es.info() != Eigen::Success)
      throw NonConvergenceError("spectral_radius: dense eigensolve failed");
    double best_mag = -1.0;
    Index best = 0;
    for (Index i = 0; i < n; ++i) {
      const double mag = std::abs(es.eigenvalues()[i]);
      const double re = es.eigenvalues()[i].real();
      // Max modulus; among modulus ties take the real (Perron) one.
      if (mag > best_mag * (1.0 + 1e-12) ||
          (mag > best_mag * (1.0 - 1e-12) && re > es.eigenvalues()[best].real())) {
        best_mag = mag;
        best = i;
      }
    }
    out.radius = es.eigenvalues()[best].real();
    Eigen::VectorXcd vc = es.eigenvectors().col(best);
    Index peak = 0;
    vc.cwiseAbs().maxCoeff(&peak);
    const std::complex<double> phase = vc[peak] / std::abs(vc[peak]);
    v = (vc / phase).real();
  }
  v = v.cwiseMax(0.0);
  detail::require(v.sum() > 0.0, "spectral_radius: degenerate Perron vector");
  out.eigvec = v / v.sum();

  const double residual = (a * out.eigvec - out.radius * out.eigvec).cwiseAbs().maxCoeff();
  if (residual > 1e-10 * std::max(1.0, norm1(a)))
    throw NonConvergenceError("spectral_radius: fallback residual " +
                              std::to_string(residual) + " too large");
  return out;
}

}  // namespace detail

// Perron root and direction of a nonnegative matrix.  Power iteration from
// the uniform positive vector; eigenvalue-change convergence is confirmed by
// an explicit residual check before returning.
inline SpectralRadiusResult spectral_radius(const Matrix& a) {
  detail::require(a.rows() == a.cols() && a.rows() >= 1,
                  "spectral_radius: need a nonempty square matrix");
  detail::require(a.allFinite(), "spectral_radius: non-finite entries");
  detail::require((a.array() >= 0.0).all(), "spectral_radius: entries must be nonnegative");

  const Index n = a.rows();
  const int max_iter = 10000;
  const double norm_a = detail::norm1(a);

  Vector x = Vector::Constant(n, 1.0 / static_cast<double>(n));
  double lambda = std::numeric_limits<double>::quiet_NaN();
  for (int it = 1; it <= max_iter; ++it) {
    const Vector y = a * x;
    const double s = y.sum();
    if (s <= 1e-300) {
      // Positive mass fell into the kernel: no cycles carry weight, rho = 0.
      SpectralRadiusResult out;
      out.radius = 0.0;
      out.eigvec = x;
      out.iterations = it;
      return out;
    }
    const double lambda_next = s;  // x is sum-normalized, so sum(Ax) estimates rho
    const Vector x_next = y / s;
    const bool settled =
        std::isfinite(lambda) && std::abs(lambda_next - lambda) <= 1e-12 * std::max(1.0, lambda_next);
    lambda = lambda_next;
    x = x_next;
    if (settled) {
      const double residual = (a * x - lambda * x).cwiseAbs().maxCoeff();
      if (residual <= 1e-10 * std::max(1.0, norm_a)) {
        SpectralRadiusResult out;
        out.radius = lambda;
        out.eigvec = x;
        out.iterations = it;
        return out;
      }
    }
  }

  if (n <= 64) return detail::spectral_radius_dense(a, max_iter);
  const double residual = (a * x - lambda * x).cwiseAbs().maxCoeff();
  throw NonConvergenceError("spectral_radius: no convergence after " +
                            std::to_string(max_iter) + " iterations (residual " +
                            std::to_string(residual) + ")");
}

}  // namespace ecodyn
