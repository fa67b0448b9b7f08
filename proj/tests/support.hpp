#pragma once

// Shared test helpers: a deterministic RNG (explicit bit mapping, so the
// stream is identical on every platform), random system builders, and two
// oracles implemented independently of the library code under test --
// a scaled Taylor-series matrix exponential and an adaptive Dormand-Prince
// ODE integrator.

#include <cstdint>
#include <random>
#include <vector>

#include "ecodyn/core_model.hpp"
#include "ecodyn/types.hpp"

namespace testsup {

using ecodyn::Index;
using ecodyn::Matrix;
using ecodyn::Vector;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // Uniform in [0, 1) from the top 53 bits of the generator output.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  int uniform_int(int lo, int hi) {
    const int span = hi - lo + 1;
    int k = static_cast<int>(uniform() * span);
    if (k >= span) k = span - 1;
    return lo + k;
  }

 private:
  std::mt19937_64 eng_;
};

inline Vector random_vector(Rng& rng, Index n, double lo, double hi) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = rng.uniform(lo, hi);
  return v;
}

// Nonnegative off-diagonals with zero diagonal (an interaction matrix).
inline Matrix random_interactions(Rng& rng, Index n, double scale, double density = 1.0) {
  Matrix w = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (i != j && rng.uniform() < density) w(i, j) = rng.uniform(0.0, scale);
  return w;
}

// Strictly diagonally dominant Metzler generator: Hurwitz by Gershgorin.
inline ecodyn::Generator random_hurwitz_generator(Rng& rng, Index n, double scale = 1.0,
                                                  double margin = 0.2) {
  const Matrix w = random_interactions(rng, n, scale);
  Matrix m = w;
  for (Index i = 0; i < n; ++i)
    m(i, i) = -(w.row(i).sum() + margin * (0.5 + rng.uniform()));
  return ecodyn::Generator(m);
}

// Arbitrary Metzler matrix (diagonal of either sign).
inline Matrix random_metzler(Rng& rng, Index n, double off_scale, double diag_lo,
                             double diag_hi) {
  Matrix m = random_interactions(rng, n, off_scale);
  for (Index i = 0; i < n; ++i) m(i, i) = rng.uniform(diag_lo, diag_hi);
  return m;
}

inline double max_abs(const Matrix& a) { return a.cwiseAbs().maxCoeff(); }

inline double rel_err(const Matrix& got, const Matrix& want) {
  const double scale = std::max(1e-300, want.cwiseAbs().maxCoeff());
  return (got - want).cwiseAbs().maxCoeff() / scale;
}

inline double rel_err(const Vector& got, const Vector& want) {
  const double scale = std::max(1e-300, want.cwiseAbs().maxCoeff());
  return (got - want).cwiseAbs().maxCoeff() / scale;
}

// ── Oracle 1: scaled Taylor-series exponential ─────────────────────────────
// Independent of the Pade implementation under test.  Squaring error grows
// like 2^k eps, fine at the tolerances the tests assert (1e-12 relative).
inline Matrix expm_taylor(const Matrix& a) {
  const Index n = a.rows();
  double norm = 0.0;
  for (Index j = 0; j < n; ++j) norm = std::max(norm, a.cwiseAbs().col(j).sum());
  int k = 0;
  while (norm > 0.25 && k < 60) {
    norm *= 0.5;
    ++k;
  }
  const Matrix b = a / std::ldexp(1.0, k);
  Matrix sum = Matrix::Identity(n, n);
  Matrix term = Matrix::Identity(n, n);
  for (int j = 1; j <= 60; ++j) {
    term = (term * b) / static_cast<double>(j);
    sum += term;
    if (term.cwiseAbs().maxCoeff() <= 1e-20 * sum.cwiseAbs().maxCoeff()) break;
  }
  for (int j = 0; j < k; ++j) sum = sum * sum;
  return sum;
}

// ── Oracle 2: adaptive Dormand-Prince RK5(4) ───────────────────────────────
// Classic coefficients; PI-free halving/doubling step control.  Used as the
// independent integrator for the solver-equivalence suites.
template <class F>
inline Vector integrate_rk45(const F& f, Vector x, double t0, double t1, double rtol = 1e-10,
                             double atol = 1e-12) {
  static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static const double a21 = 1.0 / 5;
  static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                      a54 = -212.0 / 729;
  static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                      a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                      b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static const double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                      e4 = 125.0 / 192 - 393.0 / 640, e5 = -2187.0 / 6784 + 92097.0 / 339200,
                      e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;

  double t = t0;
  double h = (t1 - t0) / 100.0;
  const double h_min = (t1 - t0) * 1e-14;
  long steps = 0;
  while (t < t1) {
    if (t + h > t1) h = t1 - t;
    const Vector k1 = f(t, x);
    const Vector k2 = f(t + c2 * h, x + h * (a21 * k1));
    const Vector k3 = f(t + c3 * h, x + h * (a31 * k1 + a32 * k2));
    const Vector k4 = f(t + c4 * h, x + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const Vector k5 = f(t + c5 * h, x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Vector k6 =
        f(t + h, x + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const Vector x5 = x + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const Vector k7 = f(t + h, x5);
    const Vector err_v = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double err = 0.0;
    for (Index i = 0; i < x.size(); ++i) {
      const double sc = atol + rtol * std::max(std::abs(x[i]), std::abs(x5[i]));
      err = std::max(err, std::abs(err_v[i]) / sc);
    }
    if (err <= 1.0) {
      t += h;
      x = x5;
    }
    const double grow = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
    h *= std::min(5.0, std::max(0.2, grow));
    if (h < h_min) throw std::runtime_error("integrate_rk45: step underflow");
    if (++steps > 40'000'000L) throw std::runtime_error("integrate_rk45: too many steps");
  }
  return x;
}

}  // namespace testsup
