#pragma once

// Small deterministic quadrature toolkit: Gauss-Legendre rules generated by
// Newton iteration on the Legendre recurrence, plus the partial-interval
// weights needed to integrate an interpolant from the panel start to an
// interior node (used by the Peano-Baker cumulative integrals).

#include <cmath>
#include <vector>

#include "ecodyn/types.hpp"

namespace ecodyn::quad {

struct Rule {
  std::vector<double> nodes;    // on [-1, 1], ascending
  std::vector<double> weights;  // sum to 2
};

// m-point Gauss-Legendre rule on [-1, 1].  Newton on P_m with the classical
// Chebyshev-flavored initial guesses; converges to machine precision in a
// handful of steps and is fully deterministic.
inline Rule gauss_legendre(int m) {
  detail::require(m >= 1, "gauss_legendre: need at least one node");
  Rule r;
  r.nodes.resize(m);
  r.weights.resize(m);
  for (int i = 0; i < m; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (m + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      // Legendre recurrence: (k+1) P_{k+1} = (2k+1) x P_k - k P_{k-1}.
      double p0 = 1.0, p1 = x;
      for (int k = 1; k < m; ++k) {
        const double p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
      }
      dp = m * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    // Ascending order (initial guesses run from +1 down to -1).
    r.nodes[m - 1 - i] = x;
    r.weights[m - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return r;
}

// Same rule mapped to [0, 1].
inline Rule gauss_legendre01(int m) {
  Rule r = gauss_legendre(m);
  for (int i = 0; i < m; ++i) {
    r.nodes[i] = 0.5 * (r.nodes[i] + 1.0);
    r.weights[i] *= 0.5;
  }
  return r;
}

// Partial weights for an m-node rule on [-1, 1]: C[q][r] is the integral of
// the r-th Lagrange basis polynomial from -1 up to node q, so that
//   integral_{-1}^{x_q} f  ~=  sum_r C[q][r] f(x_r)
// for the degree-(m-1) interpolant of f.  Exact for polynomials of degree
// < m, which is what makes cumulative (running) quadrature on a shared node
// grid consistent with the full-panel rule.
inline std::vector<std::vector<double>> partial_weights(const Rule& rule) {
  const int m = static_cast<int>(rule.nodes.size());
  // Lagrange basis coefficients by naive polynomial expansion (m is tiny).
  std::vector<std::vector<double>> coeff(m);
  for (int r = 0; r < m; ++r) {
    std::vector<double> c{1.0};  // polynomial in s, ascending powers
    double denom = 1.0;
    for (int k = 0; k < m; ++k) {
      if (k == r) continue;
      // multiply by (s - x_k)
      std::vector<double> nc(c.size() + 1, 0.0);
      for (std::size_t d = 0; d < c.size(); ++d) {
        nc[d] += c[d] * (-rule.nodes[k]);
        nc[d + 1] += c[d];
      }
      c = std::move(nc);
      denom *= (rule.nodes[r] - rule.nodes[k]);
    }
    for (double& v : c) v /= denom;
    coeff[r] = std::move(c);
  }
  auto antiderivative_at = [&](const std::vector<double>& c, double x) {
    double acc = 0.0, xp = x;
    for (std::size_t d = 0; d < c.size(); ++d) {
      acc += c[d] * xp / static_cast<double>(d + 1);
      xp *= x;
    }
    return acc;
  };
  std::vector<std::vector<double>> out(m, std::vector<double>(m, 0.0));
  for (int q = 0; q < m; ++q)
    for (int r = 0; r < m; ++r)
      out[q][r] =
          antiderivative_at(coeff[r], rule.nodes[q]) - antiderivative_at(coeff[r], -1.0);
  return out;
}

// Trapezoid rule on an arbitrary (sorted, possibly nonuniform) grid.
inline double trapezoid(const std::vector<double>& t, const std::vector<double>& f) {
  detail::require(t.size() == f.size() && t.size() >= 2,
                  "trapezoid: need matching grids with at least two points");
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < t.size(); ++k)
    acc += 0.5 * (t[k + 1] - t[k]) * (f[k] + f[k + 1]);
  return acc;
}

}  // namespace ecodyn::quad
