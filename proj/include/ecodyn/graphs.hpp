#pragma once

// Small library of named adjacency matrices used by the threshold analyses
// and the sample scenarios.  All are symmetric 0/1 matrices with zero
// diagonal; edge weights can be scaled by the caller.

#include <string>

#include "ecodyn/types.hpp"

namespace ecodyn::graphs {

// Hub-and-leaves star on n nodes (node 0 is the hub).  Its spectral radius
// is sqrt(n - 1).
inline Matrix star(Index n) {
  detail::require(n >= 2, "star: need at least 2 nodes");
  Matrix a = Matrix::Zero(n, n);
  for (Index i = 1; i < n; ++i) a(0, i) = a(i, 0) = 1.0;
  return a;
}

// Open chain on n nodes; spectral radius 2 cos(pi / (n + 1)).
inline Matrix path(Index n) {
  detail::require(n >= 2, "path: need at least 2 nodes");
  Matrix a = Matrix::Zero(n, n);
  for (Index i = 0; i + 1 < n; ++i) a(i, i + 1) = a(i + 1, i) = 1.0;
  return a;
}

// Closed ring on n nodes; spectral radius 2.
inline Matrix cycle(Index n) {
  detail::require(n >= 3, "cycle: need at least 3 nodes");
  Matrix a = path(n);
  a(0, n - 1) = a(n - 1, 0) = 1.0;
  return a;
}

// Complete graph on n nodes; spectral radius n - 1.
inline Matrix complete(Index n) {
  detail::require(n >= 2, "complete: need at least 2 nodes");
  Matrix a = Matrix::Ones(n, n);
  a.diagonal().setZero();
  return a;
}

inline Matrix by_name(const std::string& name, Index n) {
  if (name == "star") return star(n);
  if (name == "path") return path(n);
  if (name == "cycle") return cycle(n);
  if (name == "complete") return complete(n);
  throw std::invalid_argument("unknown graph family: " + name +
                              " (expected star, path, cycle, or complete)");
}

}  // namespace ecodyn::graphs
