#pragma once

// CSV reading/writing for trajectories, snapshot sets, and threshold sweeps.
// Numbers are written with %.17g so a written file reproduces the doubles
// bit-for-bit when read back; readers report problems with the offending
// 1-based row number.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ecodyn/estimation.hpp"
#include "ecodyn/exact_solvers.hpp"
#include "ecodyn/nonlinear.hpp"
#include "ecodyn/types.hpp"

namespace ecodyn::csv {

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_trajectory(std::ostream& os, const Trajectory& traj) {
  const Index n = traj.dim();
  os << "t";
  for (Index i = 0; i < n; ++i) os << ",alpha_" << (i + 1);
  os << "\n";
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    os << format_double(traj.times[k]);
    for (Index i = 0; i < n; ++i) os << "," << format_double(traj.states[k][i]);
    os << "\n";
  }
}

// Snapshot rows carry the input alongside the state so a simulation output
// can be fed straight back into estimation.
inline void write_snapshots(std::ostream& os, const SnapshotSet& data) {
  const Index n = data.dim();
  os << "t";
  for (Index i = 0; i < n; ++i) os << ",alpha_" << (i + 1);
  for (Index i = 0; i < n; ++i) os << ",u_" << (i + 1);
  os << "\n";
  for (std::size_t k = 0; k < data.states.size(); ++k) {
    os << format_double(data.dt * static_cast<double>(k));
    for (Index i = 0; i < n; ++i) os << "," << format_double(data.states[k][i]);
    for (Index i = 0; i < n; ++i) os << "," << format_double(data.inputs[k][i]);
    os << "\n";
  }
}

inline void write_sweep(std::ostream& os, const std::vector<SweepPoint>& sweep) {
  os << "tau,status,final_norm\n";
  for (const SweepPoint& p : sweep)
    os << format_double(p.tau) << "," << to_string(p.status) << ","
       << format_double(p.final_norm) << "\n";
}

namespace detail_csv {

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_double(const std::string& field, std::size_t row, std::size_t col) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(field, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != field.size())
    throw std::invalid_argument("csv row " + std::to_string(row) + ", column " +
                                std::to_string(col + 1) + ": '" + field +
                                "' is not a number");
  return v;
}

}  // namespace detail_csv

// Reads a snapshot CSV (t, alpha_1..alpha_n, u_1..u_n).  The time column
// must be uniformly spaced to within a 1e-9 relative tolerance; every
// complaint carries the 1-based row number of the offending line.
inline SnapshotSet read_snapshots(std::istream& is) {
  std::string line;
  std::size_t row = 0;
  if (!std::getline(is, line)) throw std::invalid_argument("csv row 1: missing header");
  ++row;
  const std::vector<std::string> header = detail_csv::split_fields(line);
  detail::require(header.size() >= 3 && header.size() % 2 == 1,
                  "csv row 1: header must be t,alpha_1..,u_1.. (odd field count >= 3)");
  const Index n = static_cast<Index>((header.size() - 1) / 2);

  std::vector<double> times;
  std::vector<Vector> states, inputs;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> fields = detail_csv::split_fields(line);
    if (fields.size() != header.size())
      throw std::invalid_argument("csv row " + std::to_string(row) + ": expected " +
                                  std::to_string(header.size()) + " fields, got " +
                                  std::to_string(fields.size()));
    times.push_back(detail_csv::parse_double(fields[0], row, 0));
    Vector a(n), u(n);
    for (Index i = 0; i < n; ++i) {
      a[i] = detail_csv::parse_double(fields[1 + i], row, 1 + i);
      u[i] = detail_csv::parse_double(fields[1 + n + i], row, 1 + n + i);
    }
    states.push_back(a);
    inputs.push_back(u);
  }
  if (times.size() < 2)
    throw std::invalid_argument("csv: need at least two snapshot rows, got " +
                                std::to_string(times.size()));

  const double dt = times[1] - times[0];
  detail::require(dt > 0.0, "csv row 3: time column must be strictly increasing");
  for (std::size_t k = 1; k < times.size(); ++k) {
    const double step = times[k] - times[k - 1];
    if (std::abs(step - dt) > 1e-9 * std::max(1.0, std::abs(dt)))
      throw std::invalid_argument("csv row " + std::to_string(k + 2) +
                                  ": non-uniform sampling (step " + format_double(step) +
                                  " vs expected " + format_double(dt) + ")");
  }
  return SnapshotSet(dt, std::move(states), std::move(inputs));
}

inline SnapshotSet read_snapshots_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot open snapshot file: " + path);
  return read_snapshots(is);
}

template <typename WriteFn>
inline void write_file(const std::string& path, WriteFn&& fn) {
  std::ofstream os(path);
  if (!os) throw std::invalid_argument("cannot open output file: " + path);
  fn(os);
  os.flush();
  if (!os) throw std::runtime_error("failed while writing: " + path);
}

}  // namespace ecodyn::csv
