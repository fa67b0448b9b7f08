#pragma once

// Scenario configuration and batch runners.
//
// A scenario file is a single JSON object with the blocks
//   model      n (optional cross-check), lambda (interaction matrix),
//              delta (decay rates) or the delta_base/delta_sensitivity/costs
//              triple, crowding (saturating mode)
//   run        mode (constant | schedule | time-varying | saturating),
//              alpha0, t0, horizon, sample_dt, u (constant vector or
//              piecewise {breakpoints, values}), per-mode extras
//   analysis   weights, perturbation, ROI costs, perception, frequency table
//   sweep      adoption-threshold sweep over a contact graph
//   estimation snapshot CSV path and fitting method
// plus optional "name"/"description" metadata.  Parsing is strict: every key
// is either consumed by the schema or rejected with its full path, so typos
// cannot be silently ignored.  Cross-field checks (dimensions, mode-specific
// keys) are also reported with key paths.
//
// The run_* functions below execute a parsed config and return plain data;
// the command-line tool only adds file I/O around them, which keeps the
// whole pipeline testable in-process.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecodyn/analysis.hpp"
#include "ecodyn/core_model.hpp"
#include "ecodyn/csv.hpp"
#include "ecodyn/estimation.hpp"
#include "ecodyn/exact_solvers.hpp"
#include "ecodyn/graphs.hpp"
#include "ecodyn/nonlinear.hpp"
#include "ecodyn/types.hpp"

namespace ecodyn::scenario {

using Json = nlohmann::json;

namespace cfg {

[[noreturn]] inline void fail(const std::string& path, const std::string& what) {
  throw std::invalid_argument("config " + path + ": " + what);
}

inline void reject_unknown(const Json& j, const std::string& path,
                           std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(path, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* key : allowed)
      if (it.key() == key) {
        known = true;
        break;
      }
    if (!known) fail(path + "." + it.key(), "unrecognized key");
  }
}

inline const Json& need(const Json& j, const std::string& path, const char* key) {
  if (!j.contains(key)) fail(path, std::string("missing required key '") + key + "'");
  return j.at(key);
}

inline double as_number(const Json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail(path, "must be finite");
  return x;
}

inline double as_positive(const Json& v, const std::string& path) {
  const double x = as_number(v, path);
  if (x <= 0.0) fail(path, "must be > 0");
  return x;
}

inline int as_int(const Json& v, const std::string& path) {
  if (!v.is_number_integer()) fail(path, "expected an integer");
  return v.get<int>();
}

inline bool as_bool(const Json& v, const std::string& path) {
  if (!v.is_boolean()) fail(path, "expected true or false");
  return v.get<bool>();
}

inline std::string as_string(const Json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "expected a string");
  return v.get<std::string>();
}

inline Vector as_vector(const Json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) fail(path, "expected a non-empty array of numbers");
  Vector out(static_cast<Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i)
    out[static_cast<Index>(i)] = as_number(v[i], path + "[" + std::to_string(i) + "]");
  return out;
}

inline Matrix as_matrix(const Json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) fail(path, "expected a non-empty array of rows");
  const std::size_t rows = v.size();
  std::size_t cols = 0;
  Matrix out;
  for (std::size_t i = 0; i < rows; ++i) {
    const Vector row = as_vector(v[i], path + "[" + std::to_string(i) + "]");
    if (i == 0) {
      cols = static_cast<std::size_t>(row.size());
      out.resize(static_cast<Index>(rows), static_cast<Index>(cols));
    } else if (static_cast<std::size_t>(row.size()) != cols) {
      fail(path + "[" + std::to_string(i) + "]", "ragged matrix rows");
    }
    out.row(static_cast<Index>(i)) = row.transpose();
  }
  return out;
}

inline Matrix parse_graph(const Json& j, const std::string& path) {
  reject_unknown(j, path, {"family", "nodes", "weight"});
  const std::string family = as_string(need(j, path, "family"), path + ".family");
  const int nodes = as_int(need(j, path, "nodes"), path + ".nodes");
  if (nodes < 2) fail(path + ".nodes", "need at least 2 nodes");
  double weight = 1.0;
  if (j.contains("weight")) weight = as_positive(j.at("weight"), path + ".weight");
  try {
    return graphs::by_name(family, nodes) * weight;
  } catch (const std::invalid_argument& e) {
    fail(path + ".family", e.what());
  }
}

// Input signal: a plain array is a constant input; an object gives the
// right-open piecewise-constant form.
inline InputSignal parse_input(const Json& v, const std::string& path, double t0) {
  try {
    if (v.is_array()) return InputSignal::constant(as_vector(v, path));
    if (v.is_object()) {
      reject_unknown(v, path, {"breakpoints", "values"});
      const Vector bp_v = as_vector(need(v, path, "breakpoints"), path + ".breakpoints");
      std::vector<double> bp(bp_v.data(), bp_v.data() + bp_v.size());
      if (bp.front() > t0)
        fail(path + ".breakpoints", "first breakpoint must not lie after t0");
      const Json& vals = need(v, path, "values");
      if (!vals.is_array() || vals.empty())
        fail(path + ".values", "expected a non-empty array of vectors");
      std::vector<Vector> values;
      for (std::size_t i = 0; i < vals.size(); ++i)
        values.push_back(as_vector(vals[i], path + ".values[" + std::to_string(i) + "]"));
      return InputSignal(std::move(bp), std::move(values));
    }
  } catch (const std::invalid_argument& e) {
    const std::string what = e.what();
    if (what.rfind("config ", 0) == 0) throw;  // already path-annotated
    fail(path, what);
  }
  fail(path, "expected an array (constant input) or a {breakpoints, values} object");
}

}  // namespace cfg

// ── Parsed blocks ──────────────────────────────────────────────────────────

struct ModelSpec {
  Matrix lambda;  // validated: square, zero diagonal, entries >= 0
  Vector delta;   // validated: > 0, same dimension
  std::optional<Matrix> crowding;

  Index size() const { return lambda.rows(); }
  InteractionMatrix interaction_matrix() const { return InteractionMatrix(lambda); }
  DecayVector decay_vector() const { return DecayVector(delta); }
  Generator generator() const { return assemble_generator(interaction_matrix(), decay_vector()); }
};

enum class RunMode { Constant, Schedule, TimeVarying, Saturating };

inline const char* to_string(RunMode m) {
  switch (m) {
    case RunMode::Constant: return "constant";
    case RunMode::Schedule: return "schedule";
    case RunMode::TimeVarying: return "time-varying";
    case RunMode::Saturating: return "saturating";
  }
  return "?";
}

struct SegmentSpec {
  double duration = 0.0;
  std::optional<Vector> u;
  std::optional<Matrix> lambda;
  std::optional<Vector> delta;
};

struct RunSpec {
  RunMode mode = RunMode::Constant;
  Vector alpha0;
  double t0 = 0.0;
  double sample_dt = 0.0;
  double horizon = 0.0;  // duration; schedule mode derives it from the segments
  std::optional<InputSignal> u;
  std::vector<SegmentSpec> segments;
  double mod_amplitude = 0.0;  // time-varying: M(t) = (1 + a sin(2 pi t / P)) Lambda - diag(delta)
  double mod_period = 0.0;
  bool assume_commuting = false;
  double step = 0.0;  // saturating; 0 = auto (0.01 / max decay)
  // Time-varying solver knobs (run.tolerances).
  double target_step_load = 0.5;
  bool use_peano_baker = false;
  double pb_tol = 1e-10;

  double t_end() const { return t0 + horizon; }
};

struct AnalysisSpec {
  Vector weights;
  double floor = 1e-12;
  std::optional<Matrix> d_lambda;  // perturbation for the first-order dJ
  std::optional<Vector> d_delta;
  std::optional<Matrix> roi_costs;
  std::optional<PerceptionParams> perception;
  struct Frequency {
    double beta_addon = 0.0;
    double group_size = 0.0;
    std::vector<int> steps;
  };
  std::optional<Frequency> frequency;
};

struct SweepSpec {
  Matrix adjacency;
  std::vector<double> tau_grid;
  Vector initial;
  double horizon = 0.0;
  double extinction_tol = 1e-6;
};

struct EstimationSpec {
  std::string snapshots;
  std::string method = "pipeline";  // or "sparse"
  double l1_weight = 0.0;
  int max_iterations = 20000;
  double rank_tol = 1e-10;
};

struct ScenarioConfig {
  std::string name;
  std::string description;
  std::optional<ModelSpec> model;
  std::optional<RunSpec> run;
  std::optional<AnalysisSpec> analysis;
  std::optional<SweepSpec> sweep;
  std::optional<EstimationSpec> estimation;

  static ScenarioConfig parse(const Json& j);
  static ScenarioConfig load(const std::string& path);
};

// ── Block parsers ──────────────────────────────────────────────────────────

inline ModelSpec parse_model(const Json& j) {
  const std::string p = "model";
  cfg::reject_unknown(
      j, p, {"n", "lambda", "delta", "delta_base", "delta_sensitivity", "costs", "crowding"});

  ModelSpec out;
  out.lambda = cfg::as_matrix(cfg::need(j, p, "lambda"), p + ".lambda");
  if (j.contains("n")) {
    const int n = cfg::as_int(j.at("n"), p + ".n");
    if (n != out.lambda.rows()) cfg::fail(p + ".n", "does not match the lambda dimensions");
  }

  const bool direct = j.contains("delta");
  const bool via_costs =
      j.contains("delta_base") || j.contains("delta_sensitivity") || j.contains("costs");
  if (direct == via_costs)
    cfg::fail(p, "give either 'delta' or the (delta_base, delta_sensitivity, costs) triple");
  if (direct) {
    out.delta = cfg::as_vector(j.at("delta"), p + ".delta");
  } else {
    const Vector base = cfg::as_vector(cfg::need(j, p, "delta_base"), p + ".delta_base");
    const Vector sens =
        cfg::as_vector(cfg::need(j, p, "delta_sensitivity"), p + ".delta_sensitivity");
    const Vector costs = cfg::as_vector(cfg::need(j, p, "costs"), p + ".costs");
    try {
      out.delta = DecayVector::from_costs(base, sens, costs).rates;
    } catch (const std::invalid_argument& e) {
      cfg::fail(p + ".delta_base", e.what());
    }
  }

  if (j.contains("crowding")) out.crowding = cfg::as_matrix(j.at("crowding"), p + ".crowding");

  // Validate through the strong types once so every model error surfaces here.
  try {
    const InteractionMatrix w_check(out.lambda);
    const DecayVector d_check(out.delta);
    if (d_check.size() != w_check.size())
      cfg::fail(p + ".delta", "dimension must match the lambda matrix");
    if (out.crowding) {
      const CrowdingMatrix c_check(*out.crowding);
      if (c_check.size() != w_check.size())
        cfg::fail(p + ".crowding", "dimension must match the lambda matrix");
    }
  } catch (const std::invalid_argument& e) {
    const std::string what = e.what();
    if (what.rfind("config ", 0) == 0) throw;
    cfg::fail(p, what);
  }
  return out;
}

inline RunSpec parse_run(const Json& j) {
  const std::string p = "run";
  cfg::reject_unknown(j, p,
                      {"mode", "alpha0", "t0", "sample_dt", "horizon", "u", "segments",
                       "modulation", "assume_commuting", "step", "tolerances"});

  RunSpec out;
  const std::string mode = cfg::as_string(cfg::need(j, p, "mode"), p + ".mode");
  if (mode == "constant")
    out.mode = RunMode::Constant;
  else if (mode == "schedule")
    out.mode = RunMode::Schedule;
  else if (mode == "time-varying")
    out.mode = RunMode::TimeVarying;
  else if (mode == "saturating")
    out.mode = RunMode::Saturating;
  else
    cfg::fail(p + ".mode", "'" + mode +
                               "' is not a run mode (constant, schedule, time-varying, "
                               "saturating)");

  out.alpha0 = cfg::as_vector(cfg::need(j, p, "alpha0"), p + ".alpha0");
  if (j.contains("t0")) out.t0 = cfg::as_number(j.at("t0"), p + ".t0");
  out.sample_dt = cfg::as_positive(cfg::need(j, p, "sample_dt"), p + ".sample_dt");

  auto forbid = [&](const char* key, const char* why) {
    if (j.contains(key)) cfg::fail(p + "." + key, why);
  };

  if (j.contains("u")) out.u = cfg::parse_input(j.at("u"), p + ".u", out.t0);

  switch (out.mode) {
    case RunMode::Constant:
      forbid("segments", "only valid in schedule mode");
      forbid("modulation", "only valid in time-varying mode");
      forbid("assume_commuting", "only valid in time-varying mode");
      forbid("step", "only valid in saturating mode");
      forbid("tolerances", "only used by the time-varying mode");
      out.horizon = cfg::as_positive(cfg::need(j, p, "horizon"), p + ".horizon");
      break;

    case RunMode::Schedule: {
      forbid("horizon", "schedule mode derives the horizon from the segment durations");
      forbid("u", "schedule mode takes inputs per segment");
      forbid("modulation", "only valid in time-varying mode");
      forbid("assume_commuting", "only valid in time-varying mode");
      forbid("step", "only valid in saturating mode");
      forbid("tolerances", "only used by the time-varying mode");
      const Json& segs = cfg::need(j, p, "segments");
      if (!segs.is_array() || segs.empty())
        cfg::fail(p + ".segments", "expected a non-empty array of segments");
      double total = 0.0;
      for (std::size_t k = 0; k < segs.size(); ++k) {
        const std::string sp = p + ".segments[" + std::to_string(k) + "]";
        cfg::reject_unknown(segs[k], sp, {"duration", "u", "lambda", "delta"});
        SegmentSpec seg;
        seg.duration = cfg::as_positive(cfg::need(segs[k], sp, "duration"), sp + ".duration");
        if (segs[k].contains("u")) seg.u = cfg::as_vector(segs[k].at("u"), sp + ".u");
        if (segs[k].contains("lambda"))
          seg.lambda = cfg::as_matrix(segs[k].at("lambda"), sp + ".lambda");
        if (segs[k].contains("delta"))
          seg.delta = cfg::as_vector(segs[k].at("delta"), sp + ".delta");
        total += seg.duration;
        out.segments.push_back(std::move(seg));
      }
      out.horizon = total;
      break;
    }

    case RunMode::TimeVarying: {
      forbid("segments", "only valid in schedule mode");
      forbid("step", "only valid in saturating mode");
      out.horizon = cfg::as_positive(cfg::need(j, p, "horizon"), p + ".horizon");
      const Json& mod = cfg::need(j, p, "modulation");
      cfg::reject_unknown(mod, p + ".modulation", {"amplitude", "period"});
      out.mod_amplitude = cfg::as_number(cfg::need(mod, p + ".modulation", "amplitude"),
                                         p + ".modulation.amplitude");
      if (std::abs(out.mod_amplitude) > 1.0)
        cfg::fail(p + ".modulation.amplitude",
                  "|amplitude| must be <= 1 so the scaled interactions stay nonnegative");
      out.mod_period =
          cfg::as_positive(cfg::need(mod, p + ".modulation", "period"), p + ".modulation.period");
      if (j.contains("assume_commuting"))
        out.assume_commuting = cfg::as_bool(j.at("assume_commuting"), p + ".assume_commuting");
      if (j.contains("tolerances")) {
        const Json& tol = j.at("tolerances");
        cfg::reject_unknown(tol, p + ".tolerances",
                            {"target_step_load", "peano_baker", "pb_tol"});
        if (tol.contains("target_step_load"))
          out.target_step_load =
              cfg::as_positive(tol.at("target_step_load"), p + ".tolerances.target_step_load");
        if (tol.contains("peano_baker"))
          out.use_peano_baker = cfg::as_bool(tol.at("peano_baker"), p + ".tolerances.peano_baker");
        if (tol.contains("pb_tol"))
          out.pb_tol = cfg::as_positive(tol.at("pb_tol"), p + ".tolerances.pb_tol");
      }
      break;
    }

    case RunMode::Saturating:
      forbid("segments", "only valid in schedule mode");
      forbid("modulation", "only valid in time-varying mode");
      forbid("assume_commuting", "only valid in time-varying mode");
      forbid("tolerances", "only used by the time-varying mode");
      out.horizon = cfg::as_positive(cfg::need(j, p, "horizon"), p + ".horizon");
      if (j.contains("step")) out.step = cfg::as_positive(j.at("step"), p + ".step");
      if (out.u) {
        for (const Vector& v : out.u->values)
          if (v.cwiseAbs().maxCoeff() != 0.0)
            cfg::fail(p + ".u",
                      "the saturating model has no input channel; remove the key or "
                      "set it to zeros");
      }
      break;
  }
  return out;
}

inline AnalysisSpec parse_analysis(const Json& j) {
  const std::string p = "analysis";
  cfg::reject_unknown(j, p,
                      {"weights", "amplification_floor", "perturbation", "roi_costs",
                       "perception", "frequency"});
  AnalysisSpec out;
  out.weights = cfg::as_vector(cfg::need(j, p, "weights"), p + ".weights");
  if ((out.weights.array() < 0.0).any()) cfg::fail(p + ".weights", "must be nonnegative");
  if (out.weights.maxCoeff() <= 0.0) cfg::fail(p + ".weights", "must not be all zero");

  if (j.contains("amplification_floor"))
    out.floor = cfg::as_positive(j.at("amplification_floor"), p + ".amplification_floor");

  if (j.contains("perturbation")) {
    const Json& pert = j.at("perturbation");
    cfg::reject_unknown(pert, p + ".perturbation", {"d_lambda", "d_delta"});
    if (pert.contains("d_lambda"))
      out.d_lambda = cfg::as_matrix(pert.at("d_lambda"), p + ".perturbation.d_lambda");
    if (pert.contains("d_delta"))
      out.d_delta = cfg::as_vector(pert.at("d_delta"), p + ".perturbation.d_delta");
    if (!out.d_lambda && !out.d_delta)
      cfg::fail(p + ".perturbation", "give d_lambda, d_delta, or both");
  }

  if (j.contains("roi_costs")) out.roi_costs = cfg::as_matrix(j.at("roi_costs"), p + ".roi_costs");

  if (j.contains("perception")) {
    const Json& per = j.at("perception");
    cfg::reject_unknown(per, p + ".perception", {"kappa", "beta"});
    PerceptionParams params;
    params.beta =
        cfg::as_positive(cfg::need(per, p + ".perception", "beta"), p + ".perception.beta");
    if (per.contains("kappa"))
      params.kappa = cfg::as_positive(per.at("kappa"), p + ".perception.kappa");
    out.perception = params;
  }

  if (j.contains("frequency")) {
    const Json& fr = j.at("frequency");
    cfg::reject_unknown(fr, p + ".frequency", {"beta_addon", "group_size", "steps"});
    AnalysisSpec::Frequency f;
    f.beta_addon = cfg::as_number(cfg::need(fr, p + ".frequency", "beta_addon"),
                                  p + ".frequency.beta_addon");
    if (f.beta_addon < 0.0) cfg::fail(p + ".frequency.beta_addon", "must be >= 0");
    f.group_size = cfg::as_number(cfg::need(fr, p + ".frequency", "group_size"),
                                  p + ".frequency.group_size");
    if (f.group_size < 0.0) cfg::fail(p + ".frequency.group_size", "must be >= 0");
    const Json& steps = cfg::need(fr, p + ".frequency", "steps");
    if (!steps.is_array() || steps.empty())
      cfg::fail(p + ".frequency.steps", "expected a non-empty array of integers");
    for (std::size_t i = 0; i < steps.size(); ++i) {
      const int s = cfg::as_int(steps[i], p + ".frequency.steps[" + std::to_string(i) + "]");
      if (s < 0) cfg::fail(p + ".frequency.steps[" + std::to_string(i) + "]", "must be >= 0");
      f.steps.push_back(s);
    }
    out.frequency = std::move(f);
  }
  return out;
}

inline SweepSpec parse_sweep(const Json& j) {
  const std::string p = "sweep";
  cfg::reject_unknown(j, p,
                      {"graph", "adjacency", "tau_grid", "tau_range", "initial", "horizon",
                       "extinction_tol"});
  SweepSpec out;
  const bool has_g = j.contains("graph");
  const bool has_a = j.contains("adjacency");
  if (has_g == has_a) cfg::fail(p, "give exactly one of 'graph' or 'adjacency'");
  out.adjacency = has_g ? cfg::parse_graph(j.at("graph"), p + ".graph")
                        : cfg::as_matrix(j.at("adjacency"), p + ".adjacency");
  if (out.adjacency.rows() != out.adjacency.cols()) cfg::fail(p + ".adjacency", "must be square");
  if ((out.adjacency.array() < 0.0).any())
    cfg::fail(p + ".adjacency", "entries must be nonnegative");

  const bool has_grid = j.contains("tau_grid");
  const bool has_range = j.contains("tau_range");
  if (has_grid == has_range) cfg::fail(p, "give exactly one of 'tau_grid' or 'tau_range'");
  if (has_grid) {
    const Vector g = cfg::as_vector(j.at("tau_grid"), p + ".tau_grid");
    out.tau_grid.assign(g.data(), g.data() + g.size());
  } else {
    const Json& r = j.at("tau_range");
    cfg::reject_unknown(r, p + ".tau_range", {"from", "to", "points"});
    const double from =
        cfg::as_positive(cfg::need(r, p + ".tau_range", "from"), p + ".tau_range.from");
    const double to = cfg::as_positive(cfg::need(r, p + ".tau_range", "to"), p + ".tau_range.to");
    const int points =
        cfg::as_int(cfg::need(r, p + ".tau_range", "points"), p + ".tau_range.points");
    if (to <= from) cfg::fail(p + ".tau_range.to", "must exceed 'from'");
    if (points < 2) cfg::fail(p + ".tau_range.points", "need at least 2 points");
    for (int i = 0; i < points; ++i)
      out.tau_grid.push_back(from + (to - from) * static_cast<double>(i) /
                                        static_cast<double>(points - 1));
  }
  for (std::size_t k = 0; k < out.tau_grid.size(); ++k) {
    if (out.tau_grid[k] <= 0.0) cfg::fail(p + ".tau_grid", "values must be > 0");
    if (k > 0 && out.tau_grid[k] <= out.tau_grid[k - 1])
      cfg::fail(p + ".tau_grid", "values must be strictly increasing");
  }

  out.initial = cfg::as_vector(cfg::need(j, p, "initial"), p + ".initial");
  if ((out.initial.array() < 0.0).any() || (out.initial.array() > 1.0).any())
    cfg::fail(p + ".initial", "adoption fractions must lie in [0, 1]");
  out.horizon = cfg::as_positive(cfg::need(j, p, "horizon"), p + ".horizon");
  if (j.contains("extinction_tol"))
    out.extinction_tol = cfg::as_positive(j.at("extinction_tol"), p + ".extinction_tol");
  return out;
}

inline EstimationSpec parse_estimation(const Json& j) {
  const std::string p = "estimation";
  cfg::reject_unknown(j, p, {"snapshots", "method", "l1_weight", "max_iterations", "rank_tol"});
  EstimationSpec out;
  out.snapshots = cfg::as_string(cfg::need(j, p, "snapshots"), p + ".snapshots");
  if (out.snapshots.empty()) cfg::fail(p + ".snapshots", "must be a non-empty path");
  if (j.contains("method")) {
    out.method = cfg::as_string(j.at("method"), p + ".method");
    if (out.method != "pipeline" && out.method != "sparse")
      cfg::fail(p + ".method", "'" + out.method + "' is not a method (pipeline, sparse)");
  }
  if (j.contains("l1_weight")) {
    if (out.method != "sparse") cfg::fail(p + ".l1_weight", "only used by the sparse method");
    const double w = cfg::as_number(j.at("l1_weight"), p + ".l1_weight");
    if (w < 0.0) cfg::fail(p + ".l1_weight", "must be >= 0");
    out.l1_weight = w;
  }
  if (j.contains("max_iterations")) {
    if (out.method != "sparse")
      cfg::fail(p + ".max_iterations", "only used by the sparse method");
    out.max_iterations = cfg::as_int(j.at("max_iterations"), p + ".max_iterations");
    if (out.max_iterations < 1) cfg::fail(p + ".max_iterations", "must be >= 1");
  }
  if (j.contains("rank_tol"))
    out.rank_tol = cfg::as_positive(j.at("rank_tol"), p + ".rank_tol");
  return out;
}

inline ScenarioConfig ScenarioConfig::parse(const Json& j) {
  cfg::reject_unknown(j, "<top>",
                      {"name", "description", "model", "run", "analysis", "sweep", "estimation"});
  ScenarioConfig out;
  if (j.contains("name")) out.name = cfg::as_string(j.at("name"), "name");
  if (j.contains("description"))
    out.description = cfg::as_string(j.at("description"), "description");
  if (j.contains("model")) out.model = parse_model(j.at("model"));
  if (j.contains("run")) out.run = parse_run(j.at("run"));
  if (j.contains("analysis")) out.analysis = parse_analysis(j.at("analysis"));
  if (j.contains("sweep")) out.sweep = parse_sweep(j.at("sweep"));
  if (j.contains("estimation")) out.estimation = parse_estimation(j.at("estimation"));
  return out;
}

inline ScenarioConfig ScenarioConfig::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("config: cannot open " + path);
  Json j;
  try {
    j = Json::parse(is);
  } catch (const Json::parse_error& e) {
    throw std::invalid_argument("config " + path + ": " + e.what());
  }
  return parse(j);
}

// ── Runners ────────────────────────────────────────────────────────────────

// Sample times t0 + j sample_dt strictly below the end time, then the end
// time exactly (mirrors the schedule solver's emission grid).
inline std::vector<double> sample_grid(double t0, double t_final, double dt) {
  const double tol = 1e-9 * std::max(1.0, std::abs(t_final));
  std::vector<double> grid;
  for (std::size_t j = 0;; ++j) {
    const double t = t0 + static_cast<double>(j) * dt;
    if (t >= t_final - tol) break;
    grid.push_back(t);
  }
  grid.push_back(t_final);
  return grid;
}

struct SimulateProduct {
  Trajectory trajectory;
  std::vector<Vector> inputs_at_samples;  // empty for the saturating mode
  bool inputs_held = false;  // true when each input is constant over its sample interval
  std::string mode_label;
  long clamp_events = -1;  // >= 0 only for the saturating mode
  bool hurwitz_known = false;
  bool hurwitz = false;
  double abscissa = 0.0;
  Vector equilibrium_state;  // size 0 when not applicable
};

inline SimulateProduct run_simulate(const ScenarioConfig& config) {
  detail::require(config.model.has_value() && config.run.has_value(),
                  "simulate requires 'model' and 'run' blocks");
  const ModelSpec& model = *config.model;
  const RunSpec& run = *config.run;
  const Index n = model.size();
  if (run.alpha0.size() != n) cfg::fail("run.alpha0", "dimension must match the model");

  SimulateProduct out;
  out.mode_label = to_string(run.mode);

  auto input_signal = [&]() {
    InputSignal sig = run.u ? *run.u : InputSignal::zero(n);
    if (sig.dim() != n) cfg::fail("run.u", "dimension must match the model");
    return sig;
  };
  const double grid_tol = 1e-9 * std::max(1.0, std::abs(run.t_end()));
  auto on_grid = [&](double t) {
    const double k = std::round((t - run.t0) / run.sample_dt);
    return std::abs(run.t0 + k * run.sample_dt - t) <= grid_tol;
  };

  switch (run.mode) {
    case RunMode::Constant: {
      const Generator g = model.generator();
      const InputSignal sig = input_signal();
      // One segment per sample interval, further split at input breakpoints:
      // a schedule config spelled with the same segments is byte-identical.
      std::vector<double> cuts = sample_grid(run.t0, run.t_end(), run.sample_dt);
      out.inputs_held = true;
      for (double b : sig.breakpoints_in(run.t0, run.t_end())) {
        cuts.push_back(b);
        if (!on_grid(b)) out.inputs_held = false;
      }
      std::sort(cuts.begin(), cuts.end());
      std::vector<Schedule::Segment> segs;
      for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        if (cuts[k + 1] - cuts[k] <= grid_tol) continue;  // duplicate cut
        segs.push_back({cuts[k], cuts[k + 1], g, sig.value(cuts[k])});
      }
      const Schedule plan(std::move(segs));
      out.trajectory = solve_schedule(plan, run.alpha0, run.sample_dt);
      for (double t : out.trajectory.times) out.inputs_at_samples.push_back(sig.value(t));
      const HurwitzResult h = is_hurwitz(g);
      out.hurwitz_known = true;
      out.hurwitz = h.hurwitz;
      out.abscissa = h.abscissa;
      if (h.hurwitz && sig.values.size() == 1)
        out.equilibrium_state = equilibrium(g, sig.values.front());
      break;
    }

    case RunMode::Schedule: {
      std::vector<Schedule::Segment> segs;
      double t_cur = run.t0;
      out.inputs_held = true;
      for (std::size_t k = 0; k < run.segments.size(); ++k) {
        const SegmentSpec& s = run.segments[k];
        const std::string sp = "run.segments[" + std::to_string(k) + "]";
        InteractionMatrix w =
            s.lambda ? InteractionMatrix(*s.lambda) : model.interaction_matrix();
        if (w.size() != n) cfg::fail(sp + ".lambda", "dimension must match the model");
        DecayVector d = s.delta ? DecayVector(*s.delta) : model.decay_vector();
        if (d.size() != n) cfg::fail(sp + ".delta", "dimension must match the model");
        Vector u = s.u ? *s.u : Vector::Zero(n);
        if (u.size() != n) cfg::fail(sp + ".u", "dimension must match the model");
        if (!on_grid(t_cur)) out.inputs_held = false;
        segs.push_back({t_cur, t_cur + s.duration, assemble_generator(w, d), u});
        t_cur += s.duration;
      }
      const Schedule plan(std::move(segs));
      out.trajectory = solve_schedule(plan, run.alpha0, run.sample_dt);
      for (double t : out.trajectory.times) out.inputs_at_samples.push_back(plan.at(t).u);
      break;
    }

    case RunMode::TimeVarying: {
      const Matrix w = model.lambda;
      const Vector d = model.delta;
      const double a = run.mod_amplitude;
      const double period = run.mod_period;
      GeneratorPath path(
          [w, d, a, period](double t) -> Matrix {
            const double scale = 1.0 + a * std::sin(2.0 * M_PI * t / period);
            Matrix m = scale * w;
            m.diagonal() -= d;
            return m;
          },
          run.t0, run.t_end(), n, run.assume_commuting);
      const InputSignal sig = input_signal();
      const std::vector<double> grid = sample_grid(run.t0, run.t_end(), run.sample_dt);
      TVOptions opt;
      opt.target_step_load = run.target_step_load;
      opt.use_peano_baker = run.use_peano_baker;
      opt.pb_tol = run.pb_tol;
      opt.check_commuting = run.assume_commuting;
      out.trajectory = solve_time_varying(path, sig, run.alpha0, grid, opt);
      out.inputs_held = true;
      for (double b : sig.breakpoints_in(run.t0, run.t_end()))
        if (!on_grid(b)) out.inputs_held = false;
      for (double t : out.trajectory.times) out.inputs_at_samples.push_back(sig.value(t));
      break;
    }

    case RunMode::Saturating: {
      const InteractionMatrix w = model.interaction_matrix();
      const DecayVector d = model.decay_vector();
      const CrowdingMatrix c =
          model.crowding ? CrowdingMatrix(*model.crowding) : CrowdingMatrix::none(n);
      const double step = run.step > 0.0 ? run.step : 0.01 / d.rates.maxCoeff();
      const SaturatingRun res = integrate_saturating(w, d, c, run.alpha0, run.horizon, step);
      out.clamp_events = res.clamp_events;
      // Thin to roughly the requested sampling period, always keeping the
      // first and last points; times are shifted to start at t0.
      const double h = res.trajectory.times.size() > 1
                           ? res.trajectory.times[1] - res.trajectory.times[0]
                           : run.sample_dt;
      const std::size_t stride =
          std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(run.sample_dt / h)));
      Trajectory thin;
      thin.mode = res.trajectory.mode;
      for (std::size_t k = 0; k < res.trajectory.times.size(); k += stride) {
        thin.times.push_back(run.t0 + res.trajectory.times[k]);
        thin.states.push_back(res.trajectory.states[k]);
      }
      if (thin.times.back() != run.t0 + res.trajectory.times.back()) {
        thin.times.push_back(run.t0 + res.trajectory.times.back());
        thin.states.push_back(res.trajectory.states.back());
      }
      thin.validate();
      out.trajectory = std::move(thin);
      break;
    }
  }
  return out;
}

struct AnalyzeProduct {
  Trajectory coupled;
  Trajectory baseline;
  AmplificationReport amp;
  double cumulative = 0.0;
  bool has_sensitivity = false;
  SensitivityReport sensitivity;
  std::vector<EdgeRoi> roi;
  std::optional<PerceptionParams> perception;
  double saturation = 0.0;
  std::vector<std::pair<int, double>> frequency_table;  // (steps, amplification)
  double frequency_beta = 0.0;
  double frequency_group = 0.0;
};

// The decoupled reference is the same run with the interaction matrix set
// to zero, solved by the same code path (so a zero-interaction scenario
// amplifies by exactly 1).
inline AnalyzeProduct run_analyze(const ScenarioConfig& config) {
  detail::require(config.model.has_value() && config.run.has_value() &&
                      config.analysis.has_value(),
                  "analyze requires 'model', 'run', and 'analysis' blocks");
  const RunSpec& run = *config.run;
  if (run.mode == RunMode::Saturating)
    cfg::fail("run.mode",
              "analyze compares against the decoupled linear baseline; use a linear mode");
  for (const SegmentSpec& s : run.segments)
    if (s.lambda)
      cfg::fail("run.segments",
                "analyze requires model-level interactions (no per-segment lambda "
                "overrides) so the decoupled baseline is well defined");

  const AnalysisSpec& spec = *config.analysis;
  const Index n = config.model->size();
  if (spec.weights.size() != n) cfg::fail("analysis.weights", "dimension must match the model");

  AnalyzeProduct out;
  out.coupled = run_simulate(config).trajectory;
  ScenarioConfig decoupled = config;
  decoupled.model->lambda.setZero();
  out.baseline = run_simulate(decoupled).trajectory;

  out.amp = amplification(out.coupled, out.baseline, spec.floor);
  out.cumulative = cumulative_amplification(spec.weights, out.coupled, out.baseline);

  if (spec.d_lambda || spec.d_delta || spec.roi_costs) {
    if (run.mode != RunMode::Constant)
      cfg::fail("analysis", "perturbation/ROI analysis needs a constant-mode run");
    Matrix d_lambda = spec.d_lambda ? *spec.d_lambda : Matrix::Zero(n, n);
    Vector d_delta = spec.d_delta ? *spec.d_delta : Vector::Zero(n);
    if (d_lambda.rows() != n || d_lambda.cols() != n)
      cfg::fail("analysis.perturbation.d_lambda", "dimension must match the model");
    if (d_delta.size() != n)
      cfg::fail("analysis.perturbation.d_delta", "dimension must match the model");
    const InputSignal sig = run.u ? *run.u : InputSignal::zero(n);
    out.sensitivity = sensitivity_delta_J(config.model->generator(), sig, run.alpha0,
                                          spec.weights, d_lambda, d_delta, out.coupled.times);
    out.has_sensitivity = true;
    if (spec.roi_costs) out.roi = edge_roi(out.sensitivity, *spec.roi_costs);
  }

  if (spec.perception) {
    out.perception = spec.perception;
    out.saturation = saturation_point(spec.perception->beta);
  }
  if (spec.frequency) {
    out.frequency_beta = spec.frequency->beta_addon;
    out.frequency_group = spec.frequency->group_size;
    for (int s : spec.frequency->steps)
      out.frequency_table.emplace_back(
          s, frequency_amplification(spec.frequency->beta_addon, spec.frequency->group_size, s));
  }
  return out;
}

struct ThresholdProduct {
  std::vector<SweepPoint> sweep;
  ThresholdBracket bracket;
  double rho = 0.0;       // spectral radius of the adjacency
  double critical = 0.0;  // 1 / rho
  std::vector<double> inconclusive;
  bool all_inconclusive = false;
};

inline ThresholdProduct run_threshold(const ScenarioConfig& config) {
  detail::require(config.sweep.has_value(), "threshold requires a 'sweep' block");
  const SweepSpec& spec = *config.sweep;
  if (spec.initial.size() != spec.adjacency.rows())
    cfg::fail("sweep.initial", "dimension must match the adjacency");

  ThresholdProduct out;
  out.rho = spectral_radius(spec.adjacency).radius;
  out.critical = critical_tau(spec.adjacency);
  out.sweep =
      sweep_tau(spec.adjacency, spec.tau_grid, spec.initial, spec.horizon, spec.extinction_tol);
  out.bracket = transition_bracket(out.sweep);
  for (const SweepPoint& pt : out.sweep)
    if (pt.status == Persistence::Inconclusive) out.inconclusive.push_back(pt.tau);
  out.all_inconclusive = out.inconclusive.size() == out.sweep.size();
  return out;
}

struct EstimateProduct {
  FitResult fit;
  std::string method;
  std::string source;
  double dt = 0.0;
  Index n = 0;
  std::size_t snapshots = 0;
  bool hurwitz = false;
  double abscissa = 0.0;
};

inline EstimateProduct run_estimate(const ScenarioConfig& config) {
  detail::require(config.estimation.has_value(), "estimate requires an 'estimation' block");
  const EstimationSpec& spec = *config.estimation;
  const SnapshotSet data = csv::read_snapshots_file(spec.snapshots);

  EstimateProduct out;
  out.method = spec.method;
  out.source = spec.snapshots;
  out.dt = data.dt;
  out.n = data.dim();
  out.snapshots = data.states.size();
  out.fit = spec.method == "sparse"
                ? fit_sparse(data, spec.l1_weight, spec.max_iterations, spec.rank_tol)
                : fit_generator(data, spec.rank_tol);
  const HurwitzResult h = is_hurwitz(Generator(out.fit.m_hat));
  out.hurwitz = h.hurwitz;
  out.abscissa = h.abscissa;
  return out;
}

}  // namespace ecodyn::scenario
