// ecodyn command-line front end.
//
//   ecodyn simulate  --config scenario.json [--out dir] [--format csv|json]
//   ecodyn analyze   --config scenario.json [--out dir]
//   ecodyn threshold --config scenario.json [--out dir] [--format csv|json]
//   ecodyn estimate  --config scenario.json [--out dir]
//
// Exit codes: 0 success; 2 configuration/validation error; 3 numerical or
// identification failure; 4 threshold sweep where every grid point came back
// inconclusive.  Outputs are deterministic: the same config and inputs
// produce byte-identical files.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ecodyn/csv.hpp"
#include "ecodyn/scenario.hpp"

namespace {

using Json = nlohmann::json;
using ecodyn::Index;
using ecodyn::Matrix;
using ecodyn::Vector;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitInconclusive = 4;

Json to_json(const Vector& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Json to_json(const Matrix& m) {
  Json out = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(row);
  }
  return out;
}

Json trajectory_json(const ecodyn::Trajectory& traj) {
  Json out;
  out["mode"] = ecodyn::to_string(traj.mode);
  out["times"] = traj.times;
  Json states = Json::array();
  for (const Vector& s : traj.states) states.push_back(to_json(s));
  out["states"] = states;
  return out;
}

void write_json(const std::filesystem::path& path, const Json& j) {
  ecodyn::csv::write_file(path.string(), [&](std::ostream& os) { os << j.dump(2) << "\n"; });
}

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::string format = "csv";
  int seed = 0;  // reserved for randomized studies; accepted for interface stability
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "scenario JSON file")->required();
  cmd->add_option("--out", args.out_dir, "output directory (created if missing)");
  cmd->add_option("--format", args.format, "table format: csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--seed", args.seed, "seed reserved for randomized studies");
}

std::filesystem::path prepare_out(const CommonArgs& args) {
  const std::filesystem::path dir(args.out_dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Snapshot emission: only meaningful when the samples are uniformly spaced
// rows of the linear dynamics with the per-step input recorded.  A trailing
// partial step (horizon not a multiple of sample_dt) is dropped.
bool try_emit_snapshots(const std::filesystem::path& path,
                        const ecodyn::scenario::SimulateProduct& product) {
  if (product.inputs_at_samples.empty()) return false;  // saturating run
  if (!product.inputs_held) return false;  // input switches off the sample grid
  const auto& times = product.trajectory.times;
  const auto& states = product.trajectory.states;
  if (times.size() < 2) return false;
  if (times.front() != 0.0) return false;  // snapshot files index time as dt * k
  const double dt = times[1] - times[0];
  if (dt <= 0.0) return false;
  std::size_t rows = times.size();
  if (std::abs(times.back() - times.front() - dt * static_cast<double>(rows - 1)) >
      1e-9 * std::max(1.0, std::abs(times.back())))
    --rows;  // drop the exact-horizon sample off the uniform grid
  for (std::size_t k = 0; k + 1 < rows; ++k)
    if (std::abs(times[k + 1] - times[k] - dt) > 1e-9 * std::max(1.0, std::abs(dt)))
      return false;
  const Index n = product.trajectory.dim();
  if (rows < static_cast<std::size_t>(n) + 1) return false;

  std::vector<Vector> alpha, u;
  for (std::size_t k = 0; k < rows; ++k) {
    alpha.push_back(states[k].cwiseMax(0.0));  // shave positivity dust
    u.push_back(product.inputs_at_samples[k]);
  }
  const ecodyn::SnapshotSet data(dt, std::move(alpha), std::move(u));
  ecodyn::csv::write_file(path.string(),
                          [&](std::ostream& os) { ecodyn::csv::write_snapshots(os, data); });
  return true;
}

int cmd_simulate(const CommonArgs& args) {
  const auto config = ecodyn::scenario::ScenarioConfig::load(args.config_path);
  const auto product = ecodyn::scenario::run_simulate(config);
  const auto dir = prepare_out(args);

  std::string traj_name;
  if (args.format == "json") {
    traj_name = "trajectory.json";
    write_json(dir / traj_name, trajectory_json(product.trajectory));
  } else {
    traj_name = "trajectory.csv";
    ecodyn::csv::write_file((dir / traj_name).string(), [&](std::ostream& os) {
      ecodyn::csv::write_trajectory(os, product.trajectory);
    });
  }

  const bool have_snapshots = try_emit_snapshots(dir / "snapshots.csv", product);

  double min_entry = product.trajectory.states.front().minCoeff();
  double max_entry = product.trajectory.states.front().maxCoeff();
  for (const Vector& s : product.trajectory.states) {
    min_entry = std::min(min_entry, s.minCoeff());
    max_entry = std::max(max_entry, s.maxCoeff());
  }

  Json summary;
  summary["command"] = "simulate";
  summary["name"] = config.name;
  summary["mode"] = product.mode_label;
  summary["n"] = product.trajectory.dim();
  summary["samples"] = product.trajectory.times.size();
  summary["final_time"] = product.trajectory.times.back();
  summary["final_state"] = to_json(product.trajectory.states.back());
  summary["min_entry"] = min_entry;
  summary["max_entry"] = max_entry;
  summary["positivity_ok"] = min_entry >= -1e-12;
  summary["hurwitz"] = product.hurwitz_known ? Json(product.hurwitz) : Json(nullptr);
  summary["spectral_abscissa"] = product.hurwitz_known ? Json(product.abscissa) : Json(nullptr);
  summary["equilibrium"] = product.equilibrium_state.size() > 0
                               ? to_json(product.equilibrium_state)
                               : Json(nullptr);
  summary["clamp_events"] = product.clamp_events >= 0 ? Json(product.clamp_events) : Json(nullptr);
  summary["trajectory"] = traj_name;
  summary["snapshots"] = have_snapshots ? Json("snapshots.csv") : Json(nullptr);
  write_json(dir / "summary.json", summary);
  std::cout << "simulate: " << product.trajectory.times.size() << " samples -> "
            << (dir / traj_name).string() << "\n";
  return kExitOk;
}

int cmd_analyze(const CommonArgs& args) {
  const auto config = ecodyn::scenario::ScenarioConfig::load(args.config_path);
  const auto product = ecodyn::scenario::run_analyze(config);
  const auto dir = prepare_out(args);

  // Ratio table: one column per product, "nan" where the baseline is below
  // the floor and the ratio is undefined.
  ecodyn::csv::write_file((dir / "amplification.csv").string(), [&](std::ostream& os) {
    const Index n = product.amp.values.cols();
    os << "t";
    for (Index i = 0; i < n; ++i) os << ",amplification_" << (i + 1);
    os << "\n";
    for (std::size_t k = 0; k < product.amp.times.size(); ++k) {
      os << ecodyn::csv::format_double(product.amp.times[k]);
      for (Index i = 0; i < n; ++i)
        os << "," << ecodyn::csv::format_double(product.amp.values(static_cast<Index>(k), i));
      os << "\n";
    }
  });

  Json out;
  out["command"] = "analyze";
  out["name"] = config.name;

  std::size_t defined = 0;
  double min_def = std::numeric_limits<double>::infinity();
  double max_def = -std::numeric_limits<double>::infinity();
  for (Index k = 0; k < product.amp.values.rows(); ++k)
    for (Index i = 0; i < product.amp.values.cols(); ++i)
      if (product.amp.defined(k, i)) {
        ++defined;
        min_def = std::min(min_def, product.amp.values(k, i));
        max_def = std::max(max_def, product.amp.values(k, i));
      }
  Json amp;
  amp["floor"] = product.amp.floor;
  amp["samples"] = product.amp.times.size();
  amp["defined_entries"] = defined;
  amp["violations"] = product.amp.violations.size();
  amp["min_defined"] = defined ? Json(min_def) : Json(nullptr);
  amp["max_defined"] = defined ? Json(max_def) : Json(nullptr);
  Json final_row = Json::array();
  const Index last = product.amp.values.rows() - 1;
  for (Index i = 0; i < product.amp.values.cols(); ++i)
    final_row.push_back(product.amp.defined(last, i) ? Json(product.amp.values(last, i))
                                                     : Json(nullptr));
  amp["final"] = final_row;
  out["amplification"] = amp;
  out["cumulative_amplification"] = product.cumulative;

  if (product.has_sensitivity) {
    Json s;
    s["delta_j"] = product.sensitivity.delta_j;
    s["j_base"] = product.sensitivity.j_base;
    s["quad_error"] = product.sensitivity.quad_error;
    s["edge_values"] = to_json(product.sensitivity.edge_values);
    s["node_values"] = to_json(product.sensitivity.node_values);
    out["sensitivity"] = s;
  }
  if (!product.roi.empty()) {
    Json rows = Json::array();
    for (const ecodyn::EdgeRoi& e : product.roi) {
      Json row;
      row["to"] = e.to + 1;  // 1-based, matching the CSV column names
      row["from"] = e.from + 1;
      row["edge_value"] = e.edge_value;
      row["cost"] = e.cost;
      row["roi"] = e.roi;
      rows.push_back(row);
    }
    out["roi_ranking"] = rows;
  }
  if (product.perception) {
    Json p;
    p["kappa"] = product.perception->kappa;
    p["beta"] = product.perception->beta;
    p["saturation_point"] = product.saturation;
    out["perception"] = p;
  }
  if (!product.frequency_table.empty()) {
    Json f;
    f["beta_addon"] = product.frequency_beta;
    f["group_size"] = product.frequency_group;
    Json rows = Json::array();
    for (const auto& [steps, value] : product.frequency_table) {
      Json row;
      row["steps"] = steps;
      row["amplification"] = value;
      rows.push_back(row);
    }
    f["table"] = rows;
    out["frequency"] = f;
  }
  write_json(dir / "analysis.json", out);
  std::cout << "analyze: cumulative amplification " << product.cumulative << " -> "
            << (dir / "analysis.json").string() << "\n";
  return kExitOk;
}

int cmd_threshold(const CommonArgs& args) {
  const auto config = ecodyn::scenario::ScenarioConfig::load(args.config_path);
  const auto product = ecodyn::scenario::run_threshold(config);
  const auto dir = prepare_out(args);

  if (args.format == "json") {
    Json rows = Json::array();
    for (const ecodyn::SweepPoint& p : product.sweep) {
      Json row;
      row["tau"] = p.tau;
      row["status"] = ecodyn::to_string(p.status);
      row["final_norm"] = p.final_norm;
      rows.push_back(row);
    }
    write_json(dir / "sweep.json", rows);
  } else {
    ecodyn::csv::write_file((dir / "sweep.csv").string(), [&](std::ostream& os) {
      ecodyn::csv::write_sweep(os, product.sweep);
    });
  }

  Json bracket;
  bracket["command"] = "threshold";
  bracket["name"] = config.name;
  bracket["spectral_radius"] = product.rho;
  bracket["critical_tau"] = product.critical;
  bracket["found"] = product.bracket.found;
  bracket["lo"] = product.bracket.found ? Json(product.bracket.lo) : Json(nullptr);
  bracket["hi"] = product.bracket.found ? Json(product.bracket.hi) : Json(nullptr);
  bracket["inconclusive"] = product.inconclusive;
  if (!product.bracket.found) bracket["message"] = "no transition observed";
  write_json(dir / "bracket.json", bracket);

  if (product.bracket.found)
    std::cout << "threshold: bracket [" << product.bracket.lo << ", " << product.bracket.hi
              << "] around critical tau " << product.critical << "\n";
  else
    std::cout << "threshold: no transition observed\n";
  if (product.all_inconclusive) {
    std::cerr << "threshold: every sweep point was inconclusive; extend the horizon\n";
    return kExitInconclusive;
  }
  return kExitOk;
}

int cmd_estimate(const CommonArgs& args) {
  const auto config = ecodyn::scenario::ScenarioConfig::load(args.config_path);
  const auto product = ecodyn::scenario::run_estimate(config);
  const auto dir = prepare_out(args);

  Json out;
  out["command"] = "estimate";
  out["name"] = config.name;
  out["method"] = product.method;
  out["source"] = product.source;
  out["n"] = product.n;
  out["dt"] = product.dt;
  out["snapshots"] = product.snapshots;
  out["m_hat"] = to_json(product.fit.m_hat);
  out["a_hat"] = to_json(product.fit.a_hat);
  out["b_hat"] = to_json(product.fit.b_hat);
  out["residual_rms"] = product.fit.residual_rms;
  out["metzler_violation"] = product.fit.metzler_violation;
  out["b_identifiable"] = product.fit.b_identifiable;
  out["iterations"] = product.fit.iterations;
  out["hurwitz"] = product.hurwitz;
  out["spectral_abscissa"] = product.abscissa;
  write_json(dir / "fit.json", out);
  std::cout << "estimate: residual rms " << product.fit.residual_rms << " -> "
            << (dir / "fit.json").string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ecodyn: positive influence dynamics on product networks"};
  app.require_subcommand(1);

  CommonArgs sim_args, ana_args, thr_args, est_args;
  CLI::App* sim = app.add_subcommand("simulate", "run a scenario and emit the trajectory");
  add_common(sim, sim_args);
  CLI::App* ana = app.add_subcommand("analyze", "amplification / sensitivity / ROI analyses");
  add_common(ana, ana_args);
  CLI::App* thr = app.add_subcommand("threshold", "adoption-threshold sweep on a graph");
  add_common(thr, thr_args);
  CLI::App* est = app.add_subcommand("estimate", "fit a generator from snapshot data");
  add_common(est, est_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(sim_args);
    if (ana->parsed()) return cmd_analyze(ana_args);
    if (thr->parsed()) return cmd_threshold(thr_args);
    if (est->parsed()) return cmd_estimate(est_args);
  } catch (const ecodyn::IdentifiabilityError& e) {
    std::cerr << "identifiability error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const ecodyn::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::domain_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}
