#ifndef PERCH_PIPELINE_HPP
#define PERCH_PIPELINE_HPP

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "perch/perch_planner.hpp"
#include "perch/scenario.hpp"
#include "perch/sim.hpp"
#include "perch/trajectory.hpp"

namespace perch {

enum ExitCode : int {
  kExitOk = 0,
  kExitInvalidInput = 1,
  kExitPlanInfeasible = 2,
  kExitCertificateFailed = 3,
  kExitSimulationViolated = 4,
};

inline const char* to_string(GbcVerdict v) {
  switch (v) {
    case GbcVerdict::kCertified: return "certified";
    case GbcVerdict::kStartViolation: return "start_violation";
    case GbcVerdict::kEndViolation: return "end_violation";
    case GbcVerdict::kInteriorCrossing: return "interior_crossing";
    case GbcVerdict::kDegenerate: return "degenerate";
  }
  return "unknown";
}

namespace pipeline_detail {

using nlohmann::json;

inline json vec(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

// Infinite bounds are written as null.
inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace pipeline_detail

inline nlohmann::json config_to_json(const PlannerConfig& c) {
  using pipeline_detail::finite_or_null;
  nlohmann::json j{{"alpha", c.alpha},
                   {"q", c.q},
                   {"dt", c.dt},
                   {"t_k", c.t_k},
                   {"v_min", c.v_min},
                   {"v_max", c.v_max},
                   {"tau_min", c.tau_min},
                   {"tau_max", finite_or_null(c.tau_max)},
                   {"poly_order", c.poly_order},
                   {"cost_order", c.cost_order},
                   {"time_scale_factor", c.time_scale_factor},
                   {"max_scale_iters", c.max_scale_iters}};
  if (c.psi_des) j["psi_des"] = *c.psi_des;
  return j;
}

inline nlohmann::json trajectory_to_json(const PiecewiseTrajectory& traj) {
  static const char* names[kFlatDims] = {"x", "y", "z", "psi"};
  nlohmann::json segs = nlohmann::json::object();
  for (int d = 0; d < kFlatDims; ++d) {
    nlohmann::json list = nlohmann::json::array();
    for (std::size_t i = 0; i < traj.num_segments(); ++i) {
      const auto c = traj.segment(d, i).coeffs();
      list.push_back(std::vector<double>(c.begin(), c.end()));
    }
    segs[names[d]] = list;
  }
  return {{"basis", "normalized"}, {"knots", traj.knots()}, {"segments", segs}};
}

inline PiecewiseTrajectory trajectory_from_json(const nlohmann::json& j) {
  static const char* names[kFlatDims] = {"x", "y", "z", "psi"};
  std::array<std::vector<Polynomial>, kFlatDims> segments;
  for (int d = 0; d < kFlatDims; ++d)
    for (const auto& c : j.at("segments").at(names[d])) segments[static_cast<std::size_t>(d)].emplace_back(c.get<std::vector<double>>());
  return PiecewiseTrajectory(j.at("knots").get<std::vector<double>>(), std::move(segments));
}

inline nlohmann::json target_to_json(const TargetPose& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) rows.push_back({t.rotation(r, 0), t.rotation(r, 1), t.rotation(r, 2)});
  return {{"position", pipeline_detail::vec(t.position)}, {"rotation", rows}};
}

inline TargetPose target_from_json(const nlohmann::json& j) {
  TargetPose t;
  const auto p = j.at("position").get<std::vector<double>>();
  if (p.size() != 3) throw ScenarioError("target.position: expected 3 numbers");
  t.position = Eigen::Vector3d(p[0], p[1], p[2]);
  for (int r = 0; r < 3; ++r) {
    const auto row = j.at("rotation").at(static_cast<std::size_t>(r)).get<std::vector<double>>();
    if (row.size() != 3) throw ScenarioError("target.rotation: expected 3x3");
    for (int c = 0; c < 3; ++c) t.rotation(r, c) = row[static_cast<std::size_t>(c)];
  }
  return t;
}

inline nlohmann::json certificate_to_json(const std::vector<SegmentCertificate>& certs) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& c : certs)
    out.push_back({{"upper", to_string(c.upper.verdict)}, {"lower", to_string(c.lower.verdict)},
                   {"upper_crossings", c.upper.crossings}, {"lower_crossings", c.lower.crossings}});
  return out;
}

inline nlohmann::json iterations_to_json(const std::vector<IterationRecord>& log) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : log)
    out.push_back({{"iteration", r.index},
                   {"horizon", r.horizon},
                   {"peak_thrust", r.peak_thrust},
                   {"peak_squared_thrust", r.peak_squared_thrust},
                   {"certified", r.certified},
                   {"qp_iterations", r.qp_iterations}});
  return out;
}

inline nlohmann::json plan_to_json(const PerchPlan& p) {
  return {{"trajectory", trajectory_to_json(p.traj())},
          {"target", target_to_json(p.target)},
          {"config", config_to_json(p.config)},
          {"mass", p.mass},
          {"psi_des", p.psi_des},
          {"iterations", iterations_to_json(p.iterations)},
          {"certificate", certificate_to_json(p.certificate)}};
}

struct StoredPlan {
  PiecewiseTrajectory trajectory;
  TargetPose target;
  PlannerConfig config;
  double mass;
};

inline StoredPlan plan_from_json(const nlohmann::json& j) {
  PlannerConfig cfg;
  scenario_detail::read_planner(j.at("config"), "config", cfg);
  return {trajectory_from_json(j.at("trajectory")), target_from_json(j.at("target")), cfg, j.at("mass").get<double>()};
}

inline void write_iterations_csv(std::ostream& out, const std::vector<IterationRecord>& log) {
  out << "iteration,horizon,peak_thrust,peak_squared_thrust,certified,qp_iterations\n";
  for (const auto& r : log)
    out << r.index << ',' << format_double(r.horizon) << ',' << format_double(r.peak_thrust) << ','
        << format_double(r.peak_squared_thrust) << ',' << (r.certified ? 1 : 0) << ',' << r.qp_iterations << '\n';
}

/**
 * Thrust profiles of every time-scaling iteration, one (time, thrust) column
 * pair per iteration in iteration order. Each profile is sampled at
 * `samples` points evenly spread over its own horizon.
 */
inline void emit_thrust_iterations(std::ostream& out, const std::vector<IterationRecord>& log, double mass,
                                   int samples = 101) {
  std::vector<const IterationRecord*> rows;
  for (const auto& r : log)
    if (r.trajectory) rows.push_back(&r);
  for (std::size_t k = 0; k < rows.size(); ++k)
    out << (k ? "," : "") << "t_" << rows[k]->index << ",tau_" << rows[k]->index;
  out << '\n';
  for (int i = 0; i < samples; ++i) {
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const PiecewiseTrajectory& traj = *rows[k]->trajectory;
      const double t = i + 1 == samples ? traj.tf() : traj.t0() + (traj.tf() - traj.t0()) * i / (samples - 1);
      out << (k ? "," : "") << format_double(t) << ','
          << format_double(nominal_thrust(traj.evaluate(t, 2).head<3>(), mass));
    }
    out << '\n';
  }
}

inline nlohmann::json report_to_json(const ConstraintReport& r, const PlannerConfig& cfg) {
  return {{"terminal_acceleration", pipeline_detail::vec(r.terminal_acceleration)},
          {"terminal_acceleration_error", r.terminal_acceleration_error},
          {"terminal_position_error", r.terminal_position_error},
          {"impact_velocity", r.impact_velocity},
          {"impact_velocity_slack", r.impact_velocity_slack},
          {"corridor_min_slack", r.corridor_min_slack},
          {"corridor_samples", r.corridor_samples},
          {"dense_peak_thrust", r.dense_peak_thrust},
          {"dense_min_thrust", r.dense_min_thrust},
          {"thrust_certified", r.thrust_certified},
          {"terminal_b3_angle", r.terminal_b3_angle},
          {"continuity_jump", r.continuity_jump},
          {"satisfied", r.satisfied(cfg)}};
}

inline nlohmann::json metrics_to_json(const TrackingMetrics& m) {
  return {{"rmse", pipeline_detail::vec(m.rmse)},
          {"peak_rate_deg_s", m.peak_rate * 180.0 / M_PI},
          {"peak_commanded_rate_deg_s", m.peak_commanded_rate * 180.0 / M_PI},
          {"peak_thrust", m.peak_thrust},
          {"terminal_position_error", m.terminal_position_error},
          {"terminal_velocity_error", m.terminal_velocity_error},
          {"terminal_impact_velocity", m.terminal_impact_velocity},
          {"terminal_attitude_error_deg", m.terminal_attitude_error * 180.0 / M_PI},
          {"max_orthonormality_error", m.max_orthonormality_error},
          {"terminal_ok", m.terminal_ok},
          {"steps", m.steps}};
}

struct PipelineOptions {
  std::filesystem::path out_dir = "out";
  bool simulate = true;
};

struct PipelineOutcome {
  int exit_code = kExitOk;
  std::string message;
  double plan_ms = 0.0;
  std::optional<PerchPlan> plan;
  std::optional<ConstraintReport> report;
  std::optional<TrackingMetrics> metrics;
  std::vector<IterationRecord> iterations;
};

namespace pipeline_detail {

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

template <typename Fn>
void write_with(const std::filesystem::path& path, Fn&& fn) {
  std::ostringstream ss;
  fn(ss);
  write_file(path, ss.str());
}

}  // namespace pipeline_detail

/// Simulates a planned trajectory and writes trace.csv and metrics.json.
inline TrackingResult simulate_plan(const PiecewiseTrajectory& traj, const TargetPose& target,
                                    const PlannerConfig& cfg, const Scenario& s) {
  TrackingOptions opts;
  opts.h = s.sim_step;
  if (s.noise.any()) opts.noise = s.noise;
  VehicleParams vp = s.vehicle;
  return run_tracking(traj, s.resolved_gains(), vp, opts, &target, &cfg);
}

/**
 * Plan, certify, optionally simulate, and write every artifact into
 * `opts.out_dir`. The exit code distinguishes an infeasible QP (2), a
 * thrust certificate that never passed (3), and a simulation whose
 * terminal state misses the impact conditions (4).
 */
inline PipelineOutcome run_pipeline(const Scenario& s, const PipelineOptions& opts) {
  using namespace pipeline_detail;
  namespace fs = std::filesystem;
  fs::create_directories(opts.out_dir);
  PipelineOutcome out;
  const TargetPose target = resolve_target(s);
  StartState start;
  start.position = s.start;
  start.yaw = s.start_yaw;

  const auto t0 = std::chrono::steady_clock::now();
  try {
    out.plan = plan(start, target, s.planner, s.vehicle.mass, s.horizon, s.waypoints);
  } catch (const PlanError& e) {
    out.plan_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    out.iterations = e.iterations();
    out.exit_code = e.kind() == PlanFailure::kInfeasible ? kExitPlanInfeasible : kExitCertificateFailed;
    out.message = e.what();
    write_with(opts.out_dir / "iterations.csv", [&](std::ostream& o) { write_iterations_csv(o, out.iterations); });
    write_with(opts.out_dir / "thrust_iterations.csv",
               [&](std::ostream& o) { emit_thrust_iterations(o, out.iterations, s.vehicle.mass); });
    if (e.best_attempt()) {
      write_with(opts.out_dir / "best_attempt.csv",
                 [&](std::ostream& o) { write_trajectory_csv(o, *e.best_attempt(), s.planner.dt); });
    }
    return out;
  }
  out.plan_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  const PerchPlan& p = *out.plan;
  out.iterations = p.iterations;
  out.report = check_constraints(p.traj(), target, s.planner, s.vehicle.mass);

  write_with(opts.out_dir / "trajectory.csv", [&](std::ostream& o) { write_trajectory_csv(o, p.traj(), s.planner.dt); });
  write_file(opts.out_dir / "plan.json", plan_to_json(p).dump(2) + "\n");
  write_with(opts.out_dir / "iterations.csv", [&](std::ostream& o) { write_iterations_csv(o, p.iterations); });
  write_with(opts.out_dir / "thrust_iterations.csv",
             [&](std::ostream& o) { emit_thrust_iterations(o, p.iterations, s.vehicle.mass); });
  write_file(opts.out_dir / "slacks.json", report_to_json(*out.report, s.planner).dump(2) + "\n");
  if (!out.report->satisfied(s.planner)) {
    out.exit_code = kExitCertificateFailed;
    out.message = "plan failed the post-hoc constraint check";
    return out;
  }
  if (!opts.simulate) return out;

  try {
    const TrackingResult sim = simulate_plan(p.traj(), target, s.planner, s);
    out.metrics = sim.metrics;
    write_with(opts.out_dir / "trace.csv", [&](std::ostream& o) { write_trace_csv(o, sim.trace); });
    write_file(opts.out_dir / "metrics.json", metrics_to_json(sim.metrics).dump(2) + "\n");
    if (!sim.metrics.terminal_ok) {
      out.exit_code = kExitSimulationViolated;
      out.message = "simulated terminal state misses the impact conditions";
    }
  } catch (const SimulationError& e) {
    out.exit_code = kExitSimulationViolated;
    out.message = e.what();
  }
  return out;
}

struct CheckOutcome {
  int exit_code = kExitOk;
  std::string message;
  std::optional<ConstraintReport> report;
};

/**
 * Re-validates a plan directory offline: rebuilds the trajectory from
 * plan.json, checks that trajectory.csv reproduces it bit for bit on the
 * planner grid, and re-runs every constraint check and the thrust
 * certificate.
 */
inline CheckOutcome check_artifacts(const std::filesystem::path& dir) {
  CheckOutcome out;
  StoredPlan stored = plan_from_json(read_json_file((dir / "plan.json").string()));
  std::ifstream csv(dir / "trajectory.csv");
  if (!csv) throw ScenarioError((dir / "trajectory.csv").string() + ": cannot open");
  const std::vector<FlatSample> rows = read_trajectory_csv(csv);
  const std::vector<double> grid =
      PiecewiseTrajectory::uniform_times(stored.trajectory.t0(), stored.trajectory.tf(), stored.config.dt);
  if (rows.size() != grid.size()) {
    out.exit_code = kExitCertificateFailed;
    out.message = "trajectory.csv has " + std::to_string(rows.size()) + " rows, expected " + std::to_string(grid.size());
    return out;
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const FlatSample expect = stored.trajectory.sample(grid[i]);
    bool same = rows[i].time == expect.time;
    for (int k = 0; k <= kMaxDerivative && same; ++k) same = rows[i].d[static_cast<std::size_t>(k)] == expect.d[static_cast<std::size_t>(k)];
    if (!same) {
      out.exit_code = kExitCertificateFailed;
      out.message = "trajectory.csv row " + std::to_string(i + 1) + " does not match plan.json";
      return out;
    }
  }
  out.report = check_constraints(stored.trajectory, stored.target, stored.config, stored.mass);
  if (!out.report->satisfied(stored.config)) {
    out.exit_code = kExitCertificateFailed;
    out.message = "constraint check failed";
  }
  return out;
}

}  // namespace perch

#endif  // PERCH_PIPELINE_HPP
