// perch: plan, certify and simulate perching trajectories from scenario files.
//
//   perch plan SCENARIO [-o DIR] [--set key=value]...
//   perch simulate SCENARIO [-o DIR] [--set key=value]...
//   perch campaign [SCENARIO...] [-o DIR] [--set key=value]...
//   perch check DIR
//
// Values resolve as built-in defaults < scenario file < --set/--seed flags.
// Exit codes: 0 success, 1 invalid input, 2 QP infeasible, 3 thrust
// certificate or constraint check failed, 4 simulated impact conditions
// missed.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "perch/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

struct Common {
  std::vector<std::string> overrides;
  long long seed = -1;
  bool verbose = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--set", c.overrides, "Override a scenario field, e.g. --set planner.tau_max=4.0")
      ->take_all()
      ->allow_extra_args(false);
  cmd->add_option("--seed", c.seed, "Seed for the simulator's sensor noise");
  cmd->add_flag("-v,--verbose", c.verbose, "Print the time-scaling iteration log");
}

std::vector<std::string> all_overrides(const Common& c) {
  std::vector<std::string> out = c.overrides;
  if (c.seed >= 0) out.push_back("seed=" + std::to_string(c.seed));
  return out;
}

void print_iterations(const std::vector<perch::IterationRecord>& log) {
  std::printf("  %4s %10s %12s %s\n", "iter", "horizon_s", "peak_tau_N", "certified");
  for (const auto& r : log)
    std::printf("  %4d %10.4f %12.5f %s\n", r.index, r.horizon, r.peak_thrust, r.certified ? "yes" : "no");
}

void print_outcome(const std::string& name, const perch::PipelineOutcome& o, bool verbose) {
  if (verbose) print_iterations(o.iterations);
  std::printf("%s: plan time %.2f ms, %zu iteration(s)", name.c_str(), o.plan_ms, o.iterations.size());
  if (o.plan) std::printf(", t_f = %.4f s", o.plan->traj().tf());
  if (o.metrics) {
    const auto& m = *o.metrics;
    std::printf(", rmse = (%.4g, %.4g, %.4g) m, peak rate %.0f deg/s", m.rmse.x(), m.rmse.y(), m.rmse.z(),
                m.peak_rate * 180.0 / M_PI);
  }
  std::printf("\n");
  if (o.exit_code != perch::kExitOk) std::fprintf(stderr, "%s: %s (exit %d)\n", name.c_str(), o.message.c_str(), o.exit_code);
}

int run_single(const std::string& path, const fs::path& out_dir, const Common& c, bool simulate) {
  const perch::Scenario s = perch::load_scenario(path, all_overrides(c));
  const auto outcome = perch::run_pipeline(s, {out_dir, simulate});
  print_outcome(s.name, outcome, c.verbose);
  return outcome.exit_code;
}

// The four-scenario grid {60, 90} deg x {1.7, 3} m.
std::vector<perch::Scenario> default_grid(const std::vector<std::string>& overrides) {
  std::vector<perch::Scenario> out;
  for (double inclination : {60.0, 90.0}) {
    for (double distance : {1.7, 3.0}) {
      char name[64];
      std::snprintf(name, sizeof name, "incl%02.0f_dist%.1f", inclination, distance);
      nlohmann::json doc{{"name", name},
                         {"inclination", inclination},
                         {"distance", distance},
                         {"planner", {{"tau_min", 0.2}}}};
      for (const auto& o : overrides) perch::apply_override(doc, o);
      out.push_back(perch::parse_scenario(doc));
    }
  }
  return out;
}

int run_campaign(const std::vector<std::string>& paths, const fs::path& out_dir, const Common& c) {
  std::vector<perch::Scenario> scenarios;
  if (paths.empty()) {
    scenarios = default_grid(all_overrides(c));
  } else {
    for (const auto& p : paths) scenarios.push_back(perch::load_scenario(p, all_overrides(c)));
  }
  std::vector<std::future<perch::PipelineOutcome>> jobs;
  for (const auto& s : scenarios) {
    const fs::path dir = out_dir / s.name;
    jobs.push_back(std::async(std::launch::async, [s, dir] { return perch::run_pipeline(s, {dir, true}); }));
  }
  fs::create_directories(out_dir);
  std::ofstream table(out_dir / "campaign.csv");
  table << "name,inclination_deg,distance_m,exit,tf_s,iterations,peak_thrust_N,rmse_x,rmse_y,rmse_z,peak_rate_deg_s,"
           "plan_ms\n";
  std::printf("%-18s %6s %6s %4s %8s %5s %9s %28s %10s %9s\n", "scenario", "incl", "dist", "exit", "tf_s", "iters",
              "peak_tau", "rmse_xyz_m", "rate_deg_s", "plan_ms");
  int worst = perch::kExitOk;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const perch::PipelineOutcome o = jobs[i].get();
    const perch::Scenario& s = scenarios[i];
    const double tf = o.plan ? o.plan->traj().tf() : NAN;
    const double peak = o.iterations.empty() ? NAN : o.iterations.back().peak_thrust;
    const Eigen::Vector3d rmse = o.metrics ? o.metrics->rmse : Eigen::Vector3d::Constant(NAN);
    const double rate = o.metrics ? o.metrics->peak_rate * 180.0 / M_PI : NAN;
    char rmse_text[64];
    std::snprintf(rmse_text, sizeof rmse_text, "%.2e %.2e %.2e", rmse.x(), rmse.y(), rmse.z());
    std::printf("%-18s %6.1f %6.2f %4d %8.4f %5zu %9.4f %28s %10.1f %9.2f\n", s.name.c_str(), s.inclination,
                s.distance, o.exit_code, tf, o.iterations.size(), peak, rmse_text, rate, o.plan_ms);
    if (o.exit_code != perch::kExitOk) std::fprintf(stderr, "%s: %s\n", s.name.c_str(), o.message.c_str());
    table << s.name << ',' << s.inclination << ',' << s.distance << ',' << o.exit_code << ','
          << perch::format_double(tf) << ',' << o.iterations.size() << ',' << perch::format_double(peak) << ','
          << perch::format_double(rmse.x()) << ',' << perch::format_double(rmse.y()) << ','
          << perch::format_double(rmse.z()) << ',' << perch::format_double(rate) << ','
          << perch::format_double(o.plan_ms) << '\n';
    worst = std::max(worst, o.exit_code);
  }
  return worst;
}

int run_check(const fs::path& dir) {
  const perch::CheckOutcome o = perch::check_artifacts(dir);
  if (o.report) {
    const auto& r = *o.report;
    std::printf("terminal accel error %.3g m/s^2, impact velocity %.6f m/s (slack %.3g), corridor slack %.3g over %d "
                "samples, dense peak thrust %.5f N, certified %s\n",
                r.terminal_acceleration_error, r.impact_velocity, r.impact_velocity_slack, r.corridor_min_slack,
                r.corridor_samples, r.dense_peak_thrust, r.thrust_certified ? "yes" : "no");
  }
  if (o.exit_code == perch::kExitOk) std::printf("%s: ok\n", dir.string().c_str());
  else std::fprintf(stderr, "%s: %s\n", dir.string().c_str(), o.message.c_str());
  return o.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Perching trajectory planner, thrust certifier and simulator"};
  app.require_subcommand(1);

  Common common;
  std::string scenario_path;
  std::vector<std::string> campaign_paths;
  std::string out_dir = "out";
  std::string check_dir;

  auto* plan_cmd = app.add_subcommand("plan", "Plan and certify a trajectory, write plan artifacts");
  plan_cmd->add_option("scenario", scenario_path, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  plan_cmd->add_option("-o,--out", out_dir, "Output directory");
  add_common(plan_cmd, common);

  auto* sim_cmd = app.add_subcommand("simulate", "Plan, certify and simulate; write all artifacts");
  sim_cmd->add_option("scenario", scenario_path, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  sim_cmd->add_option("-o,--out", out_dir, "Output directory");
  add_common(sim_cmd, common);

  auto* campaign_cmd = app.add_subcommand("campaign", "Run several scenarios concurrently (default: the 4-scenario grid)");
  campaign_cmd->add_option("scenarios", campaign_paths, "Scenario JSON files")->check(CLI::ExistingFile);
  campaign_cmd->add_option("-o,--out", out_dir, "Output directory");
  add_common(campaign_cmd, common);

  auto* check_cmd = app.add_subcommand("check", "Re-validate the artifacts in a plan directory");
  check_cmd->add_option("dir", check_dir, "Directory holding plan.json and trajectory.csv")
      ->required()
      ->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : perch::kExitInvalidInput;
  }

  try {
    if (*plan_cmd) return run_single(scenario_path, out_dir, common, false);
    if (*sim_cmd) return run_single(scenario_path, out_dir, common, true);
    if (*campaign_cmd) return run_campaign(campaign_paths, out_dir, common);
    if (*check_cmd) return run_check(check_dir);
  } catch (const perch::ScenarioError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return perch::kExitInvalidInput;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return perch::kExitInvalidInput;
  }
  return perch::kExitInvalidInput;
}
