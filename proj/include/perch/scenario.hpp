#ifndef PERCH_SCENARIO_HPP
#define PERCH_SCENARIO_HPP

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "perch/perch_planner.hpp"
#include "perch/sim.hpp"

namespace perch {

class ScenarioError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct CornerPose {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
};

struct Scenario {
  std::string name = "scenario";
  Eigen::Vector3d start = Eigen::Vector3d(0.0, 0.0, 1.0);
  double start_yaw = 0.0;
  double distance = 1.7;      // m, along -e1 from the start
  double inclination = 90.0;  // degrees
  double horizon = 1.0;       // s, initial
  std::vector<Eigen::Vector3d> waypoints;
  std::optional<std::array<CornerPose, 4>> corners;
  std::optional<TargetPose> pose;
  double tag_size = 0.4;  // m, side of the synthetic corner square
  PlannerConfig planner;
  VehicleParams vehicle;
  std::optional<ControllerGains> gains;
  double sim_step = 1e-3;
  SensorNoise noise;
  unsigned long long seed = 0;

  ControllerGains resolved_gains() const { return gains ? *gains : default_gains(vehicle); }
};

/// Surface pose implied by distance and inclination alone.
inline TargetPose nominal_target(const Scenario& s) {
  return inclined_target(s.start - s.distance * Eigen::Vector3d::UnitX(), s.inclination * M_PI / 180.0);
}

/// Four corners of a square of side `size` centred on the target, lying in
/// the surface plane and sharing its orientation.
inline std::array<CornerPose, 4> synthetic_corners(const TargetPose& target, double size) {
  std::array<CornerPose, 4> out;
  const double h = 0.5 * size;
  const std::array<std::pair<double, double>, 4> signs{{{1, 1}, {-1, 1}, {-1, -1}, {1, -1}}};
  const Eigen::Quaterniond q(target.rotation);
  for (std::size_t i = 0; i < 4; ++i) {
    out[i].position = target.position + h * signs[i].first * target.s1() + h * signs[i].second * target.s2();
    out[i].orientation = q;
  }
  return out;
}

/// Target used for planning: from the corners when given or generated, or
/// the direct pose.
inline TargetPose resolve_target(const Scenario& s) {
  if (s.pose) return *s.pose;
  const std::array<CornerPose, 4> corners = s.corners ? *s.corners : synthetic_corners(nominal_target(s), s.tag_size);
  std::array<Eigen::Vector3d, 4> p;
  std::array<Eigen::Quaterniond, 4> q;
  for (std::size_t i = 0; i < 4; ++i) {
    p[i] = corners[i].position;
    q[i] = corners[i].orientation;
  }
  return average_target_pose(p, q);
}

namespace scenario_detail {

using nlohmann::json;

inline std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

[[noreturn]] inline void fail(const std::string& path, const std::string& what) {
  throw ScenarioError((path.empty() ? std::string("scenario") : path) + ": " + what);
}

inline void allow_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
  if (!obj.is_object()) fail(path, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!allowed.count(key)) fail(join(path, key), "unknown key");
  }
}

inline double number(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail(path, "must be finite");
  return d;
}

inline double positive(const json& v, const std::string& path) {
  const double d = number(v, path);
  if (!(d > 0)) fail(path, "must be positive");
  return d;
}

inline int integer(const json& v, const std::string& path) {
  if (!v.is_number_integer()) fail(path, "expected an integer");
  return v.get<int>();
}

inline Eigen::Vector3d vec3(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 3) fail(path, "expected an array of 3 numbers");
  return {number(v[0], path + "[0]"), number(v[1], path + "[1]"), number(v[2], path + "[2]")};
}

// [w, x, y, z], normalised; rejects far-from-unit input.
inline Eigen::Quaterniond quaternion(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 4) fail(path, "expected [w, x, y, z]");
  Eigen::Quaterniond q(number(v[0], path + "[0]"), number(v[1], path + "[1]"), number(v[2], path + "[2]"),
                       number(v[3], path + "[3]"));
  if (std::abs(q.norm() - 1.0) > 1e-6) fail(path, "quaternion must have unit norm");
  return q.normalized();
}

inline Eigen::Matrix3d diagonal_gain(const json& v, const std::string& path) {
  if (v.is_number()) return Eigen::Matrix3d::Identity() * positive(v, path);
  const Eigen::Vector3d d = vec3(v, path);
  if (!(d.minCoeff() > 0)) fail(path, "diagonal entries must be positive");
  return d.asDiagonal();
}

inline void read_planner(const json& j, const std::string& path, PlannerConfig& c) {
  allow_keys(j, path, {"alpha", "q", "dt", "t_k", "v_min", "v_max", "tau_min", "tau_max", "poly_order", "cost_order",
                       "time_scale_factor", "max_scale_iters", "psi_des"});
  auto p = [&](const char* k) { return join(path, k); };
  if (j.contains("alpha")) c.alpha = number(j["alpha"], p("alpha"));
  if (j.contains("q")) c.q = number(j["q"], p("q"));
  if (j.contains("dt")) c.dt = number(j["dt"], p("dt"));
  if (j.contains("t_k")) c.t_k = number(j["t_k"], p("t_k"));
  if (j.contains("v_min")) c.v_min = number(j["v_min"], p("v_min"));
  if (j.contains("v_max")) c.v_max = number(j["v_max"], p("v_max"));
  if (j.contains("tau_min")) c.tau_min = number(j["tau_min"], p("tau_min"));
  if (j.contains("tau_max")) {
    // null or the string "inf" disables the upper thrust bound
    const json& v = j["tau_max"];
    if (v.is_null() || (v.is_string() && v.get<std::string>() == "inf")) c.tau_max = INFINITY;
    else c.tau_max = number(v, p("tau_max"));
  }
  if (j.contains("poly_order")) c.poly_order = integer(j["poly_order"], p("poly_order"));
  if (j.contains("cost_order")) c.cost_order = integer(j["cost_order"], p("cost_order"));
  if (j.contains("time_scale_factor")) c.time_scale_factor = number(j["time_scale_factor"], p("time_scale_factor"));
  if (j.contains("max_scale_iters")) c.max_scale_iters = integer(j["max_scale_iters"], p("max_scale_iters"));
  if (j.contains("psi_des")) c.psi_des = number(j["psi_des"], p("psi_des"));
  try {
    c.validate();
  } catch (const PlannerError& e) {
    fail(path, e.what());
  }
}

}  // namespace scenario_detail

/// Parses and validates a scenario document. Unknown keys are rejected and
/// every error names the offending field.
inline Scenario parse_scenario(const nlohmann::json& j) {
  using namespace scenario_detail;
  allow_keys(j, "", {"name", "start", "start_yaw", "distance", "inclination", "horizon", "waypoints", "corners", "pose",
                     "tag_size", "planner", "vehicle", "gains", "sim", "seed"});
  Scenario s;
  if (j.contains("name")) {
    if (!j["name"].is_string()) fail("name", "expected a string");
    s.name = j["name"].get<std::string>();
  }
  if (j.contains("start")) s.start = vec3(j["start"], "start");
  if (j.contains("start_yaw")) s.start_yaw = number(j["start_yaw"], "start_yaw");
  if (j.contains("distance")) s.distance = positive(j["distance"], "distance");
  if (j.contains("inclination")) {
    s.inclination = number(j["inclination"], "inclination");
    if (s.inclination < 0.0 || s.inclination > 90.0) fail("inclination", "must lie in [0, 90] degrees");
  }
  if (j.contains("horizon")) s.horizon = positive(j["horizon"], "horizon");
  if (j.contains("waypoints")) {
    if (!j["waypoints"].is_array()) fail("waypoints", "expected an array");
    for (std::size_t i = 0; i < j["waypoints"].size(); ++i)
      s.waypoints.push_back(vec3(j["waypoints"][i], "waypoints[" + std::to_string(i) + "]"));
  }
  if (j.contains("corners") && j.contains("pose")) fail("corners", "give either corners or pose, not both");
  if (j.contains("corners")) {
    const json& c = j["corners"];
    if (!c.is_array() || c.size() != 4) fail("corners", "expected 4 corner poses");
    std::array<CornerPose, 4> corners;
    for (std::size_t i = 0; i < 4; ++i) {
      const std::string path = "corners[" + std::to_string(i) + "]";
      allow_keys(c[i], path, {"position", "quaternion"});
      if (!c[i].contains("position") || !c[i].contains("quaternion")) fail(path, "needs position and quaternion");
      corners[i].position = vec3(c[i]["position"], path + ".position");
      corners[i].orientation = quaternion(c[i]["quaternion"], path + ".quaternion");
    }
    s.corners = corners;
  }
  if (j.contains("pose")) {
    allow_keys(j["pose"], "pose", {"position", "quaternion"});
    if (!j["pose"].contains("position") || !j["pose"].contains("quaternion"))
      fail("pose", "needs position and quaternion");
    TargetPose t;
    t.position = vec3(j["pose"]["position"], "pose.position");
    t.rotation = quaternion(j["pose"]["quaternion"], "pose.quaternion").toRotationMatrix();
    s.pose = t;
  }
  if (j.contains("tag_size")) s.tag_size = positive(j["tag_size"], "tag_size");
  if (j.contains("planner")) read_planner(j["planner"], "planner", s.planner);
  if (j.contains("vehicle")) {
    const json& v = j["vehicle"];
    allow_keys(v, "vehicle", {"mass", "inertia"});
    if (v.contains("mass")) s.vehicle.mass = positive(v["mass"], "vehicle.mass");
    if (v.contains("inertia")) s.vehicle.inertia = diagonal_gain(v["inertia"], "vehicle.inertia");
  }
  if (j.contains("gains")) {
    const json& g = j["gains"];
    allow_keys(g, "gains", {"k_x", "k_v", "k_R", "k_omega"});
    ControllerGains k = default_gains(s.vehicle);
    if (g.contains("k_x")) k.k_x = diagonal_gain(g["k_x"], "gains.k_x");
    if (g.contains("k_v")) k.k_v = diagonal_gain(g["k_v"], "gains.k_v");
    if (g.contains("k_R")) k.k_R = diagonal_gain(g["k_R"], "gains.k_R");
    if (g.contains("k_omega")) k.k_omega = diagonal_gain(g["k_omega"], "gains.k_omega");
    s.gains = k;
  }
  if (j.contains("sim")) {
    const json& m = j["sim"];
    allow_keys(m, "sim", {"h", "noise"});
    if (m.contains("h")) s.sim_step = positive(m["h"], "sim.h");
    if (m.contains("noise")) {
      const json& n = m["noise"];
      allow_keys(n, "sim.noise", {"position", "velocity", "attitude"});
      auto sigma = [&](const char* key) {
        const double v = number(n[key], std::string("sim.noise.") + key);
        if (v < 0) fail(std::string("sim.noise.") + key, "must be non-negative");
        return v;
      };
      if (n.contains("position")) s.noise.position = sigma("position");
      if (n.contains("velocity")) s.noise.velocity = sigma("velocity");
      if (n.contains("attitude")) s.noise.attitude = sigma("attitude");
    }
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !(j["seed"].is_number_integer() && j["seed"].get<long long>() >= 0))
      fail("seed", "expected a non-negative integer");
    s.seed = j["seed"].get<unsigned long long>();
  }
  s.noise.seed = s.seed;
  if (!(s.horizon > s.planner.t_k)) fail("horizon", "must exceed planner.t_k");
  return s;
}

/// Applies "a.b.c=value" overrides to a scenario document. The value is
/// parsed as JSON, falling back to a plain string.
inline void apply_override(nlohmann::json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ScenarioError("override '" + assignment + "': expected key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    value = text;
  }
  nlohmann::json* node = &doc;
  std::size_t pos = 0;
  while (true) {
    const auto dot = key.find('.', pos);
    const std::string part = key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (part.empty()) throw ScenarioError("override '" + assignment + "': empty key segment");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (!node->is_object()) {
      if (!node->is_null()) throw ScenarioError("override '" + assignment + "': " + part + " is not an object");
      *node = nlohmann::json::object();
    }
    pos = dot + 1;
  }
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError(path + ": cannot open");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ScenarioError(path + ": parse error: " + e.what());
  }
}

inline Scenario load_scenario(const std::string& path, const std::vector<std::string>& overrides = {}) {
  nlohmann::json doc = read_json_file(path);
  for (const auto& o : overrides) apply_override(doc, o);
  try {
    return parse_scenario(doc);
  } catch (const ScenarioError& e) {
    throw ScenarioError(path + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError(path + ": " + e.what());
  }
}

}  // namespace perch

#endif  // PERCH_SCENARIO_HPP
