#ifndef PERCH_SIM_HPP
#define PERCH_SIM_HPP

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "perch/flatness.hpp"
#include "perch/perch_planner.hpp"
#include "perch/trajectory.hpp"

namespace perch {

struct RigidBodyState {
  Eigen::Vector3d x = Eigen::Vector3d::Zero();
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();  // body frame
};

struct VehicleParams {
  double mass = 0.25;  // kg
  Eigen::Matrix3d inertia = Eigen::Vector3d(6e-4, 6e-4, 1e-3).asDiagonal();  // kg m^2
  double g = kGravity;

  void validate() const {
    if (!(mass > 0)) throw std::invalid_argument("vehicle: mass must be positive");
    if ((inertia - inertia.transpose()).cwiseAbs().maxCoeff() > 1e-12 * inertia.cwiseAbs().maxCoeff())
      throw std::invalid_argument("vehicle: inertia must be symmetric");
    if (Eigen::LLT<Eigen::Matrix3d>(inertia).info() != Eigen::Success)
      throw std::invalid_argument("vehicle: inertia must be positive definite");
  }
};

struct ControllerGains {
  Eigen::Matrix3d k_x;
  Eigen::Matrix3d k_v;
  Eigen::Matrix3d k_R;
  Eigen::Matrix3d k_omega;

  void validate() const {
    for (const Eigen::Matrix3d* k : {&k_x, &k_v, &k_R, &k_omega}) {
      const Eigen::Matrix3d off = *k - Eigen::Matrix3d(k->diagonal().asDiagonal());
      if (off.cwiseAbs().maxCoeff() != 0.0 || !(k->diagonal().minCoeff() > 0))
        throw std::invalid_argument("gains: must be positive diagonal matrices");
    }
  }

  ControllerGains scaled(double factor) const { return {factor * k_x, factor * k_v, factor * k_R, factor * k_omega}; }
};

/// Position loop at 6 rad/s, attitude loop at 40 rad/s, both with damping
/// ratio 0.9, scaled by the vehicle's mass and inertia.
inline ControllerGains default_gains(const VehicleParams& p) {
  const double wp = 6.0, wr = 40.0, zeta = 0.9;
  ControllerGains k;
  k.k_x = Eigen::Matrix3d::Identity() * (p.mass * wp * wp);
  k.k_v = Eigen::Matrix3d::Identity() * (2.0 * zeta * wp * p.mass);
  k.k_R = Eigen::Matrix3d(p.inertia.diagonal().asDiagonal()) * (wr * wr);
  k.k_omega = Eigen::Matrix3d(p.inertia.diagonal().asDiagonal()) * (2.0 * zeta * wr);
  return k;
}

struct ControlReference {
  FlatSample flat;
  FlatnessOutputs nominal;  // omega and omega_dot feed the attitude loop
};

/// Hover reference at `position` with yaw `psi`.
inline ControlReference hover_reference(const Eigen::Vector3d& position, double psi, double mass) {
  ControlReference ref;
  ref.flat.d[0] << position, psi;
  for (int k = 1; k <= kMaxDerivative; ++k) ref.flat.d[static_cast<std::size_t>(k)].setZero();
  ref.nominal.thrust = mass * kGravity;
  ref.nominal.rotation = rotation_from_body_z(Eigen::Vector3d::UnitZ(), psi);
  return ref;
}

inline ControlReference reference_at(const PiecewiseTrajectory& traj, double t, double mass) {
  return {traj.sample(t), flat_outputs(traj, t, mass)};
}

struct ControlOutput {
  double thrust = 0.0;
  Eigen::Vector3d moment = Eigen::Vector3d::Zero();
  Eigen::Matrix3d R_c = Eigen::Matrix3d::Identity();
  Eigen::Vector3d e_x = Eigen::Vector3d::Zero();
  Eigen::Vector3d e_v = Eigen::Vector3d::Zero();
  Eigen::Vector3d e_R = Eigen::Vector3d::Zero();
  Eigen::Vector3d e_omega = Eigen::Vector3d::Zero();
};

/**
 * Geometric tracking controller on SE(3).
 *
 * The commanded body z axis follows the feedback-corrected force
 * f = -k_x e_x - k_v e_v + m g e3 + m a_d, and thrust is its projection on
 * the current body z axis. Commanded rates and their derivative come from
 * the nominal reference.
 */
inline ControlOutput control_step(const RigidBodyState& s, const ControlReference& ref, const ControllerGains& k,
                                  const VehicleParams& p) {
  ControlOutput out;
  const Eigen::Vector3d e3 = Eigen::Vector3d::UnitZ();
  out.e_x = s.x - ref.flat.position();
  out.e_v = s.v - ref.flat.velocity();
  const Eigen::Vector3d force =
      -k.k_x * out.e_x - k.k_v * out.e_v + p.mass * p.g * e3 + p.mass * ref.flat.acceleration();
  out.thrust = force.dot(s.R * e3);
  const double norm = force.norm();
  if (!(norm > kFreeFallThreshold)) throw FlatnessError("control_step: commanded force vanishes");
  out.R_c = rotation_from_body_z(force / norm, ref.flat.yaw());
  out.e_R = 0.5 * vee(out.R_c.transpose() * s.R - s.R.transpose() * out.R_c);
  const Eigen::Matrix3d rel = s.R.transpose() * out.R_c;
  out.e_omega = s.omega - rel * ref.nominal.omega;
  const Eigen::Vector3d j_omega = p.inertia * s.omega;
  out.moment = -k.k_R * out.e_R - k.k_omega * out.e_omega + s.omega.cross(j_omega) -
               p.inertia * (hat(s.omega) * rel * ref.nominal.omega - rel * ref.nominal.omega_dot);
  return out;
}

namespace sim_detail {

struct Derivative {
  Eigen::Vector3d dx, dv;
  Eigen::Matrix3d dR;
  Eigen::Vector3d domega;
};

inline Derivative rates(const RigidBodyState& s, double thrust, const Eigen::Vector3d& moment,
                        const VehicleParams& p) {
  Derivative d;
  d.dx = s.v;
  d.dv = (thrust / p.mass) * s.R.col(2) - Eigen::Vector3d(0.0, 0.0, p.g);
  d.dR = s.R * hat(s.omega);
  d.domega = p.inertia.llt().solve(moment - s.omega.cross(p.inertia * s.omega));
  return d;
}

inline RigidBodyState advance(const RigidBodyState& s, const Derivative& d, double h) {
  return {s.x + h * d.dx, s.v + h * d.dv, s.R + h * d.dR, s.omega + h * d.domega};
}

}  // namespace sim_detail

/// Nearest rotation matrix (polar factor).
inline Eigen::Matrix3d project_to_rotation(const Eigen::Matrix3d& m) {
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0) {
    Eigen::Matrix3d u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return r;
}

inline double orthonormality_error(const Eigen::Matrix3d& r) {
  return (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
}

/// Classical RK4 step with thrust and moment held over the step. The
/// rotation is integrated as a matrix and projected back onto SO(3) when it
/// drifts by more than 1e-12.
inline RigidBodyState integrate(const RigidBodyState& s, double thrust, const Eigen::Vector3d& moment,
                                const VehicleParams& p, double h) {
  using namespace sim_detail;
  if (!(h > 0)) throw std::invalid_argument("integrate: step must be positive");
  const Derivative k1 = rates(s, thrust, moment, p);
  const Derivative k2 = rates(advance(s, k1, 0.5 * h), thrust, moment, p);
  const Derivative k3 = rates(advance(s, k2, 0.5 * h), thrust, moment, p);
  const Derivative k4 = rates(advance(s, k3, h), thrust, moment, p);
  RigidBodyState out;
  out.x = s.x + (h / 6.0) * (k1.dx + 2.0 * k2.dx + 2.0 * k3.dx + k4.dx);
  out.v = s.v + (h / 6.0) * (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv);
  out.R = s.R + (h / 6.0) * (k1.dR + 2.0 * k2.dR + 2.0 * k3.dR + k4.dR);
  out.omega = s.omega + (h / 6.0) * (k1.domega + 2.0 * k2.domega + 2.0 * k3.domega + k4.domega);
  if (orthonormality_error(out.R) > 1e-12) out.R = project_to_rotation(out.R);
  return out;
}

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TraceRow {
  double t = 0.0;
  Eigen::Vector3d x, ref, error, moment, omega;
  double thrust = 0.0;
};

inline void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows) {
  out << "t,x,y,z,ref_x,ref_y,ref_z,ex,ey,ez,tau,Mx,My,Mz,wx,wy,wz\n";
  for (const auto& r : rows) {
    out << format_double(r.t);
    for (const Eigen::Vector3d* v : {&r.x, &r.ref, &r.error}) {
      for (int i = 0; i < 3; ++i) out << ',' << format_double((*v)(i));
    }
    out << ',' << format_double(r.thrust);
    for (const Eigen::Vector3d* v : {&r.moment, &r.omega}) {
      for (int i = 0; i < 3; ++i) out << ',' << format_double((*v)(i));
    }
    out << '\n';
  }
}

struct SensorNoise {
  double position = 0.0;  // m, standard deviation
  double velocity = 0.0;  // m/s
  double attitude = 0.0;  // rad, per axis of a small rotation
  unsigned long long seed = 0;

  bool any() const { return position > 0 || velocity > 0 || attitude > 0; }
};

/// Pass/fail tolerances for the simulated terminal state.
struct TerminalTolerances {
  double position = 0.05;           // m
  double attitude = 5.0 * M_PI / 180.0;  // rad between body z and s3
  double velocity_margin = 0.05;    // m/s outside [v_min, v_max]
};

struct TrackingMetrics {
  Eigen::Vector3d rmse = Eigen::Vector3d::Zero();
  double peak_rate = 0.0;            // achieved |omega|, rad/s
  double peak_commanded_rate = 0.0;  // |Omega_C|, rad/s
  double peak_thrust = 0.0;
  double terminal_position_error = 0.0;
  double terminal_velocity_error = 0.0;
  double terminal_impact_velocity = 0.0;  // v . s3
  double terminal_attitude_error = 0.0;   // angle between R e3 and s3
  double max_orthonormality_error = 0.0;
  bool terminal_ok = false;
  int steps = 0;
};

struct TrackingResult {
  std::vector<TraceRow> trace;
  TrackingMetrics metrics;
};

struct TrackingOptions {
  double h = 1e-3;
  std::optional<SensorNoise> noise;
  TerminalTolerances tolerances;
};

/**
 * Closed-loop run of the controller along a trajectory from t0 to tf,
 * starting on the reference. Terminal checks compare with the target's
 * impact conditions when `target` and `cfg` are supplied.
 */
inline TrackingResult run_tracking(const PiecewiseTrajectory& traj, const ControllerGains& gains,
                                   const VehicleParams& params, const TrackingOptions& opts = {},
                                   const TargetPose* target = nullptr, const PlannerConfig* cfg = nullptr) {
  params.validate();
  gains.validate();
  if (!(opts.h > 0)) throw std::invalid_argument("run_tracking: step must be positive");
  TrackingResult result;
  auto& m = result.metrics;
  std::mt19937_64 rng(opts.noise ? opts.noise->seed : 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto gaussian3 = [&](double sigma) {
    return Eigen::Vector3d(sigma * normal(rng), sigma * normal(rng), sigma * normal(rng));
  };

  RigidBodyState s;
  double t = traj.t0();
  try {
    const ControlReference start = reference_at(traj, t, params.mass);
    s.x = start.flat.position();
    s.v = start.flat.velocity();
    s.R = start.nominal.rotation;
    s.omega = start.nominal.omega;
  } catch (const FlatnessError& e) {
    throw SimulationError(std::string("run_tracking: ") + e.what());
  }

  Eigen::Vector3d sq_err = Eigen::Vector3d::Zero();
  const long steps = std::lround(std::ceil((traj.tf() - traj.t0()) / opts.h - 1e-9));
  for (long n = 0; n <= steps; ++n) {
    ControlReference ref;
    ControlOutput u;
    try {
      ref = reference_at(traj, t, params.mass);
      RigidBodyState sensed = s;
      if (opts.noise && opts.noise->any()) {
        sensed.x += gaussian3(opts.noise->position);
        sensed.v += gaussian3(opts.noise->velocity);
        const Eigen::Vector3d dtheta = gaussian3(opts.noise->attitude);
        if (dtheta.norm() > 0)
          sensed.R = s.R * Eigen::AngleAxisd(dtheta.norm(), dtheta.normalized()).toRotationMatrix();
      }
      u = control_step(sensed, ref, gains, params);
    } catch (const FlatnessError& e) {
      throw SimulationError("run_tracking: singularity at t = " + std::to_string(t) + ": " + e.what());
    }
    const Eigen::Vector3d err = s.x - ref.flat.position();
    result.trace.push_back({t, s.x, ref.flat.position(), err, u.moment, s.omega, u.thrust});
    sq_err += err.cwiseAbs2();
    m.peak_rate = std::max(m.peak_rate, s.omega.norm());
    m.peak_commanded_rate = std::max(m.peak_commanded_rate, ref.nominal.omega.norm());
    m.peak_thrust = std::max(m.peak_thrust, u.thrust);
    m.max_orthonormality_error = std::max(m.max_orthonormality_error, orthonormality_error(s.R));
    if (n == steps) {
      m.terminal_position_error = err.norm();
      m.terminal_velocity_error = (s.v - ref.flat.velocity()).norm();
      break;
    }
    const double h = std::min(opts.h, traj.tf() - t);
    s = integrate(s, u.thrust, u.moment, params, h);
    t = (n + 1 == steps) ? traj.tf() : traj.t0() + static_cast<double>(n + 1) * opts.h;
    if (!s.x.allFinite() || !s.R.allFinite()) throw SimulationError("run_tracking: state diverged");
  }
  m.steps = static_cast<int>(result.trace.size());
  m.rmse = (sq_err / static_cast<double>(result.trace.size())).cwiseSqrt();
  if (target && cfg) {
    const Eigen::Vector3d b3 = s.R.col(2);
    m.terminal_impact_velocity = s.v.dot(target->s3());
    m.terminal_attitude_error = std::atan2(b3.cross(target->s3()).norm(), b3.dot(target->s3()));
    const auto& tol = opts.tolerances;
    m.terminal_ok = (s.x - target->position).norm() <= tol.position && m.terminal_attitude_error <= tol.attitude &&
                    m.terminal_impact_velocity >= cfg->v_min - tol.velocity_margin &&
                    m.terminal_impact_velocity <= cfg->v_max + tol.velocity_margin;
  } else {
    m.terminal_ok = m.terminal_position_error <= opts.tolerances.position;
  }
  return result;
}

}  // namespace perch

#endif  // PERCH_SIM_HPP
