#ifndef PERCH_FLATNESS_HPP
#define PERCH_FLATNESS_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "perch/trajectory.hpp"

namespace perch {

inline constexpr double kGravity = 9.81;

class FlatnessError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline Eigen::Matrix3d hat(const Eigen::Vector3d& w) {
  Eigen::Matrix3d m;
  m << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
  return m;
}

/// Inverse of hat on the skew-symmetric part of m.
inline Eigen::Vector3d vee(const Eigen::Matrix3d& m) {
  return {0.5 * (m(2, 1) - m(1, 2)), 0.5 * (m(0, 2) - m(2, 0)), 0.5 * (m(1, 0) - m(0, 1))};
}

/// Total specific force a + g e3.
inline Eigen::Vector3d specific_force(const Eigen::Vector3d& accel) {
  return accel + Eigen::Vector3d(0.0, 0.0, kGravity);
}

inline double nominal_thrust(const Eigen::Vector3d& accel, double mass) {
  if (!(mass > 0)) throw FlatnessError("nominal_thrust: mass must be positive");
  return mass * specific_force(accel).norm();
}

inline constexpr double kFreeFallThreshold = 1e-6;  // m/s^2
inline constexpr double kHeadingDegeneracy = 1e-6;

inline Eigen::Vector3d body_z(const Eigen::Vector3d& accel) {
  const Eigen::Vector3d f = specific_force(accel);
  const double norm = f.norm();
  if (!(norm > kFreeFallThreshold)) throw FlatnessError("body_z: free-fall singularity (|a + g e3| too small)");
  return f / norm;
}

/// Desired heading axis b_{2,des} for yaw psi.
inline Eigen::Vector3d heading_axis(double psi) { return {-std::sin(psi), std::cos(psi), 0.0}; }

/// Rotation whose third column is b3 and whose second column lies in the
/// plane of b3 and b_{2,des}(psi).
inline Eigen::Matrix3d rotation_from_body_z(const Eigen::Vector3d& b3, double psi) {
  const Eigen::Vector3d cross = heading_axis(psi).cross(b3);
  const double norm = cross.norm();
  if (!(norm > kHeadingDegeneracy))
    throw FlatnessError("commanded_rotation: heading axis parallel to body z");
  Eigen::Matrix3d r;
  r.col(0) = cross / norm;
  r.col(1) = b3.cross(r.col(0));
  r.col(2) = b3;
  return r;
}

inline Eigen::Matrix3d commanded_rotation(const Eigen::Vector3d& accel, double psi) {
  return rotation_from_body_z(body_z(accel), psi);
}

inline constexpr double kRateStep = 1e-5;  // seconds
inline constexpr double kRateAsymmetryTol = 1e-4;

/**
 * Body rates of a rotation trajectory R(t) on [t_lo, t_hi].
 *
 * R_dot comes from a central difference with step h, or a second-order
 * one-sided stencil within h of either end. The symmetric part of R^T R_dot
 * must stay below 1e-4 of its norm; anything larger means the stencil
 * crossed a degeneracy.
 */
inline Eigen::Vector3d body_rates(const std::function<Eigen::Matrix3d(double)>& rotation, double t, double t_lo,
                                  double t_hi, double h = kRateStep) {
  Eigen::Matrix3d r_dot;
  const Eigen::Matrix3d r = rotation(t);
  if (t - h < t_lo) {
    r_dot = (-3.0 * r + 4.0 * rotation(t + h) - rotation(t + 2.0 * h)) / (2.0 * h);
  } else if (t + h > t_hi) {
    r_dot = (3.0 * r - 4.0 * rotation(t - h) + rotation(t - 2.0 * h)) / (2.0 * h);
  } else {
    r_dot = (rotation(t + h) - rotation(t - h)) / (2.0 * h);
  }
  const Eigen::Matrix3d m = r.transpose() * r_dot;
  const double asym = (0.5 * (m + m.transpose())).norm();
  if (asym > kRateAsymmetryTol * m.norm() + 1e-9) {
    throw FlatnessError("commanded_rates: R^T R_dot is not skew-symmetric (residual " + std::to_string(asym) + ")");
  }
  return vee(m);
}

/// Commanded rotation along a trajectory, with yaw taken from its psi channel.
inline Eigen::Matrix3d commanded_rotation_at(const PiecewiseTrajectory& traj, double t) {
  const double tc = std::clamp(t, traj.t0(), traj.tf());
  const FlatVector a = traj.evaluate(tc, 2);
  const FlatVector p = traj.evaluate(tc, 0);
  return commanded_rotation(a.head<3>(), p(kPsi));
}

inline Eigen::Vector3d commanded_rates(const PiecewiseTrajectory& traj, double t) {
  return body_rates([&](double s) { return commanded_rotation_at(traj, s); }, t, traj.t0(), traj.tf());
}

/// Finite-difference derivative of the commanded rates.
inline Eigen::Vector3d commanded_rate_derivative(const PiecewiseTrajectory& traj, double t,
                                                 double h = kRateStep) {
  const double lo = traj.t0(), hi = traj.tf();
  auto rates = [&](double s) { return commanded_rates(traj, s); };
  if (t - h < lo) return (-3.0 * rates(t) + 4.0 * rates(t + h) - rates(t + 2.0 * h)) / (2.0 * h);
  if (t + h > hi) return (3.0 * rates(t) - 4.0 * rates(t - h) + rates(t - 2.0 * h)) / (2.0 * h);
  return (rates(t + h) - rates(t - h)) / (2.0 * h);
}

struct FlatnessOutputs {
  double thrust = 0.0;
  Eigen::Vector3d b3 = Eigen::Vector3d::UnitZ();
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();
  Eigen::Vector3d omega_dot = Eigen::Vector3d::Zero();
};

inline FlatnessOutputs flat_outputs(const PiecewiseTrajectory& traj, double t, double mass) {
  FlatnessOutputs out;
  const Eigen::Vector3d a = traj.evaluate(t, 2).head<3>();
  out.thrust = nominal_thrust(a, mass);
  out.b3 = body_z(a);
  out.rotation = rotation_from_body_z(out.b3, traj.evaluate(t, 0)(kPsi));
  out.omega = commanded_rates(traj, t);
  out.omega_dot = commanded_rate_derivative(traj, t);
  return out;
}

}  // namespace perch

#endif  // PERCH_FLATNESS_HPP
