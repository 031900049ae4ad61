#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "perch/perch_planner.hpp"
#include "perch/sim.hpp"

using Eigen::Matrix3d;
using Eigen::Vector3d;
using perch::kGravity;
using perch::RigidBodyState;
using perch::VehicleParams;

namespace {

const VehicleParams kParams;

RigidBodyState run_open_loop(RigidBodyState s, double thrust, const Vector3d& moment, const VehicleParams& p, double h,
                             double span) {
  const long steps = std::lround(span / h);
  for (long n = 0; n < steps; ++n) s = perch::integrate(s, thrust, moment, p, h);
  return s;
}

double energy(const RigidBodyState& s, const VehicleParams& p) {
  return 0.5 * p.mass * s.v.squaredNorm() + p.mass * p.g * s.x.z() + 0.5 * s.omega.dot(p.inertia * s.omega);
}

double state_distance(const RigidBodyState& a, const RigidBodyState& b) {
  return std::max({(a.x - b.x).cwiseAbs().maxCoeff(), (a.v - b.v).cwiseAbs().maxCoeff(),
                   (a.R - b.R).cwiseAbs().maxCoeff(), (a.omega - b.omega).cwiseAbs().maxCoeff()});
}

perch::PiecewiseTrajectory hover_trajectory(const Vector3d& p, double psi, double span) {
  std::array<std::vector<perch::Polynomial>, perch::kFlatDims> segs;
  for (int d = 0; d < 3; ++d) segs[static_cast<std::size_t>(d)] = {perch::Polynomial::constant(p(d))};
  segs[perch::kPsi] = {perch::Polynomial::constant(psi)};
  return perch::PiecewiseTrajectory({0.0, span}, segs);
}

// Independent transcription of the geometric controller, written per axis
// with the commanded frame built from an explicit heading vector.
perch::ControlOutput controller_oracle(const RigidBodyState& s, const perch::ControlReference& ref,
                                       const perch::ControllerGains& k, const VehicleParams& p) {
  perch::ControlOutput o;
  o.e_x = s.x - ref.flat.d[0].head<3>();
  o.e_v = s.v - ref.flat.d[1].head<3>();
  Vector3d f;
  for (int i = 0; i < 3; ++i)
    f(i) = -k.k_x(i, i) * o.e_x(i) - k.k_v(i, i) * o.e_v(i) + p.mass * ref.flat.d[2](i) + (i == 2 ? p.mass * p.g : 0.0);
  const Vector3d zb = s.R.col(2);
  o.thrust = f(0) * zb(0) + f(1) * zb(1) + f(2) * zb(2);
  const Vector3d b3 = f / f.norm();
  const double psi = ref.flat.d[0](3);
  const Vector3d yc(-std::sin(psi), std::cos(psi), 0.0);
  const Vector3d b1 = yc.cross(b3).normalized();
  Matrix3d rc;
  rc << b1, b3.cross(b1), b3;
  o.R_c = rc;
  const Matrix3d m = rc.transpose() * s.R - s.R.transpose() * rc;
  o.e_R = 0.5 * Vector3d(m(2, 1), m(0, 2), m(1, 0));
  const Vector3d w_d = s.R.transpose() * (rc * ref.nominal.omega);
  const Vector3d w_d_dot = s.R.transpose() * (rc * ref.nominal.omega_dot);
  o.e_omega = s.omega - w_d;
  const Vector3d jw = p.inertia * s.omega;
  Vector3d moment;
  for (int i = 0; i < 3; ++i) moment(i) = -k.k_R(i, i) * o.e_R(i) - k.k_omega(i, i) * o.e_omega(i);
  o.moment = moment + s.omega.cross(jw) - p.inertia * (s.omega.cross(w_d) - w_d_dot);
  return o;
}

}  // namespace

TEST(Integrate, HoverEquilibriumIsExact) {
  RigidBodyState s0;
  s0.x = Vector3d(0.3, -0.2, 1.0);
  RigidBodyState s = s0;
  for (int n = 0; n < 10000; ++n) s = perch::integrate(s, kParams.mass * kGravity, Vector3d::Zero(), kParams, 1e-3);
  EXPECT_LE(state_distance(s, s0), 1e-12);
}

TEST(Integrate, BallisticFallMatchesClosedForm) {
  RigidBodyState s;
  s.x = Vector3d(0.0, 0.0, 10.0);
  s.v = Vector3d(0.5, -0.25, 1.0);
  s.R = Eigen::AngleAxisd(0.4, Vector3d(1, 1, 0).normalized()).toRotationMatrix();
  for (int n = 1; n <= 1000; ++n) {
    s = perch::integrate(s, 0.0, Vector3d::Zero(), kParams, 1e-3);
    const double t = n * 1e-3;
    const Vector3d expected(0.5 * t, -0.25 * t, 10.0 + t - 0.5 * kGravity * t * t);
    ASSERT_LE((s.x - expected).cwiseAbs().maxCoeff(), 1e-9) << "t = " << t;
  }
}

TEST(Integrate, PrincipalAxisSpinIsConstant) {
  for (int axis = 0; axis < 3; ++axis) {
    RigidBodyState s;
    s.omega = 12.0 * Vector3d::Unit(axis);
    const RigidBodyState end = run_open_loop(s, 0.0, Vector3d::Zero(), kParams, 1e-3, 2.0);
    EXPECT_LE((end.omega - s.omega).norm(), 1e-9) << "axis " << axis;
  }
}

TEST(Integrate, IntermediateAxisSpinConservesEnergyAndMomentum) {
  VehicleParams p;
  p.inertia = Vector3d(4e-4, 6e-4, 1e-3).asDiagonal();
  RigidBodyState s;
  s.omega = Vector3d(0.01, 8.0, 0.01);
  const double e0 = 0.5 * s.omega.dot(p.inertia * s.omega);
  const Vector3d h0 = s.R * p.inertia * s.omega;
  double worst_e = 0.0, worst_h = 0.0, max_tumble = 0.0;
  for (int n = 0; n < 5000; ++n) {
    s = perch::integrate(s, 0.0, Vector3d::Zero(), p, 1e-3);
    worst_e = std::max(worst_e, std::abs(0.5 * s.omega.dot(p.inertia * s.omega) - e0) / e0);
    worst_h = std::max(worst_h, std::abs((p.inertia * s.omega).norm() - h0.norm()) / h0.norm());
    max_tumble = std::max(max_tumble, std::abs(s.omega.x()));
  }
  EXPECT_LE(worst_e, 1e-6);
  EXPECT_LE(worst_h, 1e-6);
  // The intermediate axis is unstable, so the run really exercises tumbling.
  EXPECT_GT(max_tumble, 1.0);
  EXPECT_LE((s.R * p.inertia * s.omega - h0).norm(), 1e-6 * h0.norm());
}

TEST(Integrate, FreeFlightConservesMechanicalEnergy) {
  RigidBodyState s;
  s.x = Vector3d(0, 0, 5);
  s.v = Vector3d(1.0, 2.0, 3.0);
  s.omega = Vector3d(3.0, -2.0, 5.0);
  const double e0 = energy(s, kParams);
  double worst = 0.0;
  for (int n = 0; n < 1000; ++n) {
    s = perch::integrate(s, 0.0, Vector3d::Zero(), kParams, 1e-3);
    worst = std::max(worst, std::abs(energy(s, kParams) - e0) / std::abs(e0));
  }
  EXPECT_LE(worst, 1e-6);
}

TEST(Integrate, FourthOrderConvergence) {
  RigidBodyState s;
  s.v = Vector3d(0.5, 0.0, 0.2);
  s.omega = Vector3d(2.0, -1.0, 3.0);
  const double thrust = 3.0;
  const Vector3d moment(2e-3, -1e-3, 5e-4);
  const RigidBodyState ref = run_open_loop(s, thrust, moment, kParams, 0.025 / 64, 1.0);
  std::vector<double> errors;
  for (double h : {0.025, 0.0125, 0.00625}) errors.push_back(state_distance(run_open_loop(s, thrust, moment, kParams, h, 1.0), ref));
  // Errors must sit well above round-off for the ratio to mean anything.
  EXPECT_GT(errors.back(), 1e-11);
  for (std::size_t i = 0; i + 1 < errors.size(); ++i) {
    const double order = std::log2(errors[i] / errors[i + 1]);
    std::printf("h ratio 2: error %.3e -> %.3e, observed order %.3f\n", errors[i], errors[i + 1], order);
    EXPECT_GE(order, 3.5) << "errors " << errors[i] << " -> " << errors[i + 1];
    EXPECT_LE(order, 4.5) << "errors " << errors[i] << " -> " << errors[i + 1];
  }
}

TEST(Integrate, RejectsNonPositiveStep) {
  EXPECT_THROW(perch::integrate(RigidBodyState{}, 0.0, Vector3d::Zero(), kParams, 0.0), std::invalid_argument);
}

TEST(Controller, HoverGivesWeightAndZeroMoment) {
  RigidBodyState s;
  s.x = Vector3d(1, 2, 3);
  const auto out = perch::control_step(s, perch::hover_reference(s.x, 0.0, kParams.mass), perch::default_gains(kParams),
                                       kParams);
  EXPECT_NEAR(out.thrust, kParams.mass * kGravity, 1e-15);
  EXPECT_EQ(out.moment, Vector3d::Zero());
  EXPECT_EQ(out.e_R, Vector3d::Zero());
}

TEST(Controller, PositionErrorAloneMovesThrustDirection) {
  RigidBodyState s;
  s.x = Vector3d(0.1, 0, 1);
  const auto gains = perch::default_gains(kParams);
  const auto out = perch::control_step(s, perch::hover_reference(Vector3d(0, 0, 1), 0.0, kParams.mass), gains, kParams);
  EXPECT_EQ(out.e_x, Vector3d(0.1, 0, 0));
  EXPECT_EQ(out.e_v, Vector3d::Zero());
  // Body z of the command tilts towards -x; the pitch moment is restoring.
  EXPECT_LT(out.R_c(0, 2), 0.0);
  EXPECT_LT(out.moment.y(), 0.0);
  EXPECT_NEAR(out.moment.x(), 0.0, 1e-15);
  EXPECT_NEAR(out.thrust, kParams.mass * kGravity, 1e-12);
}

TEST(Controller, MatchesIndependentTranscription) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto gains = perch::default_gains(kParams);
  for (int trial = 0; trial < 1000; ++trial) {
    RigidBodyState s;
    s.x = Vector3d(u(rng), u(rng), u(rng));
    s.v = Vector3d(u(rng), u(rng), u(rng));
    s.R = Eigen::AngleAxisd(0.6 * u(rng), Vector3d(u(rng), u(rng), u(rng) + 2.0).normalized()).toRotationMatrix();
    s.omega = 5.0 * Vector3d(u(rng), u(rng), u(rng));
    perch::ControlReference ref;
    for (int k = 0; k <= perch::kMaxDerivative; ++k) {
      ref.flat.d[static_cast<std::size_t>(k)] = perch::FlatVector(u(rng), u(rng), u(rng), u(rng));
    }
    ref.nominal.omega = 3.0 * Vector3d(u(rng), u(rng), u(rng));
    ref.nominal.omega_dot = 10.0 * Vector3d(u(rng), u(rng), u(rng));
    const auto got = perch::control_step(s, ref, gains, kParams);
    const auto want = controller_oracle(s, ref, gains, kParams);
    ASSERT_NEAR(got.thrust, want.thrust, 1e-10);
    ASSERT_LE((got.R_c - want.R_c).cwiseAbs().maxCoeff(), 1e-10);
    ASSERT_LE((got.e_R - want.e_R).norm(), 1e-10);
    ASSERT_LE((got.e_omega - want.e_omega).norm(), 1e-10);
    ASSERT_LE((got.moment - want.moment).norm(), 1e-10);
  }
}

TEST(Tracking, HoverReferenceIsHeld) {
  const auto res = perch::run_tracking(hover_trajectory(Vector3d(0, 0, 1), 0.3, 2.0), perch::default_gains(kParams),
                                       kParams);
  EXPECT_EQ(res.metrics.steps, 2001);
  EXPECT_LT(res.metrics.rmse.maxCoeff(), 1e-6);
  EXPECT_TRUE(res.metrics.terminal_ok);
}

TEST(Tracking, StepResponseOvershootIsSmall) {
  const auto gains = perch::default_gains(kParams);
  const auto ref = perch::hover_reference(Vector3d(0.5, 0, 1), 0.0, kParams.mass);
  RigidBodyState s;
  s.x = Vector3d(0, 0, 1);
  double peak = 0.0;
  for (int n = 0; n < 4000; ++n) {
    const auto u = perch::control_step(s, ref, gains, kParams);
    s = perch::integrate(s, u.thrust, u.moment, kParams, 1e-3);
    peak = std::max(peak, s.x.x());
  }
  EXPECT_LT(peak, 0.5 * 1.05);
  EXPECT_NEAR(s.x.x(), 0.5, 1e-3);
  EXPECT_NEAR(s.x.z(), 1.0, 1e-3);
}

TEST(Tracking, StifferGainsDoNotHurtPlannedTrajectory) {
  const perch::PlannerConfig cfg;
  perch::StartState start;
  start.position = Vector3d(0, 0, 1);
  const auto target = perch::inclined_target(Vector3d(-1.7, 0, 1), M_PI / 2);
  const auto plan = perch::plan(start, target, cfg, kParams.mass, 1.0);
  perch::TrackingOptions opts;
  opts.noise = perch::SensorNoise{0.002, 0.005, 0.002, 3};
  const auto base = perch::run_tracking(plan.traj(), perch::default_gains(kParams), kParams, opts, &target, &cfg);
  const auto stiff = perch::run_tracking(plan.traj(), perch::default_gains(kParams).scaled(4.0), kParams, opts, &target, &cfg);
  EXPECT_LE(stiff.metrics.rmse.norm(), base.metrics.rmse.norm());
  EXPECT_LE(base.metrics.max_orthonormality_error, 1e-6);
  EXPECT_LE(stiff.metrics.max_orthonormality_error, 1e-6);
}

TEST(Tracking, ZeroNoisePlanIsTrackedClosely) {
  const perch::PlannerConfig cfg;
  perch::StartState start;
  start.position = Vector3d(0, 0, 1);
  const auto target = perch::inclined_target(Vector3d(-1.7, 0, 1), M_PI / 2);
  const auto plan = perch::plan(start, target, cfg, kParams.mass, 1.0);
  const auto res = perch::run_tracking(plan.traj(), perch::default_gains(kParams), kParams, {}, &target, &cfg);
  EXPECT_LT(res.metrics.rmse.maxCoeff(), 0.05);
  EXPECT_TRUE(res.metrics.terminal_ok);
  EXPECT_LE(res.metrics.max_orthonormality_error, 1e-6);
  EXPECT_GE(res.metrics.peak_commanded_rate, res.metrics.peak_rate * 0.5);
}

TEST(Tracking, NoiseIsReproducibleFromSeed) {
  const auto traj = hover_trajectory(Vector3d(0, 0, 1), 0.0, 0.5);
  perch::TrackingOptions opts;
  opts.noise = perch::SensorNoise{0.01, 0.01, 0.01, 42};
  const auto a = perch::run_tracking(traj, perch::default_gains(kParams), kParams, opts);
  const auto b = perch::run_tracking(traj, perch::default_gains(kParams), kParams, opts);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) EXPECT_EQ(a.trace[i].x, b.trace[i].x);
  EXPECT_GT(a.metrics.rmse.maxCoeff(), 0.0);
}

TEST(Trace, CsvHeaderAndRows) {
  const auto res = perch::run_tracking(hover_trajectory(Vector3d(0, 0, 1), 0.0, 0.01), perch::default_gains(kParams),
                                       kParams);
  std::ostringstream ss;
  perch::write_trace_csv(ss, res.trace);
  std::istringstream in(ss.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,x,y,z,ref_x,ref_y,ref_z,ex,ey,ez,tau,Mx,My,Mz,wx,wy,wz");
  int rows = 0;
  while (std::getline(in, line)) {
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 16);
    ++rows;
  }
  EXPECT_EQ(rows, 11);
}

TEST(VehicleParams, Validation) {
  VehicleParams p;
  EXPECT_NO_THROW(p.validate());
  p.mass = 0.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = VehicleParams{};
  p.inertia(0, 1) = 1e-4;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = VehicleParams{};
  p.inertia(2, 2) = -1e-3;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  auto gains = perch::default_gains(VehicleParams{});
  gains.k_R(0, 1) = 1.0;
  EXPECT_THROW(gains.validate(), std::invalid_argument);
}
