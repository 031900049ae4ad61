#include <gtest/gtest.h>

#include <random>

#include "perch/flatness.hpp"
#include "perch/perch_planner.hpp"

using Eigen::Matrix3d;
using Eigen::Vector3d;
using perch::kGravity;
using perch::PiecewiseTrajectory;
using perch::Polynomial;

namespace {

constexpr double kAlpha = 3.3;

// Hover at the origin with yaw psi(s) = psi0 + rate * t over [0, span].
PiecewiseTrajectory yaw_spin(double rate, double span) {
  std::array<std::vector<Polynomial>, perch::kFlatDims> segs;
  for (int d = 0; d < 3; ++d) segs[static_cast<std::size_t>(d)] = {Polynomial::constant(1.0)};
  segs[perch::kPsi] = {Polynomial{0.2, rate * span}};
  return PiecewiseTrajectory({0.0, span}, segs);
}

bool is_rotation(const Matrix3d& r, double tol) {
  return (r.transpose() * r - Matrix3d::Identity()).cwiseAbs().maxCoeff() <= tol && std::abs(r.determinant() - 1) <= tol;
}

}  // namespace

TEST(NominalThrust, Examples) {
  EXPECT_DOUBLE_EQ(perch::nominal_thrust(Vector3d::Zero(), 1.0), 9.81);
  EXPECT_EQ(perch::nominal_thrust(Vector3d(0, 0, -kGravity), 1.0), 0.0);
  const Vector3d wall = kAlpha * -Vector3d::UnitX() - kGravity * Vector3d::UnitZ();
  // The specific force at the terminal condition has magnitude alpha; the
  // acceleration itself has magnitude hypot(alpha, g).
  EXPECT_NEAR(perch::nominal_thrust(wall, 1.0), kAlpha, 1e-12);
  EXPECT_NEAR(wall.norm(), 10.35, 5e-3);
  EXPECT_THROW(perch::nominal_thrust(Vector3d::Zero(), 0.0), perch::FlatnessError);
}

TEST(NominalThrust, LinearInMass) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  for (int i = 0; i < 1000; ++i) {
    const Vector3d a(u(rng), u(rng), u(rng));
    const double m = 0.05 + std::abs(u(rng));
    EXPECT_EQ(perch::nominal_thrust(a, 2 * m), 2 * perch::nominal_thrust(a, m));
  }
}

TEST(BodyZ, Examples) {
  EXPECT_EQ(perch::body_z(Vector3d::Zero()), Vector3d::UnitZ());
  const Vector3d b = perch::body_z(Vector3d(kGravity, 0, 0));
  EXPECT_NEAR(b.x(), std::sqrt(0.5), 1e-15);
  EXPECT_EQ(b.y(), 0.0);
  EXPECT_NEAR(b.z(), std::sqrt(0.5), 1e-15);
  EXPECT_THROW(perch::body_z(Vector3d(0, 0, -kGravity)), perch::FlatnessError);
  EXPECT_THROW(perch::body_z(Vector3d(1e-7, 0, -kGravity)), perch::FlatnessError);
}

TEST(BodyZ, TerminalAccelerationGivesSurfaceNormal) {
  std::mt19937 rng(17);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.1, 20.0);
  for (int i = 0; i < 10000; ++i) {
    const Vector3d s3 = Vector3d(n(rng), n(rng), n(rng)).normalized();
    const double alpha = u(rng);
    const Vector3d b3 = perch::body_z(alpha * s3 - kGravity * Vector3d::UnitZ());
    EXPECT_LT(std::atan2(b3.cross(s3).norm(), b3.dot(s3)), 1e-9);
  }
}

TEST(CommandedRotation, Examples) {
  EXPECT_TRUE(perch::commanded_rotation(Vector3d::Zero(), 0.0).isApprox(Matrix3d::Identity(), 1e-15));
  const Matrix3d yaw90 = Eigen::AngleAxisd(M_PI / 2, Vector3d::UnitZ()).toRotationMatrix();
  EXPECT_LE((perch::commanded_rotation(Vector3d::Zero(), M_PI / 2) - yaw90).cwiseAbs().maxCoeff(), 1e-15);

  const auto target = perch::inclined_target(Vector3d::Zero(), M_PI / 2);
  const double psi = perch::default_psi_des(target);
  EXPECT_LT((perch::heading_axis(psi) - target.s2()).norm(), 1e-12);
  const Matrix3d r = perch::commanded_rotation(kAlpha * target.s3() - kGravity * Vector3d::UnitZ(), psi);
  EXPECT_LE((r.col(2) - (-Vector3d::UnitX())).norm(), 1e-12);
  EXPECT_TRUE(is_rotation(r, 1e-9));
}

TEST(CommandedRotation, DegenerateHeadingThrows) {
  // Body z horizontal and parallel to the desired heading axis.
  EXPECT_THROW(perch::commanded_rotation(Vector3d(0, kGravity * 10, -kGravity), 0.0), perch::FlatnessError);
}

TEST(CommandedRotation, OrthonormalOnRandomInputs) {
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  int checked = 0;
  while (checked < 10000) {
    const Vector3d a(u(rng), u(rng), u(rng));
    const double psi = u(rng);
    const Vector3d f = a + kGravity * Vector3d::UnitZ();
    if (f.norm() < 1e-3 || perch::heading_axis(psi).cross(f.normalized()).norm() < 1e-3) continue;
    const Matrix3d r = perch::commanded_rotation(a, psi);
    ASSERT_TRUE(is_rotation(r, 1e-9)) << r;
    EXPECT_LE((r.col(2) - f.normalized()).norm(), 1e-12);
    ++checked;
  }
}

TEST(HatVee, AreInverse) {
  std::mt19937 rng(29);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int i = 0; i < 1000; ++i) {
    const Vector3d w(u(rng), u(rng), u(rng));
    const Matrix3d s = perch::hat(w);
    EXPECT_EQ(perch::hat(perch::vee(s)), s);
    EXPECT_EQ(perch::vee(s), w);
    const Vector3d v(u(rng), u(rng), u(rng));
    EXPECT_LE((s * v - w.cross(v)).norm(), 1e-13);
  }
}

TEST(CommandedRates, HoverIsZero) {
  const auto traj = yaw_spin(0.0, 1.0);
  for (double t : {0.0, 3e-6, 0.5, 1.0 - 3e-6, 1.0}) {
    EXPECT_LE(perch::commanded_rates(traj, t).norm(), 1e-6);
    EXPECT_LE(perch::commanded_rate_derivative(traj, t).norm(), 1e-6);
  }
}

TEST(CommandedRates, ConstantYawSpin) {
  for (double omega : {0.5, 3.0, -7.0}) {
    const auto traj = yaw_spin(omega, 2.0);
    for (double t : {0.0, 0.4, 1.0, 1.7, 2.0}) {
      const Vector3d w = perch::commanded_rates(traj, t);
      EXPECT_LE((w - Vector3d(0, 0, omega)).norm(), 1e-5) << "t = " << t;
    }
  }
}

TEST(CommandedRates, MatchClosedFormForTiltingTrajectory) {
  // x(t) is a truncated series of sin(3t), so the vehicle pitches about e2.
  // Rates must agree with a wider central difference of the same rotation.
  const double span = 1.0;
  std::vector<double> c(12, 0.0);
  double fact = 1.0;
  for (int n = 0; n < 12; ++n) {
    if (n > 0) fact *= n;
    if (n % 2 == 1) c[static_cast<std::size_t>(n)] = ((n / 2) % 2 == 0 ? 1 : -1) * std::pow(3.0 * span, n) / fact;
  }
  std::array<std::vector<Polynomial>, perch::kFlatDims> segs;
  segs[perch::kX] = {Polynomial(c)};
  segs[perch::kY] = {Polynomial()};
  segs[perch::kZ] = {Polynomial::constant(1.0)};
  segs[perch::kPsi] = {Polynomial()};
  const PiecewiseTrajectory traj({0.0, span}, segs);
  for (double t : {0.1, 0.5, 0.9}) {
    const Vector3d w = perch::commanded_rates(traj, t);
    auto rot = [&](double s) { return perch::commanded_rotation_at(traj, s); };
    const Matrix3d r_dot = (rot(t + 1e-4) - rot(t - 1e-4)) / 2e-4;
    const Vector3d ref = perch::vee(rot(t).transpose() * r_dot);
    EXPECT_LE((w - ref).norm(), 1e-5 * std::max(1.0, ref.norm()));
    EXPECT_NEAR(w.x(), 0.0, 1e-9);
    EXPECT_NEAR(w.z(), 0.0, 1e-9);
  }
}

TEST(FlatOutputs, ConsistentWithComponents) {
  const auto traj = yaw_spin(1.5, 1.0);
  const auto out = perch::flat_outputs(traj, 0.3, 0.25);
  EXPECT_DOUBLE_EQ(out.thrust, 0.25 * kGravity);
  EXPECT_EQ(out.b3, Vector3d::UnitZ());
  EXPECT_TRUE(is_rotation(out.rotation, 1e-12));
  EXPECT_LE((out.omega - Vector3d(0, 0, 1.5)).norm(), 1e-5);
  EXPECT_LE(out.omega_dot.norm(), 1e-3);
}
