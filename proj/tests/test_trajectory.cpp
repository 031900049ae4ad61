#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "perch/perch_planner.hpp"
#include "perch/trajectory.hpp"

using perch::FlatVector;
using perch::PiecewiseTrajectory;
using perch::Polynomial;

namespace {

PiecewiseTrajectory constant_trajectory(double value, std::vector<double> knots) {
  std::array<std::vector<Polynomial>, perch::kFlatDims> segs;
  for (auto& dim : segs) dim.assign(knots.size() - 1, Polynomial::constant(value));
  return PiecewiseTrajectory(std::move(knots), segs);
}

// Minimum-snap rest-to-rest move of x from 0 to `goal`; other channels stay at 0.
PiecewiseTrajectory rest_to_rest(const std::vector<double>& knots, double goal, int order = 14) {
  perch::SplineQp sq(1, knots, order, 4);
  const int last = sq.segments() - 1;
  sq.fix(0, 0, 0, 0.0, 0.0);
  sq.fix(0, last, 0, 1.0, goal);
  for (int k = 1; k <= 3; ++k) {
    sq.fix(0, 0, k, 0.0, 0.0);
    sq.fix(0, last, k, 1.0, 0.0);
  }
  sq.add_continuity(4);
  const auto sol = perch::solve(sq.problem());
  EXPECT_TRUE(sol.solved());
  std::array<std::vector<Polynomial>, perch::kFlatDims> segs;
  segs[perch::kX] = sq.extract(sol.coeffs, 0);
  for (int d = 1; d < perch::kFlatDims; ++d) segs[static_cast<std::size_t>(d)].assign(knots.size() - 1, Polynomial());
  return PiecewiseTrajectory(knots, segs);
}

PiecewiseTrajectory random_trajectory(unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> knots{0.0, 0.3, 0.8, 1.0};
  std::array<std::vector<Polynomial>, perch::kFlatDims> segs;
  for (auto& dim : segs)
    for (int i = 0; i < 3; ++i) {
      std::vector<double> c(8);
      for (auto& x : c) x = u(rng);
      dim.emplace_back(c);
    }
  return PiecewiseTrajectory(knots, segs);
}

}  // namespace

TEST(Trajectory, ConstantValueAndZeroDerivatives) {
  const auto traj = constant_trajectory(2.0, {0.0, 0.5, 1.0});
  for (double t : {0.0, 0.25, 0.5, 0.9, 1.0}) {
    EXPECT_EQ(traj.evaluate(t, 0), FlatVector::Constant(2.0));
    for (int k = 1; k <= 4; ++k) EXPECT_EQ(traj.evaluate(t, k), FlatVector::Zero());
  }
}

TEST(Trajectory, RejectsBadConstructionAndRange) {
  EXPECT_THROW(constant_trajectory(1.0, {0.0}), perch::TrajectoryError);
  EXPECT_THROW(constant_trajectory(1.0, {0.0, 0.0, 1.0}), perch::TrajectoryError);
  std::array<std::vector<Polynomial>, perch::kFlatDims> segs;
  for (auto& dim : segs) dim.assign(2, Polynomial::constant(1.0));
  segs[perch::kPsi].pop_back();
  EXPECT_THROW(PiecewiseTrajectory({0.0, 0.5, 1.0}, segs), perch::TrajectoryError);

  const auto traj = constant_trajectory(1.0, {0.0, 1.0});
  EXPECT_THROW(traj.evaluate(-1e-9), perch::TrajectoryError);
  EXPECT_THROW(traj.evaluate(1.0 + 1e-9), perch::TrajectoryError);
  EXPECT_THROW(traj.evaluate(0.5, 5), perch::TrajectoryError);
}

TEST(Trajectory, KnotBelongsToEarlierSegment) {
  const auto traj = constant_trajectory(0.0, {0.0, 0.5, 1.0});
  EXPECT_EQ(traj.segment_index(0.0), 0u);
  EXPECT_EQ(traj.segment_index(0.5), 0u);
  EXPECT_EQ(traj.segment_index(std::nextafter(0.5, 1.0)), 1u);
  EXPECT_EQ(traj.segment_index(1.0), 1u);
}

TEST(Trajectory, ExactOnLowDegreeClosedForms) {
  // x(t) = 1 + 2t - 3t^2 on [0, 2] split at t = 0.7; segment i holds the
  // polynomial in s = (t - t_i) / T_i.
  const std::vector<double> knots{0.0, 0.7, 2.0};
  std::array<std::vector<Polynomial>, perch::kFlatDims> segs;
  for (std::size_t i = 0; i < 2; ++i) {
    const double t0 = knots[i], T = knots[i + 1] - knots[i];
    segs[perch::kX].push_back(Polynomial{1 + 2 * t0 - 3 * t0 * t0, (2 - 6 * t0) * T, -3 * T * T});
    for (int d = 1; d < perch::kFlatDims; ++d) segs[static_cast<std::size_t>(d)].push_back(Polynomial::constant(d));
  }
  const PiecewiseTrajectory traj(knots, segs);
  for (double t = 0.0; t <= 2.0; t += 0.05) {
    EXPECT_NEAR(traj.evaluate(t, 0)(0), 1 + 2 * t - 3 * t * t, 1e-14);
    EXPECT_NEAR(traj.evaluate(t, 1)(0), 2 - 6 * t, 1e-14);
    EXPECT_NEAR(traj.evaluate(t, 2)(0), -6.0, 1e-14);
    EXPECT_EQ(traj.evaluate(t, 3)(0), 0.0);
  }
}

TEST(Trajectory, RestToRestBoundaryAndContinuity) {
  const auto traj = rest_to_rest({0.0, 0.4, 1.0}, 1.0);
  EXPECT_NEAR(traj.evaluate(0.0, 0)(0), 0.0, 1e-7);
  EXPECT_NEAR(traj.evaluate(1.0, 0)(0), 1.0, 1e-7);
  for (int k = 1; k <= 3; ++k) {
    EXPECT_NEAR(traj.evaluate(0.0, k)(0), 0.0, 1e-7);
    EXPECT_NEAR(traj.evaluate(1.0, k)(0), 0.0, 1e-7);
  }
  for (int k = 0; k <= 4; ++k) {
    const FlatVector left = traj.evaluate_in_segment(0, 0.4, k);
    const FlatVector right = traj.evaluate_in_segment(1, 0.4, k);
    EXPECT_LE((left - right).cwiseAbs().maxCoeff(), 1e-6) << "order " << k;
  }
}

TEST(Trajectory, UniformSampleCounts) {
  const auto traj = constant_trajectory(0.0, {0.0, 1.0});
  const auto samples = traj.sample_uniform(0.01);
  ASSERT_EQ(samples.size(), 101u);
  EXPECT_EQ(samples.front().time, 0.0);
  EXPECT_EQ(samples.back().time, 1.0);

  const auto two = traj.sample_uniform(5.0);
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(two[0].time, 0.0);
  EXPECT_EQ(two[1].time, 1.0);

  const auto off_grid = constant_trajectory(0.0, {0.0, 1.05}).sample_uniform(0.1);
  ASSERT_EQ(off_grid.size(), 12u);
  EXPECT_EQ(off_grid.back().time, 1.05);
  EXPECT_THROW(traj.sample_uniform(0.0), perch::TrajectoryError);
}

TEST(Trajectory, SamplesReproduceEvaluateBitwise) {
  const auto traj = random_trajectory(3);
  for (const auto& s : traj.sample_uniform(0.013)) {
    for (int k = 0; k <= 4; ++k) EXPECT_EQ(s.d[static_cast<std::size_t>(k)], traj.evaluate(s.time, k));
  }
}

TEST(Trajectory, CsvRoundTripIsBitExact) {
  const auto traj = random_trajectory(11);
  std::stringstream ss;
  perch::write_trajectory_csv(ss, traj, 0.01);
  const std::string text = ss.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), perch::trajectory_csv_header());
  EXPECT_EQ(perch::trajectory_csv_header().substr(0, 16), "t,x,y,z,psi,dx,d");
  const auto back = perch::read_trajectory_csv(ss);
  const auto direct = traj.sample_uniform(0.01);
  ASSERT_EQ(back.size(), direct.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].time, direct[i].time);
    for (std::size_t k = 0; k <= 4; ++k) EXPECT_EQ(back[i].d[k], direct[i].d[k]);
  }
}

TEST(Trajectory, CsvReaderRejectsMalformedInput) {
  std::stringstream bad_header("t,x\n0,1\n");
  EXPECT_THROW(perch::read_trajectory_csv(bad_header), perch::TrajectoryError);
  std::stringstream short_row(perch::trajectory_csv_header() + "\n0,1,2\n");
  EXPECT_THROW(perch::read_trajectory_csv(short_row), perch::TrajectoryError);
}

TEST(TimeScaling, KnotsScaleByFactor) {
  const auto scaled = perch::scale_time(std::vector<double>{0.0, 1.0}, 1.4);
  ASSERT_EQ(scaled.size(), 2u);
  EXPECT_EQ(scaled[0], 0.0);
  EXPECT_DOUBLE_EQ(scaled[1], 1.4);
  const auto three = perch::scale_time(std::vector<double>{0.5, 1.0, 2.0}, 2.0);
  EXPECT_EQ(three, (std::vector<double>{0.5, 1.5, 3.5}));
  EXPECT_THROW(perch::scale_time(std::vector<double>{0.0, 1.0}, 1.0), std::invalid_argument);
}

TEST(TimeScaling, RestToRestDerivativesScaleByPowerOfFactor) {
  const std::vector<double> knots{0.0, 0.35, 1.0};
  const auto base = rest_to_rest(knots, 1.0);
  for (double factor : {1.1, 1.4, 2.0}) {
    const auto scaled = rest_to_rest(perch::scale_time(knots, factor), 1.0);
    for (int k = 0; k <= 4; ++k) {
      double peak = 0.0, worst = 0.0;
      for (double t = 0.0; t <= 1.0; t += 0.01) {
        const double ref = base.evaluate(t, k)(0) / std::pow(factor, k);
        const double got = scaled.evaluate(std::min(factor * t, scaled.tf()), k)(0);
        peak = std::max(peak, std::abs(ref));
        worst = std::max(worst, std::abs(got - ref));
      }
      EXPECT_LE(worst, 1e-5 * peak) << "factor " << factor << " order " << k;
    }
  }
}

TEST(TimeScaling, SmallFactorBarelyChangesPeakThrust) {
  const std::vector<double> knots{0.0, 1.0};
  auto peak = [](const PiecewiseTrajectory& traj) {
    double best = 0.0;
    for (double t = 0.0; t <= traj.tf(); t += traj.tf() / 2000)
      best = std::max(best, perch::nominal_thrust(traj.evaluate(t, 2).head<3>(), 0.25));
    return best;
  };
  const double p0 = peak(rest_to_rest(knots, 1.0));
  const double p1 = peak(rest_to_rest(perch::scale_time(knots, 1.0 + 1e-6), 1.0));
  EXPECT_NEAR(p1, p0, 1e-4 * p0);
}
