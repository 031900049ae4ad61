#ifndef PERCH_PERCH_PLANNER_HPP
#define PERCH_PERCH_PLANNER_HPP

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "perch/flatness.hpp"
#include "perch/polynomial.hpp"
#include "perch/qp.hpp"
#include "perch/sturm.hpp"
#include "perch/trajectory.hpp"

namespace perch {

class PlannerError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Perching surface pose: position p_S and orientation R_S = [s1 s2 s3].
struct TargetPose {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();

  Eigen::Vector3d s1() const { return rotation.col(0); }
  Eigen::Vector3d s2() const { return rotation.col(1); }
  Eigen::Vector3d s3() const { return rotation.col(2); }

  void validate() const {
    if (!position.allFinite() || !rotation.allFinite()) throw PlannerError("target: non-finite pose");
    if ((rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9)
      throw PlannerError("target: rotation is not orthonormal");
    if (std::abs(rotation.determinant() - 1.0) > 1e-9) throw PlannerError("target: rotation has det != +1");
  }
};

/// Surface tilted by `inclination` (radians) about e2: 0 is a floor-like
/// surface with s3 = e3, pi/2 a wall with s3 = -e1.
inline TargetPose inclined_target(const Eigen::Vector3d& position, double inclination) {
  TargetPose t;
  t.position = position;
  t.rotation = Eigen::AngleAxisd(-inclination, Eigen::Vector3d::UnitY()).toRotationMatrix();
  return t;
}

inline constexpr int kMaxPolyOrder = 18;

struct PlannerConfig {
  double alpha = 3.3;  // m/s^2
  double q = 0.1;
  double dt = 0.01;   // s
  double t_k = 0.15;  // s
  double v_min = 0.4;  // m/s
  double v_max = 0.6;  // m/s
  double tau_min = 0.0;  // N; values <= 0 leave the lower thrust bound inactive
  double tau_max = 4.5;  // N
  int poly_order = 14;
  int cost_order = 4;
  double time_scale_factor = 1.1;
  int max_scale_iters = 50;
  std::optional<double> psi_des;  // radians; derived from s2 when unset

  void validate() const {
    auto fail = [](const std::string& what) { throw PlannerError("planner config: " + what); };
    if (!(alpha > 0)) fail("alpha must be positive");
    if (!(q >= 0 && q < 1)) fail("q must lie in [0, 1)");
    if (!(dt > 0)) fail("dt must be positive");
    if (!(t_k > 0)) fail("t_k must be positive");
    if (!(v_min > 0 && v_min < v_max)) fail("need 0 < v_min < v_max");
    if (!(tau_min < tau_max)) fail("need tau_min < tau_max");
    if (cost_order < 1 || poly_order < 2 * cost_order - 1) fail("poly_order too small for cost_order");
    // Monomial coefficients lose the 1e-7 constraint accuracy beyond this order.
    if (poly_order > kMaxPolyOrder) fail("poly_order must be <= " + std::to_string(kMaxPolyOrder));
    if (!(time_scale_factor > 1)) fail("time_scale_factor must exceed 1");
    if (max_scale_iters < 1) fail("max_scale_iters must be >= 1");
    if (psi_des && !std::isfinite(*psi_des)) fail("psi_des must be finite");
  }
};

/// Flat state at t0. The default is hover at the origin.
struct StartState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  Eigen::Vector3d acceleration = Eigen::Vector3d::Zero();
  Eigen::Vector3d jerk = Eigen::Vector3d::Zero();
  double yaw = 0.0;
};

/// Heading that makes b_{2,des} parallel to the horizontal part of s2.
inline double default_psi_des(const TargetPose& target) {
  const Eigen::Vector3d s2 = target.s2();
  if (std::hypot(s2.x(), s2.y()) < 1e-9) return 0.0;
  return std::atan2(-s2.x(), s2.y());
}

inline double resolved_psi_des(const TargetPose& target, const PlannerConfig& cfg) {
  return cfg.psi_des ? *cfg.psi_des : default_psi_des(target);
}

/// Terminal acceleration alpha s3 - g e3.
inline Eigen::Vector3d terminal_acceleration(const TargetPose& target, const PlannerConfig& cfg) {
  return cfg.alpha * target.s3() - Eigen::Vector3d(0.0, 0.0, kGravity);
}

/// Corridor sample times t_f - t_k + j dt for j = 0 .. round(t_k / dt) - 1.
inline std::vector<double> corridor_times(const PlannerConfig& cfg, double tf) {
  const int count = static_cast<int>(std::lround(cfg.t_k / cfg.dt));
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int j = 0; j < count; ++j) out.push_back(tf - cfg.t_k + j * cfg.dt);
  return out;
}

/// Acceleration box at each corridor sample, ordered so that lower <= upper.
struct AccelBox {
  Eigen::Vector3d lower;
  Eigen::Vector3d upper;
};

inline AccelBox corridor_box(const TargetPose& target, const PlannerConfig& cfg) {
  const Eigen::Vector3d a = terminal_acceleration(target, cfg);
  const Eigen::Vector3d lo = (1.0 - cfg.q) * a;
  const Eigen::Vector3d hi = (1.0 + cfg.q) * a;
  return {lo.cwiseMin(hi), lo.cwiseMax(hi)};
}

namespace spline_detail {

inline long double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0L;
  long double r = 1.0L;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

/// k-th forward difference operator on N + 1 control points, scaled by
/// N! / (N - k)!: maps Bernstein coefficients of p to those of d^k p / ds^k.
inline Eigen::MatrixXd bernstein_derivative(int poly_order, int k) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(poly_order - k + 1, poly_order + 1);
  long double falling = 1.0L;
  for (int i = 0; i < k; ++i) falling *= poly_order - i;
  for (int i = 0; i <= poly_order - k; ++i)
    for (int m = 0; m <= k; ++m)
      d(i, i + m) = static_cast<double>(falling * binomial(k, m) * ((k - m) % 2 == 0 ? 1 : -1));
  return d;
}

/// Bernstein basis values B_{i,M}(s), i = 0..M.
inline Eigen::RowVectorXd bernstein_values(int degree, double s) {
  Eigen::RowVectorXd b(degree + 1);
  for (int i = 0; i <= degree; ++i)
    b(i) = static_cast<double>(binomial(degree, i)) * std::pow(s, i) * std::pow(1.0 - s, degree - i);
  return b;
}

/// Gram matrix \int_0^1 B_{i,M} B_{j,M} ds.
inline Eigen::MatrixXd bernstein_gram(int degree) {
  Eigen::MatrixXd g(degree + 1, degree + 1);
  for (int i = 0; i <= degree; ++i)
    for (int j = 0; j <= degree; ++j)
      g(i, j) = static_cast<double>(binomial(degree, i) * binomial(degree, j) /
                                    ((2 * degree + 1) * binomial(2 * degree, i + j)));
  return g;
}

/// Monomial coefficients of sum_i b_i B_{i,N}(s).
inline std::vector<double> bernstein_to_monomial(const Eigen::VectorXd& b) {
  const int n = static_cast<int>(b.size()) - 1;
  std::vector<double> c(b.size());
  for (int m = 0; m <= n; ++m) {
    long double acc = 0.0L;
    for (int i = 0; i <= m; ++i)
      acc += static_cast<long double>(b(i)) * binomial(n, m) * binomial(m, i) * ((m - i) % 2 == 0 ? 1 : -1);
    c[static_cast<std::size_t>(m)] = static_cast<double>(acc);
  }
  return c;
}

}  // namespace spline_detail

/**
 * Piecewise-polynomial QP over `dims` dimensions sharing one set of knots.
 * Each segment is parameterised by Bernstein control points in normalised
 * time s in [0, 1], which keeps the cost and constraint rows well
 * conditioned at high order; extract() returns monomial coefficients in s.
 * Variables are ordered by dimension, then segment, then control point.
 */
class SplineQp {
 public:
  SplineQp(int dims, std::vector<double> knots, int poly_order, int cost_order)
      : dims_(dims), knots_(std::move(knots)), order_(poly_order), qp_(dims * segments() * (poly_order + 1)) {
    using namespace spline_detail;
    const Eigen::MatrixXd d = bernstein_derivative(poly_order, cost_order);
    const Eigen::MatrixXd unit = d.transpose() * bernstein_gram(poly_order - cost_order) * d;
    for (int k = 0; k <= kMaxDerivative && k <= poly_order; ++k) derivs_.push_back(bernstein_derivative(poly_order, k));
    for (int dim = 0; dim < dims_; ++dim) {
      for (int i = 0; i < segments(); ++i) {
        const double scale = std::pow(duration(i), 1 - 2 * cost_order);
        qp_.cost.block(offset(dim, i), offset(dim, i), width(), width()) = scale * unit;
      }
    }
  }

  int segments() const { return static_cast<int>(knots_.size()) - 1; }
  int width() const { return order_ + 1; }
  double duration(int i) const { return knots_[static_cast<std::size_t>(i) + 1] - knots_[static_cast<std::size_t>(i)]; }
  Eigen::Index offset(int dim, int seg) const {
    return static_cast<Eigen::Index>(dim * segments() + seg) * width();
  }

  /// (segment, normalised time) owning absolute time t, right-closed.
  std::pair<int, double> locate(double t) const {
    const auto it = std::lower_bound(knots_.begin() + 1, knots_.end(), t);
    int seg = static_cast<int>(it - knots_.begin()) - 1;
    seg = std::clamp(seg, 0, segments() - 1);
    return {seg, (t - knots_[static_cast<std::size_t>(seg)]) / duration(seg)};
  }

  /// Row evaluating d^k/dt^k of dimension `dim` on segment `seg` at s.
  Eigen::RowVectorXd row(int dim, int seg, int deriv, double s) const {
    Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(qp_.num_vars());
    if (deriv > order_) return r;
    const Eigen::RowVectorXd local = spline_detail::bernstein_values(order_ - deriv, s) *
                                     derivs_.at(static_cast<std::size_t>(deriv)) * std::pow(duration(seg), -deriv);
    r.segment(offset(dim, seg), width()) = local;
    return r;
  }

  Eigen::RowVectorXd row_at(int dim, int deriv, double t) const {
    const auto [seg, s] = locate(t);
    return row(dim, seg, deriv, s);
  }

  void fix(int dim, int seg, int deriv, double s, double value) { qp_.add_equality(row(dim, seg, deriv, s), value); }

  /// Continuity of derivatives 0..max_deriv at every interior knot.
  void add_continuity(int max_deriv) {
    for (int dim = 0; dim < dims_; ++dim)
      for (int i = 0; i + 1 < segments(); ++i)
        for (int k = 0; k <= std::min(max_deriv, order_); ++k)
          qp_.add_equality(row(dim, i, k, 1.0) - row(dim, i + 1, k, 0.0), 0.0);
  }

  QpProblem& problem() { return qp_; }
  const QpProblem& problem() const { return qp_; }

  std::vector<Polynomial> extract(const Eigen::VectorXd& c, int dim) const {
    std::vector<Polynomial> out;
    for (int i = 0; i < segments(); ++i)
      out.emplace_back(spline_detail::bernstein_to_monomial(c.segment(offset(dim, i), width())));
    return out;
  }

 private:
  int dims_;
  std::vector<double> knots_;
  int order_;
  std::vector<Eigen::MatrixXd> derivs_;
  QpProblem qp_;
};

/// Three equality rows fixing the terminal acceleration to alpha s3 - g e3.
inline ConstraintRows terminal_acceleration_constraint(const TargetPose& target, const PlannerConfig& cfg,
                                                       double duration = 1.0) {
  const Eigen::RowVectorXd acc = basis_row(cfg.poly_order, 2, 1.0, duration);
  const Eigen::Index w = acc.size();
  ConstraintRows out{Eigen::MatrixXd::Zero(3, 3 * w), terminal_acceleration(target, cfg)};
  for (int d = 0; d < 3; ++d) out.matrix.block(d, d * w, 1, w) = acc;
  return out;
}

struct BoxedRow {
  Eigen::RowVectorXd row;
  double lower = 0.0;
  double upper = 0.0;
};

/// The s3-projected terminal velocity row over stacked (x, y, z) end-segment
/// coefficients.
inline BoxedRow impact_velocity_constraint(const TargetPose& target, const PlannerConfig& cfg,
                                           double duration = 1.0) {
  const Eigen::RowVectorXd vel = basis_row(cfg.poly_order, 1, 1.0, duration);
  const Eigen::Index w = vel.size();
  BoxedRow out{Eigen::RowVectorXd::Zero(3 * w), cfg.v_min, cfg.v_max};
  for (int d = 0; d < 3; ++d) out.row.segment(d * w, w) = target.s3()(d) * vel;
  return out;
}

/// One acceleration box per corridor sample time and axis, for a single
/// segment ending at tf with the given duration.
inline std::vector<BoxedRow> pre_impact_corridor(const TargetPose& target, const PlannerConfig& cfg, double tf,
                                                 double duration) {
  const AccelBox box = corridor_box(target, cfg);
  const Eigen::Index w = cfg.poly_order + 1;
  std::vector<BoxedRow> out;
  for (double t : corridor_times(cfg, tf)) {
    const double s = 1.0 - (tf - t) / duration;
    for (int d = 0; d < 3; ++d) {
      BoxedRow r{Eigen::RowVectorXd::Zero(3 * w), box.lower(d), box.upper(d)};
      r.row.segment(d * w, w) = basis_row(cfg.poly_order, 2, s, duration);
      out.push_back(std::move(r));
    }
  }
  return out;
}

/// m^2 |a + g e3|^2 on segment i in its normalised time s in [0, 1].
inline Polynomial squared_thrust_polynomial(const PiecewiseTrajectory& traj, std::size_t i, double mass) {
  const double inv_t2 = 1.0 / (traj.duration(i) * traj.duration(i));
  const Polynomial ax = inv_t2 * differentiate(traj.segment(kX, i), 2);
  const Polynomial ay = inv_t2 * differentiate(traj.segment(kY, i), 2);
  const Polynomial az = inv_t2 * differentiate(traj.segment(kZ, i), 2) + Polynomial::constant(kGravity);
  return (mass * mass) * (ax * ax + ay * ay + az * az);
}

/// Maximum of p on [lo, hi]: grid scan refined by golden-section search.
inline double polynomial_max(const Polynomial& p, double lo = 0.0, double hi = 1.0, int grid = 256) {
  double best = std::max(p(lo), p(hi));
  const double step = (hi - lo) / grid;
  for (int k = 1; k < grid; ++k) {
    const double t = lo + k * step;
    const double v = p(t);
    if (v >= p(t - step) && v >= p(std::min(hi, t + step))) {
      double a = t - step, b = std::min(hi, t + step);
      const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
      for (int it = 0; it < 80; ++it) {
        const double c = b - phi * (b - a), d = a + phi * (b - a);
        if (p(c) > p(d)) b = d;
        else a = c;
      }
      best = std::max({best, v, p(0.5 * (a + b))});
    } else {
      best = std::max(best, v);
    }
  }
  return best;
}

struct SegmentCertificate {
  GbcResult upper;
  GbcResult lower;
  bool certified() const { return upper.certified() && lower.certified(); }
};

/// Thrust certificate of every segment against tau_max^2 and, when
/// tau_min > 0, against tau_min^2 from below.
inline std::vector<SegmentCertificate> certify_thrust(const PiecewiseTrajectory& traj, double mass,
                                                      double tau_min, double tau_max) {
  std::vector<SegmentCertificate> out;
  for (std::size_t i = 0; i < traj.num_segments(); ++i) {
    const Polynomial h = squared_thrust_polynomial(traj, i, mass);
    SegmentCertificate cert;
    cert.upper = std::isinf(tau_max) ? GbcResult{GbcVerdict::kCertified, 0} : gbc(h, tau_max * tau_max, 0.0, 1.0);
    cert.lower = tau_min > 0 ? gbc(-h, -tau_min * tau_min, 0.0, 1.0) : GbcResult{GbcVerdict::kCertified, 0};
    out.push_back(cert);
  }
  return out;
}

inline bool all_certified(const std::vector<SegmentCertificate>& certs) {
  return std::all_of(certs.begin(), certs.end(), [](const auto& c) { return c.certified(); });
}

struct IterationRecord {
  int index = 0;
  double horizon = 0.0;
  double peak_thrust = 0.0;
  double peak_squared_thrust = 0.0;
  bool certified = false;
  int qp_iterations = 0;
  std::vector<SegmentCertificate> certificate;
  std::shared_ptr<const PiecewiseTrajectory> trajectory;
};

struct PerchPlan {
  std::shared_ptr<const PiecewiseTrajectory> trajectory;
  std::vector<IterationRecord> iterations;
  std::vector<SegmentCertificate> certificate;
  TargetPose target;
  PlannerConfig config;
  double mass = 0.0;
  double psi_des = 0.0;

  const PiecewiseTrajectory& traj() const { return *trajectory; }
};

enum class PlanFailure { kInfeasible, kCertificateFailed };

class PlanError : public std::runtime_error {
 public:
  PlanError(PlanFailure kind, const std::string& what, std::vector<IterationRecord> log,
            std::shared_ptr<const PiecewiseTrajectory> best)
      : std::runtime_error(what), kind_(kind), log_(std::move(log)), best_(std::move(best)) {}

  PlanFailure kind() const { return kind_; }
  const std::vector<IterationRecord>& iterations() const { return log_; }
  /// Lowest-peak-thrust attempt, if any QP was solved.
  const std::shared_ptr<const PiecewiseTrajectory>& best_attempt() const { return best_; }

 private:
  PlanFailure kind_;
  std::vector<IterationRecord> log_;
  std::shared_ptr<const PiecewiseTrajectory> best_;
};

/**
 * Knot times from t0 = 0 through the given points, with segment durations
 * proportional to Euclidean distance, floored at `min_segment` and summing
 * to `horizon`.
 */
inline std::vector<double> allocate_knots(const std::vector<Eigen::Vector3d>& points, double horizon,
                                          double min_segment = 0.1) {
  if (points.size() < 2) throw PlannerError("allocate_knots: need at least two points");
  const std::size_t f = points.size() - 1;
  if (!(horizon >= min_segment * static_cast<double>(f)))
    throw PlannerError("allocate_knots: horizon too short for the minimum segment duration");
  std::vector<double> dist(f);
  for (std::size_t i = 0; i < f; ++i) dist[i] = (points[i + 1] - points[i]).norm();
  std::vector<bool> floored(f, false);
  std::vector<double> dur(f, horizon / static_cast<double>(f));
  // Segments that fall below the floor are pinned there and the remaining
  // time is shared among the rest; repeat until no new segment is pinned.
  for (std::size_t pass = 0; pass <= f; ++pass) {
    double free_time = horizon, free_dist = 0.0;
    for (std::size_t i = 0; i < f; ++i) {
      if (floored[i]) free_time -= min_segment;
      else free_dist += dist[i];
    }
    bool changed = false;
    std::size_t free_count = 0;
    for (std::size_t i = 0; i < f; ++i) free_count += floored[i] ? 0 : 1;
    for (std::size_t i = 0; i < f; ++i) {
      if (floored[i]) {
        dur[i] = min_segment;
        continue;
      }
      dur[i] = free_dist > 0 ? free_time * dist[i] / free_dist : free_time / static_cast<double>(free_count);
      if (dur[i] < min_segment) {
        floored[i] = true;
        changed = true;
      }
    }
    if (!changed) break;
  }
  std::vector<double> knots(f + 1, 0.0);
  for (std::size_t i = 0; i < f; ++i) knots[i + 1] = knots[i] + dur[i];
  knots.back() = horizon;
  return knots;
}

/// Everything the QP is assembled from. Re-assembled from scratch each time
/// the horizon is stretched.
struct PlanningProblem {
  StartState start;
  std::vector<Eigen::Vector3d> waypoints;  // interior position constraints
  TargetPose target;
  PlannerConfig config;
  double mass = 0.25;
  std::vector<double> knots;

  double horizon() const { return knots.back() - knots.front(); }
};

inline PlanningProblem scale_time(const PlanningProblem& problem, double factor) {
  PlanningProblem out = problem;
  out.knots = scale_time(problem.knots, factor);
  return out;
}

inline bool axis_aligned(const Eigen::Vector3d& v, int* axis) {
  for (int a = 0; a < 3; ++a) {
    bool others_zero = true;
    for (int b = 0; b < 3; ++b)
      if (b != a && std::abs(v(b)) > 1e-12) others_zero = false;
    if (others_zero && std::abs(std::abs(v(a)) - 1.0) <= 1e-12) {
      *axis = a;
      return true;
    }
  }
  return false;
}

namespace planner_detail {

struct GroupSolution {
  std::vector<std::vector<Polynomial>> segments;  // per axis in the group
  int iterations = 0;
};

// Translation axes in `axes` as one QP. Coupling rows (the impact velocity)
// only include the group's axes; this is exact when the group holds every
// axis with a nonzero s3 component.
inline GroupSolution solve_translation(const PlanningProblem& pb, const std::vector<int>& axes) {
  const PlannerConfig& cfg = pb.config;
  SplineQp sq(static_cast<int>(axes.size()), pb.knots, cfg.poly_order, cfg.cost_order);
  const int f = sq.segments();
  const double tf = pb.knots.back();
  const Eigen::Vector3d a_final = terminal_acceleration(pb.target, cfg);
  const AccelBox box = corridor_box(pb.target, cfg);
  const std::vector<double> window = corridor_times(cfg, tf);
  Eigen::RowVectorXd vel_row = Eigen::RowVectorXd::Zero(sq.problem().num_vars());
  bool has_vel = false;
  for (std::size_t g = 0; g < axes.size(); ++g) {
    const int d = static_cast<int>(g);
    const int a = axes[g];
    sq.fix(d, 0, 0, 0.0, pb.start.position(a));
    sq.fix(d, 0, 1, 0.0, pb.start.velocity(a));
    sq.fix(d, 0, 2, 0.0, pb.start.acceleration(a));
    sq.fix(d, 0, 3, 0.0, pb.start.jerk(a));
    for (int i = 1; i < f; ++i) sq.fix(d, i - 1, 0, 1.0, pb.waypoints[static_cast<std::size_t>(i) - 1](a));
    sq.fix(d, f - 1, 0, 1.0, pb.target.position(a));
    sq.fix(d, f - 1, 2, 1.0, a_final(a));
    const double s3a = pb.target.s3()(a);
    // A single-axis group only exists when s3 is axis-aligned; rounding
    // residue in the other components is not a constraint.
    const bool carries_velocity = axes.size() == 1 ? std::abs(s3a) > 0.5 : s3a != 0.0;
    if (carries_velocity) {
      vel_row += s3a * sq.row(d, f - 1, 1, 1.0);
      has_vel = true;
    }
    for (double t : window) sq.problem().add_inequality(sq.row_at(d, 2, t), box.lower(a), box.upper(a));
  }
  if (has_vel) sq.problem().add_inequality(vel_row, cfg.v_min, cfg.v_max);
  sq.add_continuity(4);
  const QpSolution sol = solve(sq.problem());
  if (!sol.solved()) {
    char detail[64];
    std::snprintf(detail, sizeof detail, " (infeasibility %.3g)", sol.infeasibility);
    throw PlannerError(std::string("translation QP ") + to_string(sol.status) + detail);
  }
  GroupSolution out;
  out.iterations = sol.iterations;
  for (std::size_t g = 0; g < axes.size(); ++g) out.segments.push_back(sq.extract(sol.coeffs, static_cast<int>(g)));
  return out;
}

inline GroupSolution solve_yaw(const PlanningProblem& pb, double psi_des) {
  const PlannerConfig& cfg = pb.config;
  SplineQp sq(1, pb.knots, cfg.poly_order, cfg.cost_order);
  const int f = sq.segments();
  sq.fix(0, 0, 0, 0.0, pb.start.yaw);
  for (int k = 1; k <= 3; ++k) sq.fix(0, 0, k, 0.0, 0.0);
  sq.fix(0, f - 1, 0, 1.0, psi_des);
  for (int k = 1; k <= 3; ++k) sq.fix(0, f - 1, k, 1.0, 0.0);
  sq.add_continuity(4);
  const QpSolution sol = solve(sq.problem());
  if (!sol.solved()) throw PlannerError(std::string("yaw QP ") + to_string(sol.status));
  return {{sq.extract(sol.coeffs, 0)}, sol.iterations};
}

}  // namespace planner_detail

/// Solves the QPs for one fixed set of knots.
inline std::pair<std::shared_ptr<const PiecewiseTrajectory>, int> solve_once(const PlanningProblem& pb,
                                                                            double psi_des) {
  using namespace planner_detail;
  std::array<std::vector<Polynomial>, kFlatDims> segments;
  int iterations = 0;
  int axis = -1;
  if (axis_aligned(pb.target.s3(), &axis)) {
    for (int a = 0; a < 3; ++a) {
      GroupSolution g = solve_translation(pb, {a});
      segments[static_cast<std::size_t>(a)] = std::move(g.segments[0]);
      iterations += g.iterations;
    }
  } else {
    GroupSolution g = solve_translation(pb, {0, 1, 2});
    for (int a = 0; a < 3; ++a) segments[static_cast<std::size_t>(a)] = std::move(g.segments[static_cast<std::size_t>(a)]);
    iterations += g.iterations;
  }
  GroupSolution yaw = solve_yaw(pb, psi_des);
  segments[kPsi] = std::move(yaw.segments[0]);
  iterations += yaw.iterations;
  return {std::make_shared<const PiecewiseTrajectory>(pb.knots, std::move(segments)), iterations};
}

/**
 * Plans a perching trajectory from `start` through `waypoints` to `target`
 * and stretches the horizon by `time_scale_factor` until the thrust
 * certificate holds on every segment.
 */
inline PerchPlan plan(const StartState& start, const TargetPose& target, const PlannerConfig& cfg, double mass,
                      double horizon, const std::vector<Eigen::Vector3d>& waypoints = {}) {
  cfg.validate();
  target.validate();
  if (!(mass > 0)) throw PlannerError("plan: mass must be positive");
  if (!start.position.allFinite() || !start.velocity.allFinite() || !start.acceleration.allFinite() ||
      !start.jerk.allFinite() || !std::isfinite(start.yaw))
    throw PlannerError("plan: start state must be finite");
  if (!(horizon > cfg.t_k)) throw PlannerError("plan: horizon must exceed t_k");

  PlanningProblem pb;
  pb.start = start;
  pb.waypoints = waypoints;
  pb.target = target;
  pb.config = cfg;
  pb.mass = mass;
  std::vector<Eigen::Vector3d> points{start.position};
  points.insert(points.end(), waypoints.begin(), waypoints.end());
  points.push_back(target.position);
  pb.knots = allocate_knots(points, horizon);

  const double psi_des = resolved_psi_des(target, cfg);
  std::vector<IterationRecord> log;
  std::shared_ptr<const PiecewiseTrajectory> best;
  double best_peak = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < cfg.max_scale_iters; ++iter) {
    if (iter > 0) pb = scale_time(pb, cfg.time_scale_factor);
    IterationRecord rec;
    rec.index = iter;
    rec.horizon = pb.horizon();
    try {
      auto [traj, qp_iters] = solve_once(pb, psi_des);
      rec.trajectory = traj;
      rec.qp_iterations = qp_iters;
    } catch (const PlannerError& e) {
      log.push_back(rec);
      throw PlanError(PlanFailure::kInfeasible, std::string("plan: ") + e.what(), std::move(log), best);
    }
    for (std::size_t i = 0; i < rec.trajectory->num_segments(); ++i)
      rec.peak_squared_thrust =
          std::max(rec.peak_squared_thrust, polynomial_max(squared_thrust_polynomial(*rec.trajectory, i, mass)));
    rec.peak_thrust = std::sqrt(rec.peak_squared_thrust);
    rec.certificate = certify_thrust(*rec.trajectory, mass, cfg.tau_min, cfg.tau_max);
    rec.certified = all_certified(rec.certificate);
    if (rec.peak_thrust < best_peak) {
      best_peak = rec.peak_thrust;
      best = rec.trajectory;
    }
    log.push_back(rec);
    if (rec.certified) {
      PerchPlan out;
      out.trajectory = rec.trajectory;
      out.certificate = rec.certificate;
      out.iterations = std::move(log);
      out.target = target;
      out.config = cfg;
      out.mass = mass;
      out.psi_des = psi_des;
      return out;
    }
  }
  throw PlanError(PlanFailure::kCertificateFailed,
                  "plan: thrust certificate failed after " + std::to_string(cfg.max_scale_iters) + " iterations",
                  std::move(log), best);
}

/**
 * Target pose from four corner poses: mean position and the normalised sum
 * of the quaternions after flipping each into the hemisphere of the first.
 */
inline TargetPose average_target_pose(const std::array<Eigen::Vector3d, 4>& positions,
                                      const std::array<Eigen::Quaterniond, 4>& quaternions) {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : positions) mean += p;
  mean /= 4.0;
  const Eigen::Vector4d ref = quaternions[0].coeffs();
  Eigen::Vector4d sum = Eigen::Vector4d::Zero();
  for (const auto& q : quaternions) {
    if (std::abs(q.norm() - 1.0) > 1e-6) throw PlannerError("average_target_pose: quaternions must be unit");
    const Eigen::Vector4d c = q.coeffs();
    sum += c.dot(ref) < 0 ? Eigen::Vector4d(-c) : c;
  }
  if (sum.norm() < 1e-6) throw PlannerError("average_target_pose: quaternion sum is degenerate");
  sum.normalize();
  TargetPose out;
  out.position = mean;
  out.rotation = Eigen::Quaterniond(sum(3), sum(0), sum(1), sum(2)).toRotationMatrix();
  return out;
}

/// Post-hoc check of every perching constraint on a trajectory.
struct ConstraintReport {
  Eigen::Vector3d terminal_acceleration = Eigen::Vector3d::Zero();
  double terminal_acceleration_error = 0.0;  // max abs component, m/s^2
  double terminal_position_error = 0.0;
  double impact_velocity = 0.0;      // v(tf) . s3
  double impact_velocity_slack = 0.0;  // min(v - v_min, v_max - v)
  double corridor_min_slack = 0.0;   // over every window sample and axis
  int corridor_samples = 0;
  double dense_peak_thrust = 0.0;    // 1e4 samples per segment
  double dense_min_thrust = 0.0;
  bool thrust_certified = false;
  double terminal_b3_angle = 0.0;    // angle between body z at tf and s3
  double continuity_jump = 0.0;      // max over interior knots and orders 0..4

  bool satisfied(const PlannerConfig& cfg) const {
    const bool upper = std::isinf(cfg.tau_max) || dense_peak_thrust <= cfg.tau_max * (1.0 + 1e-9);
    const bool lower = cfg.tau_min <= 0 || dense_min_thrust >= cfg.tau_min * (1.0 - 1e-9);
    return terminal_acceleration_error <= 1e-6 && impact_velocity_slack >= -1e-7 && corridor_min_slack >= -1e-7 &&
           upper && lower && thrust_certified;
  }
};

inline ConstraintReport check_constraints(const PiecewiseTrajectory& traj, const TargetPose& target,
                                          const PlannerConfig& cfg, double mass, int dense_per_segment = 10000) {
  ConstraintReport r;
  const double tf = traj.tf();
  const Eigen::Vector3d want = terminal_acceleration(target, cfg);
  r.terminal_acceleration = traj.evaluate(tf, 2).head<3>();
  r.terminal_acceleration_error = (r.terminal_acceleration - want).cwiseAbs().maxCoeff();
  r.terminal_position_error = (traj.evaluate(tf, 0).head<3>() - target.position).norm();
  r.impact_velocity = traj.evaluate(tf, 1).head<3>().dot(target.s3());
  r.impact_velocity_slack = std::min(r.impact_velocity - cfg.v_min, cfg.v_max - r.impact_velocity);
  const AccelBox box = corridor_box(target, cfg);
  r.corridor_min_slack = std::numeric_limits<double>::infinity();
  for (double t : corridor_times(cfg, tf)) {
    const Eigen::Vector3d a = traj.evaluate(t, 2).head<3>();
    for (int d = 0; d < 3; ++d) r.corridor_min_slack = std::min({r.corridor_min_slack, a(d) - box.lower(d), box.upper(d) - a(d)});
    ++r.corridor_samples;
  }
  r.dense_min_thrust = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < traj.num_segments(); ++i) {
    for (int k = 0; k <= dense_per_segment; ++k) {
      const double t = traj.knots()[i] + traj.duration(i) * k / dense_per_segment;
      const double tau = nominal_thrust(traj.evaluate_in_segment(i, t, 2).head<3>(), mass);
      r.dense_peak_thrust = std::max(r.dense_peak_thrust, tau);
      r.dense_min_thrust = std::min(r.dense_min_thrust, tau);
    }
    if (i + 1 < traj.num_segments()) {
      const double knot = traj.knots()[i + 1];
      for (int k = 0; k <= kMaxDerivative; ++k)
        r.continuity_jump = std::max(
            r.continuity_jump,
            (traj.evaluate_in_segment(i, knot, k) - traj.evaluate_in_segment(i + 1, knot, k)).cwiseAbs().maxCoeff());
    }
  }
  r.thrust_certified = all_certified(certify_thrust(traj, mass, cfg.tau_min, cfg.tau_max));
  const Eigen::Vector3d b3 = body_z(r.terminal_acceleration);
  r.terminal_b3_angle = std::atan2(b3.cross(target.s3()).norm(), b3.dot(target.s3()));
  return r;
}

}  // namespace perch

#endif  // PERCH_PERCH_PLANNER_HPP
