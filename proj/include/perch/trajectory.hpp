#ifndef PERCH_TRAJECTORY_HPP
#define PERCH_TRAJECTORY_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "perch/polynomial.hpp"

namespace perch {

class TrajectoryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Flat outputs in storage order.
enum FlatAxis : int { kX = 0, kY = 1, kZ = 2, kPsi = 3 };
inline constexpr int kFlatDims = 4;
inline constexpr int kMaxDerivative = 4;

using FlatVector = Eigen::Vector4d;

/// Derivative stack of the flat outputs at one time: d[k] is the k-th time
/// derivative of (x, y, z, psi).
struct FlatSample {
  double time = 0.0;
  std::array<FlatVector, kMaxDerivative + 1> d{};

  const FlatVector& value() const { return d[0]; }
  Eigen::Vector3d position() const { return d[0].head<3>(); }
  Eigen::Vector3d velocity() const { return d[1].head<3>(); }
  Eigen::Vector3d acceleration() const { return d[2].head<3>(); }
  double yaw() const { return d[0](kPsi); }
};

/**
 * Piecewise polynomial in the four flat outputs.
 *
 * Segment i covers [t_i, t_{i+1}] and is stored in normalised time
 * s = (t - t_i) / (t_{i+1} - t_i), so the k-th time derivative carries a
 * factor T_i^-k. Intervals are right-closed: a knot belongs to the earlier
 * segment, and t_0 to the first.
 */
class PiecewiseTrajectory {
 public:
  using SegmentList = std::vector<Polynomial>;

  PiecewiseTrajectory(std::vector<double> knots, std::array<SegmentList, kFlatDims> segments)
      : knots_(std::move(knots)), segments_(std::move(segments)) {
    if (knots_.size() < 2) throw TrajectoryError("trajectory: need at least two knots");
    for (std::size_t i = 0; i < knots_.size(); ++i) {
      if (!std::isfinite(knots_[i])) throw TrajectoryError("trajectory: non-finite knot");
      if (i > 0 && !(knots_[i] > knots_[i - 1])) throw TrajectoryError("trajectory: knots must strictly increase");
    }
    for (const auto& dim : segments_) {
      if (dim.size() != knots_.size() - 1) throw TrajectoryError("trajectory: segment count must equal knots - 1");
    }
    for (int d = 0; d < kFlatDims; ++d) {
      auto& table = derivs_[static_cast<std::size_t>(d)];
      table.resize(num_segments());
      for (std::size_t i = 0; i < num_segments(); ++i) {
        table[i][0] = segments_[static_cast<std::size_t>(d)][i];
        for (int k = 1; k <= kMaxDerivative; ++k) table[i][static_cast<std::size_t>(k)] = differentiate(table[i][static_cast<std::size_t>(k) - 1]);
      }
    }
  }

  std::size_t num_segments() const { return knots_.size() - 1; }
  const std::vector<double>& knots() const { return knots_; }
  double t0() const { return knots_.front(); }
  double tf() const { return knots_.back(); }
  double duration(std::size_t i) const { return knots_.at(i + 1) - knots_.at(i); }

  /// Polynomial of dimension `dim` on segment `i`, in normalised time.
  const Polynomial& segment(int dim, std::size_t i) const {
    return segments_.at(static_cast<std::size_t>(dim)).at(i);
  }

  /// Index of the segment owning t (right-closed intervals).
  std::size_t segment_index(double t) const {
    check_range(t);
    const auto it = std::lower_bound(knots_.begin() + 1, knots_.end(), t);
    return static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - knots_.begin() - 1,
                                                             static_cast<std::ptrdiff_t>(num_segments()) - 1));
  }

  /// k-th time derivative of every flat output at t.
  FlatVector evaluate(double t, int order = 0) const { return evaluate_in_segment(segment_index(t), t, order); }

  /// Evaluates segment i's polynomial at t, which may lie on either of its
  /// closing knots. Used to compare the two sides of a knot.
  FlatVector evaluate_in_segment(std::size_t i, double t, int order) const {
    if (order < 0 || order > kMaxDerivative) throw TrajectoryError("trajectory: derivative order must be in 0..4");
    const double span = duration(i);
    const double s = (t - knots_[i]) / span;
    const double scale = std::pow(span, -order);
    FlatVector out;
    for (int d = 0; d < kFlatDims; ++d)
      out(d) = scale * derivs_[static_cast<std::size_t>(d)][i][static_cast<std::size_t>(order)](s);
    return out;
  }

  FlatSample sample(double t) const {
    const std::size_t i = segment_index(t);
    FlatSample out;
    out.time = t;
    for (int k = 0; k <= kMaxDerivative; ++k) out.d[static_cast<std::size_t>(k)] = evaluate_in_segment(i, t, k);
    return out;
  }

  /// Samples at t0, t0 + dt, ... and always at tf.
  std::vector<FlatSample> sample_uniform(double dt) const { return sample_times(uniform_times(t0(), tf(), dt)); }

  std::vector<FlatSample> sample_times(const std::vector<double>& times) const {
    std::vector<FlatSample> out;
    out.reserve(times.size());
    for (double t : times) out.push_back(sample(t));
    return out;
  }

  /// Sample times t0 + k dt, with tf appended unless the grid lands on it.
  static std::vector<double> uniform_times(double t0, double tf, double dt) {
    if (!(dt > 0)) throw TrajectoryError("trajectory: dt must be positive");
    std::vector<double> times;
    // Grid points within a relative 1e-9 of tf are replaced by tf itself.
    const double slop = 1e-9 * dt;
    for (long k = 0;; ++k) {
      const double t = t0 + static_cast<double>(k) * dt;
      if (t >= tf - slop) break;
      times.push_back(t);
    }
    times.push_back(tf);
    return times;
  }

 private:
  void check_range(double t) const {
    if (!(t >= t0() && t <= tf())) {
      throw TrajectoryError("trajectory: time " + std::to_string(t) + " outside [" + std::to_string(t0()) + ", " +
                            std::to_string(tf()) + "]");
    }
  }

  std::vector<double> knots_;
  std::array<SegmentList, kFlatDims> segments_;
  std::array<std::vector<std::array<Polynomial, kMaxDerivative + 1>>, kFlatDims> derivs_;
};

/// Knot vector with every interval stretched by `factor` about t0.
inline std::vector<double> scale_time(const std::vector<double>& knots, double factor) {
  if (!(factor > 1.0)) throw TrajectoryError("scale_time: factor must exceed 1");
  std::vector<double> out(knots.size());
  for (std::size_t i = 0; i < knots.size(); ++i) out[i] = knots.front() + factor * (knots[i] - knots.front());
  return out;
}

// CSV columns: t, then derivative order 0..4 for x, y, z, psi.
inline std::string trajectory_csv_header() {
  static const char* names[kFlatDims] = {"x", "y", "z", "psi"};
  std::string header = "t";
  for (int k = 0; k <= kMaxDerivative; ++k) {
    for (const char* name : names) {
      header += ',';
      if (k == 1) header += 'd';
      if (k > 1) header += "d" + std::to_string(k);
      header += name;
    }
  }
  return header;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_samples_csv(std::ostream& out, const std::vector<FlatSample>& samples) {
  out << trajectory_csv_header() << '\n';
  for (const auto& s : samples) {
    out << format_double(s.time);
    for (int k = 0; k <= kMaxDerivative; ++k)
      for (int d = 0; d < kFlatDims; ++d) out << ',' << format_double(s.d[static_cast<std::size_t>(k)](d));
    out << '\n';
  }
}

inline void write_trajectory_csv(std::ostream& out, const PiecewiseTrajectory& traj, double dt) {
  write_samples_csv(out, traj.sample_uniform(dt));
}

inline std::vector<FlatSample> read_trajectory_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw TrajectoryError("trajectory csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != trajectory_csv_header()) throw TrajectoryError("trajectory csv: unexpected header");
  std::vector<FlatSample> out;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    std::vector<double> fields;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) throw TrajectoryError("trajectory csv: bad number on row " + std::to_string(row));
      fields.push_back(v);
    }
    if (fields.size() != 1 + kFlatDims * (kMaxDerivative + 1))
      throw TrajectoryError("trajectory csv: wrong column count on row " + std::to_string(row));
    FlatSample s;
    s.time = fields[0];
    for (int k = 0; k <= kMaxDerivative; ++k)
      for (int d = 0; d < kFlatDims; ++d)
        s.d[static_cast<std::size_t>(k)](d) = fields[1 + static_cast<std::size_t>(k * kFlatDims + d)];
    out.push_back(s);
  }
  return out;
}

}  // namespace perch

#endif  // PERCH_TRAJECTORY_HPP
