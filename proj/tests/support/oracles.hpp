// Independent reference computations used by the unit and acceptance
// suites. Nothing here calls into the code paths it is used to check.
#ifndef PERCH_TESTS_ORACLES_HPP
#define PERCH_TESTS_ORACLES_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

/// Plain Horner evaluation of coefficients c[n] t^n.
inline double horner(const std::vector<double>& c, double t) {
  double acc = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * t + *it;
  return acc;
}

/// Real roots in (t0, tf] located by a dense sign-change scan followed by
/// bisection inside each bracket.
inline std::vector<double> scan_roots(const std::function<double(double)>& f, double t0,
                                      double tf, int points = 100000) {
  std::vector<double> roots;
  double prev_t = t0;
  double prev = f(t0);
  for (int i = 1; i <= points; ++i) {
    const double t = t0 + (tf - t0) * static_cast<double>(i) / points;
    const double v = f(t);
    if (v == 0.0) {
      roots.push_back(t);
    } else if (prev != 0.0 && (prev < 0) != (v < 0)) {
      double lo = prev_t;
      double hi = t;
      double flo = prev;
      for (int k = 0; k < 80; ++k) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if ((fm < 0) == (flo < 0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      roots.push_back(0.5 * (lo + hi));
    }
    if (v != 0.0) {
      prev = v;
      prev_t = t;
    }
  }
  return roots;
}

/// Maximum of f on a uniform grid of `points` samples, then polished by
/// golden-section search around the best grid cell.
inline double dense_max(const std::function<double(double)>& f, double t0, double tf,
                        int points = 10000) {
  double best = -INFINITY;
  int best_i = 0;
  for (int i = 0; i < points; ++i) {
    const double t = t0 + (tf - t0) * static_cast<double>(i) / (points - 1);
    const double v = f(t);
    if (v > best) {
      best = v;
      best_i = i;
    }
  }
  const double h = (tf - t0) / (points - 1);
  double a = std::max(t0, t0 + (best_i - 1) * h);
  double b = std::min(tf, t0 + (best_i + 1) * h);
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int k = 0; k < 100; ++k) {
    const double c = b - phi * (b - a);
    const double d = a + phi * (b - a);
    if (f(c) > f(d)) b = d; else a = c;
  }
  return std::max(best, f(0.5 * (a + b)));
}

/// Minimiser of c^T Q c subject to A c = b by a direct dense solve of the
/// KKT system [2Q A^T; A 0][c; l] = [0; b].
inline Eigen::VectorXd kkt_solve(const Eigen::MatrixXd& q, const Eigen::MatrixXd& a,
                                 const Eigen::VectorXd& b) {
  // High-order monomial bases make the KKT matrix nearly singular in double,
  // so the dense solve runs in long double with a few refinement sweeps.
  using MatrixL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  using VectorL = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
  const Eigen::Index n = q.rows();
  const Eigen::Index m = a.rows();
  MatrixL kkt = MatrixL::Zero(n + m, n + m);
  kkt.topLeftCorner(n, n) = 2.0L * q.cast<long double>();
  kkt.topRightCorner(n, m) = a.transpose().cast<long double>();
  kkt.bottomLeftCorner(m, n) = a.cast<long double>();
  VectorL rhs = VectorL::Zero(n + m);
  rhs.tail(m) = b.cast<long double>();
  const Eigen::FullPivLU<MatrixL> lu(kkt);
  VectorL x = lu.solve(rhs);
  for (int sweep = 0; sweep < 3; ++sweep) x += lu.solve(VectorL(rhs - kkt * x));
  return x.head(n).cast<double>();
}

/// Symbolic integral of the product of j-th derivatives of t^m and t^n on [0, T].
inline double monomial_derivative_inner(int m, int n, int j, double duration) {
  if (m < j || n < j) return 0.0;
  double fm = 1.0, fn = 1.0;
  for (int k = 0; k < j; ++k) {
    fm *= m - k;
    fn *= n - k;
  }
  const int p = m + n - 2 * j + 1;
  return fm * fn * std::pow(duration, p) / p;
}

}  // namespace oracle

#endif  // PERCH_TESTS_ORACLES_HPP
