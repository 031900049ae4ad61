#ifndef PERCH_QP_HPP
#define PERCH_QP_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace perch {

/// Contract violation when assembling or handing a malformed problem to the solver.
class QpError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/**
 * min c^T Q c  s.t.  A c = b,  y <= G c <= z.
 *
 * Bounds may be infinite for one-sided rows.
 */
struct QpProblem {
  Eigen::MatrixXd cost;
  Eigen::MatrixXd eq_matrix;
  Eigen::VectorXd eq_rhs;
  Eigen::MatrixXd ineq_matrix;
  Eigen::VectorXd ineq_lower;
  Eigen::VectorXd ineq_upper;

  QpProblem() = default;

  explicit QpProblem(Eigen::Index num_vars)
      : cost(Eigen::MatrixXd::Zero(num_vars, num_vars)),
        eq_matrix(0, num_vars),
        eq_rhs(0),
        ineq_matrix(0, num_vars),
        ineq_lower(0),
        ineq_upper(0) {}

  Eigen::Index num_vars() const { return cost.rows(); }

  void add_equality(const Eigen::MatrixXd& rows, const Eigen::VectorXd& rhs) {
    append_rows(eq_matrix, rows);
    append(eq_rhs, rhs);
  }

  void add_equality(const Eigen::RowVectorXd& row, double rhs) {
    add_equality(Eigen::MatrixXd(row), Eigen::VectorXd::Constant(1, rhs));
  }

  void add_inequality(const Eigen::RowVectorXd& row, double lower, double upper) {
    append_rows(ineq_matrix, Eigen::MatrixXd(row));
    append(ineq_lower, Eigen::VectorXd::Constant(1, lower));
    append(ineq_upper, Eigen::VectorXd::Constant(1, upper));
  }

  void validate() const {
    const Eigen::Index n = num_vars();
    if (cost.cols() != n) throw QpError("qp: cost matrix must be square");
    if (eq_matrix.cols() != n || ineq_matrix.cols() != n)
      throw QpError("qp: constraint matrices must have one column per variable");
    if (eq_matrix.rows() != eq_rhs.size()) throw QpError("qp: equality rows/rhs mismatch");
    if (ineq_matrix.rows() != ineq_lower.size() || ineq_matrix.rows() != ineq_upper.size())
      throw QpError("qp: inequality rows/bounds mismatch");
    if ((ineq_lower.array() > ineq_upper.array()).any())
      throw QpError("qp: inequality lower bound exceeds upper bound");
    const double scale = std::max(1.0, cost.cwiseAbs().maxCoeff());
    if (n > 0 && (cost - cost.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
      throw QpError("qp: cost matrix must be symmetric");
  }

 private:
  static void append_rows(Eigen::MatrixXd& m, const Eigen::MatrixXd& rows) {
    if (rows.cols() != m.cols()) throw QpError("qp: appended rows have the wrong width");
    Eigen::MatrixXd out(m.rows() + rows.rows(), m.cols());
    out << m, rows;
    m = std::move(out);
  }
  static void append(Eigen::VectorXd& v, const Eigen::VectorXd& tail) {
    Eigen::VectorXd out(v.size() + tail.size());
    out << v, tail;
    v = std::move(out);
  }
};

enum class QpStatus { kSolved, kInfeasible, kMaxIterations };

inline const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::kSolved: return "solved";
    case QpStatus::kInfeasible: return "infeasible";
    case QpStatus::kMaxIterations: return "max-iterations";
  }
  return "unknown";
}

/**
 * Solver output. Multipliers satisfy 2 Q c + A^T eq_multipliers +
 * G^T ineq_multipliers = 0 at a solution; a negative inequality multiplier
 * marks an active lower bound, a positive one an active upper bound.
 */
struct QpSolution {
  Eigen::VectorXd coeffs;
  double objective = 0.0;
  QpStatus status = QpStatus::kInfeasible;
  Eigen::VectorXd eq_multipliers;
  Eigen::VectorXd ineq_multipliers;
  /// Size of the violation that proved infeasibility (0 when solved).
  double infeasibility = 0.0;
  int iterations = 0;
  std::vector<int> active_set;  // indices into the inequality rows

  bool solved() const { return status == QpStatus::kSolved; }
};

struct QpSolverOptions {
  int max_iterations = 0;  // 0 selects a size-based default
  double feasibility_tol = 1e-10;
};

/// Basis row d^k/dt^k [1, t, ..., t^N] at t. With duration T the basis is in
/// normalised time s = t_local / T and the row is scaled by T^-k.
inline Eigen::RowVectorXd basis_row(int poly_order, int deriv_order, double s,
                                    double duration = 1.0) {
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(poly_order + 1);
  const double time_scale = std::pow(duration, -deriv_order);
  for (int n = deriv_order; n <= poly_order; ++n) {
    double falling = 1.0;
    for (int k = 0; k < deriv_order; ++k) falling *= n - k;
    row(n) = falling * std::pow(s, n - deriv_order) * time_scale;
  }
  return row;
}

/**
 * Cost block Q[m][n] = \int_0^T (d^j t^m/dt^j)(d^j t^n/dt^j) dt for the raw
 * local-time monomial basis of a polynomial of order N.
 */
inline Eigen::MatrixXd snap_cost_block(double segment_duration, int poly_order, int deriv_order) {
  if (deriv_order < 0) throw QpError("snap_cost_block: negative derivative order");
  if (poly_order < deriv_order) throw QpError("snap_cost_block: poly_order must be >= deriv_order");
  if (!(segment_duration > 0)) throw QpError("snap_cost_block: segment duration must be positive");
  const int size = poly_order + 1;
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(size, size);
  auto falling = [deriv_order](int n) {
    double f = 1.0;
    for (int k = 0; k < deriv_order; ++k) f *= n - k;
    return f;
  };
  for (int m = deriv_order; m < size; ++m) {
    for (int n = deriv_order; n < size; ++n) {
      const int power = m + n - 2 * deriv_order + 1;
      q(m, n) = falling(m) * falling(n) * std::pow(segment_duration, power) / power;
    }
  }
  return q;
}

struct FixedDerivative {
  int order = 0;
  double value = 0.0;
};

struct ConstraintRows {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd rhs;
};

/// One equality row per fixed derivative at a local knot time.
inline ConstraintRows endpoint_rows(double knot_time, std::span<const FixedDerivative> fixed,
                                    int poly_order) {
  ConstraintRows out{Eigen::MatrixXd(static_cast<Eigen::Index>(fixed.size()), poly_order + 1),
                     Eigen::VectorXd(static_cast<Eigen::Index>(fixed.size()))};
  for (std::size_t i = 0; i < fixed.size(); ++i) {
    if (fixed[i].order < 0 || fixed[i].order > poly_order)
      throw QpError("endpoint_rows: derivative order out of range");
    for (std::size_t k = 0; k < i; ++k)
      if (fixed[k].order == fixed[i].order)
        throw QpError("endpoint_rows: duplicate derivative order");
    const auto r = static_cast<Eigen::Index>(i);
    out.matrix.row(r) = basis_row(poly_order, fixed[i].order, knot_time);
    out.rhs(r) = fixed[i].value;
  }
  return out;
}

enum class TimeBasis {
  kLocal,       // coefficients of (t - t_{i-1})^n
  kNormalized,  // coefficients of ((t - t_{i-1}) / T_i)^n
};

/**
 * Continuity rows for derivative orders 0..max_deriv at every interior
 * knot: end of segment i minus start of segment i+1. Variables are the
 * segment coefficient vectors stacked in order.
 */
inline ConstraintRows continuity_rows(std::span<const double> durations, int poly_order,
                                      int max_deriv = 4, TimeBasis basis = TimeBasis::kLocal) {
  const auto f = static_cast<Eigen::Index>(durations.size());
  const Eigen::Index width = poly_order + 1;
  const Eigen::Index knots = std::max<Eigen::Index>(f - 1, 0);
  ConstraintRows out{Eigen::MatrixXd::Zero(knots * (max_deriv + 1), f * width),
                     Eigen::VectorXd::Zero(knots * (max_deriv + 1))};
  Eigen::Index row = 0;
  for (Eigen::Index i = 0; i + 1 < f; ++i) {
    const double t_end = durations[static_cast<std::size_t>(i)];
    const double t_next = durations[static_cast<std::size_t>(i + 1)];
    for (int k = 0; k <= max_deriv; ++k, ++row) {
      if (basis == TimeBasis::kLocal) {
        out.matrix.block(row, i * width, 1, width) = basis_row(poly_order, k, t_end);
        out.matrix.block(row, (i + 1) * width, 1, width) = -basis_row(poly_order, k, 0.0);
      } else {
        out.matrix.block(row, i * width, 1, width) = basis_row(poly_order, k, 1.0, t_end);
        out.matrix.block(row, (i + 1) * width, 1, width) = -basis_row(poly_order, k, 0.0, t_next);
      }
    }
  }
  return out;
}

namespace qp_detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// One-sided constraint n^T w >= d in the reduced space; source row and side
// are kept to map multipliers back.
struct HalfSpace {
  Eigen::VectorXd normal;
  double offset = 0.0;
  int row = 0;
  double sign = 1.0;  // +1: lower bound of row, -1: upper bound
  double scale = 1.0;
};

struct EliminatedEqualities {
  Eigen::VectorXd particular;
  Eigen::MatrixXd nullspace;
  double residual = 0.0;
};

// Particular solution and orthonormal nullspace basis of A c = b via a
// column-pivoted QR of A^T. Rows of A are expected to be normalised.
inline EliminatedEqualities eliminate(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                      Eigen::Index n) {
  EliminatedEqualities out;
  if (a.rows() == 0) {
    out.particular = Eigen::VectorXd::Zero(n);
    out.nullspace = Eigen::MatrixXd::Identity(n, n);
    return out;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a.rows(), a.cols());
  qr.setThreshold(1e-11);
  qr.compute(a.transpose());
  const Eigen::Index rank = qr.rank();
  const Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixR().topRows(rank);
  // A^T P = Q R  =>  A = P R^T Q^T; with c = Q1 u, R1^T u = P^T b.
  const Eigen::VectorXd pb = qr.colsPermutation().transpose() * b;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(rank);
  if (rank > 0) {
    u = r.leftCols(rank).transpose().triangularView<Eigen::Lower>().solve(pb.head(rank));
  }
  out.particular = q.leftCols(rank) * u;
  out.nullspace = q.rightCols(n - rank);
  out.residual = (a * out.particular - b).cwiseAbs().maxCoeff();
  return out;
}

// Mixed-precision iterative refinement of the equality-constrained problem
// min c^T Q c s.t. W c = d. High-order monomial costs are conditioned badly
// enough that the nullspace solve alone leaves coefficient errors near 1e-3;
// residuals evaluated in long double against the original data, with
// corrections from a double factorisation of the equilibrated KKT matrix,
// recover the lost digits whenever cond(KKT) * eps < 1.
inline Eigen::VectorXd refine(const Eigen::MatrixXd& q, const Eigen::MatrixXd& w, const Eigen::VectorXd& d,
                              const Eigen::VectorXd& c0, int sweeps = 4) {
  using Eigen::Index;
  using MatrixL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  using VectorL = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
  const Index n = q.rows();
  const Index m = w.rows();
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + m, n + m);
  kkt.topLeftCorner(n, n) = 2.0 * q;
  kkt.topRightCorner(n, m) = w.transpose();
  kkt.bottomLeftCorner(m, n) = w;
  Eigen::VectorXd scale(n + m);
  for (Index i = 0; i < n + m; ++i) {
    const double peak = kkt.row(i).cwiseAbs().maxCoeff();
    scale(i) = peak > 0 ? 1.0 / std::sqrt(peak) : 1.0;
  }
  const Eigen::MatrixXd scaled = scale.asDiagonal() * kkt * scale.asDiagonal();
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(scaled);

  const MatrixL kkt_l = kkt.cast<long double>();
  VectorL rhs = VectorL::Zero(n + m);
  rhs.tail(m) = d.cast<long double>();
  VectorL x = VectorL::Zero(n + m);
  x.head(n) = c0.cast<long double>();
  // Start from the least-squares multipliers of the incoming point.
  if (m > 0) {
    const Eigen::VectorXd grad = -2.0 * q * c0;
    x.tail(m) = w.transpose().colPivHouseholderQr().solve(grad).cast<long double>();
  }
  auto residual_norm = [&](const VectorL& r) {
    return static_cast<double>((scale.cast<long double>().asDiagonal() * r).cwiseAbs().maxCoeff());
  };
  VectorL r = rhs - kkt_l * x;
  double best = residual_norm(r);
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    const Eigen::VectorXd rs = (scale.cast<long double>().asDiagonal() * r).cast<double>();
    const Eigen::VectorXd dx = scale.asDiagonal() * lu.solve(rs);
    if (!dx.allFinite()) break;
    const VectorL candidate = x + dx.cast<long double>();
    const VectorL r_next = rhs - kkt_l * candidate;
    const double next = residual_norm(r_next);
    if (!(next < best)) break;
    x = candidate;
    r = r_next;
    best = next;
  }
  return x.head(n).cast<double>();
}

}  // namespace qp_detail

/**
 * Convex QP solver.
 *
 * Equalities (including inequality rows whose bounds coincide) are
 * eliminated through a nullspace basis; the remaining inequality-constrained
 * problem is solved with the Goldfarb-Idnani dual active-set method, which
 * needs no feasible starting point and terminates finitely. A
 * scale-relative 1e-12 ridge is added to the reduced Hessian only when its
 * Cholesky factorisation fails. The result is polished on the final working
 * set by mixed-precision iterative refinement.
 */
inline QpSolution solve(const QpProblem& qp, const QpSolverOptions& options = {}) {
  using namespace qp_detail;
  using Eigen::Index;
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  qp.validate();
  const Index n = qp.num_vars();

  // Split inequality rows into equalities (coincident bounds) and boxes.
  std::vector<Index> pinned;
  std::vector<Index> boxed;
  for (Index i = 0; i < qp.ineq_matrix.rows(); ++i) {
    const double lo = qp.ineq_lower(i);
    const double hi = qp.ineq_upper(i);
    const double width_tol = 1e-12 * std::max({1.0, std::abs(lo), std::abs(hi)});
    if (std::isfinite(lo) && std::isfinite(hi) && hi - lo <= width_tol) {
      pinned.push_back(i);
    } else if (std::isfinite(lo) || std::isfinite(hi)) {
      boxed.push_back(i);
    }
  }

  const Index me = qp.eq_matrix.rows();
  const Index m_all = me + static_cast<Index>(pinned.size());
  MatrixXd a_all(m_all, n);
  VectorXd b_all(m_all);
  if (me > 0) {
    a_all.topRows(me) = qp.eq_matrix;
    b_all.head(me) = qp.eq_rhs;
  }
  for (std::size_t k = 0; k < pinned.size(); ++k) {
    const Index i = pinned[k];
    a_all.row(me + static_cast<Index>(k)) = qp.ineq_matrix.row(i);
    b_all(me + static_cast<Index>(k)) = 0.5 * (qp.ineq_lower(i) + qp.ineq_upper(i));
  }
  VectorXd row_scale = VectorXd::Ones(m_all);
  for (Index i = 0; i < m_all; ++i) {
    const double norm = a_all.row(i).norm();
    if (norm > 0) row_scale(i) = 1.0 / norm;
  }
  const MatrixXd a_scaled = row_scale.asDiagonal() * a_all;
  const VectorXd b_scaled = row_scale.asDiagonal() * b_all;

  QpSolution sol;
  const EliminatedEqualities elim = eliminate(a_scaled, b_scaled, n);
  const double eq_tol = 1e-9 * (1.0 + (m_all > 0 ? b_scaled.cwiseAbs().maxCoeff() : 0.0));
  if (elim.residual > eq_tol) {
    sol.status = QpStatus::kInfeasible;
    sol.infeasibility = elim.residual;
    sol.coeffs = elim.particular;
    return sol;
  }

  const MatrixXd& z = elim.nullspace;
  const Index nz = z.cols();
  const VectorXd& cp = elim.particular;
  const VectorXd qcp = qp.cost * cp;

  // Reduced problem: min 1/2 w^T H w + g^T w with H = 2 Z^T Q Z, g = 2 Z^T Q c_p.
  MatrixXd h = 2.0 * z.transpose() * qp.cost * z;
  h = 0.5 * (h + h.transpose()).eval();
  const VectorXd g = 2.0 * z.transpose() * qcp;
  Eigen::LLT<MatrixXd> llt(h);
  if (nz > 0 && llt.info() != Eigen::Success) {
    h.diagonal().array() += 1e-12 * std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
    llt.compute(h);
  }
  if (nz > 0 && llt.info() != Eigen::Success) {
    throw QpError("qp: cost is not positive semidefinite on the equality nullspace");
  }

  std::vector<HalfSpace> halves;
  for (Index i : boxed) {
    const VectorXd normal = z.transpose() * qp.ineq_matrix.row(i).transpose();
    const double at_cp = qp.ineq_matrix.row(i).dot(cp);
    const double norm = normal.norm();
    const double lo = qp.ineq_lower(i);
    const double hi = qp.ineq_upper(i);
    const double row_tol = options.feasibility_tol * std::max(1.0, qp.ineq_matrix.row(i).norm());
    if (norm <= 1e-12 * std::max(1.0, qp.ineq_matrix.row(i).norm())) {
      // Fully determined by the equalities.
      const double violation = std::max(lo - at_cp, at_cp - hi);
      if (violation > row_tol) {
        sol.status = QpStatus::kInfeasible;
        sol.infeasibility = violation;
        sol.coeffs = cp;
        return sol;
      }
      continue;
    }
    if (std::isfinite(lo)) halves.push_back({normal / norm, (lo - at_cp) / norm, static_cast<int>(i), 1.0, norm});
    if (std::isfinite(hi)) halves.push_back({-normal / norm, (at_cp - hi) / norm, static_cast<int>(i), -1.0, norm});
  }

  const int max_iter = options.max_iterations > 0
                           ? options.max_iterations
                           : 50 * static_cast<int>(halves.size() + static_cast<std::size_t>(nz)) + 100;

  VectorXd w = nz > 0 ? VectorXd(-llt.solve(g)) : VectorXd(VectorXd::Zero(0));
  std::vector<int> active;
  std::vector<double> mult;
  std::vector<VectorXd> hinv_normals(halves.size());
  std::vector<bool> have_hinv(halves.size(), false);
  auto hinv_normal = [&](int k) -> const VectorXd& {
    if (!have_hinv[static_cast<std::size_t>(k)]) {
      hinv_normals[static_cast<std::size_t>(k)] = llt.solve(halves[static_cast<std::size_t>(k)].normal);
      have_hinv[static_cast<std::size_t>(k)] = true;
    }
    return hinv_normals[static_cast<std::size_t>(k)];
  };
  auto slack = [&](int k) {
    return halves[static_cast<std::size_t>(k)].normal.dot(w) - halves[static_cast<std::size_t>(k)].offset;
  };

  int iterations = 0;
  QpStatus status = QpStatus::kSolved;
  while (true) {
    int p = -1;
    double worst = -options.feasibility_tol;
    for (int k = 0; k < static_cast<int>(halves.size()); ++k) {
      if (std::find(active.begin(), active.end(), k) != active.end()) continue;
      const double s = slack(k);
      if (s < worst) {
        worst = s;
        p = k;
      }
    }
    if (p < 0) break;

    double mult_p = 0.0;
    bool added = false;
    while (!added) {
      if (++iterations > max_iter) {
        status = QpStatus::kMaxIterations;
        break;
      }
      const auto q = static_cast<Index>(active.size());
      const VectorXd& hp = hinv_normal(p);
      VectorXd r = VectorXd::Zero(q);
      VectorXd step = hp;
      if (q > 0) {
        MatrixXd hn(nz, q);
        MatrixXd normals(nz, q);
        for (Index j = 0; j < q; ++j) {
          hn.col(j) = hinv_normal(active[static_cast<std::size_t>(j)]);
          normals.col(j) = halves[static_cast<std::size_t>(active[static_cast<std::size_t>(j)])].normal;
        }
        const MatrixXd schur = normals.transpose() * hn;
        r = schur.ldlt().solve(hn.transpose() * halves[static_cast<std::size_t>(p)].normal);
        step -= hn * r;
      }
      // Largest dual step keeping active multipliers nonnegative.
      double t_dual = kInf;
      int drop = -1;
      for (Index j = 0; j < q; ++j) {
        if (r(j) > 1e-14) {
          const double t = mult[static_cast<std::size_t>(j)] / r(j);
          if (t < t_dual) {
            t_dual = t;
            drop = static_cast<int>(j);
          }
        }
      }
      const double curvature = step.dot(halves[static_cast<std::size_t>(p)].normal);
      const bool dependent = step.norm() <= 1e-12 * std::max(1.0, hp.norm()) || curvature <= 0;
      const double t_primal = dependent ? kInf : -slack(p) / curvature;
      const double t = std::min(t_dual, t_primal);
      if (!std::isfinite(t)) {
        status = QpStatus::kInfeasible;
        sol.infeasibility = -slack(p);
        break;
      }
      if (std::isfinite(t_primal)) w += t * step;
      for (Index j = 0; j < q; ++j) mult[static_cast<std::size_t>(j)] -= t * r(j);
      mult_p += t;
      if (t_primal <= t_dual) {
        active.push_back(p);
        mult.push_back(mult_p);
        added = true;
      } else {
        active.erase(active.begin() + drop);
        mult.erase(mult.begin() + drop);
      }
    }
    if (status != QpStatus::kSolved) break;
  }

  sol.status = status;
  sol.iterations = iterations;
  sol.coeffs = cp + z * w;
  if (status == QpStatus::kSolved) {
    // Polish on the final working set: equalities plus active bounds.
    MatrixXd working(m_all + static_cast<Index>(active.size()), n);
    VectorXd working_rhs(working.rows());
    working.topRows(m_all) = a_scaled;
    working_rhs.head(m_all) = b_scaled;
    for (std::size_t j = 0; j < active.size(); ++j) {
      const HalfSpace& hs = halves[static_cast<std::size_t>(active[j])];
      const Index row = m_all + static_cast<Index>(j);
      const double norm = qp.ineq_matrix.row(hs.row).norm();
      working.row(row) = qp.ineq_matrix.row(hs.row) / norm;
      working_rhs(row) = (hs.sign > 0 ? qp.ineq_lower(hs.row) : qp.ineq_upper(hs.row)) / norm;
    }
    sol.coeffs = refine(qp.cost, working, working_rhs, sol.coeffs);
  }
  sol.objective = sol.coeffs.dot(qp.cost * sol.coeffs);

  // Multipliers in the convention 2Qc + A^T lambda + G^T mu = 0.
  VectorXd mu = VectorXd::Zero(qp.ineq_matrix.rows());
  for (std::size_t j = 0; j < active.size(); ++j) {
    const HalfSpace& hs = halves[static_cast<std::size_t>(active[j])];
    mu(hs.row) -= hs.sign * mult[j] / hs.scale;
    sol.active_set.push_back(hs.row);
  }
  std::sort(sol.active_set.begin(), sol.active_set.end());
  VectorXd lambda_all = VectorXd::Zero(m_all);
  if (m_all > 0) {
    const VectorXd target = -(2.0 * qp.cost * sol.coeffs + qp.ineq_matrix.transpose() * mu);
    lambda_all = a_all.transpose().colPivHouseholderQr().solve(target);
  }
  sol.eq_multipliers = lambda_all.head(me);
  for (std::size_t k = 0; k < pinned.size(); ++k) mu(pinned[k]) += lambda_all(me + static_cast<Index>(k));
  sol.ineq_multipliers = mu;
  return sol;
}

}  // namespace perch

#endif  // PERCH_QP_HPP
