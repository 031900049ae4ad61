#ifndef PERCH_POLYNOMIAL_HPP
#define PERCH_POLYNOMIAL_HPP

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace perch {

namespace poly_detail {
template <typename Scalar>
constexpr Scalar magnitude(Scalar v) {
  return v < Scalar(0) ? -v : v;
}
}  // namespace poly_detail

/// Thrown when a polynomial operation is undefined for its arguments
/// (division by the zero polynomial, root counting on the zero polynomial).
class PolynomialError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/**
 * Dense univariate polynomial, coefficient n multiplies t^n.
 *
 * The zero polynomial is represented by an empty coefficient list and has
 * degree -1. Trailing exact zeros are always stripped, so the last stored
 * coefficient is the nonzero leading one.
 */
template <typename Scalar>
class BasicPolynomial {
 public:
  BasicPolynomial() = default;

  explicit BasicPolynomial(std::vector<Scalar> coeffs) : c_(std::move(coeffs)) {
    strip();
  }

  BasicPolynomial(std::initializer_list<Scalar> coeffs) : c_(coeffs) { strip(); }

  static BasicPolynomial constant(Scalar value) { return BasicPolynomial({value}); }

  static BasicPolynomial monomial(int power, Scalar coeff = Scalar(1)) {
    std::vector<Scalar> c(static_cast<std::size_t>(power) + 1, Scalar(0));
    c.back() = coeff;
    return BasicPolynomial(std::move(c));
  }

  template <typename Other>
  static BasicPolynomial cast(const BasicPolynomial<Other>& p) {
    std::vector<Scalar> c(p.coeffs().begin(), p.coeffs().end());
    return BasicPolynomial(std::move(c));
  }

  int degree() const { return static_cast<int>(c_.size()) - 1; }
  bool is_zero() const { return c_.empty(); }
  std::span<const Scalar> coeffs() const { return c_; }
  Scalar leading() const { return c_.empty() ? Scalar(0) : c_.back(); }

  Scalar operator[](int n) const {
    return (n >= 0 && n < static_cast<int>(c_.size())) ? c_[static_cast<std::size_t>(n)]
                                                        : Scalar(0);
  }

  /// Horner evaluation.
  Scalar operator()(Scalar t) const {
    Scalar acc(0);
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * t + *it;
    return acc;
  }

  Scalar max_abs_coeff() const {
    Scalar m(0);
    for (const Scalar& v : c_) m = std::max(m, poly_detail::magnitude(v));
    return m;
  }

  /// Drops leading coefficients with magnitude <= cut.
  BasicPolynomial trimmed_below(Scalar cut) const {
    std::vector<Scalar> c = c_;
    while (!c.empty() && poly_detail::magnitude(c.back()) <= cut) c.pop_back();
    return BasicPolynomial(std::move(c));
  }

  /// Drops leading coefficients with magnitude <= rel_tol * max|coeff|.
  BasicPolynomial trimmed(Scalar rel_tol) const { return trimmed_below(rel_tol * max_abs_coeff()); }

  /// Returns q(s) = p(offset + scale * s).
  BasicPolynomial compose_affine(Scalar offset, Scalar scale) const {
    if (c_.empty()) return {};
    // Taylor shift by repeated synthetic division, then scale powers.
    std::vector<Scalar> c = c_;
    const std::size_t n = c.size();
    for (std::size_t i = 0; i + 1 < n; ++i) {
      for (std::size_t k = n - 1; k > i; --k) c[k - 1] += offset * c[k];
    }
    Scalar power(1);
    for (std::size_t k = 0; k < n; ++k) {
      c[k] *= power;
      power *= scale;
    }
    return BasicPolynomial(std::move(c));
  }

  BasicPolynomial operator-() const {
    std::vector<Scalar> c = c_;
    for (Scalar& v : c) v = -v;
    return BasicPolynomial(std::move(c));
  }

  friend BasicPolynomial operator+(const BasicPolynomial& a, const BasicPolynomial& b) {
    std::vector<Scalar> c(std::max(a.c_.size(), b.c_.size()), Scalar(0));
    for (std::size_t i = 0; i < a.c_.size(); ++i) c[i] += a.c_[i];
    for (std::size_t i = 0; i < b.c_.size(); ++i) c[i] += b.c_[i];
    return BasicPolynomial(std::move(c));
  }

  friend BasicPolynomial operator-(const BasicPolynomial& a, const BasicPolynomial& b) {
    return a + (-b);
  }

  friend BasicPolynomial operator*(const BasicPolynomial& a, const BasicPolynomial& b) {
    if (a.is_zero() || b.is_zero()) return {};
    std::vector<Scalar> c(a.c_.size() + b.c_.size() - 1, Scalar(0));
    for (std::size_t i = 0; i < a.c_.size(); ++i)
      for (std::size_t j = 0; j < b.c_.size(); ++j) c[i + j] += a.c_[i] * b.c_[j];
    return BasicPolynomial(std::move(c));
  }

  friend BasicPolynomial operator*(Scalar s, const BasicPolynomial& p) {
    std::vector<Scalar> c = p.c_;
    for (Scalar& v : c) v *= s;
    return BasicPolynomial(std::move(c));
  }

  friend BasicPolynomial operator*(const BasicPolynomial& p, Scalar s) { return s * p; }

  friend bool operator==(const BasicPolynomial&, const BasicPolynomial&) = default;

 private:
  void strip() {
    while (!c_.empty() && c_.back() == Scalar(0)) c_.pop_back();
  }

  std::vector<Scalar> c_;
};

using Polynomial = BasicPolynomial<double>;

/// order-th derivative; the zero polynomial once order exceeds the degree.
template <typename Scalar>
BasicPolynomial<Scalar> differentiate(const BasicPolynomial<Scalar>& p, int order = 1) {
  if (order < 0) throw PolynomialError("differentiate: negative order");
  if (order == 0) return p;
  if (p.degree() < order) return {};
  std::vector<Scalar> c(static_cast<std::size_t>(p.degree() - order + 1));
  for (int n = order; n <= p.degree(); ++n) {
    Scalar f(1);
    for (int k = 0; k < order; ++k) f *= static_cast<Scalar>(n - k);
    c[static_cast<std::size_t>(n - order)] = f * p[n];
  }
  return BasicPolynomial<Scalar>(std::move(c));
}

template <typename Scalar>
struct DivisionResult {
  BasicPolynomial<Scalar> quotient;
  BasicPolynomial<Scalar> remainder;
};

/// Long division a = quotient * b + remainder with degree(remainder) < degree(b).
template <typename Scalar>
DivisionResult<Scalar> divide(const BasicPolynomial<Scalar>& a, const BasicPolynomial<Scalar>& b) {
  if (b.is_zero()) throw PolynomialError("divide: division by the zero polynomial");
  const int da = a.degree();
  const int db = b.degree();
  if (da < db) return {BasicPolynomial<Scalar>{}, a};

  std::vector<Scalar> r(a.coeffs().begin(), a.coeffs().end());
  std::vector<Scalar> q(static_cast<std::size_t>(da - db + 1), Scalar(0));
  const Scalar lead = b.leading();
  for (int k = da - db; k >= 0; --k) {
    const Scalar qk = r[static_cast<std::size_t>(db + k)] / lead;
    q[static_cast<std::size_t>(k)] = qk;
    for (int j = 0; j < db; ++j) r[static_cast<std::size_t>(j + k)] -= qk * b[j];
  }
  r.resize(static_cast<std::size_t>(db));
  return {BasicPolynomial<Scalar>(std::move(q)), BasicPolynomial<Scalar>(std::move(r))};
}

template <typename Scalar>
BasicPolynomial<Scalar> remainder(const BasicPolynomial<Scalar>& a,
                                  const BasicPolynomial<Scalar>& b) {
  return divide(a, b).remainder;
}

}  // namespace perch

#endif  // PERCH_POLYNOMIAL_HPP
