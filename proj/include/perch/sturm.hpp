#ifndef PERCH_STURM_HPP
#define PERCH_STURM_HPP

#include <cmath>
#include <span>
#include <vector>

#include "perch/polynomial.hpp"

namespace perch {

namespace sturm_detail {

#if defined(__SIZEOF_FLOAT128__)
// Remainder sequences of degree-28 inputs lose too many digits in long
// double; quad precision keeps the chain signs reliable.
using Wide = __float128;
inline constexpr Wide kRemainderZeroTol = 1e-28;
inline constexpr Wide kSignZeroTol = 1e-24;
#else
using Wide = long double;
inline constexpr Wide kRemainderZeroTol = 1e-17L;
inline constexpr Wide kSignZeroTol = 1e-15L;
#endif
using WidePolynomial = BasicPolynomial<Wide>;

// kRemainderZeroTol: leading remainder coefficients below this fraction of
// the dividend's scale are cancellation noise; an all-noise remainder is
// the exact zero polynomial and ends the chain.
// kSignZeroTol: chain values below this fraction of the chain max-norm at the
// evaluation point count as zero when tallying sign variations.

inline WidePolynomial normalized(const WidePolynomial& p) {
  const Wide m = p.max_abs_coeff();
  return m > 0 ? (Wide(1) / m) * p : p;
}

// Negated-remainder chain p, p', -rem(p, p'), ... in place of a Sturm chain.
// Every element is rescaled by a positive constant, which leaves sign
// variations unchanged.
inline std::vector<WidePolynomial> build_chain(const WidePolynomial& p) {
  std::vector<WidePolynomial> chain;
  chain.push_back(normalized(p));
  WidePolynomial d = differentiate(chain.front());
  if (d.is_zero()) return chain;
  chain.push_back(normalized(d));
  while (chain.back().degree() > 0) {
    const WidePolynomial& a = chain[chain.size() - 2];
    const WidePolynomial& b = chain.back();
    // Leading coefficients at the level of cancellation noise are dropped.
    const WidePolynomial r = remainder(a, b).trimmed_below(kRemainderZeroTol * a.max_abs_coeff());
    if (r.is_zero()) break;
    chain.push_back(normalized(-r));
  }
  return chain;
}

inline int sign_variations(std::span<const WidePolynomial> chain, Wide s) {
  std::vector<Wide> values;
  values.reserve(chain.size());
  Wide norm = 0;
  for (const auto& p : chain) {
    values.push_back(p(s));
    norm = std::max(norm, poly_detail::magnitude(values.back()));
  }
  int variations = 0;
  int last_sign = 0;
  for (Wide v : values) {
    if (poly_detail::magnitude(v) <= kSignZeroTol * norm) continue;
    const int sign = v > 0 ? 1 : -1;
    if (last_sign != 0 && sign != last_sign) ++variations;
    last_sign = sign;
  }
  return variations;
}

}  // namespace sturm_detail

/**
 * Sturm sequence of a polynomial over [t0, tf].
 *
 * The chain is built for the reparametrised polynomial p(t0 + (tf - t0) s)
 * on s in [0, 1], after dividing out gcd(p, p') so that the input is
 * squarefree. Arithmetic is carried out in extended precision.
 */
class SturmSequence {
 public:
  using Chain = std::vector<sturm_detail::WidePolynomial>;

  SturmSequence(const Polynomial& p, double t0, double tf) : t0_(t0), tf_(tf) {
    using namespace sturm_detail;
    if (p.is_zero()) throw PolynomialError("sturm: zero polynomial has no finite root count");
    if (!(t0 < tf)) throw PolynomialError("sturm: interval must satisfy t0 < tf");
    WidePolynomial local =
        WidePolynomial::cast(p).compose_affine(static_cast<Wide>(t0), static_cast<Wide>(tf) - t0);
    local = normalized(local);
    chain_ = build_chain(local);
    if (chain_.back().degree() > 0) {
      // Repeated roots: the chain ended at gcd(p, p').
      WidePolynomial squarefree = divide(chain_.front(), chain_.back()).quotient;
      chain_ = build_chain(normalized(squarefree));
    }
  }

  const Chain& chain() const { return chain_; }
  double t0() const { return t0_; }
  double tf() const { return tf_; }

  /// Sign variations of the chain at t.
  int variations_at(double t) const {
    const sturm_detail::Wide s =
        (static_cast<sturm_detail::Wide>(t) - t0_) / (static_cast<sturm_detail::Wide>(tf_) - t0_);
    return sturm_detail::sign_variations(chain_, s);
  }

  /// Number of distinct real roots in (t0, tf].
  int count_roots() const {
    return sturm_detail::sign_variations(chain_, 0) - sturm_detail::sign_variations(chain_, 1);
  }

 private:
  double t0_;
  double tf_;
  Chain chain_;
};

/// Number of distinct real roots of p in (t0, tf].
inline int sturm_count_roots(const Polynomial& p, double t0, double tf) {
  return SturmSequence(p, t0, tf).count_roots();
}

enum class GbcVerdict {
  kCertified,
  kStartViolation,
  kEndViolation,
  kInteriorCrossing,
  kDegenerate,  // h - b is identically zero
};

struct GbcResult {
  GbcVerdict verdict = GbcVerdict::kDegenerate;
  int crossings = 0;

  bool certified() const { return verdict == GbcVerdict::kCertified; }
  explicit operator bool() const { return certified(); }
};

/// Slack added to the bound so that touching it counts as satisfying it.
inline double gbc_tolerance(double bound) { return 1e-10 * std::max(1.0, std::abs(bound)); }

/**
 * Global bound check: certifies h(t) <= b on the whole of [t0, tf].
 *
 * Checks both endpoints and then counts the roots of h - b in (t0, tf].
 * With no endpoint violation and no root, continuity of h rules out any
 * interior excursion above b. An infinite bound is trivially satisfied.
 */
inline GbcResult gbc(const Polynomial& h, double bound, double t0, double tf) {
  if (!(t0 < tf)) throw PolynomialError("gbc: interval must satisfy t0 < tf");
  if (std::isinf(bound) && bound > 0) return {GbcVerdict::kCertified, 0};
  const Polynomial shifted = h - Polynomial::constant(bound + gbc_tolerance(bound));
  const Polynomial exact = h - Polynomial::constant(bound);
  if (exact.is_zero()) return {GbcVerdict::kDegenerate, 0};
  if (shifted(t0) > 0) return {GbcVerdict::kStartViolation, 0};
  if (shifted(tf) > 0) return {GbcVerdict::kEndViolation, 0};
  if (shifted.is_zero()) return {GbcVerdict::kCertified, 0};
  const int roots = sturm_count_roots(shifted, t0, tf);
  if (roots > 0) return {GbcVerdict::kInteriorCrossing, roots};
  return {GbcVerdict::kCertified, 0};
}

}  // namespace perch

#endif  // PERCH_STURM_HPP
