#pragma once

// Cholesky factorization of a positive-definite Jacobi (symmetric
// tridiagonal) matrix, its constant-tail extension, and the Stieltjes
// transform / spectral density of the extended operator via a finite
// continued fraction with a closed-form Toeplitz tail.

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "spectral_spike/errors.hpp"
#include "spectral_spike/lanczos.hpp"

namespace spectral_spike {

// Lower-bidiagonal factor L with J = L L^T: diagonal alpha (size s),
// subdiagonal beta (size s-1), all entries positive.
struct CholeskyFactor {
  std::vector<double> alpha;
  std::vector<double> beta;
};

// alpha_0 = sqrt(a_0); beta_{i-1} = b_{i-1}/alpha_{i-1};
// alpha_i = sqrt(a_i - beta_{i-1}^2).  Fails when a pivot is nonpositive.
inline CholeskyFactor cholesky_tridiag(const JacobiMatrix& j) {
  const std::size_t s = j.a.size();
  if (s == 0) throw format_error("cholesky: empty Jacobi matrix");
  if (j.b.size() + 1 != s)
    throw format_error("cholesky: off-diagonal length must be size-1");
  CholeskyFactor f;
  f.alpha.reserve(s);
  f.beta.reserve(s ? s - 1 : 0);
  double pivot = j.a[0];
  if (!(pivot > 0.0))
    throw numeric_error("cholesky: matrix not positive definite at index 0");
  f.alpha.push_back(std::sqrt(pivot));
  for (std::size_t i = 1; i < s; ++i) {
    const double beta = j.b[i - 1] / f.alpha[i - 1];
    pivot = j.a[i] - beta * beta;
    if (!(pivot > 0.0))
      throw numeric_error("cholesky: matrix not positive definite at index " +
                          std::to_string(i));
    f.beta.push_back(beta);
    f.alpha.push_back(std::sqrt(pivot));
  }
  return f;
}

// Semi-infinite bidiagonal factor whose column pairs repeat (tail_alpha,
// tail_beta) from column n-2 onward; the prefix holds the n-2 leading pairs.
// Column i of the factor is (alpha_at(i), beta_at(i)).
struct ExtendedCholesky {
  std::vector<double> alpha;  // prefix diagonal entries, size n-2
  std::vector<double> beta;   // prefix subdiagonal entries, size n-2
  double tail_alpha = 0.0;
  double tail_beta = 0.0;

  std::size_t order() const { return alpha.size() + 2; }  // the "n" above
  double alpha_at(std::size_t i) const {
    return i < alpha.size() ? alpha[i] : tail_alpha;
  }
  double beta_at(std::size_t i) const {
    return i < beta.size() ? beta[i] : tail_beta;
  }
};

// Drop the factor's final diagonal entry and repeat its last computed column
// (alpha_{n-2}, beta_{n-2}) forever.
inline ExtendedCholesky extend(const CholeskyFactor& f) {
  const std::size_t n = f.alpha.size();
  if (f.beta.size() + 1 != n)
    throw format_error("extend: subdiagonal length must be size-1");
  if (n < 2) throw format_error("extend: factor must have at least 2 columns");
  ExtendedCholesky e;
  e.alpha.assign(f.alpha.begin(), f.alpha.end() - 2);
  e.beta.assign(f.beta.begin(), f.beta.end() - 1);
  e.tail_alpha = f.alpha[n - 2];
  e.tail_beta = f.beta[n - 2];
  return e;
}

// Support endpoints of the tail's absolutely continuous spectrum.
inline std::pair<double, double> support_endpoints(const ExtendedCholesky& e) {
  const double lo = e.tail_alpha - e.tail_beta;
  const double hi = e.tail_alpha + e.tail_beta;
  return {lo * lo, hi * hi};
}

namespace detail {

// Stieltjes transform of the pure-Toeplitz tail:
//   m(z) = (alpha^2 - z - beta^2 + sqrt(z - g+) sqrt(z - g-)) / (2 z beta^2)
// with principal square roots; the sign of the root product is flipped if the
// result leaves the Herglotz branch (Im m >= 0 in the upper half-plane,
// m >= 0 on the real axis left of the support).
inline std::complex<double> tail_transform(std::complex<double> z,
                                           double tail_alpha,
                                           double tail_beta) {
  const double lo = (tail_alpha - tail_beta) * (tail_alpha - tail_beta);
  const double hi = (tail_alpha + tail_beta) * (tail_alpha + tail_beta);
  const std::complex<double> denom = 2.0 * z * (tail_beta * tail_beta);
  if (std::abs(denom) < 1e-300)
    throw numeric_error("stieltjes transform evaluated at a pole (z = 0)");
  const std::complex<double> s = std::sqrt(z - hi) * std::sqrt(z - lo);
  const std::complex<double> base = tail_alpha * tail_alpha - z -
                                    tail_beta * tail_beta;
  std::complex<double> m = (base + s) / denom;
  const bool violates = (z.imag() > 0.0 && m.imag() < 0.0) ||
                        (z.imag() == 0.0 && z.real() < lo && m.real() < 0.0);
  if (violates) m = (base - s) / denom;
  return m;
}

}  // namespace detail

// Stieltjes transform of the extended operator's spectral measure at z
// (Im z >= 0): closed-form tail value propagated down the prefix by
//   m_i = 1 / (alpha_i^2 - z - alpha_i^2 beta_i^2 m_{i+1} / (1 + beta_i^2 m_{i+1})).
inline std::complex<double> stieltjes_cf(const ExtendedCholesky& e,
                                         std::complex<double> z) {
  if (z.imag() < 0.0)
    throw format_error("stieltjes transform requires Im z >= 0");
  std::complex<double> m = detail::tail_transform(z, e.tail_alpha, e.tail_beta);
  for (std::size_t idx = e.alpha.size(); idx-- > 0;) {
    const double a2 = e.alpha[idx] * e.alpha[idx];
    const double b2 = e.beta[idx] * e.beta[idx];
    const std::complex<double> shifted = 1.0 + b2 * m;
    if (std::abs(shifted) < 1e-14 * (1.0 + b2 * std::abs(m)))
      throw numeric_error("stieltjes transform evaluated at a pole");
    const std::complex<double> denom = a2 - z - a2 * b2 * (m / shifted);
    if (std::abs(denom) < 1e-14 * (a2 + std::abs(z)))
      throw numeric_error("stieltjes transform evaluated at a pole");
    m = 1.0 / denom;
  }
  return m;
}

// Spectral density at real lambda by Stieltjes inversion evaluated directly
// on the axis (the tail's boundary value is exact, no +i*eps limit).  Zero
// outside the open support interval; tiny negative round-off (>= -1e-12) is
// clamped to zero.
inline double density(const ExtendedCholesky& e, double lambda) {
  const auto [lo, hi] = support_endpoints(e);
  if (!(lambda > lo && lambda < hi)) return 0.0;
  const double rho =
      stieltjes_cf(e, std::complex<double>(lambda, 0.0)).imag() /
      std::numbers::pi;
  if (rho < 0.0) {
    if (rho < -1e-12)
      throw numeric_error("density: negative value " + std::to_string(rho) +
                          " beyond round-off at lambda = " +
                          std::to_string(lambda));
    return 0.0;
  }
  return rho;
}

}  // namespace spectral_spike
