#pragma once

// Discrete poles of the Stieltjes transform of a Toeplitz-plus-finite-rank
// Jacobi operator, by two routes:
//   * connection coefficients: a 5-term recurrence fills the change-of-basis
//     matrix to the reference Toeplitz operator; the matrix becomes
//     upper-triangular Toeplitz past a finite block, its symbol's roots in
//     the unit disk map to the poles through the Joukowski map, and a
//     residue formula gives the weights;
//   * finite section: eigenvalues of a large principal truncation.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "spectral_spike/eig.hpp"
#include "spectral_spike/errors.hpp"
#include "spectral_spike/jacobi.hpp"

namespace spectral_spike {

// Semi-infinite symmetric tridiagonal operator whose diagonal and
// off-diagonal become constant (tail_diag, tail_off) beyond the stored
// perturbed prefix.  The stored arrays have equal length n, chosen so that
// diag_at(i) == tail_diag for i >= n and off_at(i) == tail_off for
// i >= n-1: an off-diagonal entry couples rows i and i+1, so a mismatch at
// index k forces n >= k+2.  The Toeplitz block structure of the connection
// matrix below depends on this convention.
struct ToeplitzPlusFiniteRank {
  std::vector<double> diag;
  std::vector<double> off;
  double tail_diag = 0.0;
  double tail_off = 0.0;

  std::size_t n() const { return diag.size(); }
  double diag_at(std::size_t i) const {
    return i < diag.size() ? diag[i] : tail_diag;
  }
  double off_at(std::size_t i) const {
    return i < off.size() ? off[i] : tail_off;
  }

  // J = L L^T of the extended bidiagonal factor: row i has diagonal
  // alpha(i)^2 + beta(i-1)^2 and couples to row i+1 with alpha(i) beta(i).
  static ToeplitzPlusFiniteRank from_extension(const ExtendedCholesky& e) {
    ToeplitzPlusFiniteRank t;
    t.tail_diag = e.tail_alpha * e.tail_alpha + e.tail_beta * e.tail_beta;
    t.tail_off = e.tail_alpha * e.tail_beta;
    const std::size_t m = e.alpha.size() + 1;
    t.diag.resize(m);
    t.off.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      const double prev_beta = i ? e.beta_at(i - 1) : 0.0;
      t.diag[i] = e.alpha_at(i) * e.alpha_at(i) + prev_beta * prev_beta;
      t.off[i] = e.alpha_at(i) * e.beta_at(i);
    }
    t.trim();
    return t;
  }

  // Drop trailing entries indistinguishable from the tail while preserving
  // the index convention above.
  void trim() {
    const double tol =
        1e-12 * (std::fabs(tail_diag) + std::fabs(tail_off) + 1e-300);
    auto near_tail = [&](double v, double t) {
      return std::fabs(v - t) <= tol;
    };
    while (!diag.empty()) {
      const std::size_t m = diag.size();
      if (!near_tail(diag[m - 1], tail_diag) ||
          !near_tail(off[m - 1], tail_off) ||
          (m >= 2 && !near_tail(off[m - 2], tail_off)))
        break;
      diag.pop_back();
      off.pop_back();
    }
  }
};

// Upper-triangular change-of-basis block between the orthonormal polynomial
// families of the perturbed and reference operators, plus the Toeplitz
// symbol coefficients t_0..t_{2n-1} of its shift-stable part.
struct ConnectionMatrix {
  std::size_t n = 0;                      // perturbation order used
  std::vector<std::vector<double>> cols;  // cols[j][i], 0 <= i <= j
  std::vector<double> symbol;             // degree <= 2n-1

  double at(std::size_t i, std::size_t j) const {
    return j < cols.size() && i < cols[j].size() ? cols[j][i] : 0.0;
  }
};

namespace detail {

// Fill connection-coefficient columns 0..last_col for the operator t against
// its reference Toeplitz (A, B).  Column j+1 follows from
//   c_{i,j+1} = [B(c_{i-1,j} + c_{i+1,j}) - b_{j-1} c_{i,j-1}
//                - (a_j - A) c_{i,j}] / b_j
// with c_{0,0} = 1 and out-of-range entries zero.
inline std::vector<std::vector<double>> connection_columns(
    const ToeplitzPlusFiniteRank& t, std::size_t last_col) {
  const double A = t.tail_diag, B = t.tail_off;
  std::vector<std::vector<double>> cols;
  cols.reserve(last_col + 1);
  cols.push_back({1.0});
  for (std::size_t j = 0; j < last_col; ++j) {
    const auto& cur = cols[j];
    const std::vector<double>* prev = j ? &cols[j - 1] : nullptr;
    const double aj = t.diag_at(j);
    const double bj = t.off_at(j);
    const double bjm1 = j ? t.off_at(j - 1) : 0.0;
    std::vector<double> next(j + 2, 0.0);
    auto get = [](const std::vector<double>* col, std::size_t i) {
      return col && i < col->size() ? (*col)[i] : 0.0;
    };
    for (std::size_t i = 0; i <= j + 1; ++i) {
      const double up = i ? get(&cur, i - 1) : 0.0;
      const double down = get(&cur, i + 1);
      const double left = get(prev, i);
      const double here = get(&cur, i);
      next[i] = (B * (up + down) - bjm1 * left - (aj - A) * here) / bj;
      if (std::fabs(next[i]) > 1e250)
        throw numeric_error("connection coefficients overflow");
    }
    cols.push_back(std::move(next));
  }
  return cols;
}

}  // namespace detail

// Computes the connection matrix and extracts the Toeplitz symbol from a
// shift-stable column.  If the columns are not yet Toeplitz at the nominal
// perturbation order (which can happen when a trailing entry sits exactly at
// the trim tolerance), the order is increased and the computation retried.
inline ConnectionMatrix connection_coefficients(
    const ToeplitzPlusFiniteRank& t) {
  if (!(t.tail_off > 0.0))
    throw format_error("connection coefficients need a positive tail off-diagonal");
  for (std::size_t i = 0; i < t.off.size(); ++i)
    if (!(t.off[i] > 0.0))
      throw format_error("connection coefficients need positive off-diagonals");

  const std::size_t n0 = t.n();
  if (n0 == 0) {
    ConnectionMatrix cm;
    cm.n = 0;
    cm.cols = {{1.0}};
    cm.symbol = {1.0};
    return cm;
  }

  for (std::size_t n = n0; n <= 2 * n0 + 4; ++n) {
    const std::size_t last = 2 * n + 1;
    auto cols = detail::connection_columns(t, last);
    double scale = 0.0;
    for (double v : cols[last]) scale = std::max(scale, std::fabs(v));
    for (double v : cols[last - 1]) scale = std::max(scale, std::fabs(v));
    const double tol = 1e-10 * std::max(scale, 1.0);

    bool stable = true;
    for (std::size_t d = 0; d < 2 * n && stable; ++d)
      if (std::fabs(cols[last][last - d] - cols[last - 1][last - 1 - d]) > tol)
        stable = false;
    // Coefficients beyond degree 2n-1 must have died out.
    if (std::fabs(cols[last][0]) > tol || std::fabs(cols[last][1]) > tol)
      stable = false;
    if (!stable) continue;

    ConnectionMatrix cm;
    cm.n = n;
    cm.symbol.resize(2 * n);
    for (std::size_t d = 0; d < 2 * n; ++d) cm.symbol[d] = cols[last][last - d];
    cm.cols = std::move(cols);
    return cm;
  }
  throw numeric_error("connection coefficients failed to stabilize");
}

inline ConnectionMatrix connection_coefficients(const ExtendedCholesky& e) {
  return connection_coefficients(ToeplitzPlusFiniteRank::from_extension(e));
}

// Real roots of the symbol polynomial inside the open unit disk, ascending.
// Trailing coefficients at or below 1e-12 of the largest are trimmed first;
// roots are companion-matrix eigenvalues filtered to |Im z| <= 1e-8 and
// |z| < 1 - 1e-10.
inline std::vector<double> symbol_roots(const std::vector<double>& sym) {
  if (sym.empty()) throw format_error("symbol_roots: empty symbol");
  double mx = 0.0;
  for (double v : sym) mx = std::max(mx, std::fabs(v));
  if (mx == 0.0)
    throw numeric_error("symbol_roots: degenerate polynomial (all zero)");
  std::size_t deg = sym.size() - 1;
  while (deg > 0 && std::fabs(sym[deg]) <= 1e-12 * mx) --deg;
  if (deg == 0) return {};
  const std::vector<double> trimmed(sym.begin(), sym.begin() + deg + 1);
  std::vector<double> roots;
  for (const auto& z : polynomial_roots(trimmed)) {
    if (std::fabs(z.imag()) <= 1e-8 && std::abs(z) < 1.0 - 1e-10)
      roots.push_back(z.real());
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

// M([gamma_-, gamma_+]) composed with the Joukowski map J(z) = (z + 1/z)/2,
// sending the punctured unit disk outside the support interval.
inline double joukowski_map(double z, double gamma_minus, double gamma_plus) {
  const double az = std::fabs(z);
  if (!(az > 0.0) || az >= 1.0)
    throw format_error("joukowski_map: z must lie in the punctured unit disk");
  const double x = 0.5 * (z + 1.0 / z);
  return 0.5 * (gamma_plus + gamma_minus) + x * 0.5 * (gamma_plus - gamma_minus);
}

// Spectral-measure masses at the mapped poles:
//   w_i = (z_i - z_i^{-1})^2 / (z_i c'(z_i) c(z_i^{-1})).
// (The support endpoints are accepted for interface symmetry; the mass
// formula is scale-invariant and does not use them.)
inline std::vector<double> pole_weights(const std::vector<double>& sym,
                                        const std::vector<double>& roots,
                                        [[maybe_unused]] double gamma_minus,
                                        [[maybe_unused]] double gamma_plus) {
  for (std::size_t i = 0; i + 1 < roots.size(); ++i)
    for (std::size_t j = i + 1; j < roots.size(); ++j)
      if (std::fabs(roots[i] - roots[j]) <= 1e-10)
        throw numeric_error("pole_weights: near-multiple symbol root");
  auto horner = [&](double x) {
    double v = 0.0;
    for (std::size_t k = sym.size(); k-- > 0;) v = v * x + sym[k];
    return v;
  };
  auto horner_deriv = [&](double x) {
    double v = 0.0;
    for (std::size_t k = sym.size(); k-- > 1;) v = v * x + double(k) * sym[k];
    return v;
  };
  std::vector<double> w;
  w.reserve(roots.size());
  for (double z : roots) {
    const double denom = z * horner_deriv(z) * horner(1.0 / z);
    if (std::fabs(denom) < 1e-300)
      throw numeric_error("pole_weights: vanishing residue denominator");
    const double zi = z - 1.0 / z;
    const double wi = zi * zi / denom;
    if (!(wi > 0.0))
      throw numeric_error(
          "pole_weights: nonpositive weight (branch/normalization bug)");
    w.push_back(wi);
  }
  return w;
}

struct PoleSet {
  std::vector<double> locations;
  std::vector<double> weights;
};

// Full connection-coefficient pipeline: symbol -> disk roots -> Joukowski
// map -> weights, sorted ascending by location.
inline PoleSet poles_connection(const ExtendedCholesky& e) {
  const auto cm = connection_coefficients(e);
  const auto roots = symbol_roots(cm.symbol);
  const auto [glo, ghi] = support_endpoints(e);
  const auto weights = pole_weights(cm.symbol, roots, glo, ghi);
  std::vector<std::size_t> idx(roots.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::vector<double> locs(roots.size());
  for (std::size_t i = 0; i < roots.size(); ++i)
    locs[i] = joukowski_map(roots[i], glo, ghi);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return locs[a] < locs[b]; });
  PoleSet ps;
  ps.locations.reserve(roots.size());
  ps.weights.reserve(roots.size());
  for (std::size_t i : idx) {
    ps.locations.push_back(locs[i]);
    ps.weights.push_back(weights[i]);
  }
  return ps;
}

// Eigenvalues of the K x K principal truncation that exceed
// gamma_plus + margin (ascending).  section_size 0 selects
// max(2000, 20 * perturbation order).
inline std::vector<double> poles_finite_section(const ToeplitzPlusFiniteRank& t,
                                                std::size_t section_size,
                                                double margin) {
  const std::size_t K =
      section_size ? section_size
                   : std::max<std::size_t>(2000, 20 * std::max<std::size_t>(
                                                          t.n(), 1));
  if (K < t.n() + 50)
    throw format_error("finite section must exceed the perturbation order by 50");
  std::vector<double> d(K), e(K - 1);
  for (std::size_t i = 0; i < K; ++i) d[i] = t.diag_at(i);
  for (std::size_t i = 0; i + 1 < K; ++i) e[i] = t.off_at(i);
  const auto ev = tridiag_eigenvalues(std::move(d), e);
  const double ghi = t.tail_diag + 2.0 * t.tail_off;
  const double cut = ghi + margin;
  auto it = std::upper_bound(ev.begin(), ev.end(), cut);
  return std::vector<double>(it, ev.end());
}

inline std::vector<double> poles_finite_section(const ExtendedCholesky& e,
                                                std::size_t section_size,
                                                double margin) {
  return poles_finite_section(ToeplitzPlusFiniteRank::from_extension(e),
                              section_size, margin);
}

}  // namespace spectral_spike
