#pragma once

// Two small dense eigensolvers used by the pole computations:
//   * implicit-shift QL with Wilkinson shifts for symmetric tridiagonal
//     matrices (eigenvalues only), and
//   * balanced real Hessenberg QR with Francis double shifts for companion
//     matrices (complex eigenvalues).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <vector>

#include "spectral_spike/errors.hpp"

namespace spectral_spike {

// Eigenvalues (ascending) of the symmetric tridiagonal matrix with diagonal
// d and off-diagonal e (|e| = |d| - 1).
inline std::vector<double> tridiag_eigenvalues(std::vector<double> d,
                                               const std::vector<double>& off) {
  const int n = int(d.size());
  if (n == 0) throw format_error("tridiagonal eigensolver: empty matrix");
  if (off.size() + 1 != d.size())
    throw format_error("tridiagonal eigensolver: off-diagonal length mismatch");
  std::vector<double> e(off);
  e.push_back(0.0);
  const double eps = std::numeric_limits<double>::epsilon();
  for (int l = 0; l < n; ++l) {
    int iter = 0;
    int m;
    do {
      for (m = l; m < n - 1; ++m) {
        const double dd = std::fabs(d[m]) + std::fabs(d[m + 1]);
        if (std::fabs(e[m]) <= eps * dd) break;
      }
      if (m != l) {
        if (iter++ == 50)
          throw numeric_error(
              "tridiagonal eigensolver: iteration cap exceeded");
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = std::hypot(g, 1.0);
        g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
        double s = 1.0, c = 1.0, p = 0.0;
        bool underflow = false;
        for (int i = m - 1; i >= l; --i) {
          double f = s * e[i];
          const double b = c * e[i];
          r = std::hypot(f, g);
          e[i + 1] = r;
          if (r == 0.0) {
            d[i + 1] -= p;
            e[m] = 0.0;
            underflow = true;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i + 1] - p;
          r = (d[i] - g) * s + 2.0 * c * b;
          p = s * r;
          d[i + 1] = g + p;
          g = c * r - b;
        }
        if (underflow) continue;
        d[l] -= p;
        e[l] = g;
        e[m] = 0.0;
      }
    } while (m != l);
  }
  std::sort(d.begin(), d.end());
  return d;
}

// Diagonal similarity scaling (radix 2) equalizing row and column norms;
// improves companion-matrix conditioning without changing eigenvalues.
inline void balance_inplace(std::vector<double>& h, int n) {
  constexpr double radix = 2.0, radix_sq = 4.0;
  auto A = [&](int i, int j) -> double& { return h[std::size_t(i) * n + j]; };
  bool done = false;
  while (!done) {
    done = true;
    for (int i = 0; i < n; ++i) {
      double r = 0.0, c = 0.0;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        c += std::fabs(A(j, i));
        r += std::fabs(A(i, j));
      }
      if (c == 0.0 || r == 0.0) continue;
      double g = r / radix, f = 1.0;
      const double s = c + r;
      while (c < g) {
        f *= radix;
        c *= radix_sq;
      }
      g = r * radix;
      while (c > g) {
        f /= radix;
        c /= radix_sq;
      }
      if ((c + r) / f < 0.95 * s) {
        done = false;
        g = 1.0 / f;
        for (int j = 0; j < n; ++j) A(i, j) *= g;
        for (int j = 0; j < n; ++j) A(j, i) *= f;
      }
    }
  }
}

// Complex eigenvalues of a real upper Hessenberg matrix (row-major, n x n),
// destroyed in place.  Francis double-shift QR with exceptional shifts every
// 10 iterations and a cap of `max_its` iterations per eigenvalue.
inline std::vector<std::complex<double>> hessenberg_eigenvalues(
    std::vector<double> h, int n, int max_its = 100) {
  auto A = [&](int i, int j) -> double& { return h[std::size_t(i) * n + j]; };
  std::vector<std::complex<double>> out(static_cast<std::size_t>(n));
  if (n == 0) return out;
  const double eps = std::numeric_limits<double>::epsilon();
  double anorm = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = std::max(i - 1, 0); j < n; ++j) anorm += std::fabs(A(i, j));
  if (anorm == 0.0) return out;

  int nn = n - 1;
  double t = 0.0;
  while (nn >= 0) {
    int its = 0;
    int l;
    do {
      for (l = nn; l >= 1; --l) {
        double s = std::fabs(A(l - 1, l - 1)) + std::fabs(A(l, l));
        if (s == 0.0) s = anorm;
        if (std::fabs(A(l, l - 1)) <= eps * s) {
          A(l, l - 1) = 0.0;
          break;
        }
      }
      double x = A(nn, nn);
      if (l == nn) {
        out[std::size_t(nn--)] = {x + t, 0.0};
      } else {
        double y = A(nn - 1, nn - 1);
        double w = A(nn, nn - 1) * A(nn - 1, nn);
        if (l == nn - 1) {
          double p = 0.5 * (y - x);
          const double q = p * p + w;
          double z = std::sqrt(std::fabs(q));
          x += t;
          if (q >= 0.0) {
            z = p + std::copysign(z, p);
            out[std::size_t(nn - 1)] = {x + z, 0.0};
            out[std::size_t(nn)] = {z != 0.0 ? x - w / z : x + z, 0.0};
          } else {
            out[std::size_t(nn - 1)] = {x + p, z};
            out[std::size_t(nn)] = {x + p, -z};
          }
          nn -= 2;
        } else {
          if (its == max_its)
            throw numeric_error(
                "hessenberg eigensolver: iteration cap exceeded");
          if (its != 0 && its % 10 == 0) {
            t += x;
            for (int i = 0; i <= nn; ++i) A(i, i) -= x;
            const double s =
                std::fabs(A(nn, nn - 1)) + std::fabs(A(nn - 1, nn - 2));
            y = x = 0.75 * s;
            w = -0.4375 * s * s;
          }
          ++its;
          int m;
          double p = 0.0, q = 0.0, r = 0.0;
          for (m = nn - 2; m >= l; --m) {
            const double z = A(m, m);
            const double rr = x - z;
            const double ss = y - z;
            p = (rr * ss - w) / A(m + 1, m) + A(m, m + 1);
            q = A(m + 1, m + 1) - z - rr - ss;
            r = A(m + 2, m + 1);
            const double sc = std::fabs(p) + std::fabs(q) + std::fabs(r);
            p /= sc;
            q /= sc;
            r /= sc;
            if (m == l) break;
            const double u = std::fabs(A(m, m - 1)) *
                             (std::fabs(q) + std::fabs(r));
            const double v = std::fabs(p) * (std::fabs(A(m - 1, m - 1)) +
                                             std::fabs(z) +
                                             std::fabs(A(m + 1, m + 1)));
            if (u <= eps * v) break;
          }
          for (int i = m + 2; i <= nn; ++i) {
            A(i, i - 2) = 0.0;
            if (i != m + 2) A(i, i - 3) = 0.0;
          }
          for (int k = m; k <= nn - 1; ++k) {
            if (k != m) {
              p = A(k, k - 1);
              q = A(k + 1, k - 1);
              r = (k != nn - 1) ? A(k + 2, k - 1) : 0.0;
              x = std::fabs(p) + std::fabs(q) + std::fabs(r);
              if (x != 0.0) {
                p /= x;
                q /= x;
                r /= x;
              }
            }
            const double s =
                std::copysign(std::sqrt(p * p + q * q + r * r), p);
            if (s == 0.0) continue;
            if (k == m) {
              if (l != m) A(k, k - 1) = -A(k, k - 1);
            } else {
              A(k, k - 1) = -s * x;
            }
            p += s;
            x = p / s;
            y = q / s;
            const double zz = r / s;
            q /= p;
            r /= p;
            for (int j = k; j <= nn; ++j) {
              double pp = A(k, j) + q * A(k + 1, j);
              if (k != nn - 1) {
                pp += r * A(k + 2, j);
                A(k + 2, j) -= pp * zz;
              }
              A(k + 1, j) -= pp * y;
              A(k, j) -= pp * x;
            }
            const int mmin = nn < k + 3 ? nn : k + 3;
            for (int i = l; i <= mmin; ++i) {
              double pp = x * A(i, k) + y * A(i, k + 1);
              if (k != nn - 1) {
                pp += zz * A(i, k + 2);
                A(i, k + 2) -= pp * r;
              }
              A(i, k + 1) -= pp * q;
              A(i, k) -= pp;
            }
          }
        }
      }
    } while (l < nn - 1);
  }
  return out;
}

// Roots of the real polynomial sum_k coeffs[k] z^k (leading coefficient
// nonzero) as eigenvalues of its balanced companion matrix.
inline std::vector<std::complex<double>> polynomial_roots(
    const std::vector<double>& coeffs) {
  if (coeffs.size() < 2)
    throw format_error("polynomial_roots: degree must be at least 1");
  const int deg = int(coeffs.size()) - 1;
  const double lead = coeffs.back();
  if (lead == 0.0)
    throw format_error("polynomial_roots: zero leading coefficient");
  std::vector<double> comp(std::size_t(deg) * deg, 0.0);
  for (int i = 0; i < deg; ++i) {
    comp[std::size_t(i) * deg + (deg - 1)] = -coeffs[std::size_t(i)] / lead;
    if (i > 0) comp[std::size_t(i) * deg + (i - 1)] = 1.0;
  }
  balance_inplace(comp, deg);
  return hessenberg_eigenvalues(std::move(comp), deg);
}

}  // namespace spectral_spike
