#pragma once

// Lanczos tridiagonalization with full (two-pass classical Gram-Schmidt)
// reorthogonalization, plus the stopping rules that watch the recurrence
// coefficients flatten.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "spectral_spike/errors.hpp"
#include "spectral_spike/linalg.hpp"
#include "spectral_spike/operator.hpp"

namespace spectral_spike {

// Symmetric tridiagonal matrix: diagonal a (size s), off-diagonal b
// (size s-1, all positive while the recurrence continues).
struct JacobiMatrix {
  std::vector<double> a;
  std::vector<double> b;

  std::size_t size() const { return a.size(); }
};

struct StoppingRule {
  enum class Kind { fixed, tail_stddev, two_window };

  Kind kind = Kind::fixed;
  std::size_t n = 0;          // fixed: stop once this many steps are done
  std::size_t q = 1;          // window length
  std::size_t gap = 0;        // entries between the two windows
  double delta1 = 0.0;        // mean-difference tolerance (two_window)
  double delta2 = 0.0;        // stddev tolerance
  std::size_t max_steps = 0;  // hard cap on steps (required, >= 1)
};

inline StoppingRule fixed_steps(std::size_t n) {
  if (n == 0) throw format_error("fixed stopping rule needs n >= 1");
  StoppingRule r;
  r.kind = StoppingRule::Kind::fixed;
  r.n = n;
  r.max_steps = n;
  return r;
}

inline StoppingRule tail_stddev(std::size_t q, double delta,
                                std::size_t max_steps) {
  if (q == 0) throw format_error("tail stopping rule needs q >= 1");
  if (!(delta > 0.0)) throw format_error("tail stopping rule needs delta > 0");
  if (max_steps == 0) throw format_error("max_steps must be positive");
  StoppingRule r;
  r.kind = StoppingRule::Kind::tail_stddev;
  r.q = q;
  r.delta2 = delta;
  r.max_steps = max_steps;
  return r;
}

inline StoppingRule two_window(std::size_t q, std::size_t gap, double delta1,
                               double delta2, std::size_t max_steps) {
  if (q == 0) throw format_error("two-window stopping rule needs q >= 1");
  if (!(delta1 > 0.0) || !(delta2 > 0.0))
    throw format_error("two-window stopping rule needs positive tolerances");
  if (max_steps == 0) throw format_error("max_steps must be positive");
  StoppingRule r;
  r.kind = StoppingRule::Kind::two_window;
  r.q = q;
  r.gap = gap;
  r.delta1 = delta1;
  r.delta2 = delta2;
  r.max_steps = max_steps;
  return r;
}

namespace detail {

inline double mean_of(const std::vector<double>& x, std::size_t first,
                      std::size_t count) {
  double s = 0.0;
  for (std::size_t i = 0; i < count; ++i) s += x[first + i];
  return s / double(count);
}

// Sample standard deviation (n-1 divisor); a single sample has stddev 0.
inline double stddev_of(const std::vector<double>& x, std::size_t first,
                        std::size_t count) {
  if (count < 2) return 0.0;
  const double m = mean_of(x, first, count);
  double s = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double d = x[first + i] - m;
    s += d * d;
  }
  return std::sqrt(s / double(count - 1));
}

}  // namespace detail

// True when the rule fires on the accumulated coefficient sequences.
inline bool stopping_check(const StoppingRule& rule,
                           const std::vector<double>& a,
                           const std::vector<double>& b) {
  switch (rule.kind) {
    case StoppingRule::Kind::fixed:
      return a.size() >= rule.n;
    case StoppingRule::Kind::tail_stddev: {
      const std::size_t q = rule.q;
      if (a.size() < q || b.size() < q) return false;
      return detail::stddev_of(a, a.size() - q, q) < rule.delta2 &&
             detail::stddev_of(b, b.size() - q, q) < rule.delta2;
    }
    case StoppingRule::Kind::two_window: {
      const std::size_t q = rule.q, need = 2 * rule.q + rule.gap;
      if (a.size() < need || b.size() < need) return false;
      for (const auto* seq : {&a, &b}) {
        const std::size_t last = seq->size() - q;
        const std::size_t first = seq->size() - 2 * q - rule.gap;
        if (std::fabs(detail::mean_of(*seq, first, q) -
                      detail::mean_of(*seq, last, q)) >= rule.delta1)
          return false;
        if (detail::stddev_of(*seq, first, q) >= rule.delta2 ||
            detail::stddev_of(*seq, last, q) >= rule.delta2)
          return false;
      }
      return true;
    }
  }
  return false;
}

// Dimension-driven defaults: a two-window rule with
//   q = max(1, floor(ln(N)/2)),  gap = q,  delta1 = delta2 = 3/sqrt(N),
// and step cap ceil(max(6 ln N + 24, sqrt(N))) clamped to N.
inline StoppingRule default_rule(std::size_t n_dim) {
  if (n_dim == 0) throw format_error("default rule needs a positive dimension");
  const double logn = std::log(double(n_dim));
  const std::size_t q =
      std::max<std::size_t>(1, std::size_t(std::floor(0.5 * logn)));
  const double delta = 3.0 / std::sqrt(double(n_dim));
  const double cap = std::ceil(
      std::max(6.0 * logn + 24.0, std::sqrt(double(n_dim))));
  return two_window(q, q, delta, delta,
                    std::min<std::size_t>(n_dim, std::size_t(cap)));
}

struct LanczosResult {
  JacobiMatrix jacobi;
  std::size_t steps = 0;           // rows of the Jacobi matrix produced
  bool breakdown = false;          // residual vanished (invariant subspace)
  double residual_offdiag = 0.0;   // the discarded b at truncation
};

// Runs the three-term recurrence from unit probe b until the stopping rule
// fires, `rule.max_steps` steps are taken (clamped to the dimension), or the
// residual norm falls below 1e-13 * (a_0 + 2 max b) (breakdown).  Every
// Lanczos vector is kept and the residual is reorthogonalized against all of
// them with two classical Gram-Schmidt passes before its norm is taken.
inline LanczosResult lanczos_run(const CovarianceOperator& op,
                                 const std::vector<double>& b,
                                 const StoppingRule& rule) {
  const std::size_t n = op.dim();
  if (b.size() != n)
    throw format_error("probe length does not match operator dimension");
  if (rule.max_steps == 0) throw format_error("max_steps must be positive");
  const std::size_t max_steps = std::min(rule.max_steps, n);

  const double bnorm = norm2(b);
  if (std::fabs(bnorm - 1.0) > 1e-12)
    throw format_error("probe vector must have unit norm");

  std::vector<std::vector<double>> basis;
  basis.reserve(max_steps);
  basis.push_back(b);
  scale_inplace(basis.back(), 1.0 / bnorm);

  LanczosResult res;
  std::vector<double>& a = res.jacobi.a;
  std::vector<double>& off = res.jacobi.b;
  double max_off = 0.0;

  for (std::size_t j = 0; j < max_steps; ++j) {
    const std::vector<double>& qj = basis[j];
    std::vector<double> v = op.apply(qj);
    const double prev_off = j ? off[j - 1] : 0.0;
    if (j) axpy(-prev_off, basis[j - 1], v);
    const double aj = dot(v, qj);
    a.push_back(aj);
    axpy(-aj, qj, v);
    std::vector<double> coef(basis.size());
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t i = 0; i < basis.size(); ++i) coef[i] = dot(v, basis[i]);
      for (std::size_t i = 0; i < basis.size(); ++i) axpy(-coef[i], basis[i], v);
    }
    const double bj = norm2(v);
    res.steps = j + 1;

    const double norm_est = a[0] + 2.0 * max_off;
    if (bj <= 1e-13 * norm_est) {
      res.breakdown = true;
      res.residual_offdiag = bj;
      break;
    }
    if (res.steps == max_steps) {
      res.residual_offdiag = bj;
      break;
    }

    // The freshly computed off-diagonal participates in the stopping check;
    // it is dropped again if the rule fires here.
    off.push_back(bj);
    max_off = std::max(max_off, bj);
    if (stopping_check(rule, a, off)) {
      off.pop_back();
      res.residual_offdiag = bj;
      break;
    }
    scale_inplace(v, 1.0 / bj);
    basis.push_back(std::move(v));
  }
  return res;
}

}  // namespace spectral_spike
