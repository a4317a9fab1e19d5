#pragma once

// Closed-form and semi-analytic baselines for deformed Marchenko-Pastur
// models: the inverse companion functional, Stieltjes inversion by damped
// Newton, support edges, the outlier phase-transition threshold, and exact
// transforms for the pure bulk and the single-spike worked model.

#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <vector>

#include "spectral_spike/errors.hpp"

namespace spectral_spike {

// Population spectrum sigma_1 >= sigma_2 >= ... >= sigma_N > 0 with sample
// count M; the aspect ratio N/M enters through the 1/M normalization of the
// functional below.
struct DeformedMPModel {
  std::vector<double> sigmas;  // descending population eigenvalues
  std::size_t m = 0;           // sample count

  static DeformedMPModel constant(double sigma2, std::size_t n, std::size_t m) {
    if (!(sigma2 > 0.0) || n == 0 || m == 0)
      throw format_error("constant model requires sigma2 > 0 and n, m >= 1");
    return DeformedMPModel{std::vector<double>(n, sigma2), m};
  }

  double aspect_ratio() const {
    return static_cast<double>(sigmas.size()) / static_cast<double>(m);
  }

  void validate() const {
    if (sigmas.empty() || m == 0)
      throw format_error("model requires nonempty spectrum and m >= 1");
    double prev = std::numeric_limits<double>::infinity();
    for (double s : sigmas) {
      if (!(s > 0.0)) throw format_error("population eigenvalues must be positive");
      if (s > prev) throw format_error("population eigenvalues must be descending");
      prev = s;
    }
  }
};

namespace detail {

template <class T>
inline void check_f_dmp_pole(const DeformedMPModel& model, const T& denom,
                             double scale) {
  if (std::abs(denom) < 1e-13 * scale)
    throw numeric_error("evaluation at a pole of the companion functional");
  (void)model;
}

}  // namespace detail

// f(m) = -1/m + (1/M) sum_k 1/(m + 1/sigma_k).  Maps the Stieltjes variable
// back to the spectral argument z = f(m).
template <class T>
inline T f_dmp(const DeformedMPModel& model, const T& m) {
  detail::check_f_dmp_pole(model, m, 1.0 + std::abs(m));
  T acc = T(0.0);
  for (double s : model.sigmas) {
    const T denom = m + 1.0 / s;
    detail::check_f_dmp_pole(model, denom, std::abs(m) + 1.0 / s);
    acc += 1.0 / denom;
  }
  return -1.0 / m + acc / static_cast<double>(model.m);
}

template <class T>
inline T f_dmp_deriv(const DeformedMPModel& model, const T& m) {
  detail::check_f_dmp_pole(model, m, 1.0 + std::abs(m));
  T acc = T(0.0);
  for (double s : model.sigmas) {
    const T denom = m + 1.0 / s;
    detail::check_f_dmp_pole(model, denom, std::abs(m) + 1.0 / s);
    acc += 1.0 / (denom * denom);
  }
  return 1.0 / (m * m) - acc / static_cast<double>(model.m);
}

// Stieltjes transform of the deformed MP law at z in the open upper
// half-plane, by damped Newton on f(m) = z started from -1/z.  Steps are
// halved while they would leave the upper half-plane or fail to shrink the
// residual; if no Newton step helps, one sweep of the half-plane-preserving
// map m -> 1/(-z + (1/M) sum_k sigma_k/(1 + sigma_k m)) restores progress.
inline std::complex<double> m_dmp_solve(const DeformedMPModel& model,
                                        std::complex<double> z) {
  if (!(z.imag() > 0.0))
    throw format_error("m_dmp_solve requires Im z > 0");
  const double tol = 1e-12 * (1.0 + std::abs(z));
  std::complex<double> m = -1.0 / z;
  std::complex<double> g = f_dmp(model, m) - z;
  for (int it = 0; it < 200; ++it) {
    if (std::abs(g) <= tol) return m;
    std::complex<double> mnew, gnew;
    bool accepted = false;
    const std::complex<double> d = f_dmp_deriv(model, m);
    if (std::abs(d) >= 1e-300) {
      std::complex<double> step = -g / d;
      for (int h = 0; h < 60; ++h, step *= 0.5) {
        if ((m + step).imag() <= 0.0) continue;
        mnew = m + step;
        gnew = f_dmp(model, mnew) - z;
        if (std::abs(gnew) < std::abs(g)) {
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) {
      std::complex<double> acc{0.0, 0.0};
      for (double s : model.sigmas) acc += s / (1.0 + s * m);
      mnew = 1.0 / (-z + acc / static_cast<double>(model.m));
      gnew = f_dmp(model, mnew) - z;
    }
    m = mnew;
    g = gnew;
  }
  throw numeric_error("stieltjes inversion did not converge");
}

struct SupportEdge {
  double m_plus = 0.0;      // critical point of f in (-1/sigma_max, 0)
  double gamma_plus = 0.0;  // rightmost support endpoint f(m_plus)
};

// Rightmost bulk edge: the unique zero of f' on (-1/sigma_max, 0), located by
// bisection (f' -> -inf at the left end, +inf at the right end).
inline SupportEdge support_edge(const DeformedMPModel& model) {
  model.validate();
  const double sigma_max = model.sigmas.front();
  const double a = -1.0 / sigma_max;
  double lo = a * (1.0 - 1e-12);  // just right of the pole at -1/sigma_max
  double hi = a * 1e-12;          // just left of the pole at 0
  double flo = f_dmp_deriv(model, lo);
  double fhi = f_dmp_deriv(model, hi);
  if (!(flo < 0.0) || !(fhi > 0.0))
    throw numeric_error("support edge bracket failed; spectrum not bulk-like");
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fmid = f_dmp_deriv(model, mid);
    if (fmid < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  SupportEdge e;
  e.m_plus = 0.5 * (lo + hi);
  e.gamma_plus = f_dmp(model, e.m_plus);
  return e;
}

// Phase-transition threshold: population eigenvalues above -1/m_plus detach
// from the bulk.  Equals sigma2 * (1 + sqrt(c)) for a constant spectrum.
inline double bbp_threshold(const DeformedMPModel& model) {
  return -1.0 / support_edge(model).m_plus;
}

struct OutlierResult {
  double location = 0.0;    // f(-1/spike); an outlier only if supercritical
  bool supercritical = false;
};

// Asymptotic location of the sample outlier produced by a population spike
// added on top of `model`.  Subcritical spikes are tagged; their mapped value
// is returned for information but no outlier separates from the bulk.
inline OutlierResult outlier_location(const DeformedMPModel& model,
                                      double spike) {
  if (!(spike > 0.0)) throw format_error("spike must be positive");
  OutlierResult r;
  r.supercritical = spike > bbp_threshold(model);
  r.location = f_dmp(model, -1.0 / spike);
  return r;
}

// Marchenko-Pastur density with scale sigma2 and aspect ratio c, evaluated at
// lambda; zero outside the open bulk (gamma_minus, gamma_plus).
inline double mp_density(double sigma2, double c, double lambda) {
  if (!(sigma2 > 0.0) || !(c > 0.0))
    throw format_error("mp_density requires sigma2 > 0 and c > 0");
  const double sc = std::sqrt(c);
  const double gm = sigma2 * (1.0 - sc) * (1.0 - sc);
  const double gp = sigma2 * (1.0 + sc) * (1.0 + sc);
  if (!(lambda > gm) || !(lambda < gp)) return 0.0;
  return std::sqrt(gp - lambda) * std::sqrt(lambda - gm) /
         (2.0 * std::numbers::pi * c * sigma2 * lambda);
}

namespace detail {

// Herglotz branch of sqrt((z - gp)(z - gm)) via principal factored roots,
// with a sign flip when the candidate violates positivity of the imaginary
// part in the upper half-plane or of the value left of the bulk.
inline std::complex<double> herglotz_select(std::complex<double> z, double gm,
                                            std::complex<double> with_plus,
                                            std::complex<double> with_minus,
                                            bool real_left_rule) {
  const bool violates =
      (z.imag() > 0.0 && with_plus.imag() < 0.0) ||
      (z.imag() == 0.0 && real_left_rule && z.real() < gm &&
       with_plus.real() < 0.0);
  return violates ? with_minus : with_plus;
}

}  // namespace detail

// Closed-form Marchenko-Pastur Stieltjes transform (closed upper half-plane;
// boundary values from above on the real axis).
inline std::complex<double> mp_transform(double sigma2, double c,
                                         std::complex<double> z) {
  if (!(sigma2 > 0.0) || !(c > 0.0))
    throw format_error("mp_transform requires sigma2 > 0 and c > 0");
  if (z.imag() < 0.0)
    throw format_error("mp_transform requires Im z >= 0");
  const double sc = std::sqrt(c);
  const double gm = sigma2 * (1.0 - sc) * (1.0 - sc);
  const double gp = sigma2 * (1.0 + sc) * (1.0 + sc);
  const std::complex<double> denom = 2.0 * c * sigma2 * z;
  if (std::abs(denom) < 1e-300)
    throw numeric_error("mp_transform evaluated at z = 0");
  const std::complex<double> s =
      std::sqrt(z - gp) * std::sqrt(z - gm);
  const std::complex<double> base = sigma2 * (1.0 - c) - z;
  // Left-of-bulk positivity only certifies the branch when no mass sits at
  // the origin (c < 1), or for strictly negative z.
  const bool left_rule = c < 1.0 || z.real() < 0.0;
  return detail::herglotz_select(z, gm, (base + s) / denom, (base - s) / denom,
                                 left_rule);
}

// Exact transform of the rank-one spiked model with unit bulk, spike ell, and
// aspect ratio c.  Has a simple pole at ell + ell*c/(ell - 1) when the spike
// is supercritical (ell > 1 + sqrt(c)).
inline std::complex<double> example2_transform(double ell, double c,
                                               std::complex<double> z) {
  if (!(ell > 0.0) || !(c > 0.0))
    throw format_error("example2_transform requires ell > 0 and c > 0");
  if (z.imag() < 0.0)
    throw format_error("example2_transform requires Im z >= 0");
  const double sc = std::sqrt(c);
  const double gm = (1.0 - sc) * (1.0 - sc);
  const double gp = (1.0 + sc) * (1.0 + sc);
  const std::complex<double> s = std::sqrt(z - gp) * std::sqrt(z - gm);
  const std::complex<double> denom =
      2.0 * z * ((1.0 - ell) * z + ell * (ell - 1.0 + c));
  if (std::abs(denom) < 1e-300)
    throw numeric_error("example2_transform evaluated at a pole");
  const std::complex<double> head = -2.0 * z;
  const std::complex<double> with_plus =
      (head + ell * (1.0 - c + z + s)) / denom;
  const std::complex<double> with_minus =
      (head + ell * (1.0 - c + z - s)) / denom;
  const bool left_rule = c < 1.0 || z.real() < 0.0;
  return detail::herglotz_select(z, gm, with_plus, with_minus, left_rule);
}

inline bool example2_supercritical(double ell, double c) {
  return ell > 1.0 + std::sqrt(c);
}

// Pole location of the spiked-model transform (requires ell > 1).
inline double example2_pole(double ell, double c) {
  if (!(ell > 1.0)) throw format_error("example2_pole requires ell > 1");
  return ell + ell * c / (ell - 1.0);
}

// Mass of that pole; positive exactly in the supercritical phase.
inline double example2_weight(double ell, double c) {
  if (!(ell > 1.0)) throw format_error("example2_weight requires ell > 1");
  const double d = ell - 1.0;
  return (d * d - c) / (d * (d + c));
}

}  // namespace spectral_spike
