#pragma once

// Bundled spectral description of an extended operator: support endpoints,
// an evaluable Stieltjes transform, and the discrete poles with their masses.

#include <complex>
#include <utility>
#include <vector>

#include "spectral_spike/jacobi.hpp"
#include "spectral_spike/poles.hpp"

namespace spectral_spike {

struct SpectralEstimate {
  double gamma_minus = 0.0;
  double gamma_plus = 0.0;
  ExtendedCholesky extension;
  std::vector<double> poles;    // ascending, outside [gamma_minus, gamma_plus]
  std::vector<double> weights;  // same length, positive, summing to <= 1

  std::complex<double> transform(std::complex<double> z) const {
    return stieltjes_cf(extension, z);
  }
  double density_at(double lambda) const { return density(extension, lambda); }
};

// Endpoints + transform + poles (connection-coefficient backend).
inline SpectralEstimate estimate_spectrum(const ExtendedCholesky& e) {
  SpectralEstimate s;
  const auto [lo, hi] = support_endpoints(e);
  s.gamma_minus = lo;
  s.gamma_plus = hi;
  auto ps = poles_connection(e);
  s.poles = std::move(ps.locations);
  s.weights = std::move(ps.weights);
  s.extension = e;
  return s;
}

}  // namespace spectral_spike
