#pragma once

// Small dense kernels for the matrix-free pipeline.  Reductions use unrolled
// independent partial sums so the compiler can vectorize while keeping the
// summation order fixed (results are reproducible run to run).

#include <cmath>
#include <cstddef>
#include <vector>

namespace spectral_spike {

inline double dot(const double* x, const double* y, std::size_t n) {
  double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    a0 += x[i] * y[i];
    a1 += x[i + 1] * y[i + 1];
    a2 += x[i + 2] * y[i + 2];
    a3 += x[i + 3] * y[i + 3];
  }
  double a = (a0 + a1) + (a2 + a3);
  for (; i < n; ++i) a += x[i] * y[i];
  return a;
}

inline double dot(const std::vector<double>& x, const std::vector<double>& y) {
  return dot(x.data(), y.data(), x.size());
}

inline double norm2(const std::vector<double>& x) {
  return std::sqrt(dot(x.data(), x.data(), x.size()));
}

// y += a * x
inline void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

inline void axpy(double a, const std::vector<double>& x,
                 std::vector<double>& y) {
  axpy(a, x.data(), y.data(), x.size());
}

inline void scale_inplace(std::vector<double>& x, double a) {
  for (auto& v : x) v *= a;
}

}  // namespace spectral_spike
