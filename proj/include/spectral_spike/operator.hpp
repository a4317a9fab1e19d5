#pragma once

// Matrix-free sample covariance operator and the synthetic spiked model.
//
// The operator exposes only dimension and apply(v); data-backed instances
// compute w = s * Y (Y^T v) in two row-streamed passes and never form the
// N x N covariance matrix.  The scale s is 1 ("raw": entries of Y already
// carry the 1/sqrt(M) normalization) or 1/M (unit-variance entries).

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "spectral_spike/data_matrix.hpp"
#include "spectral_spike/errors.hpp"
#include "spectral_spike/linalg.hpp"
#include "spectral_spike/rng.hpp"

namespace spectral_spike {

enum class Scale { raw, one_over_m };

class CovarianceOperator {
 public:
  static CovarianceOperator from_data(DataMatrix data, Scale scale) {
    if (data.rows == 0 || data.cols == 0)
      throw format_error("data matrix has nonpositive dimensions");
    const double s = scale == Scale::raw ? 1.0 : 1.0 / double(data.cols);
    CovarianceOperator op;
    op.dim_ = data.rows;
    op.backing_ = DataBacked{std::move(data), s};
    return op;
  }

  // Explicit symmetric matrix (row-major n x n); used for small dense tests
  // and diagonal toy operators.
  static CovarianceOperator from_symmetric(std::size_t n,
                                           std::vector<double> w) {
    if (n == 0) throw format_error("operator dimension must be positive");
    if (w.size() != n * n)
      throw format_error("symmetric backing has wrong size");
    CovarianceOperator op;
    op.dim_ = n;
    op.backing_ = DenseBacked{std::move(w)};
    return op;
  }

  static CovarianceOperator from_diagonal(const std::vector<double>& d) {
    std::vector<double> w(d.size() * d.size(), 0.0);
    for (std::size_t i = 0; i < d.size(); ++i) w[i * d.size() + i] = d[i];
    return from_symmetric(d.size(), std::move(w));
  }

  std::size_t dim() const { return dim_; }

  // Columns of the data backing (0 for explicit symmetric backings).
  std::size_t data_cols() const {
    if (const auto* d = std::get_if<DataBacked>(&backing_)) return d->y.cols;
    return 0;
  }

  std::vector<double> apply(const std::vector<double>& v) const {
    if (v.size() != dim_)
      throw format_error("apply: vector length " + std::to_string(v.size()) +
                         " does not match operator dimension " +
                         std::to_string(dim_));
    std::vector<double> w(dim_, 0.0);
    if (const auto* d = std::get_if<DataBacked>(&backing_)) {
      const std::size_t n = d->y.rows, m = d->y.cols;
      std::vector<double> t(m, 0.0);
      for (std::size_t i = 0; i < n; ++i) axpy(v[i], d->y.row(i), t.data(), m);
      for (std::size_t i = 0; i < n; ++i)
        w[i] = d->scale * dot(d->y.row(i), t.data(), m);
    } else {
      const auto& dense = std::get<DenseBacked>(backing_);
      for (std::size_t i = 0; i < dim_; ++i)
        w[i] = dot(dense.w.data() + i * dim_, v.data(), dim_);
    }
    return w;
  }

 private:
  struct DataBacked {
    DataMatrix y;
    double scale;
  };
  struct DenseBacked {
    std::vector<double> w;
  };

  CovarianceOperator() = default;
  std::size_t dim_ = 0;
  std::variant<DataBacked, DenseBacked> backing_;
};

inline CovarianceOperator make_operator(DataMatrix data, Scale scale) {
  return CovarianceOperator::from_data(std::move(data), scale);
}

// Population covariance for synthetic draws: diagonal with a constant or
// tabulated bulk and a few leading spike entries strictly above the bulk.
struct SpikedModelSpec {
  enum class Dist { gaussian, rademacher };

  std::size_t n = 0;  // rows of Y (operator dimension)
  std::size_t m = 0;  // columns of Y (sample count)
  // Either a single bulk variance or a full table of n bulk quantile values
  // (sorted ascending); spikes overwrite the leading diagonal positions.
  std::variant<double, std::vector<double>> bulk = 1.0;
  std::vector<double> spikes;  // descending, each > max bulk value
  Dist dist = Dist::gaussian;
  std::uint64_t seed = 0;

  // Diagonal of the population covariance, spikes first (descending), bulk
  // after (descending).
  std::vector<double> sigma_diagonal() const {
    validate();
    std::vector<double> diag;
    diag.reserve(n);
    diag.insert(diag.end(), spikes.begin(), spikes.end());
    if (const double* c = std::get_if<double>(&bulk)) {
      diag.resize(n, *c);
    } else {
      const auto& table = std::get<std::vector<double>>(bulk);
      // table is ascending; fill the remaining positions with its largest
      // values first so the spike positions replace the table's head.
      for (std::size_t i = spikes.size(); i < n; ++i)
        diag.push_back(table[n - 1 - (i - spikes.size())]);
    }
    return diag;
  }

  void validate() const {
    if (n == 0 || m == 0)
      throw format_error("model dimensions must be positive");
    if (spikes.size() > n) throw format_error("more spikes than dimensions");
    double bulk_max = 0.0;
    if (const double* c = std::get_if<double>(&bulk)) {
      if (!(*c > 0.0)) throw format_error("bulk variance must be positive");
      bulk_max = *c;
    } else {
      const auto& table = std::get<std::vector<double>>(bulk);
      if (table.size() != n)
        throw format_error("bulk quantile table must have length n");
      for (std::size_t i = 0; i < table.size(); ++i) {
        if (!(table[i] > 0.0) || !std::isfinite(table[i]))
          throw format_error("bulk quantile table entries must be positive");
        if (i && table[i] < table[i - 1])
          throw format_error("bulk quantile table must be sorted ascending");
      }
      bulk_max = table.back();
    }
    for (std::size_t i = 0; i < spikes.size(); ++i) {
      if (!(spikes[i] > bulk_max))
        throw format_error("spike " + std::to_string(i + 1) +
                           " is not strictly above the bulk maximum");
      if (i && spikes[i] > spikes[i - 1])
        throw format_error("spikes must be sorted descending");
    }
  }
};

// Draw Y = Sigma^{1/2} X with iid unit-variance entries of X (gaussian or
// rademacher).  Entries are generated row-major from a single stream, so a
// given spec yields bitwise-identical output.
inline DataMatrix simulate(const SpikedModelSpec& spec) {
  const std::vector<double> diag = spec.sigma_diagonal();
  DataMatrix y;
  y.rows = spec.n;
  y.cols = spec.m;
  y.values.resize(spec.n * spec.m);
  Xoshiro256pp rng(spec.seed);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const double s = std::sqrt(diag[i]);
    double* row = y.row(i);
    if (spec.dist == SpikedModelSpec::Dist::gaussian) {
      for (std::size_t j = 0; j < spec.m; ++j) row[j] = s * rng.gaussian();
    } else {
      for (std::size_t j = 0; j < spec.m; ++j) row[j] = s * rng.rademacher();
    }
  }
  return y;
}

// Unit-norm probe with iid gaussian direction; deterministic per (n, seed).
inline std::vector<double> sample_probe(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw format_error("probe dimension must be positive");
  Xoshiro256pp rng(seed);
  std::vector<double> b(n);
  double nrm = 0.0;
  do {
    for (auto& x : b) x = rng.gaussian();
    nrm = norm2(b);
  } while (nrm == 0.0);
  scale_inplace(b, 1.0 / nrm);
  return b;
}

// Quantile table of an analytic bulk density on [lo, hi]: entry i solves
// CDF(q_i) = (i - 1/2) / n, with the CDF integrated by composite Simpson on
// `panels` equal panels and each quantile located by bisection.
inline std::vector<double> quantile_table(
    const std::function<double(double)>& density, double lo, double hi,
    std::size_t n, std::size_t panels = 10000) {
  if (!(hi > lo)) throw format_error("quantile domain must satisfy hi > lo");
  if (n == 0) throw format_error("quantile count must be positive");
  const double h = (hi - lo) / double(panels);
  std::vector<double> cum(panels + 1, 0.0);
  std::vector<double> f_edge(panels + 1), f_mid(panels);
  for (std::size_t j = 0; j <= panels; ++j) f_edge[j] = density(lo + h * j);
  for (std::size_t j = 0; j < panels; ++j)
    f_mid[j] = density(lo + h * (j + 0.5));
  for (std::size_t j = 0; j < panels; ++j)
    cum[j + 1] = cum[j] + h / 6.0 * (f_edge[j] + 4.0 * f_mid[j] + f_edge[j + 1]);
  const double total = cum[panels];
  if (!(total > 0.0) || !std::isfinite(total))
    throw numeric_error("bulk density does not integrate to a positive value");

  auto cdf = [&](double x) {
    if (x <= lo) return 0.0;
    if (x >= hi) return total;
    const std::size_t j =
        std::min(panels - 1, std::size_t((x - lo) / h));
    const double a = lo + h * j;
    const double half = 0.5 * (a + x);
    return cum[j] + (x - a) / 6.0 * (density(a) + 4.0 * density(half) +
                                     density(x));
  };

  std::vector<double> q(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double target = total * (double(i) + 0.5) / double(n);
    double a = lo, b = hi;
    for (int it = 0; it < 200 && (b - a) > 1e-14 * (hi - lo); ++it) {
      const double mid = 0.5 * (a + b);
      (cdf(mid) < target ? a : b) = mid;
    }
    q[i] = 0.5 * (a + b);
  }
  return q;
}

}  // namespace spectral_spike
