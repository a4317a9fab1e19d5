#pragma once

// End-to-end estimation pipelines: single-probe spectral estimates,
// across-probe averaging of the extended Cholesky data, pooled transforms,
// and spike detection by counting poles above a dimension-aware threshold.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <iostream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "spectral_spike/errors.hpp"
#include "spectral_spike/jacobi.hpp"
#include "spectral_spike/lanczos.hpp"
#include "spectral_spike/operator.hpp"
#include "spectral_spike/poles.hpp"
#include "spectral_spike/spectrum.hpp"

namespace spectral_spike {

struct AveragingConfig {
  std::size_t k = 10;       // number of probes
  std::size_t q = 0;        // averaging window; 0 = dimension default
  std::uint64_t seed = 0;   // base seed; probe j starts from seed + j
};

// Across-probe smoothing: the last q entries of each probe's combined
// prefix+tail Cholesky sequence (the window ending at the tail pair) are
// replaced by their grand means over all probes.  Accumulation runs in
// extended precision, ascending probe order, for deterministic results.
inline std::vector<ExtendedCholesky> average_cholesky(
    std::vector<ExtendedCholesky> exts, std::size_t q) {
  if (exts.empty())
    throw format_error("averaging requires at least one extension");
  if (q == 0) throw format_error("averaging window must be positive");
  for (const auto& e : exts)
    if (e.order() < q + 2)
      throw format_error("averaging window longer than an extension allows");
  long double sa = 0.0L, sb = 0.0L;
  for (const auto& e : exts) {
    const std::size_t n = e.order();
    for (std::size_t l = n - q - 1; l + 2 <= n; ++l) {
      sa += e.alpha_at(l);
      sb += e.beta_at(l);
    }
  }
  const long double count =
      static_cast<long double>(exts.size()) * static_cast<long double>(q);
  const double abar = static_cast<double>(sa / count);
  const double bbar = static_cast<double>(sb / count);
  for (auto& e : exts) {
    const std::size_t n = e.order();
    for (std::size_t l = n - q - 1; l + 3 <= n; ++l) {
      e.alpha[l] = abar;
      e.beta[l] = bbar;
    }
    e.tail_alpha = abar;
    e.tail_beta = bbar;
  }
  return exts;
}

struct SvasdResult {
  ExtendedCholesky extension;
  SpectralEstimate estimate;
  std::size_t steps = 0;
  bool breakdown = false;
  double residual_offdiag = 0.0;
};

// Single-probe pipeline: Lanczos -> Cholesky -> extension -> spectral bundle.
inline SvasdResult estimate_svasd(const CovarianceOperator& op,
                                  const std::vector<double>& b,
                                  const StoppingRule& rule) {
  LanczosResult lr = lanczos_run(op, b, rule);
  if (lr.jacobi.size() < 3)
    throw numeric_error("lanczos stopped before the minimum of 3 steps");
  SvasdResult r;
  r.extension = extend(cholesky_tridiag(lr.jacobi));
  r.estimate = estimate_spectrum(r.extension);
  r.steps = lr.steps;
  r.breakdown = lr.breakdown;
  r.residual_offdiag = lr.residual_offdiag;
  return r;
}

inline SvasdResult estimate_svasd(const CovarianceOperator& op,
                                  std::uint64_t seed,
                                  const StoppingRule& rule) {
  return estimate_svasd(op, sample_probe(op.dim(), seed), rule);
}

namespace detail {

struct ProbeOutcome {
  ExtendedCholesky extension;
  std::size_t steps = 0;
  std::uint64_t seed_used = 0;
  std::string log;  // resample notices, printed after all probes finish
};

// One probe with resampling: a run that stops before 3 steps (an exactly
// invariant low-dimensional subspace) is retried with seed + j + attempt * k,
// at most 8 attempts.  Any other failure aborts, naming the probe and seed.
inline ProbeOutcome run_probe_pipeline(const CovarianceOperator& op,
                                       std::size_t j,
                                       const AveragingConfig& cfg,
                                       const StoppingRule& rule) {
  ProbeOutcome out;
  for (std::size_t attempt = 0;; ++attempt) {
    const std::uint64_t seed = cfg.seed + j + attempt * cfg.k;
    const std::vector<double> b = sample_probe(op.dim(), seed);
    LanczosResult lr = lanczos_run(op, b, rule);
    if (lr.jacobi.size() >= 3) {
      try {
        out.extension = extend(cholesky_tridiag(lr.jacobi));
      } catch (const std::exception& e) {
        throw numeric_error("probe " + std::to_string(j) + " (seed " +
                            std::to_string(seed) + ") failed: " + e.what());
      }
      out.steps = lr.steps;
      out.seed_used = seed;
      return out;
    }
    if (attempt + 1 >= 8)
      throw numeric_error("probe " + std::to_string(j) +
                          " stopped before 3 lanczos steps in 8 attempts");
    out.log += "resampling probe " + std::to_string(j) + ": stopped after " +
               std::to_string(lr.steps) + " step(s) with seed " +
               std::to_string(seed) + "\n";
  }
}

}  // namespace detail

struct AsdResult {
  double gamma_minus = 0.0;
  double gamma_plus = 0.0;
  std::vector<ExtendedCholesky> extensions;  // averaged; all share one tail
  std::vector<std::size_t> steps;            // Lanczos steps per probe
  std::vector<std::uint64_t> probe_seeds;    // seeds actually used

  // Mean of the per-probe transforms, ascending probe order.
  std::complex<double> pooled_transform(std::complex<double> z) const {
    std::complex<double> s{0.0, 0.0};
    for (const auto& e : extensions) s += stieltjes_cf(e, z);
    return s / static_cast<double>(extensions.size());
  }

  double pooled_density(double lambda) const {
    double s = 0.0;
    for (const auto& e : extensions) s += density(e, lambda);
    return s / static_cast<double>(extensions.size());
  }

  std::vector<SpectralEstimate> per_probe_estimates() const {
    std::vector<SpectralEstimate> v;
    v.reserve(extensions.size());
    for (const auto& e : extensions) v.push_back(estimate_spectrum(e));
    return v;
  }
};

// Multi-probe pipeline: k independent probes (resampled on early breakdown),
// across-probe averaging with window q (dimension default when q == 0), and
// shared support endpoints.  Probe j always uses seeds derived from
// cfg.seed + j, so results are bitwise independent of the thread count.
inline AsdResult estimate_asd(const CovarianceOperator& op,
                              const AveragingConfig& cfg,
                              const StoppingRule& rule,
                              std::size_t threads = 1) {
  if (cfg.k == 0) throw format_error("probe count must be >= 1");
  const std::size_t q = cfg.q != 0 ? cfg.q : default_rule(op.dim()).q;
  const std::size_t k = cfg.k;

  std::vector<detail::ProbeOutcome> outcomes(k);
  std::vector<std::exception_ptr> errors(k);
  const std::size_t nthreads = std::max<std::size_t>(1, std::min(threads, k));
  auto worker = [&](std::size_t slot) {
    for (std::size_t j = slot; j < k; j += nthreads) {
      try {
        outcomes[j] = detail::run_probe_pipeline(op, j, cfg, rule);
      } catch (...) {
        errors[j] = std::current_exception();
      }
    }
  };
  if (nthreads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (std::size_t s = 0; s < nthreads; ++s) pool.emplace_back(worker, s);
    for (auto& th : pool) th.join();
  }
  for (std::size_t j = 0; j < k; ++j)
    if (errors[j]) std::rethrow_exception(errors[j]);
  for (std::size_t j = 0; j < k; ++j)
    if (!outcomes[j].log.empty()) std::cerr << outcomes[j].log;

  std::vector<ExtendedCholesky> exts;
  exts.reserve(k);
  AsdResult r;
  r.steps.reserve(k);
  r.probe_seeds.reserve(k);
  for (std::size_t j = 0; j < k; ++j) {
    exts.push_back(std::move(outcomes[j].extension));
    r.steps.push_back(outcomes[j].steps);
    r.probe_seeds.push_back(outcomes[j].seed_used);
  }
  r.extensions = average_cholesky(std::move(exts), q);
  const auto [lo, hi] = support_endpoints(r.extensions.front());
  r.gamma_minus = lo;
  r.gamma_plus = hi;
  return r;
}

enum class Aggregation { mode, rounded_mean };
enum class PoleBackend { connection, finite_section };

struct DetectionConfig {
  double c_thresh = 1.0;  // threshold offset scale
  double delta = 0.25;    // threshold decay exponent, in (0, 1/2)
  Aggregation aggregation = Aggregation::mode;
  PoleBackend backend = PoleBackend::connection;
  std::size_t section_size = 0;  // finite-section order; 0 = automatic

  void validate() const {
    if (!(c_thresh > 0.0)) throw format_error("c_thresh must be positive");
    if (!(delta > 0.0) || !(delta < 0.5))
      throw format_error("delta must lie in (0, 1/2)");
  }
};

// Consensus across per-probe counts: the most frequent value (ties resolved
// toward the smaller count) or the rounded mean.
inline std::size_t aggregate_counts(const std::vector<std::size_t>& counts,
                                    Aggregation how) {
  if (counts.empty()) throw format_error("no counts to aggregate");
  if (how == Aggregation::rounded_mean) {
    long double s = 0.0L;
    for (std::size_t c : counts) s += static_cast<long double>(c);
    return static_cast<std::size_t>(
        std::llround(static_cast<double>(s / counts.size())));
  }
  std::vector<std::size_t> sorted(counts);
  std::sort(sorted.begin(), sorted.end());
  std::size_t best = sorted.front(), best_run = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t run = 1;
    while (i + run < sorted.size() && sorted[i + run] == sorted[i]) ++run;
    if (run > best_run) {
      best_run = run;
      best = sorted[i];
    }
    i += run;
  }
  return best;
}

struct DetectionReport {
  std::size_t r_hat = 0;
  std::vector<std::size_t> per_probe_counts;
  std::vector<std::vector<double>> pole_locations;  // above threshold, per probe
  double gamma_minus = 0.0;
  double gamma_plus = 0.0;
  double threshold = 0.0;
  std::vector<std::size_t> steps;
  std::size_t k = 0;
  double c_thresh = 0.0;
  double delta = 0.0;
  std::uint64_t seed = 0;
  double wall_time_ms = 0.0;
};

namespace detail {

inline std::vector<double> filter_above(std::vector<double> poles,
                                        double threshold) {
  std::vector<double> out;
  for (double p : poles)
    if (p > threshold) out.push_back(p);
  return out;
}

}  // namespace detail

// Spike detection: per-probe pole counts above gamma_plus + C * N^(-delta),
// aggregated across probes.  With the connection backend, a probe whose
// weight computation fails numerically falls back to the finite-section
// backend for that probe (noted on stderr).
inline DetectionReport detect_spikes(const CovarianceOperator& op,
                                     const DetectionConfig& dcfg,
                                     const AveragingConfig& acfg,
                                     const StoppingRule& rule,
                                     std::size_t threads = 1) {
  const auto t0 = std::chrono::steady_clock::now();
  dcfg.validate();
  AsdResult asd = estimate_asd(op, acfg, rule, threads);

  DetectionReport rep;
  rep.gamma_minus = asd.gamma_minus;
  rep.gamma_plus = asd.gamma_plus;
  const double margin =
      dcfg.c_thresh * std::pow(static_cast<double>(op.dim()), -dcfg.delta);
  rep.threshold = asd.gamma_plus + margin;
  rep.steps = asd.steps;
  rep.k = acfg.k;
  rep.c_thresh = dcfg.c_thresh;
  rep.delta = dcfg.delta;
  rep.seed = acfg.seed;

  for (std::size_t j = 0; j < asd.extensions.size(); ++j) {
    const ExtendedCholesky& e = asd.extensions[j];
    std::vector<double> above;
    if (dcfg.backend == PoleBackend::finite_section) {
      above = poles_finite_section(e, dcfg.section_size, margin);
    } else {
      try {
        above = detail::filter_above(poles_connection(e).locations,
                                     rep.threshold);
      } catch (const numeric_error& err) {
        std::cerr << "probe " << j << ": connection backend failed ("
                  << err.what() << "); falling back to finite section\n";
        above = poles_finite_section(e, dcfg.section_size, margin);
      }
    }
    rep.per_probe_counts.push_back(above.size());
    rep.pole_locations.push_back(std::move(above));
  }
  rep.r_hat = aggregate_counts(rep.per_probe_counts, dcfg.aggregation);
  rep.wall_time_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
  return rep;
}

}  // namespace spectral_spike
