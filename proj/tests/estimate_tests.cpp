#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <limits>

#include "spectral_spike/estimate.hpp"
#include "spectral_spike/report_json.hpp"
#include "test_support.hpp"

using namespace spectral_spike;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

ExtendedCholesky make_ext(std::vector<double> alpha, std::vector<double> beta,
                          double ta, double tb) {
  ExtendedCholesky e;
  e.alpha = std::move(alpha);
  e.beta = std::move(beta);
  e.tail_alpha = ta;
  e.tail_beta = tb;
  return e;
}

CovarianceOperator spiked_operator(std::size_t n, std::size_t m,
                                   std::vector<double> spikes,
                                   std::uint64_t seed) {
  SpikedModelSpec spec;
  spec.n = n;
  spec.m = m;
  spec.bulk = 1.0;
  spec.spikes = std::move(spikes);
  spec.seed = seed;
  return make_operator(simulate(spec), Scale::one_over_m);
}

}  // namespace

TEST_CASE("across-probe averaging replaces the trailing window by grand means",
          "[estimate]") {
  // Two order-4 extensions, window q = 2: the averaged window covers the
  // last prefix pair and the tail pair of each probe.
  auto e1 = make_ext({1.0, 2.0}, {0.5, 0.6}, 3.0, 0.7);
  auto e2 = make_ext({1.5, 4.0}, {0.3, 1.0}, 5.0, 0.9);
  const double abar = (2.0 + 3.0 + 4.0 + 5.0) / 4.0;
  const double bbar = (0.6 + 0.7 + 1.0 + 0.9) / 4.0;

  const auto avg = average_cholesky({e1, e2}, 2);
  REQUIRE(avg.size() == 2);
  for (const auto& e : avg) {
    REQUIRE_THAT(e.alpha[1], WithinAbs(abar, 1e-14));
    REQUIRE_THAT(e.beta[1], WithinAbs(bbar, 1e-14));
    REQUIRE_THAT(e.tail_alpha, WithinAbs(abar, 1e-14));
    REQUIRE_THAT(e.tail_beta, WithinAbs(bbar, 1e-14));
  }
  // Entries ahead of the window are untouched.
  REQUIRE(avg[0].alpha[0] == 1.0);
  REQUIRE(avg[1].alpha[0] == 1.5);
  REQUIRE(avg[0].beta[0] == 0.5);
}

TEST_CASE("averaging conserves the window total", "[estimate]") {
  std::vector<ExtendedCholesky> exts = {
      make_ext({1.1, 0.9, 1.3}, {0.4, 0.5, 0.45}, 1.2, 0.48),
      make_ext({0.8, 1.4, 1.0}, {0.52, 0.41, 0.47}, 1.1, 0.5),
      make_ext({1.3, 1.2, 0.95}, {0.44, 0.5, 0.52}, 0.9, 0.42),
  };
  const std::size_t q = 3;
  long double before_a = 0.0L, before_b = 0.0L;
  for (const auto& e : exts) {
    const std::size_t n = e.order();
    for (std::size_t l = n - q - 1; l + 2 <= n; ++l) {
      before_a += e.alpha_at(l);
      before_b += e.beta_at(l);
    }
  }
  const auto avg = average_cholesky(exts, q);
  long double after_a = 0.0L, after_b = 0.0L;
  for (const auto& e : avg) {
    const std::size_t n = e.order();
    for (std::size_t l = n - q - 1; l + 2 <= n; ++l) {
      after_a += e.alpha_at(l);
      after_b += e.beta_at(l);
    }
  }
  REQUIRE_THAT(double(after_a), WithinAbs(double(before_a), 1e-14));
  REQUIRE_THAT(double(after_b), WithinAbs(double(before_b), 1e-14));
  // All averaged extensions share one tail.
  REQUIRE(avg[0].tail_alpha == avg[1].tail_alpha);
  REQUIRE(avg[1].tail_alpha == avg[2].tail_alpha);
}

TEST_CASE("averaging validates its inputs", "[estimate]") {
  REQUIRE_THROWS_AS(average_cholesky({}, 2), format_error);
  const auto e = make_ext({1.0}, {0.5}, 1.0, 0.5);
  REQUIRE_THROWS_AS(average_cholesky({e}, 0), format_error);
  // order() == 3 supports at most q = 1.
  REQUIRE_THROWS_AS(average_cholesky({e}, 2), format_error);
  REQUIRE_NOTHROW(average_cholesky({e}, 1));
}

TEST_CASE("single-probe pipeline on an exactly solvable operator",
          "[estimate]") {
  const auto op = CovarianceOperator::from_diagonal({3.0, 2.0, 1.0});
  const auto r = estimate_svasd(op, std::uint64_t{5}, fixed_steps(10));
  REQUIRE(r.steps == 3);
  REQUIRE(r.breakdown);
  REQUIRE(r.extension.order() == 3);
  REQUIRE(r.estimate.gamma_plus > r.estimate.gamma_minus);
}

TEST_CASE("probes that break down immediately are rejected", "[estimate]") {
  // The identity has a one-dimensional Krylov space for every probe: the
  // direct pipeline reports the short run, and the resampling loop gives up
  // after its attempt budget.
  const auto op = CovarianceOperator::from_diagonal(std::vector<double>(8, 1.0));
  REQUIRE_THROWS_WITH(estimate_svasd(op, std::uint64_t{1}, fixed_steps(10)),
                      ContainsSubstring("minimum of 3"));

  AveragingConfig cfg;
  cfg.k = 1;
  cfg.seed = 1;
  REQUIRE_THROWS_WITH(estimate_asd(op, cfg, fixed_steps(10)),
                      ContainsSubstring("8 attempts"));
}

TEST_CASE("multi-probe estimate composes the single-probe pieces",
          "[estimate]") {
  const auto op = spiked_operator(120, 240, {5.0}, 3);
  const auto rule = default_rule(120);

  AveragingConfig cfg;
  cfg.k = 1;
  cfg.q = 2;
  cfg.seed = 7;
  const auto asd = estimate_asd(op, cfg, rule);
  REQUIRE(asd.extensions.size() == 1);
  REQUIRE(asd.probe_seeds == std::vector<std::uint64_t>{7});

  const auto single = estimate_svasd(op, std::uint64_t{7}, rule);
  const auto avg = average_cholesky({single.extension}, 2);
  REQUIRE(asd.extensions[0].alpha == avg[0].alpha);
  REQUIRE(asd.extensions[0].beta == avg[0].beta);
  REQUIRE(asd.extensions[0].tail_alpha == avg[0].tail_alpha);
  REQUIRE(asd.extensions[0].tail_beta == avg[0].tail_beta);
  REQUIRE(asd.steps == std::vector<std::size_t>{single.steps});

  const auto [lo, hi] = support_endpoints(avg[0]);
  REQUIRE(asd.gamma_minus == lo);
  REQUIRE(asd.gamma_plus == hi);
}

TEST_CASE("thread count does not change the estimate", "[estimate]") {
  const auto op = spiked_operator(100, 200, {6.0, 4.0}, 11);
  AveragingConfig cfg;
  cfg.k = 6;
  cfg.seed = 2;
  const auto rule = default_rule(100);
  const auto a = estimate_asd(op, cfg, rule, 1);
  const auto b = estimate_asd(op, cfg, rule, 3);
  REQUIRE(a.steps == b.steps);
  REQUIRE(a.probe_seeds == b.probe_seeds);
  REQUIRE(a.gamma_minus == b.gamma_minus);
  REQUIRE(a.gamma_plus == b.gamma_plus);
  for (std::size_t j = 0; j < 6; ++j) {
    REQUIRE(a.extensions[j].alpha == b.extensions[j].alpha);
    REQUIRE(a.extensions[j].beta == b.extensions[j].beta);
  }
  const std::complex<double> z(1.0, 0.7);
  REQUIRE(a.pooled_transform(z) == b.pooled_transform(z));
  REQUIRE(a.pooled_density(1.0) == b.pooled_density(1.0));
  REQUIRE(a.per_probe_estimates().size() == 6);
}

TEST_CASE("count aggregation", "[estimate]") {
  REQUIRE(aggregate_counts({1, 2, 2, 3, 3}, Aggregation::mode) == 2);
  REQUIRE(aggregate_counts({3, 3, 2, 2}, Aggregation::mode) == 2);  // tie: low
  REQUIRE(aggregate_counts({4}, Aggregation::mode) == 4);
  REQUIRE(aggregate_counts({1, 2}, Aggregation::rounded_mean) == 2);
  REQUIRE(aggregate_counts({1, 1, 2}, Aggregation::rounded_mean) == 1);
  REQUIRE_THROWS_AS(aggregate_counts({}, Aggregation::mode), format_error);
}

TEST_CASE("detection configs validate the threshold parameters",
          "[estimate]") {
  DetectionConfig cfg;
  REQUIRE_NOTHROW(cfg.validate());
  cfg.delta = 0.5;
  REQUIRE_THROWS_AS(cfg.validate(), format_error);
  cfg.delta = 0.0;
  REQUIRE_THROWS_AS(cfg.validate(), format_error);
  cfg.delta = 0.25;
  cfg.c_thresh = 0.0;
  REQUIRE_THROWS_AS(cfg.validate(), format_error);
}

TEST_CASE("spike detection on a two-spike model", "[estimate]") {
  const auto op = spiked_operator(300, 600, {6.0, 4.0}, 1);
  DetectionConfig dcfg;
  AveragingConfig acfg;
  acfg.k = 4;
  acfg.seed = 5;
  const auto rule = default_rule(300);

  const auto rep = detect_spikes(op, dcfg, acfg, rule);
  REQUIRE(rep.r_hat == 2);
  REQUIRE(rep.k == 4);
  REQUIRE(rep.per_probe_counts.size() == 4);
  REQUIRE(rep.pole_locations.size() == 4);
  REQUIRE_THAT(rep.threshold,
               WithinAbs(rep.gamma_plus + std::pow(300.0, -0.25), 1e-12));
  for (std::size_t j = 0; j < 4; ++j) {
    REQUIRE(rep.pole_locations[j].size() == rep.per_probe_counts[j]);
    for (double p : rep.pole_locations[j]) REQUIRE(p > rep.threshold);
  }
  REQUIRE(rep.seed == 5);
  REQUIRE(rep.delta == 0.25);

  SECTION("finite-section backend agrees") {
    DetectionConfig fcfg;
    fcfg.backend = PoleBackend::finite_section;
    const auto rep2 = detect_spikes(op, fcfg, acfg, rule);
    REQUIRE(rep2.r_hat == 2);
    REQUIRE(rep2.per_probe_counts == rep.per_probe_counts);
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t i = 0; i < rep.pole_locations[j].size(); ++i)
        REQUIRE_THAT(rep2.pole_locations[j][i],
                     WithinAbs(rep.pole_locations[j][i], 1e-6));
  }

  SECTION("repeat runs are bitwise identical apart from timing") {
    const auto rep2 = detect_spikes(op, dcfg, acfg, rule);
    REQUIRE(rep2.r_hat == rep.r_hat);
    REQUIRE(rep2.per_probe_counts == rep.per_probe_counts);
    REQUIRE(rep2.pole_locations == rep.pole_locations);
    REQUIRE(rep2.gamma_minus == rep.gamma_minus);
    REQUIRE(rep2.gamma_plus == rep.gamma_plus);
    REQUIRE(rep2.threshold == rep.threshold);
    REQUIRE(rep2.steps == rep.steps);
  }

  SECTION("detection count is monotone in the threshold scale") {
    std::size_t prev = std::numeric_limits<std::size_t>::max();
    for (double c : {0.25, 1.0, 4.0, 16.0}) {
      DetectionConfig mcfg;
      mcfg.c_thresh = c;
      const auto r = detect_spikes(op, mcfg, acfg, rule);
      REQUIRE(r.r_hat <= prev);
      prev = r.r_hat;
    }
  }
}

TEST_CASE("null models report zero spikes", "[estimate]") {
  const auto op = spiked_operator(300, 600, {}, 9);
  DetectionConfig dcfg;
  AveragingConfig acfg;
  acfg.k = 3;
  acfg.seed = 1;
  const auto rep = detect_spikes(op, dcfg, acfg, default_rule(300));
  REQUIRE(rep.r_hat == 0);
}

TEST_CASE("detection reports round-trip through JSON", "[estimate]") {
  DetectionReport r;
  r.r_hat = 2;
  r.per_probe_counts = {2, 2, 3};
  r.pole_locations = {{4.5, 6.25}, {4.4999999999999, 6.3}, {4.5, 6.2, 7.0}};
  r.gamma_minus = 0.0857864376269049;
  r.gamma_plus = 2.914213562373095;
  r.threshold = 3.1;
  r.steps = {11, 12, 13};
  r.k = 3;
  r.c_thresh = 1.0;
  r.delta = 0.25;
  r.seed = 42;
  r.wall_time_ms = 17.25;

  const auto j = detection_report_to_json(r);
  for (const char* key :
       {"r_hat", "per_probe_counts", "poles", "gamma_minus", "gamma_plus",
        "threshold", "steps", "k", "C", "delta", "seed", "wall_time_ms"})
    REQUIRE(j.contains(key));

  const auto back = detection_report_from_json(j);
  REQUIRE(back.r_hat == r.r_hat);
  REQUIRE(back.per_probe_counts == r.per_probe_counts);
  REQUIRE(back.pole_locations == r.pole_locations);  // exact double round trip
  REQUIRE(back.gamma_minus == r.gamma_minus);
  REQUIRE(back.gamma_plus == r.gamma_plus);
  REQUIRE(back.threshold == r.threshold);
  REQUIRE(back.steps == r.steps);
  REQUIRE(back.k == r.k);
  REQUIRE(back.c_thresh == r.c_thresh);
  REQUIRE(back.delta == r.delta);
  REQUIRE(back.seed == r.seed);
  REQUIRE(back.wall_time_ms == r.wall_time_ms);

  auto bad = j;
  bad.erase("threshold");
  REQUIRE_THROWS_AS(detection_report_from_json(bad), format_error);
  auto wrong = j;
  wrong["steps"] = "eleven";
  REQUIRE_THROWS_WITH(detection_report_from_json(wrong),
                      ContainsSubstring("malformed detection report"));
}
