#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>

#include "spectral_spike/data_matrix.hpp"
#include "spectral_spike/operator.hpp"
#include "test_support.hpp"

using namespace spectral_spike;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

DataMatrix small_matrix() {
  DataMatrix y;
  y.rows = 3;
  y.cols = 4;
  y.values = {1, 2, 0, -1, 0.5, -2, 3, 1, 2, 0, 1, -0.5};
  return y;
}

std::vector<double> dense_covariance(const DataMatrix& y, Scale scale) {
  const double s = scale == Scale::raw ? 1.0 : 1.0 / double(y.cols);
  std::vector<double> w(y.rows * y.rows, 0.0);
  for (std::size_t i = 0; i < y.rows; ++i)
    for (std::size_t j = 0; j < y.rows; ++j) {
      double acc = 0.0;
      for (std::size_t l = 0; l < y.cols; ++l) acc += y.at(i, l) * y.at(j, l);
      w[i * y.rows + j] = s * acc;
    }
  return w;
}

}  // namespace

TEST_CASE("data-backed apply matches the explicit covariance product",
          "[operator]") {
  const DataMatrix y = small_matrix();
  for (Scale scale : {Scale::raw, Scale::one_over_m}) {
    const auto op = CovarianceOperator::from_data(y, scale);
    REQUIRE(op.dim() == 3);
    REQUIRE(op.data_cols() == 4);
    const std::vector<double> w = dense_covariance(y, scale);
    const std::vector<double> v = {0.3, -1.1, 2.0};
    const auto got = op.apply(v);
    for (std::size_t i = 0; i < 3; ++i) {
      double want = 0.0;
      for (std::size_t j = 0; j < 3; ++j) want += w[i * 3 + j] * v[j];
      REQUIRE_THAT(got[i], WithinAbs(want, 1e-13));
    }
  }
}

TEST_CASE("probe moments of the data-backed operator match dense powers",
          "[operator]") {
  SpikedModelSpec spec;
  spec.n = 12;
  spec.m = 20;
  spec.bulk = 1.0;
  spec.spikes = {4.0};
  spec.seed = 17;
  const DataMatrix y = simulate(spec);
  const auto op = make_operator(y, Scale::one_over_m);
  const std::vector<double> w = dense_covariance(y, Scale::one_over_m);

  std::vector<double> v = sample_probe(12, 5);
  std::vector<double> dense_v = v;
  for (int k = 1; k <= 6; ++k) {
    v = op.apply(v);
    std::vector<double> next(12, 0.0);
    for (std::size_t i = 0; i < 12; ++i)
      for (std::size_t j = 0; j < 12; ++j) next[i] += w[i * 12 + j] * dense_v[j];
    dense_v = next;
    for (std::size_t i = 0; i < 12; ++i)
      REQUIRE_THAT(v[i], WithinAbs(dense_v[i], 1e-8));
  }
}

TEST_CASE("diagonal and symmetric backings validate their inputs",
          "[operator]") {
  const auto op = CovarianceOperator::from_diagonal({3.0, 2.0, 1.0});
  REQUIRE(op.dim() == 3);
  REQUIRE(op.data_cols() == 0);
  const auto w = op.apply({1.0, 1.0, 1.0});
  REQUIRE(w == std::vector<double>{3.0, 2.0, 1.0});

  REQUIRE_THROWS_AS(CovarianceOperator::from_symmetric(2, {1.0, 2.0, 3.0}),
                    format_error);
  REQUIRE_THROWS_AS(CovarianceOperator::from_symmetric(0, {}), format_error);
  REQUIRE_THROWS_AS(op.apply({1.0, 2.0}), format_error);
}

TEST_CASE("simulate is deterministic in the seed and scales rows by sigma",
          "[operator]") {
  SpikedModelSpec spec;
  spec.n = 6;
  spec.m = 50000;
  spec.bulk = 1.0;
  spec.spikes = {9.0, 4.0};
  spec.seed = 11;

  const DataMatrix a = simulate(spec);
  const DataMatrix b = simulate(spec);
  REQUIRE(a.values == b.values);

  spec.seed = 12;
  const DataMatrix c = simulate(spec);
  REQUIRE(a.values != c.values);

  // Row i of Y has variance sigma_i; with m = 5e4 samples the sample second
  // moment should sit within ~5 standard errors of the target.
  const auto sigma = spec.sigma_diagonal();
  REQUIRE(sigma == std::vector<double>{9.0, 4.0, 1.0, 1.0, 1.0, 1.0});
  for (std::size_t i = 0; i < spec.n; ++i) {
    double second = 0.0;
    for (std::size_t j = 0; j < spec.m; ++j) second += a.at(i, j) * a.at(i, j);
    second /= double(spec.m);
    const double se = sigma[i] * std::sqrt(2.0 / double(spec.m));
    REQUIRE_THAT(second, WithinAbs(sigma[i], 5.0 * se));
  }
}

TEST_CASE("rademacher draws keep unit variance entries", "[operator]") {
  SpikedModelSpec spec;
  spec.n = 4;
  spec.m = 100;
  spec.dist = SpikedModelSpec::Dist::rademacher;
  spec.seed = 3;
  const DataMatrix y = simulate(spec);
  for (double v : y.values) REQUIRE(std::fabs(v) == 1.0);
}

TEST_CASE("model validation rejects malformed specs", "[operator]") {
  SpikedModelSpec spec;
  spec.n = 0;
  spec.m = 10;
  REQUIRE_THROWS_AS(spec.validate(), format_error);

  spec.n = 5;
  spec.bulk = -1.0;
  REQUIRE_THROWS_AS(spec.validate(), format_error);

  spec.bulk = 1.0;
  spec.spikes = {0.5};  // not above the bulk
  REQUIRE_THROWS_WITH(spec.validate(),
                      ContainsSubstring("not strictly above the bulk"));

  spec.spikes = {4.0, 5.0};  // not descending
  REQUIRE_THROWS_AS(spec.validate(), format_error);

  spec.spikes = {5.0, 4.0};
  REQUIRE_NOTHROW(spec.validate());
}

TEST_CASE("bulk quantile tables fill the non-spike diagonal", "[operator]") {
  SpikedModelSpec spec;
  spec.n = 5;
  spec.m = 10;
  spec.bulk = std::vector<double>{0.5, 1.0, 1.5, 2.0, 2.5};
  spec.spikes = {9.0, 8.0};
  const auto diag = spec.sigma_diagonal();
  REQUIRE(diag == std::vector<double>{9.0, 8.0, 2.5, 2.0, 1.5});

  spec.bulk = std::vector<double>{0.5, 1.0};  // wrong length
  REQUIRE_THROWS_AS(spec.validate(), format_error);
}

TEST_CASE("sample probes are unit norm and seed-reproducible", "[operator]") {
  const auto b1 = sample_probe(100, 42);
  const auto b2 = sample_probe(100, 42);
  const auto b3 = sample_probe(100, 43);
  REQUIRE(b1 == b2);
  REQUIRE(b1 != b3);
  double nrm = 0.0;
  for (double x : b1) nrm += x * x;
  REQUIRE_THAT(std::sqrt(nrm), WithinAbs(1.0, 1e-12));
}

TEST_CASE("quantile tables invert simple distributions", "[operator]") {
  // Uniform density on [2, 4]: quantile i of n solves q = 2 + 2 (i - 1/2)/n.
  const auto q = quantile_table([](double) { return 1.0; }, 2.0, 4.0, 4);
  REQUIRE(q.size() == 4);
  for (std::size_t i = 0; i < 4; ++i)
    REQUIRE_THAT(q[i], WithinAbs(2.0 + 2.0 * (double(i) + 0.5) / 4.0, 1e-6));

  // Triangular density f(x) = 2x on [0, 1]: CDF x^2, quantile sqrt(p).
  const auto t = quantile_table([](double x) { return 2.0 * x; }, 0.0, 1.0, 5);
  for (std::size_t i = 0; i < 5; ++i)
    REQUIRE_THAT(t[i], WithinAbs(std::sqrt((double(i) + 0.5) / 5.0), 1e-6));
}

TEST_CASE("csv and binary round trips preserve exact values", "[operator]") {
  ts::TempDir dir;
  DataMatrix y;
  y.rows = 2;
  y.cols = 3;
  y.values = {1.0, -0.1, 3.5e-300, 2.0 / 3.0, -1e300, 0.0};

  const std::string csv = dir.file("y.csv");
  save_csv(csv, y);
  const DataMatrix back = load_csv(csv);
  REQUIRE(back.rows == 2);
  REQUIRE(back.cols == 3);
  REQUIRE(back.values == y.values);  // shortest-round-trip formatting

  const std::string bin = dir.file("y.bin");
  save_binary(bin, y);
  const DataMatrix back2 = load_binary(bin);
  REQUIRE(back2.values == y.values);
}

TEST_CASE("malformed inputs raise format errors", "[operator]") {
  ts::TempDir dir;
  {
    std::ofstream out(dir.file("ragged.csv"));
    out << "1,2,3\n4,5\n";
  }
  REQUIRE_THROWS_AS(load_csv(dir.file("ragged.csv")), format_error);
  {
    std::ofstream out(dir.file("junk.csv"));
    out << "1,two,3\n";
  }
  REQUIRE_THROWS_AS(load_csv(dir.file("junk.csv")), format_error);
  {
    std::ofstream out(dir.file("bad.bin"), std::ios::binary);
    out << "NOPE" << std::string(32, '\0');
  }
  REQUIRE_THROWS_AS(load_binary(dir.file("bad.bin")), format_error);
  REQUIRE_THROWS_AS(load_csv(dir.file("missing.csv")), io_error);
}
