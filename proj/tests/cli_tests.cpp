#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

#include "spectral_spike/data_matrix.hpp"
#include "spectral_spike/estimate.hpp"
#include "spectral_spike/report_json.hpp"
#include "test_support.hpp"

using namespace spectral_spike;
using Catch::Matchers::WithinAbs;
using nlohmann::json;

namespace {

// One simulated data file shared by the detection-oriented cases.
struct Fixture {
  ts::TempDir dir;
  std::string data_csv;
  Fixture() {
    data_csv = dir.file("y.csv");
    const auto r = ts::run_cli(
        "simulate --n 160 --m 320 --spikes 6,4 --seed 3 --format csv --out " +
        data_csv);
    REQUIRE(r.status == 0);
  }
};

}  // namespace

TEST_CASE("simulate writes deterministic data and echoes its parameters",
          "[cli]") {
  ts::TempDir dir;
  const std::string out1 = dir.file("a.csv"), out2 = dir.file("b.csv");
  const auto r1 = ts::run_cli(
      "simulate --n 10 --m 20 --spikes 5,4 --sigma2 1.5 --seed 7 "
      "--format csv --out " + out1);
  REQUIRE(r1.status == 0);
  const json echo = json::parse(r1.out);
  REQUIRE(echo["n"] == 10);
  REQUIRE(echo["m"] == 20);
  REQUIRE(echo["seed"] == 7);
  REQUIRE(echo["spikes"] == std::vector<double>{5.0, 4.0});

  const auto r2 = ts::run_cli(
      "simulate --n 10 --m 20 --spikes 5,4 --sigma2 1.5 --seed 7 "
      "--format csv --out " + out2);
  REQUIRE(r2.status == 0);
  REQUIRE(ts::read_text_file(out1) == ts::read_text_file(out2));

  const DataMatrix y = load_csv(out1);
  REQUIRE(y.rows == 10);
  REQUIRE(y.cols == 20);

  // Library equivalence: the file holds exactly simulate(spec).
  SpikedModelSpec spec;
  spec.n = 10;
  spec.m = 20;
  spec.bulk = 1.5;
  spec.spikes = {5.0, 4.0};
  spec.seed = 7;
  const DataMatrix direct = simulate(spec);
  REQUIRE(y.values == direct.values);
}

TEST_CASE("binary output round-trips through the loader", "[cli]") {
  ts::TempDir dir;
  const std::string out = dir.file("y.bin");
  const auto r = ts::run_cli("simulate --n 6 --m 9 --seed 1 --out " + out);
  REQUIRE(r.status == 0);
  const DataMatrix y = load_binary(out);
  REQUIRE(y.rows == 6);
  REQUIRE(y.cols == 9);
}

TEST_CASE("detect reports the spike count with the documented keys", "[cli]") {
  Fixture fx;
  const auto r = ts::run_cli("detect --input " + fx.data_csv +
                             " --format csv --k 3 --seed 5");
  REQUIRE(r.status == 0);
  const json j = json::parse(r.out);
  for (const char* key :
       {"r_hat", "per_probe_counts", "poles", "gamma_minus", "gamma_plus",
        "threshold", "steps", "k", "C", "delta", "seed", "wall_time_ms"})
    REQUIRE(j.contains(key));
  REQUIRE(j["k"] == 3);
  REQUIRE(j["seed"] == 5);
  REQUIRE(j["C"] == 1.0);
  REQUIRE(j["delta"] == 0.25);

  // The CLI is a thin shell over the library: same numbers, same seeds.
  const auto op = make_operator(load_csv(fx.data_csv), Scale::one_over_m);
  DetectionConfig dcfg;
  AveragingConfig acfg;
  acfg.k = 3;
  acfg.seed = 5;
  const auto rep = detect_spikes(op, dcfg, acfg, default_rule(op.dim()));
  REQUIRE(j["r_hat"].get<std::size_t>() == rep.r_hat);
  REQUIRE(j["per_probe_counts"].get<std::vector<std::size_t>>() ==
          rep.per_probe_counts);
  REQUIRE(j["poles"].get<std::vector<std::vector<double>>>() ==
          rep.pole_locations);
  REQUIRE(j["gamma_plus"].get<double>() == rep.gamma_plus);
  REQUIRE(j["threshold"].get<double>() == rep.threshold);
}

TEST_CASE("detect honors --out and the thread environment override", "[cli]") {
  Fixture fx;
  const std::string report = fx.dir.file("report.json");
  const auto r1 = ts::run_cli("detect --input " + fx.data_csv +
                              " --format csv --k 2 --seed 9 --threads 1 --out " +
                              report);
  REQUIRE(r1.status == 0);
  const json j1 = json::parse(r1.out);
  const json file = json::parse(ts::read_text_file(report));
  REQUIRE(file["r_hat"] == j1["r_hat"]);

  const auto r2 = ts::run_cli("detect --input " + fx.data_csv +
                                  " --format csv --k 2 --seed 9",
                              "SPECTRAL_SPIKE_THREADS=3");
  REQUIRE(r2.status == 0);
  const json j2 = json::parse(r2.out);
  // Identical up to wall time regardless of the thread count.
  for (const char* key : {"r_hat", "per_probe_counts", "poles", "gamma_minus",
                          "gamma_plus", "threshold", "steps"})
    REQUIRE(j1[key] == j2[key]);
}

TEST_CASE("detect runs trial sweeps with a probability table", "[cli]") {
  Fixture fx;
  const auto r = ts::run_cli("detect --input " + fx.data_csv +
                             " --format csv --k 2 --seed 11 --trials 3");
  REQUIRE(r.status == 0);
  const json j = json::parse(r.out);
  REQUIRE(j["trials"] == 3);
  REQUIRE(j["seed_first"] == 11);
  REQUIRE(j["r_hats"].size() == 3);
  double total = 0.0;
  for (const auto& [key, val] : j["p"].items()) total += val.get<double>();
  REQUIRE_THAT(total, WithinAbs(1.0, 1e-12));
}

TEST_CASE("asd writes a density grid and pools the atoms", "[cli]") {
  Fixture fx;
  const std::string grid_csv = fx.dir.file("density.csv");
  const auto r = ts::run_cli("asd --input " + fx.data_csv +
                             " --format csv --k 3 --seed 2 --grid 40 --out " +
                             grid_csv);
  REQUIRE(r.status == 0);
  const json j = json::parse(r.out);
  for (const char* key : {"gamma_minus", "gamma_plus", "poles", "weights", "k"})
    REQUIRE(j.contains(key));
  REQUIRE(j["k"] == 3);
  REQUIRE(j["poles"].size() == j["weights"].size());

  const std::string csv = ts::read_text_file(grid_csv);
  REQUIRE(csv.rfind("lambda,density\n", 0) == 0);
  std::size_t lines = 0;
  for (char ch : csv)
    if (ch == '\n') ++lines;
  REQUIRE(lines == 41);  // header + grid rows

  // Grid midpoints stay inside the estimated bulk.
  const double gm = j["gamma_minus"].get<double>();
  const double gp = j["gamma_plus"].get<double>();
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    const double lambda = std::stod(line.substr(0, line.find(',')));
    REQUIRE(lambda > gm);
    REQUIRE(lambda < gp);
  }
}

TEST_CASE("poles compares the two backends", "[cli]") {
  Fixture fx;
  const auto r = ts::run_cli("poles --input " + fx.data_csv +
                             " --format csv --seed 4");
  REQUIRE(r.status == 0);
  const json j = json::parse(r.out);
  REQUIRE(j.contains("connection"));
  REQUIRE(j.contains("finite_section"));
  REQUIRE(j.contains("threshold"));
  REQUIRE(j.contains("max_discrepancy"));
  if (!j["max_discrepancy"].is_null())
    REQUIRE(j["max_discrepancy"].get<double>() <= 1e-4);
}

TEST_CASE("usage errors exit with status 2", "[cli]") {
  REQUIRE(ts::run_cli("detect").status == 2);  // missing --input
  REQUIRE(ts::run_cli("frobnicate").status == 2);
  REQUIRE(ts::run_cli("simulate --n 4 --m 4 --out /tmp/x --bogus 1").status ==
          2);
  Fixture fx;
  REQUIRE(ts::run_cli("detect --input " + fx.data_csv +
                      " --format csv --delta 0.7")
              .status == 2);
  REQUIRE(ts::run_cli("detect --input " + fx.data_csv +
                      " --format csv --k 0")
              .status == 2);
  // Spikes not above the bulk: rejected during validation, still a usage
  // error.
  REQUIRE(ts::run_cli("simulate --n 4 --m 4 --spikes 0.5 --out /tmp/x.csv")
              .status == 2);
}

TEST_CASE("runtime failures exit with status 1 and a JSON error", "[cli]") {
  const auto r = ts::run_cli("detect --input /nonexistent/y.csv --format csv");
  REQUIRE(r.status == 1);
  const json j = json::parse(r.out);
  REQUIRE(j.contains("error"));
  REQUIRE_FALSE(j["error"].get<std::string>().empty());
}

TEST_CASE("help exits cleanly", "[cli]") {
  REQUIRE(ts::run_cli("--help").status == 0);
  REQUIRE(ts::run_cli("detect --help").status == 0);
}
