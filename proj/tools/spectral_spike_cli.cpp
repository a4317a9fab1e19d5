// Command-line front end: simulate synthetic spiked data, estimate the
// asymptotic spectral density, compare pole backends, and detect spikes.
//
// Exit codes: 0 success; 1 runtime failure (a {"error": ...} JSON object is
// printed to stdout); 2 usage error (message on stderr).

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "spectral_spike/data_matrix.hpp"
#include "spectral_spike/errors.hpp"
#include "spectral_spike/estimate.hpp"
#include "spectral_spike/operator.hpp"
#include "spectral_spike/poles.hpp"
#include "spectral_spike/report_json.hpp"
#include "spectral_spike/spectrum.hpp"

namespace ss = spectral_spike;
using nlohmann::json;

namespace {

std::vector<double> parse_spikes(const std::string& csv) {
  std::vector<double> out;
  if (csv.empty()) return out;
  std::stringstream in(csv);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &pos);
    } catch (...) {
      pos = 0;
    }
    while (pos < tok.size() &&
           std::isspace(static_cast<unsigned char>(tok[pos])))
      ++pos;
    if (pos != tok.size() || tok.empty())
      throw CLI::ValidationError("--spikes",
                                 "could not parse '" + tok + "' as a number");
    out.push_back(v);
  }
  std::sort(out.rbegin(), out.rend());
  return out;
}

std::size_t resolve_threads(const CLI::Option* opt, std::size_t flag_value) {
  if (opt->count() > 0) return std::max<std::size_t>(1, flag_value);
  if (const char* env = std::getenv("SPECTRAL_SPIKE_THREADS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return 1;
}

struct IoFlags {
  std::string input;
  std::string format = "binary";
  std::string scale = "1/m";
};

void add_io_flags(CLI::App* cmd, IoFlags& io) {
  cmd->add_option("--input", io.input, "Path to the data matrix Y")
      ->required();
  cmd->add_option("--format", io.format, "Input file format")
      ->check(CLI::IsMember({"csv", "binary"}));
  cmd->add_option("--scale", io.scale,
                  "Covariance scale: W = Y Y^T (raw) or (1/M) Y Y^T (1/m)")
      ->check(CLI::IsMember({"raw", "1/m"}));
}

ss::CovarianceOperator load_operator(const IoFlags& io) {
  const ss::DataFormat f =
      io.format == "csv" ? ss::DataFormat::csv : ss::DataFormat::binary;
  const ss::Scale s = io.scale == "raw" ? ss::Scale::raw : ss::Scale::one_over_m;
  return ss::make_operator(ss::load_data(io.input, f), s);
}

struct RuleFlags {
  std::string stop = "two-window";
  std::size_t max_steps = 0;  // 0 = dimension default
  std::size_t q = 0;          // 0 = dimension default
  double tol = 0.0;           // 0 = dimension default
};

void add_rule_flags(CLI::App* cmd, RuleFlags& rf) {
  cmd->add_option("--stop", rf.stop, "Stopping rule")
      ->check(CLI::IsMember({"fixed", "tail", "two-window"}));
  cmd->add_option("--max-steps", rf.max_steps,
                  "Hard cap on Lanczos steps (default: dimension-based)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--q", rf.q,
                  "Window length for stopping and averaging "
                  "(default: max(1, floor(ln(N)/2)))")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--tol", rf.tol,
                  "Stopping tolerance (default: 3/sqrt(N))")
      ->check(CLI::PositiveNumber);
}

ss::StoppingRule build_rule(const RuleFlags& rf, std::size_t dim) {
  const ss::StoppingRule def = ss::default_rule(dim);
  const std::size_t cap = rf.max_steps ? rf.max_steps : def.max_steps;
  const std::size_t q = rf.q ? rf.q : def.q;
  const double tol = rf.tol > 0.0 ? rf.tol : def.delta2;
  if (rf.stop == "fixed") return ss::fixed_steps(cap);
  if (rf.stop == "tail") return ss::tail_stddev(q, tol, cap);
  return ss::two_window(q, q, tol, tol, cap);
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ss::io_error("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw ss::io_error("failed writing '" + path + "'");
}

// Atoms of the pooled measure: the union of per-probe poles with weights
// divided by the probe count; coincident locations merge.
std::pair<std::vector<double>, std::vector<double>> pooled_atoms(
    const ss::AsdResult& asd) {
  std::vector<std::pair<double, double>> atoms;
  const double k = static_cast<double>(asd.extensions.size());
  for (std::size_t j = 0; j < asd.extensions.size(); ++j) {
    try {
      const ss::PoleSet ps = ss::poles_connection(asd.extensions[j]);
      for (std::size_t i = 0; i < ps.locations.size(); ++i)
        atoms.emplace_back(ps.locations[i], ps.weights[i] / k);
    } catch (const ss::numeric_error& e) {
      std::cerr << "probe " << j << ": pole computation failed (" << e.what()
                << "); omitting its poles from the pooled list\n";
    }
  }
  std::sort(atoms.begin(), atoms.end());
  std::vector<double> locs, weights;
  for (const auto& [x, w] : atoms) {
    if (!locs.empty() && std::fabs(x - locs.back()) <= 1e-8 * (1.0 + std::fabs(x))) {
      const double wt = weights.back() + w;
      locs.back() = (locs.back() * weights.back() + x * w) / wt;
      weights.back() = wt;
    } else {
      locs.push_back(x);
      weights.push_back(w);
    }
  }
  return {std::move(locs), std::move(weights)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "spectral-spike: spike detection and asymptotic spectral density "
      "estimation for large sample covariance operators"};
  app.require_subcommand(1);

  auto delta_check = CLI::Validator(
      [](std::string& s) -> std::string {
        try {
          const double v = std::stod(s);
          if (v > 0.0 && v < 0.5) return {};
        } catch (...) {
        }
        return std::string("delta must lie in (0, 1/2)");
      },
      "DELTA");

  // ---- simulate ----------------------------------------------------------
  auto* sim = app.add_subcommand(
      "simulate", "Draw Y = Sigma^(1/2) X for a diagonal spiked model");
  struct {
    std::size_t n = 0, m = 0;
    double sigma2 = 1.0;
    std::string spikes, dist = "gaussian", out, format = "binary";
    std::uint64_t seed = 0;
  } simf;
  sim->add_option("--n", simf.n, "Rows (operator dimension)")
      ->required()
      ->check(CLI::PositiveNumber);
  sim->add_option("--m", simf.m, "Columns (sample count)")
      ->required()
      ->check(CLI::PositiveNumber);
  sim->add_option("--sigma2", simf.sigma2, "Bulk population variance")
      ->check(CLI::PositiveNumber);
  sim->add_option("--spikes", simf.spikes,
                  "Comma-separated spike variances (each above the bulk)");
  sim->add_option("--dist", simf.dist, "Entry distribution of X")
      ->check(CLI::IsMember({"gaussian", "rademacher"}));
  sim->add_option("--seed", simf.seed, "RNG seed");
  sim->add_option("--out", simf.out, "Output path for Y")->required();
  sim->add_option("--format", simf.format, "Output file format")
      ->check(CLI::IsMember({"csv", "binary"}));
  sim->callback([&] {
    ss::SpikedModelSpec spec;
    spec.n = simf.n;
    spec.m = simf.m;
    spec.bulk = simf.sigma2;
    spec.spikes = parse_spikes(simf.spikes);
    spec.dist = simf.dist == "rademacher" ? ss::SpikedModelSpec::Dist::rademacher
                                          : ss::SpikedModelSpec::Dist::gaussian;
    spec.seed = simf.seed;
    try {
      spec.validate();
    } catch (const ss::format_error& e) {
      throw CLI::ValidationError("simulate", e.what());
    }
    const ss::DataMatrix y = ss::simulate(spec);
    ss::save_data(simf.out, y,
                  simf.format == "csv" ? ss::DataFormat::csv
                                       : ss::DataFormat::binary);
    json echo{{"n", simf.n},         {"m", simf.m},
              {"sigma2", simf.sigma2}, {"spikes", spec.spikes},
              {"dist", simf.dist},   {"seed", simf.seed},
              {"out", simf.out},     {"format", simf.format}};
    std::cout << echo.dump() << "\n";
  });

  // ---- detect ------------------------------------------------------------
  auto* det = app.add_subcommand(
      "detect", "Estimate the number and locations of spikes");
  struct {
    IoFlags io;
    RuleFlags rule;
    std::size_t k = 10, section_size = 0, trials = 1, threads = 1;
    double c_thresh = 1.0, delta = 0.25;
    std::uint64_t seed = 0;
    std::string backend = "cc", out;
  } detf;
  add_io_flags(det, detf.io);
  add_rule_flags(det, detf.rule);
  det->add_option("--k", detf.k, "Number of probes")
      ->check(CLI::PositiveNumber);
  det->add_option("--c-thresh", detf.c_thresh,
                  "Threshold offset scale C in gamma_plus + C * N^(-delta)")
      ->check(CLI::PositiveNumber);
  det->add_option("--delta", detf.delta, "Threshold decay exponent")
      ->check(delta_check);
  det->add_option("--seed", detf.seed, "Base RNG seed for probes");
  det->add_option("--backend", detf.backend, "Pole backend")
      ->check(CLI::IsMember({"cc", "finite"}));
  det->add_option("--section-size", detf.section_size,
                  "Finite-section order (0 = automatic)");
  det->add_option("--trials", detf.trials,
                  "Repeat detection with seeds seed..seed+T-1 and report "
                  "the distribution of the detected count")
      ->check(CLI::PositiveNumber);
  auto* det_threads = det->add_option("--threads", detf.threads,
                                      "Worker threads (default: "
                                      "SPECTRAL_SPIKE_THREADS or 1)")
                          ->check(CLI::PositiveNumber);
  det->add_option("--out", detf.out, "Also write the report JSON here");
  det->callback([&] {
    const ss::CovarianceOperator op = load_operator(detf.io);
    const ss::StoppingRule rule = build_rule(detf.rule, op.dim());
    ss::DetectionConfig dcfg;
    dcfg.c_thresh = detf.c_thresh;
    dcfg.delta = detf.delta;
    dcfg.backend = detf.backend == "finite" ? ss::PoleBackend::finite_section
                                            : ss::PoleBackend::connection;
    dcfg.section_size = detf.section_size;
    ss::AveragingConfig acfg;
    acfg.k = detf.k;
    acfg.q = detf.rule.q;
    acfg.seed = detf.seed;
    const std::size_t threads = resolve_threads(det_threads, detf.threads);

    json out_json;
    if (detf.trials <= 1) {
      out_json = ss::detection_report_to_json(
          ss::detect_spikes(op, dcfg, acfg, rule, threads));
    } else {
      std::vector<std::size_t> r_hats;
      std::map<std::size_t, std::size_t> hist;
      for (std::size_t t = 0; t < detf.trials; ++t) {
        acfg.seed = detf.seed + t;
        const ss::DetectionReport rep =
            ss::detect_spikes(op, dcfg, acfg, rule, threads);
        r_hats.push_back(rep.r_hat);
        ++hist[rep.r_hat];
      }
      json table = json::object();
      for (const auto& [r, c] : hist)
        table[std::to_string(r)] =
            static_cast<double>(c) / static_cast<double>(detf.trials);
      out_json = json{{"trials", detf.trials},
                      {"seed_first", detf.seed},
                      {"r_hats", r_hats},
                      {"p", table}};
    }
    std::cout << out_json.dump() << "\n";
    if (!detf.out.empty()) write_text_file(detf.out, out_json.dump(2) + "\n");
  });

  // ---- asd ---------------------------------------------------------------
  auto* asd = app.add_subcommand(
      "asd", "Estimate the asymptotic spectral density on a bulk grid");
  struct {
    IoFlags io;
    RuleFlags rule;
    std::size_t k = 10, grid = 200, threads = 1;
    std::uint64_t seed = 0;
    std::string out;
  } asdf;
  add_io_flags(asd, asdf.io);
  add_rule_flags(asd, asdf.rule);
  asd->add_option("--k", asdf.k, "Number of probes")
      ->check(CLI::PositiveNumber);
  asd->add_option("--grid", asdf.grid, "Number of density grid points")
      ->check(CLI::PositiveNumber);
  asd->add_option("--seed", asdf.seed, "Base RNG seed for probes");
  auto* asd_threads = asd->add_option("--threads", asdf.threads,
                                      "Worker threads (default: "
                                      "SPECTRAL_SPIKE_THREADS or 1)")
                          ->check(CLI::PositiveNumber);
  asd->add_option("--out", asdf.out, "CSV output path (lambda,density)")
      ->required();
  asd->callback([&] {
    const ss::CovarianceOperator op = load_operator(asdf.io);
    const ss::StoppingRule rule = build_rule(asdf.rule, op.dim());
    ss::AveragingConfig acfg;
    acfg.k = asdf.k;
    acfg.q = asdf.rule.q;
    acfg.seed = asdf.seed;
    const ss::AsdResult res =
        ss::estimate_asd(op, acfg, rule, resolve_threads(asd_threads, asdf.threads));

    const double h = (res.gamma_plus - res.gamma_minus) /
                     static_cast<double>(asdf.grid);
    std::string csv = "lambda,density\n";
    for (std::size_t i = 0; i < asdf.grid; ++i) {
      const double lambda = res.gamma_minus + 0.5 * h + h * static_cast<double>(i);
      csv += ss::detail::format_double(lambda);
      csv += ',';
      csv += ss::detail::format_double(res.pooled_density(lambda));
      csv += '\n';
    }
    write_text_file(asdf.out, csv);

    auto [locs, weights] = pooled_atoms(res);
    json j{{"gamma_minus", res.gamma_minus},
           {"gamma_plus", res.gamma_plus},
           {"poles", locs},
           {"weights", weights},
           {"k", asdf.k}};
    std::cout << j.dump() << "\n";
  });

  // ---- poles -------------------------------------------------------------
  auto* pol = app.add_subcommand(
      "poles", "Locate discrete poles with both backends and compare");
  struct {
    IoFlags io;
    RuleFlags rule;
    std::size_t section_size = 0;
    double c_thresh = 1.0, delta = 0.25;
    std::uint64_t seed = 0;
    std::string out;
  } polf;
  add_io_flags(pol, polf.io);
  add_rule_flags(pol, polf.rule);
  pol->add_option("--seed", polf.seed, "Probe RNG seed");
  pol->add_option("--c-thresh", polf.c_thresh,
                  "Margin scale C in gamma_plus + C * N^(-delta)")
      ->check(CLI::PositiveNumber);
  pol->add_option("--delta", polf.delta, "Margin decay exponent")
      ->check(delta_check);
  pol->add_option("--section-size", polf.section_size,
                  "Finite-section order (0 = automatic)");
  pol->add_option("--out", polf.out, "Also write the JSON here");
  pol->callback([&] {
    const ss::CovarianceOperator op = load_operator(polf.io);
    const ss::StoppingRule rule = build_rule(polf.rule, op.dim());
    const ss::LanczosResult lr =
        ss::lanczos_run(op, ss::sample_probe(op.dim(), polf.seed), rule);
    if (lr.jacobi.size() < 3)
      throw ss::numeric_error("lanczos stopped before the minimum of 3 steps");
    const ss::ExtendedCholesky ext =
        ss::extend(ss::cholesky_tridiag(lr.jacobi));
    const auto [gm, gp] = ss::support_endpoints(ext);
    const double margin =
        polf.c_thresh * std::pow(static_cast<double>(op.dim()), -polf.delta);

    json j{{"gamma_minus", gm},
           {"gamma_plus", gp},
           {"threshold", gp + margin},
           {"steps", lr.steps}};
    std::vector<double> cc_above;
    bool cc_ok = false;
    try {
      const ss::PoleSet ps = ss::poles_connection(ext);
      j["connection"] = {{"locations", ps.locations}, {"weights", ps.weights}};
      for (double x : ps.locations)
        if (x > gp + margin) cc_above.push_back(x);
      cc_ok = true;
    } catch (const ss::numeric_error& e) {
      j["connection"] = {{"error", e.what()}};
    }
    const std::vector<double> fs =
        ss::poles_finite_section(ext, polf.section_size, margin);
    j["finite_section"] = fs;
    if (cc_ok && cc_above.size() == fs.size()) {
      double disc = 0.0;
      for (std::size_t i = 0; i < fs.size(); ++i)
        disc = std::max(disc, std::fabs(cc_above[i] - fs[i]));
      j["max_discrepancy"] = disc;
    } else {
      j["max_discrepancy"] = nullptr;
    }
    std::cout << j.dump() << "\n";
    if (!polf.out.empty()) write_text_file(polf.out, j.dump(2) + "\n");
  });

  try {
    app.parse(argc, argv);
    return 0;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const std::exception& e) {
    std::cout << json{{"error", e.what()}}.dump() << "\n";
    return 1;
  }
}
