#pragma once

// JSON serialization for detection reports.  Numbers round-trip exactly:
// doubles are emitted in shortest-round-trip form by the JSON library.

#include <json.hpp>

#include "spectral_spike/errors.hpp"
#include "spectral_spike/estimate.hpp"

namespace spectral_spike {

inline nlohmann::json detection_report_to_json(const DetectionReport& r) {
  nlohmann::json j;
  j["r_hat"] = r.r_hat;
  j["per_probe_counts"] = r.per_probe_counts;
  j["poles"] = r.pole_locations;
  j["gamma_minus"] = r.gamma_minus;
  j["gamma_plus"] = r.gamma_plus;
  j["threshold"] = r.threshold;
  j["steps"] = r.steps;
  j["k"] = r.k;
  j["C"] = r.c_thresh;
  j["delta"] = r.delta;
  j["seed"] = r.seed;
  j["wall_time_ms"] = r.wall_time_ms;
  return j;
}

inline DetectionReport detection_report_from_json(const nlohmann::json& j) {
  try {
    DetectionReport r;
    r.r_hat = j.at("r_hat").get<std::size_t>();
    r.per_probe_counts =
        j.at("per_probe_counts").get<std::vector<std::size_t>>();
    r.pole_locations =
        j.at("poles").get<std::vector<std::vector<double>>>();
    r.gamma_minus = j.at("gamma_minus").get<double>();
    r.gamma_plus = j.at("gamma_plus").get<double>();
    r.threshold = j.at("threshold").get<double>();
    r.steps = j.at("steps").get<std::vector<std::size_t>>();
    r.k = j.at("k").get<std::size_t>();
    r.c_thresh = j.at("C").get<double>();
    r.delta = j.at("delta").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.wall_time_ms = j.at("wall_time_ms").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw format_error(std::string("malformed detection report: ") + e.what());
  }
}

}  // namespace spectral_spike
