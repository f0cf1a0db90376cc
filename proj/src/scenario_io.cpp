// SPDX-License-Identifier: Apache-2.0
#include "mfakf/scenario_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace mfakf::kalman {

namespace {

using nlohmann::json;

Matrix matrix_from_json(const json& j, const std::filesystem::path& base) {
  if (j.is_string())
    return read_matrix((base / j.get<std::string>()).string());
  if (!j.is_array() || j.empty())
    throw ConfigError("scenario: matrix must be an array of rows or a file path");
  const std::size_t nr = j.size();
  const std::size_t nc = j.at(0).size();
  Matrix m(nr, nc);
  for (std::size_t i = 0; i < nr; ++i) {
    const json& row = j.at(i);
    if (!row.is_array() || row.size() != nc)
      throw ConfigError("scenario: ragged matrix rows in JSON");
    for (std::size_t c = 0; c < nc; ++c) m(i, c) = row.at(c).get<double>();
  }
  return m;
}

}  // namespace

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("scenario: invalid JSON in " + path + ": " + e.what());
  }
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  try {
    if (j.contains("preset")) {
      const json& p = j.at("preset");
      const std::string kind = p.at("kind").get<std::string>();
      if (kind != "constant_velocity")
        throw ConfigError("scenario: unknown preset kind '" + kind + "'");
      return make_constant_velocity(p.at("dt").get<double>(),
                                    p.at("q_intensity").get<double>(),
                                    p.at("r_diag").get<double>(),
                                    p.value("seed", std::uint64_t{1}),
                                    p.value("steps", std::size_t{100}));
    }
    Scenario sc;
    const json& mj = j.at("model");
    sc.model.f = matrix_from_json(mj.at("f"), base);
    sc.model.h = matrix_from_json(mj.at("h"), base);
    sc.model.q = matrix_from_json(mj.at("q"), base);
    sc.model.r = matrix_from_json(mj.at("r"), base);
    if (mj.contains("g")) sc.model.g = matrix_from_json(mj.at("g"), base);
    sc.x0 = matrix_from_json(j.at("x0"), base);
    sc.p0 = matrix_from_json(j.at("p0"), base);
    sc.seed = j.value("seed", std::uint64_t{0});
    if (!j.contains("measurements") || !j.at("measurements").is_array())
      throw ConfigError("scenario: 'measurements' array required");
    const std::size_t m = sc.model.h.rows();
    for (const json& row : j.at("measurements")) {
      if (!row.is_array() || row.size() != m)
        throw ConfigError("scenario: each measurement must have " + std::to_string(m) +
                          " entries");
      Matrix z(m, 1);
      for (std::size_t i = 0; i < m; ++i) z(i, 0) = row.at(i).get<double>();
      sc.measurements.push_back(std::move(z));
    }
    if (j.contains("truth"))
      for (const json& row : j.at("truth"))
        sc.truth.push_back(matrix_from_json(row, base));
    if (sc.measurements.empty())
      throw ConfigError("scenario: measurement count must be >= 1");
    return sc;
  } catch (const json::exception& e) {
    throw ConfigError("scenario: missing or malformed field in " + path + ": " + e.what());
  }
}

void write_trace_csv(const ScenarioTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open output file: " + path);
  if (trace.steps.empty()) throw ConfigError("trace: empty");
  const std::size_t n = trace.steps.front().state.x.rows();
  out << "step";
  for (std::size_t i = 0; i < n; ++i) out << ",x" << i;
  out << ",trace_p,innovation_norm\n";
  char buf[40];
  for (const StepRecord& r : trace.steps) {
    out << r.step;
    for (std::size_t i = 0; i < n; ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", r.state.x(i, 0));
      out << "," << buf;
    }
    std::snprintf(buf, sizeof(buf), "%.17g", r.trace_p);
    out << "," << buf;
    std::snprintf(buf, sizeof(buf), "%.17g", r.innovation_norm);
    out << "," << buf << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace mfakf::kalman
