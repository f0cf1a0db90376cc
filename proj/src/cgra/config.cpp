// SPDX-License-Identifier: Apache-2.0
#include "mfakf/cgra/config.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "mfakf/error.hpp"

namespace mfakf::cgra {

using nlohmann::json;

double peak_gflops(const PeConfig& cfg) {
  return (cfg.multipliers + cfg.adders) * cfg.clock_hz / 1e9;
}

bool MacroOpPattern::fits(const PeConfig& cfg) const {
  // Lane count through the multiplier stage must fit; the adder stage may
  // spill one level into a second issue cycle (already priced in issue_cost).
  const int max_parallel_adds = cfg.adders * issue_cost;
  const int pattern_parallel_adds =
      (kind == PatternKind::Axpy4 || kind == PatternKind::ReflectorApply) ? 4
      : (kind == PatternKind::Sum4 || kind == PatternKind::Dot4)          ? 2
                                                                          : 1;
  return mults <= cfg.multipliers * issue_cost && pattern_parallel_adds <= max_parallel_adds;
}

std::vector<MacroOpPattern> default_patterns() {
  // name, kind, mults, adds, issue_cost, mul_depth, add_depth
  return {
      {"dot4", PatternKind::Dot4, 4, 3, 1, 1, 2},
      {"mac2", PatternKind::Mac2, 2, 2, 1, 1, 2},
      {"axpy4", PatternKind::Axpy4, 4, 4, 2, 1, 1},
      {"reflector_apply", PatternKind::ReflectorApply, 4, 4, 2, 1, 1},
      {"sum4", PatternKind::Sum4, 0, 3, 1, 0, 2},
  };
}

MacroOpPattern pattern_by_name(const std::string& name) {
  for (auto& p : default_patterns())
    if (p.name == name) return p;
  throw ConfigError("unknown macro-op pattern: " + name);
}

GridConfig GridConfig::preset(int k, int hop_latency) {
  if (k < 2 || k > 4)
    throw ConfigError("grid preset: tile array size must be 2, 3 or 4");
  GridConfig g;
  g.rows = g.cols = k;
  g.placement = (k == 4) ? MemPlacement::PerTileMemoryPe : MemPlacement::LastColumn;
  g.hop_latency = hop_latency;
  return g;
}

std::string to_string(Mode m) {
  switch (m) {
    case Mode::Base: return "base";
    case Mode::Hw: return "hw";
    case Mode::Sw: return "sw";
  }
  return "?";
}

Mode mode_from_string(const std::string& s) {
  if (s == "base") return Mode::Base;
  if (s == "hw") return Mode::Hw;
  if (s == "sw") return Mode::Sw;
  throw ConfigError("unknown mode '" + s + "' (expected base|hw|sw)");
}

namespace {
std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace

std::string CycleReport::to_json() const {
  json j;
  j["cycles"] = cycles;
  j["flops"] = flops;
  j["stall_cycles"] = stall_cycles;
  j["filled_stalls"] = filled_stalls;
  j["achieved_gflops"] = achieved_gflops;
  j["utilization"] = utilization;
  j["peak_gflops"] = peak_gflops;
  j["noc_transfers"] = noc_transfers;
  if (!tiles.empty()) {
    json arr = json::array();
    for (const TileStats& t : tiles) {
      json tj;
      tj["tile"] = t.tile;
      tj["compute_cycles"] = t.compute_cycles;
      tj["transfer_cycles"] = t.transfer_cycles;
      tj["flops"] = t.flops;
      arr.push_back(tj);
    }
    j["tiles"] = arr;
  }
  return j.dump(2) + "\n";
}

std::string CycleReport::csv_header() {
  return "workload,size,mode,grid,cycles,flops,stall_cycles,filled_stalls,"
         "utilization,achieved_gflops,peak_gflops,noc_transfers";
}

std::string CycleReport::csv_row(const std::string& workload, std::size_t size,
                                 const std::string& mode, const std::string& grid) const {
  std::string row = workload + "," + std::to_string(size) + "," + mode + "," + grid;
  row += "," + std::to_string(cycles);
  row += "," + std::to_string(flops);
  row += "," + std::to_string(stall_cycles);
  row += "," + std::to_string(filled_stalls);
  row += "," + fmt_double(utilization);
  row += "," + fmt_double(achieved_gflops);
  row += "," + fmt_double(peak_gflops);
  row += "," + std::to_string(noc_transfers);
  return row;
}

std::vector<MacroOpPattern> SimConfig::pattern_set() const {
  std::vector<MacroOpPattern> out;
  out.reserve(patterns.size());
  for (const std::string& name : patterns) out.push_back(pattern_by_name(name));
  return out;
}

namespace {

void pe_from_json(const json& j, PeConfig& pe) {
  pe.multipliers = j.value("multipliers", pe.multipliers);
  pe.adders = j.value("adders", pe.adders);
  pe.clock_hz = j.value("clock_hz", pe.clock_hz);
  pe.mul_latency = j.value("mul_latency", pe.mul_latency);
  pe.add_latency = j.value("add_latency", pe.add_latency);
  pe.load_latency = j.value("load_latency", pe.load_latency);
  pe.store_latency = j.value("store_latency", pe.store_latency);
  pe.issue_width = j.value("issue_width", pe.issue_width);
  pe.lsu_skid = j.value("lsu_skid", pe.lsu_skid);
  pe.registers = j.value("registers", pe.registers);
  pe.local_mem_bytes = j.value("local_mem_bytes", pe.local_mem_bytes);
  if (pe.multipliers < 0 || pe.adders < 0 || pe.clock_hz <= 0)
    throw ConfigError("pe config: counts must be >= 0 and clock_hz > 0");
}

json pe_to_json(const PeConfig& pe) {
  json j;
  j["multipliers"] = pe.multipliers;
  j["adders"] = pe.adders;
  j["clock_hz"] = pe.clock_hz;
  j["mul_latency"] = pe.mul_latency;
  j["add_latency"] = pe.add_latency;
  j["load_latency"] = pe.load_latency;
  j["store_latency"] = pe.store_latency;
  j["issue_width"] = pe.issue_width;
  j["lsu_skid"] = pe.lsu_skid;
  j["registers"] = pe.registers;
  j["local_mem_bytes"] = pe.local_mem_bytes;
  return j;
}

}  // namespace

SimConfig SimConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open sim config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("sim config: invalid JSON in " + path + ": " + e.what());
  }
  SimConfig cfg;
  try {
    if (j.contains("pe")) pe_from_json(j.at("pe"), cfg.base_pe);
    if (j.contains("rdp")) pe_from_json(j.at("rdp"), cfg.rdp_pe);
    if (j.contains("patterns")) cfg.patterns = j.at("patterns").get<std::vector<std::string>>();
    cfg.fuse_window_scale = j.value("fuse_window_scale", cfg.fuse_window_scale);
    cfg.overlap_depth = j.value("overlap_depth", cfg.overlap_depth);
    cfg.hop_latency = j.value("hop_latency", cfg.hop_latency);
    if (j.contains("grid")) {
      const json& gj = j.at("grid");
      if (gj.contains("size")) {
        cfg.grid = GridConfig::preset(gj.at("size").get<int>(), cfg.hop_latency);
      } else {
        cfg.grid.rows = gj.value("rows", cfg.grid.rows);
        cfg.grid.cols = gj.value("cols", cfg.grid.cols);
      }
      if (gj.contains("placement")) {
        const std::string pl = gj.at("placement").get<std::string>();
        if (pl == "last_column")
          cfg.grid.placement = MemPlacement::LastColumn;
        else if (pl == "per_tile")
          cfg.grid.placement = MemPlacement::PerTileMemoryPe;
        else
          throw ConfigError("grid placement must be last_column or per_tile, got '" + pl +
                            "'");
      }
      cfg.grid.hop_latency = gj.value("hop_latency", cfg.hop_latency);
      if (cfg.grid.rows < 1 || cfg.grid.cols < 1 || cfg.grid.compute_tiles() < 1)
        throw ConfigError("grid config: no compute tiles");
    } else {
      cfg.grid.hop_latency = cfg.hop_latency;
    }
  } catch (const json::exception& e) {
    throw ConfigError("sim config: malformed field in " + path + ": " + e.what());
  }
  cfg.pattern_set();  // validates pattern names early
  return cfg;
}

std::string SimConfig::to_json() const {
  json j;
  j["pe"] = pe_to_json(base_pe);
  j["rdp"] = pe_to_json(rdp_pe);
  j["patterns"] = patterns;
  j["fuse_window_scale"] = fuse_window_scale;
  j["overlap_depth"] = overlap_depth;
  j["hop_latency"] = hop_latency;
  json gj;
  gj["rows"] = grid.rows;
  gj["cols"] = grid.cols;
  gj["placement"] =
      grid.placement == MemPlacement::LastColumn ? "last_column" : "per_tile";
  gj["hop_latency"] = grid.hop_latency;
  j["grid"] = gj;
  return j.dump(2) + "\n";
}

}  // namespace mfakf::cgra
