// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace mfakf::cgra {

/// Functional-unit and timing description of one processing element.
/// All units are fully pipelined (initiation interval 1); issue is in-order.
struct PeConfig {
  int multipliers = 1;
  int adders = 1;
  double clock_hz = 700e6;
  int mul_latency = 4;
  int add_latency = 3;
  int load_latency = 2;
  int store_latency = 2;
  int issue_width = 1;
  int lsu_skid = 1;  // operand-collector depth: memory ops this far ahead of
                     // a blocked front may issue out of band (in order per class)
  int registers = 256;             // 64-bit each
  std::size_t local_mem_bytes = 262144;

  static PeConfig base() { return PeConfig{}; }
  static PeConfig rdp() {
    PeConfig c;
    c.multipliers = 4;
    c.adders = 3;
    c.lsu_skid = 8;
    return c;
  }
};

/// (multipliers + adders) * clock / 1e9.
double peak_gflops(const PeConfig& cfg);

enum class PatternKind { Dot4, Mac2, Axpy4, ReflectorApply, Sum4 };

/// One reconfigurable-datapath configuration: a small dependence subgraph
/// executed as a single issued operation.
struct MacroOpPattern {
  std::string name;
  PatternKind kind;
  int mults = 0;       // multiplier-class nodes absorbed
  int adds = 0;        // adder-class nodes absorbed
  int issue_cost = 1;  // cycles the datapath accepts no new op
  int mul_depth = 0;   // pipeline depth through the multiplier stage
  int add_depth = 0;   // pipeline depth through the adder tree

  int flops() const { return mults + adds; }
  int result_latency(const PeConfig& cfg) const {
    return mul_depth * cfg.mul_latency + add_depth * cfg.add_latency;
  }
  /// Width check against the unit counts; a 4-lane adder stage on 3 adders
  /// is folded into an extra issue cycle instead (issue_cost 2).
  bool fits(const PeConfig& cfg) const;
};

std::vector<MacroOpPattern> default_patterns();
MacroOpPattern pattern_by_name(const std::string& name);

enum class MemPlacement { LastColumn, PerTileMemoryPe };

/// Tile-array description. Presets: 2x2 and 3x3 reserve the last column as
/// memory tiles; 4x4 keeps all tiles computing and pairs each with its own
/// memory element split into private and global halves.
struct GridConfig {
  int rows = 2;
  int cols = 2;
  MemPlacement placement = MemPlacement::LastColumn;
  int hop_latency = 2;  // cycles per word per hop, XY routing

  static GridConfig preset(int k, int hop_latency = 2);
  int compute_tiles() const {
    return placement == MemPlacement::LastColumn ? rows * (cols - 1) : rows * cols;
  }
};

struct TileStats {
  int tile = 0;
  long long compute_cycles = 0;
  long long transfer_cycles = 0;
  long long flops = 0;
};

struct CycleReport {
  long long cycles = 0;
  long long flops = 0;
  long long stall_cycles = 0;
  long long filled_stalls = 0;
  double achieved_gflops = 0.0;
  double utilization = 0.0;     // flops / (cycles * peak flops per cycle)
  double peak_gflops = 0.0;
  long long noc_transfers = 0;  // words moved across the network
  std::vector<TileStats> tiles;

  std::string to_json() const;
  static std::string csv_header();
  std::string csv_row(const std::string& workload, std::size_t size,
                      const std::string& mode, const std::string& grid) const;
};

enum class Mode { Base, Hw, Sw };
std::string to_string(Mode m);
Mode mode_from_string(const std::string& s);

/// Whole-simulation configuration; the JSON file mirrors these fields.
struct SimConfig {
  PeConfig base_pe = PeConfig::base();
  PeConfig rdp_pe = PeConfig::rdp();
  std::vector<std::string> patterns = {"dot4", "mac2", "axpy4", "reflector_apply", "sum4"};
  int fuse_window_scale = 192;  // fused-order interleave window control
  int overlap_depth = 8;        // routines merged by the stall-filling pass
  int hop_latency = 2;
  GridConfig grid = GridConfig::preset(2);  // optional "grid" block in the JSON

  std::vector<MacroOpPattern> pattern_set() const;
  static SimConfig load(const std::string& path);
  std::string to_json() const;
};

}  // namespace mfakf::cgra
