// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mfakf/cgra/grid.hpp"
#include "mfakf/cgra/schedule.hpp"
#include "support/oracles.hpp"

using namespace mfakf;
using namespace mfakf::cgra;

TEST_CASE("grid presets follow the placement rule") {
  GridConfig g2 = GridConfig::preset(2);
  CHECK(g2.placement == MemPlacement::LastColumn);
  CHECK(g2.compute_tiles() == 2);
  GridConfig g3 = GridConfig::preset(3);
  CHECK(g3.placement == MemPlacement::LastColumn);
  CHECK(g3.compute_tiles() == 6);
  GridConfig g4 = GridConfig::preset(4);
  CHECK(g4.placement == MemPlacement::PerTileMemoryPe);
  CHECK(g4.compute_tiles() == 16);
  CHECK_THROWS_AS(GridConfig::preset(5), ConfigError);
}

TEST_CASE("partition_blocks: n=8 on a 2x2 array gives four 4x4 blocks") {
  BlockMap m = partition_blocks(8, GridConfig::preset(2));
  REQUIRE(m.blocks.size() == 4);
  for (const BlockAssignment& b : m.blocks) {
    CHECK(b.rows == 4);
    CHECK(b.cols == 4);
  }
  CHECK(m.blocks[0].tile == 0);
  CHECK(m.blocks[1].tile == 1);  // round-robin
}

TEST_CASE("partition_blocks: ragged n=9 covers every cell exactly once") {
  BlockMap m = partition_blocks(9, GridConfig::preset(2));
  REQUIRE(m.blocks.size() == 4);
  std::vector<int> covered(81, 0);
  for (const BlockAssignment& b : m.blocks) {
    CHECK((b.rows == 5 || b.rows == 4));
    for (std::size_t i = 0; i < b.rows; ++i)
      for (std::size_t j = 0; j < b.cols; ++j)
        covered[(b.row0 + i) * 9 + (b.col0 + j)]++;
  }
  for (int c : covered) CHECK(c == 1);
}

TEST_CASE("partition_blocks: n=16 on 4x4 gives sixteen 4x4 blocks") {
  BlockMap m = partition_blocks(16, GridConfig::preset(4));
  REQUIRE(m.blocks.size() == 16);
  for (const BlockAssignment& b : m.blocks) {
    CHECK(b.rows == 4);
    CHECK(b.cols == 4);
  }
  CHECK_THROWS_AS(partition_blocks(3, GridConfig::preset(4)), DimensionError);
}

TEST_CASE("sub-block side fits three operands in the register file") {
  BlockMap m = partition_blocks(64, GridConfig::preset(2), 256);
  CHECK(m.sub_dim == 9);  // floor(sqrt(256/3))
  CHECK(3 * m.sub_dim * m.sub_dim <= 256);
}

TEST_CASE("degenerate single-compute-tile grid equals the PE plus transfers") {
  SimConfig cfg;
  GridConfig g;
  g.rows = 1;
  g.cols = 2;
  g.placement = MemPlacement::LastColumn;  // 1 compute + 1 memory tile
  g.hop_latency = cfg.hop_latency;
  Workload w = make_gemm_workload(8, 21);
  CycleReport grid = simulate_grid(w, g, cfg, Mode::Hw);
  CycleReport pe = simulate_pe(w, cfg, Mode::Hw);
  REQUIRE(grid.tiles.size() == 1);
  CHECK(grid.tiles[0].compute_cycles == pe.cycles);
  CHECK(grid.cycles == grid.tiles[0].compute_cycles + grid.tiles[0].transfer_cycles);
  CHECK(grid.tiles[0].transfer_cycles > 0);
}

TEST_CASE("zero hop latency with divisible work scales exactly with tiles") {
  SimConfig cfg;
  // 48 identical independent jobs: 48 = lcm-friendly over 2, 6, 16 tiles.
  Workload w;
  for (int i = 0; i < 48; ++i) {
    Workload one = make_gemm_workload(6, 33);  // same seed: identical jobs
    w.push_back(one.front());
  }
  long long weighted[3];
  int idx = 0;
  for (int k : {2, 3, 4}) {
    GridConfig g = GridConfig::preset(k, 0);  // hop_latency = 0
    CycleReport r = simulate_grid(w, g, cfg, Mode::Sw);
    weighted[idx++] = r.cycles * g.compute_tiles();
  }
  CHECK(weighted[0] == weighted[1]);
  CHECK(weighted[1] == weighted[2]);  // speedup equals the compute-tile ratio
}

TEST_CASE("grid cycles decrease strictly with tile count on the mfa workload") {
  SimConfig cfg;
  Workload w = make_mfa_workload(32, 1);
  CycleReport r2 = simulate_grid(w, GridConfig::preset(2, cfg.hop_latency), cfg, Mode::Sw);
  CycleReport r3 = simulate_grid(w, GridConfig::preset(3, cfg.hop_latency), cfg, Mode::Sw);
  CycleReport r4 = simulate_grid(w, GridConfig::preset(4, cfg.hop_latency), cfg, Mode::Sw);
  CHECK(r2.cycles > r3.cycles);
  CHECK(r3.cycles > r4.cycles);
  CHECK(r2.flops == r4.flops);
  for (const CycleReport* r : {&r2, &r3, &r4}) {
    CHECK(r->utilization > 0.0);
    CHECK(r->utilization <= 1.0);
    CHECK(r->noc_transfers > 0);
  }
}

TEST_CASE("grid reports are deterministic") {
  SimConfig cfg;
  Workload w = make_mfa_workload(16, 3);
  GridConfig g = GridConfig::preset(3, cfg.hop_latency);
  CycleReport a = simulate_grid(w, g, cfg, Mode::Sw);
  CycleReport b = simulate_grid(w, g, cfg, Mode::Sw);
  CHECK(a.cycles == b.cycles);
  CHECK(a.noc_transfers == b.noc_transfers);
  CHECK(a.utilization == b.utilization);
  for (std::size_t i = 0; i < a.tiles.size(); ++i) {
    CHECK(a.tiles[i].compute_cycles == b.tiles[i].compute_cycles);
    CHECK(a.tiles[i].transfer_cycles == b.tiles[i].transfer_cycles);
  }
}

TEST_CASE("per-tile breakdown accounts all executed flops") {
  SimConfig cfg;
  Workload w = make_mfa_workload(16, 3);
  CycleReport r = simulate_grid(w, GridConfig::preset(2, cfg.hop_latency), cfg, Mode::Hw);
  long long sum = 0;
  for (const TileStats& t : r.tiles) sum += t.flops;
  CHECK(sum == r.flops);
}
