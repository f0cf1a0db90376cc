// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "mfakf/cgra/config.hpp"
#include "mfakf/cgra/lower.hpp"
#include "mfakf/matrix.hpp"

namespace mfakf::cgra {

struct BlockAssignment {
  std::size_t bi = 0, bj = 0;      // block coordinates
  std::size_t row0 = 0, col0 = 0;  // top-left element
  std::size_t rows = 0, cols = 0;
  int tile = 0;                    // owning compute tile (round-robin)
};

struct BlockMap {
  int k = 0;                // blocks per side (= tile-array side)
  std::size_t sub_dim = 0;  // square sub-block side fitting the register file
  std::vector<BlockAssignment> blocks;
};

/// Splits an n x n matrix into k x k near-equal blocks (k = tile-array side),
/// assigns them round-robin over the compute tiles, and reports the sub-block
/// side that keeps three operands resident in the register file.
BlockMap partition_blocks(std::size_t n, const GridConfig& grid, int registers = 256);

/// Distributed simulation: the workload is decomposed into block tasks,
/// tasks run on compute tiles (per-tile in-order PE model under `mode`),
/// operand blocks move over the NoC (hop latency + streamed words; read
/// blocks stay resident in tile-local memory once fetched). Total cycles =
/// sum over phases of the slowest tile (compute + transfer).
CycleReport simulate_grid(const Workload& workload, const GridConfig& grid,
                          const SimConfig& cfg, Mode mode);

}  // namespace mfakf::cgra
