// SPDX-License-Identifier: Apache-2.0
#include "mfakf/cgra/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>

#include "lower_detail.hpp"
#include "mfakf/cgra/fuse.hpp"
#include "mfakf/cgra/schedule.hpp"
#include "mfakf/error.hpp"

namespace mfakf::cgra {

namespace {

struct GridTask {
  Program prog;
  std::vector<std::pair<std::string, long long>> reads;   // block name, words
  std::vector<std::pair<std::string, long long>> writes;  // block name, words
  int preferred_tile = -1;  // owner-computes placement; -1: round-robin
};

using Phase = std::vector<GridTask>;

// FNV-1a; deterministic home assignment for operand blocks.
std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

long long load_words(const Program& p) {
  long long w = 0;
  for (const InstrDag& d : p.dags)
    for (const Node& n : d.nodes)
      if (n.cls == OpClass::Load) ++w;
  return w;
}

long long store_words(const Program& p) {
  long long w = 0;
  for (const InstrDag& d : p.dags)
    for (const Node& n : d.nodes)
      if (n.cls == OpClass::Store) ++w;
  return w;
}

// ---------------------------------------------------------------------------

Phase gemm_block_phase(const GemmCall& call, const GridConfig& grid, int registers) {
  const std::size_t n = call.a.rows();
  BlockMap map = partition_blocks(n, grid, registers);
  Phase phase;
  const std::size_t kk = call.a.cols();
  for (const BlockAssignment& b : map.blocks) {
    GridTask t;
    Matrix ab = call.a.block(b.row0, 0, b.rows, kk);
    Matrix bb = call.b.block(0, b.col0, kk, b.cols);
    const Matrix* addend = call.addend ? &*call.addend : nullptr;
    Matrix cb(1, 1);
    if (addend) {
      cb = addend->block(b.row0, b.col0, b.rows, b.cols);
      addend = &cb;
    }
    detail::lower_gemm_into(t.prog, "blk", ab, bb, addend, call.subtract);
    t.reads.push_back({"A:r" + std::to_string(b.bi), static_cast<long long>(b.rows * kk)});
    t.reads.push_back({"B:c" + std::to_string(b.bj), static_cast<long long>(kk * b.cols)});
    t.writes.push_back({"C:" + std::to_string(b.bi) + ":" + std::to_string(b.bj),
                        static_cast<long long>(b.rows * b.cols)});
    phase.push_back(std::move(t));
  }
  return phase;
}

std::vector<Phase> mfa_phases(const MfaCall& call, const GridConfig& grid) {
  const std::size_t n = call.a.rows();
  // Narrow panels: the serial panel chain is the factorization's critical
  // path across phases, so the array runs it in quarters of the PE width.
  const std::size_t bs = std::min<std::size_t>({call.block, n, std::size_t{4}});
  const int tiles = grid.compute_tiles();
  // Column chunks sized so each compute tile sees about two tasks per phase.
  const std::size_t total_cols = (n - bs) + call.b.cols();
  const std::size_t wb = std::clamp<std::size_t>(
      total_cols / (2 * static_cast<std::size_t>(tiles)), 2, bs);
  Matrix packed = call.a;
  Matrix bwork = call.b;
  std::vector<double> tau(n, 0.0);

  std::vector<Phase> phases;
  Phase carry;  // trailing tasks of the previous stage, second half

  std::size_t stage = 0;
  for (std::size_t j0 = 0; j0 < n; j0 += bs, ++stage) {
    const std::size_t pb = std::min(bs, n - j0);
    // Panel task joins the carried-over second half of the previous trailing.
    Phase ph = std::move(carry);
    carry.clear();
    {
      GridTask t;
      detail::Builder b("geqrf");
      detail::Work w(b, packed);
      detail::lower_qr_panel(b, w, j0, pb, tau);
      const std::size_t out = detail::add_output(t.prog, "panel", n - j0, pb);
      detail::store_region(b, t.prog, out, w, j0, j0, n - j0, pb);
      packed = w.values();
      t.prog.dags.push_back(b.take());
      t.reads.push_back({"A:" + std::to_string(j0), static_cast<long long>(n * pb)});
      t.writes.push_back({"PANEL:" + std::to_string(stage),
                          static_cast<long long>((n - j0) * pb + pb)});
      // The panel floats to whichever tile has the least queued work.
      t.preferred_tile = -1;
      ph.push_back(std::move(t));
    }
    phases.push_back(std::move(ph));

    // Trailing tasks of this stage: A column chunks beyond the panel, then
    // the B chunks. The chunk holding the next panel's columns goes into the
    // immediately following phase; the rest is split with the next stage.
    Matrix tau_mat(1, n);
    for (std::size_t q = 0; q < n; ++q) tau_mat(0, q) = tau[q];
    std::vector<GridTask> trail;
    Matrix packed_next = packed;
    for (std::size_t c0 = j0 + pb; c0 < n; c0 += wb) {
      const std::size_t cw = std::min(wb, n - c0);
      GridTask t;
      detail::Builder b("gemm");
      detail::Work refl(b, packed);
      detail::In tin(b, tau_mat);
      detail::Work target(b, packed_next);
      detail::lower_apply_panel(b, refl, tin, tau, target, j0, pb, c0, c0 + cw);
      const std::size_t out = detail::add_output(t.prog, "trail", n - j0, cw);
      detail::store_region(b, t.prog, out, target, j0, c0, n - j0, cw);
      packed_next = target.values();
      t.prog.dags.push_back(b.take());
      t.reads.push_back({"PANEL:" + std::to_string(stage),
                         static_cast<long long>((n - j0) * pb + pb)});
      t.reads.push_back({"A:" + std::to_string(c0), static_cast<long long>(n * cw)});
      t.writes.push_back({"A:" + std::to_string(c0), static_cast<long long>(n * cw)});
      t.preferred_tile = static_cast<int>(c0 / wb);  // column chunks stay home
      trail.push_back(std::move(t));
    }
    Matrix bnext = bwork;
    for (std::size_t c0 = 0; c0 < bwork.cols(); c0 += wb) {
      const std::size_t cw = std::min(wb, bwork.cols() - c0);
      GridTask t;
      detail::Builder b("gemm");
      detail::Work refl(b, packed);
      detail::In tin(b, tau_mat);
      detail::Work target(b, bnext);
      detail::lower_apply_panel(b, refl, tin, tau, target, j0, pb, 0 + c0, c0 + cw);
      const std::size_t out = detail::add_output(t.prog, "bupd", n - j0, cw);
      detail::store_region(b, t.prog, out, target, j0, c0, n - j0, cw);
      bnext = target.values();
      t.prog.dags.push_back(b.take());
      t.reads.push_back({"PANEL:" + std::to_string(stage),
                         static_cast<long long>((n - j0) * pb + pb)});
      t.reads.push_back({"B:" + std::to_string(c0), static_cast<long long>(n * cw)});
      t.writes.push_back({"B:" + std::to_string(c0), static_cast<long long>(n * cw)});
      t.preferred_tile = static_cast<int>((n + c0) / wb);  // offset from A owners
      trail.push_back(std::move(t));
    }
    packed = packed_next;
    bwork = bnext;
    if (trail.empty()) continue;
    Phase now;
    const std::size_t half = std::max<std::size_t>(1, (trail.size() + 1) / 2);
    for (std::size_t t = 0; t < trail.size(); ++t) {
      if (t < half)
        now.push_back(std::move(trail[t]));
      else
        carry.push_back(std::move(trail[t]));
    }
    phases.push_back(std::move(now));
  }
  if (!carry.empty()) {
    phases.push_back(std::move(carry));
    carry.clear();
  }

  // Elimination: independent row blocks, one per compute tile, one phase.
  const std::size_t k_rows = call.c.rows();
  const std::size_t rb = std::max<std::size_t>(1, (k_rows + tiles - 1) / tiles);
  Matrix neg_c = negate(call.c);
  Phase elim;
  const long long r_words = static_cast<long long>(n * (n + 1) / 2);
  const long long b_words = static_cast<long long>(n * bwork.cols());
  int owner = 0;
  for (std::size_t r0 = 0; r0 < k_rows; r0 += rb, ++owner) {
    const std::size_t r1 = std::min(k_rows, r0 + rb);
    GridTask t;
    detail::lower_eliminate_rows(t.prog, "res", packed, bwork, neg_c, call.d, r0, r1);
    t.reads.push_back({"RPACK", r_words});
    t.reads.push_back({"BPRIME", b_words});
    t.reads.push_back({"C:" + std::to_string(r0),
                       static_cast<long long>((r1 - r0) * n)});
    t.reads.push_back({"D:" + std::to_string(r0),
                       static_cast<long long>((r1 - r0) * call.d.cols())});
    t.writes.push_back({"RES:" + std::to_string(r0),
                        static_cast<long long>((r1 - r0) * call.d.cols())});
    t.preferred_tile = owner;
    elim.push_back(std::move(t));
  }
  phases.push_back(std::move(elim));
  return phases;
}

// Generic fallback: each routine DAG of the call is one task, sequential
// phases (no decomposition; limited grid parallelism by construction).
std::vector<Phase> sequential_phases(const KernelCall& call) {
  Workload w{call};
  Program prog = lower(w);
  std::vector<Phase> phases;
  std::size_t idx = 0;
  for (InstrDag& d : prog.dags) {
    GridTask t;
    t.prog.dags.push_back(std::move(d));
    const std::string name = "dag:" + std::to_string(idx++);
    t.reads.push_back({name + ":in", load_words(t.prog)});
    t.writes.push_back({name + ":out", store_words(t.prog)});
    Phase ph;
    ph.push_back(std::move(t));
    phases.push_back(std::move(ph));
  }
  return phases;
}

std::vector<Phase> build_phases(const Workload& workload, const GridConfig& grid,
                                const SimConfig& cfg) {
  if (workload.empty()) return {};
  if (workload.size() > 1) {
    // Independent job list: load/compute/store rounds of one job per tile.
    const std::size_t tiles = static_cast<std::size_t>(grid.compute_tiles());
    std::vector<Phase> phases;
    std::size_t ci = 0;
    for (const KernelCall& call : workload) {
      if (ci % tiles == 0) phases.emplace_back();
      GridTask t;
      Workload w{call};
      t.prog = lower(w);
      const std::string name = "job:" + std::to_string(ci++);
      t.reads.push_back({name + ":in", load_words(t.prog)});
      t.writes.push_back({name + ":out", store_words(t.prog)});
      phases.back().push_back(std::move(t));
    }
    return phases;
  }
  const KernelCall& call = workload.front();
  if (const auto* g = std::get_if<GemmCall>(&call)) {
    std::vector<Phase> phases;
    phases.push_back(gemm_block_phase(*g, grid, cfg.rdp_pe.registers));
    return phases;
  }
  if (const auto* m = std::get_if<MfaCall>(&call)) return mfa_phases(*m, grid);
  return sequential_phases(call);
}

struct TilePos {
  int r, c;
};

TilePos compute_tile_pos(const GridConfig& g, int tile) {
  const int ccols = (g.placement == MemPlacement::LastColumn) ? g.cols - 1 : g.cols;
  return {tile / ccols, tile % ccols};
}

}  // namespace

BlockMap partition_blocks(std::size_t n, const GridConfig& grid, int registers) {
  const int k = grid.rows;
  if (n < static_cast<std::size_t>(k))
    throw DimensionError("partition_blocks: n (" + std::to_string(n) +
                         ") < tile-array side (" + std::to_string(k) + ")");
  BlockMap map;
  map.k = k;
  map.sub_dim = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::sqrt(static_cast<double>(registers) / 3.0)));
  const std::size_t base = n / k, rem = n % k;
  std::vector<std::size_t> sizes(k, base), starts(k, 0);
  for (std::size_t i = 0; i < rem; ++i) ++sizes[i];
  for (int i = 1; i < k; ++i) starts[i] = starts[i - 1] + sizes[i - 1];
  const int tiles = grid.compute_tiles();
  int next = 0;
  for (int bi = 0; bi < k; ++bi)
    for (int bj = 0; bj < k; ++bj) {
      BlockAssignment b;
      b.bi = bi;
      b.bj = bj;
      b.row0 = starts[bi];
      b.col0 = starts[bj];
      b.rows = sizes[bi];
      b.cols = sizes[bj];
      b.tile = next % tiles;
      ++next;
      map.blocks.push_back(b);
    }
  return map;
}

CycleReport simulate_grid(const Workload& workload, const GridConfig& grid,
                          const SimConfig& cfg, Mode mode) {
  const int tiles = grid.compute_tiles();
  if (tiles <= 0) throw ConfigError("simulate_grid: no compute tiles");
  const PeConfig& pe = (mode == Mode::Base) ? cfg.base_pe : cfg.rdp_pe;
  const std::vector<MacroOpPattern> pats = cfg.pattern_set();

  std::vector<Phase> phases = build_phases(workload, grid, cfg);

  CycleReport rep;
  rep.peak_gflops = peak_gflops(pe) * tiles;
  rep.tiles.resize(tiles);
  for (int t = 0; t < tiles; ++t) rep.tiles[t].tile = t;
  if (phases.empty()) return rep;

  // Block residency per tile and home map (written blocks live with their
  // writer on per-tile-memory grids, otherwise in a hashed memory tile).
  const int mem_locs =
      (grid.placement == MemPlacement::LastColumn) ? grid.rows : grid.rows * grid.cols;
  std::map<std::string, int> home;       // block -> memory location index
  std::map<std::string, int> version;    // block -> write version
  std::vector<std::map<std::string, int>> resident(tiles);  // tile -> block version

  auto hops_to_home = [&](int tile, const std::string& block) {
    TilePos p = compute_tile_pos(grid, tile);
    const int h = home.at(block);
    if (grid.placement == MemPlacement::LastColumn)
      return std::abs(p.r - h) + (grid.cols - 1 - p.c);
    TilePos hp{h / grid.cols, h % grid.cols};
    return std::abs(p.r - hp.r) + std::abs(p.c - hp.c);
  };
  auto ensure_home = [&](const std::string& block) {
    if (!home.count(block))
      home[block] = static_cast<int>(fnv1a(block) % static_cast<std::uint64_t>(mem_locs));
  };

  long long total_cycles = 0;
  long long total_flops = 0;
  long long total_stalls = 0, total_fills = 0;
  long long noc_words = 0;

  for (Phase& phase : phases) {
    // Owner-computes placement when a task names its tile; unpinned tasks
    // go to the tile with the least queued work.
    std::vector<std::vector<GridTask*>> by_tile(tiles);
    std::vector<long long> queued(tiles, 0);
    for (std::size_t i = 0; i < phase.size(); ++i) {
      const int pref = phase[i].preferred_tile;
      if (pref < 0) continue;
      by_tile[pref % tiles].push_back(&phase[i]);
      queued[pref % tiles] += phase[i].prog.flops();
    }
    for (std::size_t i = 0; i < phase.size(); ++i) {
      if (phase[i].preferred_tile >= 0) continue;
      int best = 0;
      for (int t = 1; t < tiles; ++t)
        if (queued[t] < queued[best]) best = t;
      by_tile[best].push_back(&phase[i]);
      queued[best] += phase[i].prog.flops();
    }

    std::vector<long long> tile_time(tiles, 0);
    for (int t = 0; t < tiles; ++t) {
      if (by_tile[t].empty()) continue;
      // Gather the tile's DAGs for this phase; hw/sw fuse + interleave.
      std::vector<InstrDag> dags;
      long long flops = 0;
      for (GridTask* task : by_tile[t])
        for (InstrDag& d : task->prog.dags) {
          InstrDag use = d;
          if (mode != Mode::Base) {
            use = fuse(use, pats);
            use = reorder_by_groups(use, cfg.fuse_window_scale);
          }
          flops += use.flops();
          dags.push_back(std::move(use));
        }
      ScheduleResult sr = (mode == Mode::Sw) ? overlap(dags, pe, cfg.overlap_depth)
                                             : schedule_sequence(dags, pe);
      long long transfer = 0;
      for (GridTask* task : by_tile[t]) {
        for (auto& [block, words] : task->reads) {
          ensure_home(block);
          const int ver = version.count(block) ? version[block] : 0;
          auto it = resident[t].find(block);
          if (it != resident[t].end() && it->second == ver) continue;  // cached
          const int hops = hops_to_home(t, block);
          if (hops > 0 && grid.hop_latency > 0) {
            transfer += static_cast<long long>(hops) * grid.hop_latency + words;
            noc_words += words;
          }
          resident[t][block] = ver;
        }
        for (auto& [block, words] : task->writes) {
          int dest;
          if (grid.placement == MemPlacement::PerTileMemoryPe) {
            dest = t;  // own global segment
          } else {
            ensure_home(block);
            dest = home[block];
          }
          home[block] = dest;
          version[block] = version.count(block) ? version[block] + 1 : 1;
          resident[t][block] = version[block];
          const int hops = (grid.placement == MemPlacement::PerTileMemoryPe)
                               ? 0
                               : hops_to_home(t, block);
          if (hops > 0 && grid.hop_latency > 0) {
            transfer += static_cast<long long>(hops) * grid.hop_latency + words;
            noc_words += words;
          }
        }
      }
      tile_time[t] = sr.report.cycles + transfer;
      rep.tiles[t].compute_cycles += sr.report.cycles;
      rep.tiles[t].transfer_cycles += transfer;
      rep.tiles[t].flops += flops;
      total_flops += flops;
      total_stalls += sr.report.stall_cycles;
      total_fills += sr.report.filled_stalls;
    }
    total_cycles += *std::max_element(tile_time.begin(), tile_time.end());
  }

  rep.cycles = total_cycles;
  rep.flops = total_flops;
  rep.stall_cycles = total_stalls;
  rep.filled_stalls = total_fills;
  rep.noc_transfers = noc_words;
  const double peak_per_cycle = static_cast<double>(pe.multipliers + pe.adders) * tiles;
  if (total_cycles > 0) {
    rep.utilization = static_cast<double>(total_flops) /
                      (static_cast<double>(total_cycles) * peak_per_cycle);
    rep.achieved_gflops = static_cast<double>(total_flops) * pe.clock_hz /
                          static_cast<double>(total_cycles) / 1e9;
  }
  return rep;
}

}  // namespace mfakf::cgra
