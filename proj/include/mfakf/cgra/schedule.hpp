// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "mfakf/cgra/config.hpp"
#include "mfakf/cgra/dag.hpp"
#include "mfakf/cgra/lower.hpp"

namespace mfakf::cgra {

/// Timed schedule: per-DAG, per-node issue cycles plus the cycle report.
struct ScheduleResult {
  CycleReport report;
  std::vector<std::vector<long long>> issue_cycles;
};

/// In-order list schedule of one routine DAG on a PE: one arith issue and
/// one memory issue per cycle from the front of the program queue, operands
/// gated by producer latency, units fully pipelined. Stall cycles are cycles
/// where work remains but nothing could issue.
ScheduleResult schedule(const InstrDag& dag, const PeConfig& cfg);

/// Routine DAGs executed back to back through one in-order queue.
ScheduleResult schedule_sequence(const std::vector<InstrDag>& dags, const PeConfig& cfg);

/// Stall-filling merge: up to `depth` routine queues are live at once; when
/// the oldest queue's front is blocked, ready instructions from younger
/// queues fill the slot. Per-routine program order is preserved, values are
/// untouched, and each DAG is re-validated (dependence check).
ScheduleResult overlap(const std::vector<InstrDag>& dags, const PeConfig& cfg, int depth);

/// Lowers the workload, applies the mode's pipeline (base: none; hw: fuse +
/// chain interleave; sw: hw + overlap), and returns the cycle report.
CycleReport simulate_pe(const Workload& workload, const SimConfig& cfg, Mode mode);

/// The lowered (and for hw/sw fused+reordered) program a simulation runs;
/// exposed so tests can replay values and check functional fidelity.
Program prepare_program(const Workload& workload, const SimConfig& cfg, Mode mode);

}  // namespace mfakf::cgra
