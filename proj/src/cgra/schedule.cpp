// SPDX-License-Identifier: Apache-2.0
#include "mfakf/cgra/schedule.hpp"

#include <algorithm>
#include <climits>

#include "mfakf/cgra/fuse.hpp"
#include "mfakf/error.hpp"

namespace mfakf::cgra {

namespace {

int node_latency(const InstrDag& dag, const Node& n, const PeConfig& cfg) {
  switch (n.cls) {
    case OpClass::Load: return cfg.load_latency;
    case OpClass::Store: return cfg.store_latency;
    case OpClass::Mul: return cfg.mul_latency;
    case OpClass::Add: return cfg.add_latency;
    case OpClass::Macro: return dag.patterns[dag.macros[n.macro_id].pattern].result_latency(cfg);
  }
  return 1;
}

int node_issue_cost(const InstrDag& dag, const Node& n) {
  if (n.cls != OpClass::Macro) return 1;
  const MacroInstance& mi = dag.macros[n.macro_id];
  const MacroOpPattern& p = dag.patterns[mi.pattern];
  if (p.kind == PatternKind::Axpy4 || p.kind == PatternKind::ReflectorApply) {
    // Up to 3 lanes fit the adder stage in one cycle; 4 lanes spill into a
    // second issue cycle.
    const int lanes = static_cast<int>(mi.inputs.size() / 3);
    return lanes > 3 ? 2 : 1;
  }
  return p.issue_cost;
}

bool is_mem(const Node& n) { return n.cls == OpClass::Load || n.cls == OpClass::Store; }

// Multi-queue in-order simulator. `depth` = number of routine queues live at
// once (1 reproduces a single concatenated program).
ScheduleResult run_sim(const std::vector<const InstrDag*>& dags, const PeConfig& cfg,
                       int depth, bool count_fills) {
  for (const InstrDag* d : dags) {
    d->validate();
    for (const MacroInstance& m : d->macros)
      if (!d->patterns[m.pattern].fits(cfg))
        throw ConfigError("schedule: macro '" + d->patterns[m.pattern].name +
                          "' does not fit the configured units");
  }

  struct Q {
    const InstrDag* dag;
    std::size_t front = 0;
    std::uint32_t issued_ahead = 0;  // skid bitmap relative to front
    std::vector<long long> done;     // completion cycle per node
    std::vector<long long> issue;    // issue cycle per node
  };
  std::vector<Q> queues;
  for (const InstrDag* d : dags) {
    Q q;
    q.dag = d;
    q.done.assign(d->nodes.size(), 0);
    q.issue.assign(d->nodes.size(), -1);
    queues.push_back(std::move(q));
  }
  // Decoupled access/execute skid: memory ops may wait in their queue while
  // arithmetic a few slots behind them issues (and vice versa); each class
  // stays in order with itself.
  const std::size_t skid = static_cast<std::size_t>(std::clamp(cfg.lsu_skid, 1, 31));

  ScheduleResult res;
  long long cycle = 0;
  long long arith_free_at = 0;  // datapath accepts a new arith op at >= this
  long long last_completion = 0;
  long long stall_cycles = 0, filled_stalls = 0;
  std::size_t oldest = 0;

  constexpr long long kNotIssued = LLONG_MAX / 2;
  auto producer_done = [&](Q& q, std::int32_t in) {
    return q.issue[in] >= 0 ? q.done[in] : kNotIssued;
  };
  auto ready_at = [&](Q& q, const Node& n) -> long long {
    long long t = 0;
    if (n.cls == OpClass::Macro) {
      for (std::int32_t in : q.dag->macros[n.macro_id].inputs)
        t = std::max(t, producer_done(q, in));
    } else {
      if (n.in0 >= 0) t = std::max(t, producer_done(q, n.in0));
      if (n.in1 >= 0) t = std::max(t, producer_done(q, n.in1));
    }
    return t;
  };

  while (true) {
    while (oldest < queues.size() && queues[oldest].front >= queues[oldest].dag->nodes.size())
      ++oldest;
    if (oldest >= queues.size()) break;
    const std::size_t window_end = std::min(queues.size(), oldest + static_cast<std::size_t>(std::max(1, depth)));

    int arith_used = 0, load_used = 0, store_used = 0;
    bool oldest_issued = false;
    int younger_issues = 0;
    bool issued_any = false;
    long long next_event = LLONG_MAX;

    for (std::size_t qi = oldest; qi < window_end; ++qi) {
      Q& q = queues[qi];
      const std::size_t qn = q.dag->nodes.size();
      bool load_stop = false, store_stop = false, arith_stop = false;
      for (std::size_t pos = q.front; pos < std::min(qn, q.front + skid); ++pos) {
        if (q.issued_ahead & (1u << (pos - q.front))) continue;
        const Node& n = q.dag->nodes[pos];
        const bool mem = is_mem(n);
        bool* stop = mem ? (n.cls == OpClass::Load ? &load_stop : &store_stop)
                         : &arith_stop;
        if (*stop) continue;
        const long long rt = ready_at(q, n);
        bool blocked = false;
        if (rt > cycle) {
          if (rt < kNotIssued) next_event = std::min(next_event, rt);
          blocked = true;
        } else if (mem) {
          int& used = (n.cls == OpClass::Load) ? load_used : store_used;
          if (used >= 1)
            blocked = true;
          else
            ++used;
        } else {
          if (arith_used >= cfg.issue_width) {
            blocked = true;
          } else if (arith_free_at > cycle) {
            next_event = std::min(next_event, arith_free_at);
            blocked = true;
          } else {
            ++arith_used;
            arith_free_at = cycle + node_issue_cost(*q.dag, n);
          }
        }
        if (blocked) {
          *stop = true;
          if (load_stop && store_stop && arith_stop) break;
          continue;
        }
        const long long completion = cycle + node_latency(*q.dag, n, cfg);
        q.done[pos] = completion;
        q.issue[pos] = cycle;
        q.issued_ahead |= (1u << (pos - q.front));
        last_completion = std::max(last_completion, completion);
        issued_any = true;
        if (qi == oldest)
          oldest_issued = true;
        else
          ++younger_issues;
      }
      while (q.front < qn && (q.issued_ahead & 1u)) {
        q.issued_ahead >>= 1;
        ++q.front;
      }
    }

    if (!oldest_issued && younger_issues > 0 && count_fills) filled_stalls += younger_issues;

    if (!issued_any) {
      // Nothing could go: skip to the next interesting cycle in bulk.
      long long skip_to = (next_event == LLONG_MAX) ? cycle + 1 : next_event;
      if (skip_to <= cycle) skip_to = cycle + 1;
      stall_cycles += skip_to - cycle;
      cycle = skip_to;
    } else {
      ++cycle;
    }
  }

  res.report.cycles = last_completion;
  long long flops = 0;
  for (const InstrDag* d : dags) flops += d->flops();
  res.report.flops = flops;
  res.report.stall_cycles = stall_cycles;
  res.report.filled_stalls = filled_stalls;
  const double peak_per_cycle = cfg.multipliers + cfg.adders;
  res.report.peak_gflops = peak_gflops(cfg);
  if (last_completion > 0) {
    res.report.utilization =
        static_cast<double>(flops) / (static_cast<double>(last_completion) * peak_per_cycle);
    res.report.achieved_gflops =
        static_cast<double>(flops) * cfg.clock_hz / static_cast<double>(last_completion) / 1e9;
  }
  for (Q& q : queues) res.issue_cycles.push_back(std::move(q.issue));
  return res;
}

std::vector<const InstrDag*> ptrs(const std::vector<InstrDag>& dags) {
  std::vector<const InstrDag*> p;
  p.reserve(dags.size());
  for (const InstrDag& d : dags) p.push_back(&d);
  return p;
}

}  // namespace

ScheduleResult schedule(const InstrDag& dag, const PeConfig& cfg) {
  return run_sim({&dag}, cfg, 1, false);
}

ScheduleResult schedule_sequence(const std::vector<InstrDag>& dags, const PeConfig& cfg) {
  return run_sim(ptrs(dags), cfg, 1, false);
}

ScheduleResult overlap(const std::vector<InstrDag>& dags, const PeConfig& cfg, int depth) {
  return run_sim(ptrs(dags), cfg, depth, true);
}

Program prepare_program(const Workload& workload, const SimConfig& cfg, Mode mode) {
  Program prog = lower(workload);
  if (mode == Mode::Base) return prog;
  const std::vector<MacroOpPattern> pats = cfg.pattern_set();
  const long long flops_before = prog.flops();
  for (InstrDag& d : prog.dags) {
    d = fuse(d, pats);
    d = reorder_by_groups(d, cfg.fuse_window_scale);
  }
  if (prog.flops() != flops_before)
    throw Error("prepare_program: fusion changed the flop count");
  return prog;
}

CycleReport simulate_pe(const Workload& workload, const SimConfig& cfg, Mode mode) {
  Program prog = prepare_program(workload, cfg, mode);
  const PeConfig& pe = (mode == Mode::Base) ? cfg.base_pe : cfg.rdp_pe;
  if (prog.dags.empty()) {
    CycleReport r;
    r.peak_gflops = peak_gflops(pe);
    return r;  // empty workload: 0 cycles, utilization reported as 0
  }
  ScheduleResult res = (mode == Mode::Sw) ? overlap(prog.dags, pe, cfg.overlap_depth)
                                          : schedule_sequence(prog.dags, pe);
  return res.report;
}

}  // namespace mfakf::cgra
