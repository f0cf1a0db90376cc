// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mfakf/cgra/fuse.hpp"
#include "mfakf/cgra/lower.hpp"
#include "mfakf/cgra/schedule.hpp"
#include "mfakf/kernels.hpp"
#include "support/oracles.hpp"

using namespace mfakf;
using namespace mfakf::cgra;

namespace {

// Hand-built micro-DAG helpers (operand-less nodes are ready at cycle 0).
std::int32_t push_node(InstrDag& d, OpClass cls, ArithFn fn, std::int32_t a = -1,
                       std::int32_t b = -1, double v = 0.0, std::int32_t group = 0) {
  Node n;
  n.cls = cls;
  n.fn = fn;
  n.in0 = a;
  n.in1 = b;
  n.value = v;
  n.group = group;
  d.nodes.push_back(n);
  return static_cast<std::int32_t>(d.nodes.size()) - 1;
}

long long scalar_arith(const InstrDag& d) {
  long long c = 0;
  for (const Node& n : d.nodes)
    if (n.cls == OpClass::Mul || n.cls == OpClass::Add) ++c;
  return c;
}

double rel_diff(const Matrix& got, const Matrix& want) {
  return max_abs_diff(got, want) / (1.0 + want.max_abs());
}

}  // namespace

// ---------------------------------------------------------------------------
// peak rates

TEST_CASE("peak_gflops matches the documented profiles") {
  CHECK(peak_gflops(PeConfig::base()) == 1.4);
  CHECK(peak_gflops(PeConfig::rdp()) == 4.9);
  PeConfig none;
  none.multipliers = 0;
  none.adders = 0;
  CHECK(peak_gflops(none) == 0.0);
}

// ---------------------------------------------------------------------------
// lowering

TEST_CASE("lowered gemm 2x2 has 8 multiplies and 4 adds") {
  Workload w = make_gemm_workload(2, 1);
  Program prog = lower(w);
  CHECK(prog.mul_flops() == 8);
  CHECK(prog.add_flops() == 4);
}

TEST_CASE("dot product of length 1 lowers to one multiply") {
  Rng rng(1);
  GemmCall c{test::random_matrix(rng, 1, 1), test::random_matrix(rng, 1, 1),
             std::nullopt, false};
  Program prog = lower({c});
  CHECK(prog.mul_flops() == 1);
  CHECK(prog.add_flops() == 0);
}

TEST_CASE("geqr2 of a 1x1 matrix is a zero-flop DAG") {
  Program prog = lower({Geqr2Call{Matrix(1, 1, {3.0})}});
  CHECK(prog.flops() == 0);
}

TEST_CASE("lowered gemm flop count matches the analytic count") {
  Rng rng(3);
  for (auto [m, k, p] : {std::array<std::size_t, 3>{3, 5, 2},
                         std::array<std::size_t, 3>{8, 8, 8},
                         std::array<std::size_t, 3>{1, 7, 4}}) {
    GemmCall c{test::random_matrix(rng, m, k), test::random_matrix(rng, k, p),
               std::nullopt, false};
    Program prog = lower({c});
    test::FlopCount fc = test::gemm_flops(m, k, p, false);
    CHECK(prog.mul_flops() == fc.muls);
    CHECK(prog.add_flops() == fc.adds);
  }
}

TEST_CASE("lowered geqr2 and getrf2 flop counts match the recurrence oracles") {
  Rng rng(5);
  Matrix a = test::random_matrix(rng, 6, 4);
  Program prog = lower({Geqr2Call{a}});
  test::FlopCount fc = test::geqr2_flops(a);
  CHECK(prog.mul_flops() == fc.muls);
  CHECK(prog.add_flops() == fc.adds);

  Matrix b = test::random_diag_dominant(rng, 6);
  Program lu = lower({Getrf2Call{b}});
  test::FlopCount lc = test::getrf2_nopivot_flops(6);
  CHECK(lu.mul_flops() == lc.muls);
  CHECK(lu.add_flops() == lc.adds);
}

TEST_CASE("unsupported workload kinds raise") {
  CHECK_THROWS_AS(make_workload("cholesky", 8, 1), ConfigError);
}

TEST_CASE("lowered evaluation reproduces the reference outputs") {
  Rng rng(7);
  // One of each routine.
  Matrix sq = test::random_matrix(rng, 6, 6);
  Matrix dd = test::random_diag_dominant(rng, 6);
  Matrix upper(5, 5);
  for (std::size_t j = 0; j < 5; ++j) {
    for (std::size_t i = 0; i < j; ++i) upper(i, j) = rng.uniform(-1, 1);
    upper(j, j) = 2.0;
  }
  Workload w;
  w.push_back(GemmCall{test::random_matrix(rng, 5, 4), test::random_matrix(rng, 4, 3),
                       std::nullopt, false});
  w.push_back(Geqr2Call{sq});
  w.push_back(GeqrfCall{sq, 3});
  w.push_back(Getrf2Call{dd});
  w.push_back(TrsmCall{upper, test::random_matrix(rng, 5, 2)});
  Program prog = lower(w);
  std::vector<Matrix> refs = reference_outputs(w);
  REQUIRE(refs.size() == 5);
  for (std::size_t i = 0; i < refs.size(); ++i) {
    Matrix got = prog.output_matrix("c" + std::to_string(i) + ":res0");
    CHECK(rel_diff(got, refs[i]) <= 1e-10);
  }
  // re-evaluation reproduces the same values
  evaluate(prog);
  for (std::size_t i = 0; i < refs.size(); ++i) {
    Matrix got = prog.output_matrix("c" + std::to_string(i) + ":res0");
    CHECK(rel_diff(got, refs[i]) <= 1e-10);
  }
}

TEST_CASE("lowered kf step reproduces the reference filter step") {
  Workload w = make_kf_workload(8, 5);
  Program prog = lower(w);
  std::vector<Matrix> refs = reference_outputs(w);
  REQUIRE(refs.size() == 2);
  CHECK(rel_diff(prog.output_matrix("c0:res0"), refs[0]) <= 1e-10);
  CHECK(rel_diff(prog.output_matrix("c0:res1"), refs[1]) <= 1e-10);
}

// ---------------------------------------------------------------------------
// fusion

TEST_CASE("four multiplies feeding a three-add reduction fuse to one dot4") {
  InstrDag d;
  d.tag = "gemm";
  std::vector<std::int32_t> loads, muls;
  for (int i = 0; i < 8; ++i) loads.push_back(push_node(d, OpClass::Load, ArithFn::None,
                                                        -1, -1, double(i + 1)));
  for (int i = 0; i < 4; ++i)
    muls.push_back(push_node(d, OpClass::Mul, ArithFn::Mul, loads[2 * i], loads[2 * i + 1]));
  std::int32_t t1 = push_node(d, OpClass::Add, ArithFn::Add, muls[0], muls[1]);
  std::int32_t t2 = push_node(d, OpClass::Add, ArithFn::Add, muls[2], muls[3]);
  std::int32_t out = push_node(d, OpClass::Add, ArithFn::Add, t1, t2);
  push_node(d, OpClass::Store, ArithFn::None, out);
  evaluate(d);
  const double want = d.nodes[out].value;

  InstrDag f = fuse(d, default_patterns());
  long long macros = 0;
  for (const Node& n : f.nodes)
    if (n.cls == OpClass::Macro) ++macros;
  CHECK(macros == 1);
  CHECK(scalar_arith(f) == 0);
  CHECK(f.flops() == d.flops());
  // value preserved within adder-tree reassociation
  for (const Node& n : f.nodes)
    if (n.cls == OpClass::Store)
      CHECK(std::fabs(n.value - want) <= 1e-10 * (1.0 + std::fabs(want)));
}

TEST_CASE("a DAG with no matchable pattern is returned unchanged") {
  InstrDag d;
  d.tag = "gemm";
  std::int32_t a = push_node(d, OpClass::Load, ArithFn::None, -1, -1, 2.0);
  std::int32_t b = push_node(d, OpClass::Load, ArithFn::None, -1, -1, 3.0);
  std::int32_t s = push_node(d, OpClass::Mul, ArithFn::Div, a, b);
  push_node(d, OpClass::Store, ArithFn::None, s);
  evaluate(d);
  InstrDag f = fuse(d, default_patterns());
  CHECK(f.nodes.size() == d.nodes.size());
  CHECK(f.macros.empty());
}

TEST_CASE("gemm 4x4 fusion absorbs at least 75% of scalar arithmetic") {
  Workload w = make_gemm_workload(4, 9);
  Program prog = lower(w);
  const long long before = scalar_arith(prog.dags[0]);
  InstrDag f = fuse(prog.dags[0], default_patterns());
  const long long after = scalar_arith(f);
  CHECK(after <= before / 4);  // >= 75% absorbed
  CHECK(f.flops() == prog.dags[0].flops());
}

TEST_CASE("fusion with a reduced pattern set still conserves flops and values") {
  Workload w = make_gemm_workload(8, 11);
  Program prog = lower(w);
  std::vector<Matrix> refs = reference_outputs(w);
  for (auto names : {std::vector<std::string>{"dot4"},
                     std::vector<std::string>{"dot4", "mac2"},
                     std::vector<std::string>{"mac2"}}) {
    std::vector<MacroOpPattern> pats;
    for (const std::string& nm : names) pats.push_back(pattern_by_name(nm));
    Program p2 = lower(w);
    p2.dags[0] = fuse(p2.dags[0], pats);
    CHECK(p2.flops() == prog.flops());
    CHECK(rel_diff(p2.output_matrix("c0:res0"), refs[0]) <= 1e-9);
  }
}

TEST_CASE("multiply-accumulate lanes fuse into multi-lane instances") {
  InstrDag d;
  d.tag = "gemm";
  // three independent lanes x_i - s*y_i in one chain group
  std::int32_t s = push_node(d, OpClass::Load, ArithFn::None, -1, -1, 2.0);
  std::vector<std::int32_t> outs;
  for (int l = 0; l < 3; ++l) {
    std::int32_t x = push_node(d, OpClass::Load, ArithFn::None, -1, -1, 10.0 + l);
    std::int32_t y = push_node(d, OpClass::Load, ArithFn::None, -1, -1, 1.0 + l);
    std::int32_t m = push_node(d, OpClass::Mul, ArithFn::Mul, s, y);
    outs.push_back(push_node(d, OpClass::Add, ArithFn::Sub, x, m));
  }
  for (std::int32_t o : outs) push_node(d, OpClass::Store, ArithFn::None, o);
  evaluate(d);
  std::vector<double> want;
  for (std::int32_t o : outs) want.push_back(d.nodes[o].value);

  InstrDag f = fuse(d, default_patterns());
  long long macros = 0;
  for (const Node& n : f.nodes)
    if (n.cls == OpClass::Macro) ++macros;
  CHECK(macros == 1);
  CHECK(f.flops() == d.flops());
  std::size_t si = 0;
  for (const Node& n : f.nodes)
    if (n.cls == OpClass::Store) CHECK(n.value == want.at(si++));  // lanes: exact
}

// ---------------------------------------------------------------------------
// scheduling

TEST_CASE("single multiply: 4 cycles, no stalls") {
  InstrDag d;
  d.tag = "gemm";
  push_node(d, OpClass::Mul, ArithFn::Mul);
  ScheduleResult r = schedule(d, PeConfig::base());
  CHECK(r.report.cycles == 4);
  CHECK(r.report.stall_cycles == 0);
}

TEST_CASE("two dependent adds: 6 cycles with add_latency-1 stalls") {
  InstrDag d;
  d.tag = "gemm";
  std::int32_t a = push_node(d, OpClass::Add, ArithFn::Add);
  push_node(d, OpClass::Add, ArithFn::Add, a, -1);
  ScheduleResult r = schedule(d, PeConfig::base());
  CHECK(r.report.cycles == 6);
  CHECK(r.report.stall_cycles == 2);
}

TEST_CASE("two independent multiplies on one pipelined multiplier: 5 cycles") {
  InstrDag d;
  d.tag = "gemm";
  push_node(d, OpClass::Mul, ArithFn::Mul);
  push_node(d, OpClass::Mul, ArithFn::Mul);
  ScheduleResult r = schedule(d, PeConfig::base());
  CHECK(r.report.cycles == 5);
  CHECK(r.report.stall_cycles == 0);
}

TEST_CASE("schedule rejects macros that do not fit the units") {
  Workload w = make_gemm_workload(4, 1);
  Program prog = lower(w);
  InstrDag f = fuse(prog.dags[0], default_patterns());
  CHECK_THROWS_AS(schedule(f, PeConfig::base()), ConfigError);  // 1 mul, 1 add
  CHECK_NOTHROW(schedule(f, PeConfig::rdp()));
}

TEST_CASE("schedule is deterministic") {
  Workload w = make_kf_workload(8, 3);
  SimConfig cfg;
  CycleReport a = simulate_pe(w, cfg, Mode::Hw);
  CycleReport b = simulate_pe(w, cfg, Mode::Hw);
  CHECK(a.cycles == b.cycles);
  CHECK(a.stall_cycles == b.stall_cycles);
  CHECK(a.utilization == b.utilization);
}

// ---------------------------------------------------------------------------
// overlap

TEST_CASE("stall slots fill with independent single-cycle ops") {
  PeConfig cfg = PeConfig::base();
  cfg.mul_latency = 1;  // secondary ops take a single cycle
  // primary: chain of 6 dependent adds -> 10 stall slots
  InstrDag prim;
  prim.tag = "geqrf";
  std::int32_t prev = push_node(prim, OpClass::Add, ArithFn::Add);
  for (int i = 0; i < 5; ++i) prev = push_node(prim, OpClass::Add, ArithFn::Add, prev, -1);
  ScheduleResult alone = schedule(prim, cfg);
  CHECK(alone.report.cycles == 18);
  CHECK(alone.report.stall_cycles == 10);

  // secondary: 10 independent single-cycle multiplies
  InstrDag sec;
  sec.tag = "gemm";
  for (int i = 0; i < 10; ++i) push_node(sec, OpClass::Mul, ArithFn::Mul);

  ScheduleResult merged = overlap({prim, sec}, cfg, 2);
  CHECK(merged.report.cycles == alone.report.cycles);  // perfect fill
  CHECK(merged.report.filled_stalls == 10);
}

TEST_CASE("empty secondary leaves the primary schedule unchanged") {
  InstrDag prim;
  prim.tag = "gemm";
  std::int32_t prev = push_node(prim, OpClass::Add, ArithFn::Add);
  prev = push_node(prim, OpClass::Add, ArithFn::Add, prev, -1);
  InstrDag empty;
  empty.tag = "gemm";
  ScheduleResult alone = schedule(prim, PeConfig::base());
  ScheduleResult merged = overlap({prim, empty}, PeConfig::base(), 2);
  CHECK(merged.report.cycles == alone.report.cycles);
  CHECK(merged.report.filled_stalls == 0);
}

TEST_CASE("micro-DAGs: 10 stalls, 8 fillable ops, cycles drop by exactly 8") {
  PeConfig cfg = PeConfig::base();
  cfg.load_latency = 1;
  InstrDag prim;
  prim.tag = "geqrf";
  std::int32_t prev = push_node(prim, OpClass::Add, ArithFn::Add);
  for (int i = 0; i < 5; ++i) prev = push_node(prim, OpClass::Add, ArithFn::Add, prev, -1);
  // secondary: 8 independent single-cycle loads (their own port)
  InstrDag sec;
  sec.tag = "gemm";
  for (int i = 0; i < 8; ++i) push_node(sec, OpClass::Load, ArithFn::None);

  long long sum = schedule(prim, cfg).report.cycles + schedule(sec, cfg).report.cycles;
  ScheduleResult merged = overlap({prim, sec}, cfg, 2);
  CHECK(sum - merged.report.cycles == 8);
}

TEST_CASE("overlap dependence check rejects malformed DAGs") {
  InstrDag bad;
  bad.tag = "gemm";
  Node n;
  n.cls = OpClass::Add;
  n.fn = ArithFn::Add;
  n.in0 = 1;  // forward reference
  n.in1 = -1;
  bad.nodes.push_back(n);
  push_node(bad, OpClass::Load, ArithFn::None);
  CHECK_THROWS_AS(overlap({bad}, PeConfig::base(), 2), Error);
}

// ---------------------------------------------------------------------------
// simulate_pe

TEST_CASE("empty workload reports zero cycles and zero utilization") {
  SimConfig cfg;
  CycleReport r = simulate_pe({}, cfg, Mode::Base);
  CHECK(r.cycles == 0);
  CHECK(r.utilization == 0.0);
  CHECK(r.flops == 0);
}

TEST_CASE("mode ordering and flop conservation across workloads") {
  SimConfig cfg;
  for (const auto& [kind, n] : {std::pair<const char*, std::size_t>{"kf", 8},
                                {"kf", 16},
                                {"mfa", 8}}) {
    Workload w = make_workload(kind, n, 1);
    CycleReport b = simulate_pe(w, cfg, Mode::Base);
    CycleReport h = simulate_pe(w, cfg, Mode::Hw);
    CycleReport s = simulate_pe(w, cfg, Mode::Sw);
    CHECK(b.cycles > h.cycles);
    CHECK(h.cycles > s.cycles);
    CHECK(b.flops == h.flops);
    CHECK(h.flops == s.flops);
    CHECK(h.utilization > b.utilization);
    CHECK(s.filled_stalls >= 0);
    CHECK(s.stall_cycles <= h.stall_cycles);
    for (const CycleReport* r : {&b, &h, &s}) {
      CHECK(r->utilization > 0.0);
      CHECK(r->utilization <= 1.0);
    }
  }
}

TEST_CASE("kf step report flops equal the closed-form count of the schedule") {
  // n=4, m=2: sum the per-routine counts of the fixed schedule -- six
  // matrix products, the QR panel of the innovation covariance, the
  // reflector application to the stacked right-hand side, and the
  // back-substitution for the gain.
  const std::size_t n = 4, m = 2;
  Workload w = make_kf_workload(n, 2);
  const auto& call = std::get<KfStepCall>(w.front());

  // Replay the value flow with naive arithmetic to get S for the QR count.
  Matrix t1 = test::naive_matmul(call.state.p, transpose(call.model.f));
  Matrix p_pred = test::naive_gemm(1.0, call.model.f, t1, 1.0, call.model.q);
  Matrix t = test::naive_matmul(p_pred, transpose(call.model.h));
  Matrix s_mat = test::naive_gemm(1.0, call.model.h, t, 1.0, call.model.r);

  test::FlopCount want;
  auto acc = [&](test::FlopCount f) {
    want.muls += f.muls;
    want.adds += f.adds;
  };
  acc(test::gemm_flops(n, n, n, false));  // P F^T
  acc(test::gemm_flops(n, n, n, true));   // F (P F^T) + Q
  acc(test::gemm_flops(n, n, 1, false));  // F x
  acc(test::gemm_flops(n, n, m, false));  // P H^T
  acc(test::gemm_flops(m, n, n, false));  // H P
  acc(test::gemm_flops(m, n, m, true));   // H (P H^T) + R
  acc(test::geqr2_flops(s_mat));          // panel of S
  acc(test::apply_reflectors_flops(m, n));  // reflectors onto T^T
  acc(test::trsm_flops(m, n));            // gain back-substitution
  acc(test::gemm_flops(m, n, 1, true));   // z - H x
  acc(test::gemm_flops(n, m, 1, true));   // x + K y
  acc(test::gemm_flops(n, m, n, true));   // P - K (H P)

  SimConfig cfg;
  CycleReport r = simulate_pe(w, cfg, Mode::Base);
  CHECK(r.flops == want.total());
  CycleReport rh = simulate_pe(w, cfg, Mode::Hw);
  CHECK(rh.flops == want.total());
  CHECK(r.flops == lower(w).flops());
}

TEST_CASE("functional fidelity through fuse and reorder") {
  SimConfig cfg;
  for (const char* kind : {"gemm", "mfa", "kf"}) {
    Workload w = make_workload(kind, 8, 13);
    std::vector<Matrix> refs = reference_outputs(w);
    // unfused program: 1e-10
    Program base = prepare_program(w, cfg, Mode::Base);
    // fused + reordered program: 1e-9
    Program hw = prepare_program(w, cfg, Mode::Hw);
    evaluate(base);
    evaluate(hw);
    std::size_t ri = 0;
    for (std::size_t i = 0; i < base.outputs.size(); ++i) {
      const std::string& nm = base.outputs[i].name;
      if (nm.find(":res") == std::string::npos) continue;
      CHECK(rel_diff(base.output_matrix(nm), refs.at(ri)) <= 1e-10);
      CHECK(rel_diff(hw.output_matrix(nm), refs.at(ri)) <= 1e-9);
      ++ri;
    }
    CHECK(ri == refs.size());
  }
}

TEST_CASE("utilization bands on the default config (kf n=16)") {
  SimConfig cfg;  // built-in defaults match configs/default_sim.json
  Workload w = make_kf_workload(16, 1);
  CycleReport b = simulate_pe(w, cfg, Mode::Base);
  CycleReport h = simulate_pe(w, cfg, Mode::Hw);
  CycleReport s = simulate_pe(w, cfg, Mode::Sw);
  CHECK(b.utilization >= 0.25);
  CHECK(b.utilization <= 0.35);
  CHECK(h.utilization >= 0.45);
  CHECK(h.utilization <= 0.55);
  CHECK(s.utilization >= 0.60);
  CHECK(s.utilization <= 0.70);
}

TEST_CASE("sim config rejects unknown pattern names") {
  CHECK_THROWS_AS(pattern_by_name("fma9"), ConfigError);
  SimConfig cfg;
  cfg.patterns = {"dot4", "bogus"};
  CHECK_THROWS_AS(cfg.pattern_set(), ConfigError);
}
