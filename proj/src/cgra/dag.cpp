// SPDX-License-Identifier: Apache-2.0
#include "mfakf/cgra/dag.hpp"

#include <cmath>

#include "mfakf/error.hpp"

namespace mfakf::cgra {

long long InstrDag::mul_flops() const {
  long long f = 0;
  for (const Node& n : nodes)
    if (n.cls == OpClass::Mul) ++f;
  for (const MacroInstance& m : macros) f += m.mults;
  return f;
}

long long InstrDag::add_flops() const {
  long long f = 0;
  for (const Node& n : nodes)
    if (n.cls == OpClass::Add) ++f;
  for (const MacroInstance& m : macros) f += m.adds;
  return f;
}

long long InstrDag::arith_nodes() const {
  long long c = 0;
  for (const Node& n : nodes)
    if (n.cls == OpClass::Mul || n.cls == OpClass::Add || n.cls == OpClass::Macro) ++c;
  return c;
}

void InstrDag::validate() const {
  const std::int32_t n = static_cast<std::int32_t>(nodes.size());
  for (std::int32_t i = 0; i < n; ++i) {
    const Node& nd = nodes[i];
    if (nd.in0 >= i || nd.in1 >= i)
      throw Error("dag '" + tag + "': operand of node " + std::to_string(i) +
                  " defined after use");
    if (nd.cls == OpClass::Macro) {
      if (nd.macro_id < 0 || nd.macro_id >= static_cast<std::int32_t>(macros.size()))
        throw Error("dag '" + tag + "': bad macro reference");
      for (std::int32_t in : macros[nd.macro_id].inputs)
        if (in >= i) throw Error("dag '" + tag + "': macro operand defined after use");
    }
  }
}

double node_output(const InstrDag& dag, std::int32_t id, std::int8_t port) {
  const Node& n = dag.nodes[id];
  if (n.cls == OpClass::Macro) return dag.macros[n.macro_id].values[port];
  return n.value;
}

namespace {

void eval_macro(InstrDag& dag, MacroInstance& m) {
  const MacroOpPattern& pat = dag.patterns[m.pattern];
  auto in = [&](std::size_t i) { return node_output(dag, m.inputs[i], m.in_ports[i]); };
  switch (pat.kind) {
    case PatternKind::Dot4: {
      double p0 = in(0) * in(1), p1 = in(2) * in(3);
      double p2 = in(4) * in(5), p3 = in(6) * in(7);
      m.values = {(p0 + p1) + (p2 + p3)};
      break;
    }
    case PatternKind::Mac2: {
      double p0 = in(1) * in(2), p1 = in(3) * in(4);
      m.values = {in(0) + (p0 + p1)};
      break;
    }
    case PatternKind::Sum4:
      m.values = {(in(0) + in(1)) + (in(2) + in(3))};
      break;
    case PatternKind::Axpy4:
    case PatternKind::ReflectorApply: {
      m.values.assign(m.inputs.size() / 3, 0.0);
      for (std::size_t l = 0; l < m.values.size(); ++l) {
        double p = in(3 * l + 1) * in(3 * l + 2);
        m.values[l] = (pat.kind == PatternKind::Axpy4) ? in(3 * l) + p : in(3 * l) - p;
      }
      break;
    }
  }
}

}  // namespace

void evaluate(InstrDag& dag) {
  for (std::size_t i = 0; i < dag.nodes.size(); ++i) {
    Node& n = dag.nodes[i];
    auto v0 = [&] { return node_output(dag, n.in0, n.port0); };
    auto v1 = [&] { return node_output(dag, n.in1, n.port1); };
    switch (n.cls) {
      case OpClass::Load:
        break;  // value is the fetched operand, set at build time
      case OpClass::Store:
        n.value = v0();
        break;
      case OpClass::Mul:
        n.value = (n.fn == ArithFn::Mul)   ? v0() * v1()
                  : (n.fn == ArithFn::Div) ? v0() / v1()
                                           : std::sqrt(v0());
        break;
      case OpClass::Add:
        n.value = (n.fn == ArithFn::Add) ? v0() + v1() : v0() - v1();
        break;
      case OpClass::Macro:
        eval_macro(dag, dag.macros[n.macro_id]);
        break;
    }
  }
}

long long Program::flops() const {
  long long f = 0;
  for (const InstrDag& d : dags) f += d.flops();
  return f;
}

long long Program::arith_nodes() const {
  long long c = 0;
  for (const InstrDag& d : dags) c += d.arith_nodes();
  return c;
}

long long Program::mul_flops() const {
  long long f = 0;
  for (const InstrDag& d : dags) f += d.mul_flops();
  return f;
}

long long Program::add_flops() const {
  long long f = 0;
  for (const InstrDag& d : dags) f += d.add_flops();
  return f;
}

Matrix Program::output_matrix(std::size_t idx) const {
  const OutputDesc& od = outputs.at(idx);
  std::vector<double> vals(od.rows * od.cols, 0.0);
  for (const InstrDag& d : dags)
    for (const Node& n : d.nodes)
      if (n.cls == OpClass::Store && n.store_slot >= 0) {
        const std::size_t slot = static_cast<std::size_t>(n.store_slot);
        if (slot >= od.first_slot && slot < od.first_slot + vals.size())
          vals[slot - od.first_slot] = n.value;
      }
  return Matrix(od.rows, od.cols, std::move(vals));
}

Matrix Program::output_matrix(const std::string& name) const {
  for (std::size_t i = 0; i < outputs.size(); ++i)
    if (outputs[i].name == name) return output_matrix(i);
  throw Error("program: no output named '" + name + "'");
}

void evaluate(Program& prog) {
  for (InstrDag& d : prog.dags) evaluate(d);
}

}  // namespace mfakf::cgra
