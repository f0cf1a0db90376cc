// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mfakf/cgra/config.hpp"
#include "mfakf/matrix.hpp"

namespace mfakf::cgra {

/// Issue class of an instruction: memory ops go to the load/store port,
/// Mul covers the multiplier-class scalars (mul, div, sqrt), Add the
/// adder-class scalars (add, sub), Macro a fused datapath configuration.
enum class OpClass : std::uint8_t { Load, Store, Mul, Add, Macro };

enum class ArithFn : std::uint8_t { None, Mul, Div, Sqrt, Add, Sub };

struct Node {
  std::int32_t in0 = -1;
  std::int32_t in1 = -1;
  std::int8_t port0 = 0;  // output port of the producer (macros can have several)
  std::int8_t port1 = 0;
  OpClass cls = OpClass::Load;
  ArithFn fn = ArithFn::None;
  std::int32_t group = 0;     // output-element chain this node belongs to
  std::int32_t macro_id = -1;
  std::int32_t store_slot = -1;
  double value = 0.0;
};

/// A fused macro operation instance; `values` holds one entry per output
/// port (multi-lane patterns produce several, and may carry 2..4 lanes).
struct MacroInstance {
  std::int32_t pattern = 0;  // index into InstrDag::patterns
  std::vector<std::int32_t> inputs;
  std::vector<std::int8_t> in_ports;
  std::vector<double> values;
  std::int16_t mults = 0;  // scalar ops absorbed by this instance
  std::int16_t adds = 0;
};

/// One routine's instruction DAG in program (topological) order: every
/// operand id is smaller than its consumer's id.
struct InstrDag {
  std::string tag;  // "gemm" | "geqrf" | "getrf"
  std::vector<Node> nodes;
  std::vector<MacroInstance> macros;
  std::vector<MacroOpPattern> patterns;  // referenced by macros

  long long mul_flops() const;
  long long add_flops() const;
  long long flops() const { return mul_flops() + add_flops(); }
  long long arith_nodes() const;  // scalar arith + macro count
  void validate() const;          // throws Error on a dependence violation
};

double node_output(const InstrDag& dag, std::int32_t id, std::int8_t port);

/// Recomputes every node and macro value in id order (pure replay of the
/// recorded computation, macro semantics included).
void evaluate(InstrDag& dag);

/// A lowered workload: an ordered list of routine DAGs plus the registry of
/// result matrices (gathered from store slots).
struct Program {
  struct OutputDesc {
    std::string name;
    std::size_t rows = 0, cols = 0;
    std::size_t first_slot = 0;
  };
  std::vector<InstrDag> dags;
  std::vector<OutputDesc> outputs;
  std::size_t total_slots = 0;

  long long flops() const;
  long long arith_nodes() const;
  long long mul_flops() const;
  long long add_flops() const;
  /// Gathers output `idx` from the current store-node values.
  Matrix output_matrix(std::size_t idx) const;
  Matrix output_matrix(const std::string& name) const;
};

void evaluate(Program& prog);

}  // namespace mfakf::cgra
