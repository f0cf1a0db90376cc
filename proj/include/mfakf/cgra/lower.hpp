// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mfakf/cgra/dag.hpp"
#include "mfakf/kalman.hpp"
#include "mfakf/matrix.hpp"

namespace mfakf::cgra {

// Kernel invocations with concrete operand values. Lowering replays the
// reference algorithms on these values and records every scalar operation;
// data-dependent control flow (zero tails, skipped multipliers) follows the
// actual data, so the DAG is an exact trace.

struct GemmCall {
  Matrix a, b;
  std::optional<Matrix> addend;  // result = a*b, or addend +/- a*b
  bool subtract = false;         // true: addend - a*b
};
struct Geqr2Call {
  Matrix a;
};
struct GeqrfCall {
  Matrix a;
  std::size_t block = 8;
};
struct Getrf2Call {
  Matrix a;  // no-pivot elimination path
};
struct TrsmCall {
  Matrix r, b;
};
struct MfaCall {
  Matrix a, b, c, d;
  std::size_t block = 8;
};
struct KfStepCall {
  kalman::KalmanModel model;
  kalman::KalmanState state;
  Matrix z;
};

using KernelCall = std::variant<GemmCall, Geqr2Call, GeqrfCall, Getrf2Call, TrsmCall,
                                MfaCall, KfStepCall>;
using Workload = std::vector<KernelCall>;

/// Lowers a workload into routine-tagged instruction DAGs. Each routine
/// loads its operands and stores its results, so the DAGs are structurally
/// independent of each other (values carry the actual data flow).
Program lower(const Workload& workload);

Workload make_gemm_workload(std::size_t n, std::uint64_t seed);
Workload make_mfa_workload(std::size_t n, std::uint64_t seed);
/// One predict+update step of the filter schedule, m = n/2 measurements.
Workload make_kf_workload(std::size_t n, std::uint64_t seed);
/// kind: "gemm" | "mfa" | "kf"; anything else raises ConfigError.
Workload make_workload(const std::string& kind, std::size_t n, std::uint64_t seed);

/// Reference results for a workload, computed by the dense kernels and the
/// operation-menu engine; used to check functional fidelity of simulations.
std::vector<Matrix> reference_outputs(const Workload& workload);

}  // namespace mfakf::cgra
