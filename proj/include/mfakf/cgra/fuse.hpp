// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "mfakf/cgra/dag.hpp"

namespace mfakf::cgra {

/// Greedy macro-op matching in topological order: product-sum groups become
/// dot4/mac2/sum4 configurations, independent multiply-accumulate lanes
/// become axpy4/reflector_apply. Values change only by adder-tree
/// reassociation; flop counts are preserved exactly (checked). With no
/// matchable pattern the DAG is returned unchanged.
InstrDag fuse(const InstrDag& dag, const std::vector<MacroOpPattern>& patterns);

/// Rebuilds program order by interleaving independent element chains so the
/// in-order core can overlap macro latencies; `window_scale` controls how
/// many chains are in flight (window ~ scale / ops-per-chain).
InstrDag reorder_by_groups(const InstrDag& dag, int window_scale);

}  // namespace mfakf::cgra
