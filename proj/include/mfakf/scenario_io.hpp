// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "mfakf/kalman.hpp"

namespace mfakf::kalman {

/// Loads a scenario from JSON. Two layouts are accepted: a "preset" object
/// ({"kind":"constant_velocity","dt":..,"q_intensity":..,"r_diag":..,
/// "seed":..,"steps":..}) or explicit model matrices given inline as arrays
/// of rows or as matrix-file paths relative to the JSON file.
Scenario load_scenario(const std::string& path);

/// Writes the per-step trace CSV: step, x components, trace(P), innovation
/// norm. Deterministic formatting (%.17g).
void write_trace_csv(const ScenarioTrace& trace, const std::string& path);

}  // namespace mfakf::kalman
