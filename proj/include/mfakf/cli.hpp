// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace mfakf::cli {

/// Entry point behind the `mfakf` binary. Exit codes: 0 success,
/// 1 numerical failure (singularity), 2 I/O, config or usage failure.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace mfakf::cli
