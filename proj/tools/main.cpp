// SPDX-License-Identifier: Apache-2.0
#include "mfakf/cli.hpp"

int main(int argc, char** argv) { return mfakf::cli::run(argc, argv); }
