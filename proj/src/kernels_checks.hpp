// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "mfakf/error.hpp"
#include "mfakf/matrix.hpp"

namespace mfakf::dense::detail {

inline void check_gemm(const Matrix& a, const Matrix& b, const Matrix& c) {
  if (a.cols() != b.rows())
    throw DimensionError("gemm: a.cols (" + std::to_string(a.cols()) +
                         ") != b.rows (" + std::to_string(b.rows()) + ")");
  if (c.rows() != a.rows())
    throw DimensionError("gemm: c.rows (" + std::to_string(c.rows()) +
                         ") != a.rows (" + std::to_string(a.rows()) + ")");
  if (c.cols() != b.cols())
    throw DimensionError("gemm: c.cols (" + std::to_string(c.cols()) +
                         ") != b.cols (" + std::to_string(b.cols()) + ")");
}

inline void check_block(std::size_t block) {
  if (block == 0) throw DimensionError("blocked kernel: block must be >= 1");
}

inline void check_qr_shape(const Matrix& a) {
  if (a.rows() < a.cols())
    throw DimensionError("geqr2/geqrf: rows (" + std::to_string(a.rows()) +
                         ") < cols (" + std::to_string(a.cols()) +
                         ") not supported");
}

inline void check_square(const Matrix& a, const char* who) {
  if (a.rows() != a.cols())
    throw DimensionError(std::string(who) + ": matrix must be square, got " +
                         std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
}

}  // namespace mfakf::dense::detail
