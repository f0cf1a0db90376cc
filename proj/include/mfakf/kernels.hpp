// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "mfakf/matrix.hpp"

namespace mfakf::dense {

/// Householder QR in LAPACK packing: R in the upper triangle, reflector
/// tails below the diagonal (implicit unit leading element), tau per column.
struct QrFactors {
  Matrix packed;
  std::vector<double> tau;
};

/// LU in LAPACK packing: U in the upper triangle (including diagonal),
/// unit-lower L strictly below. perm, when present, is the final row
/// permutation: row i of P*A is row perm[i] of A.
struct LuFactors {
  Matrix packed;
  std::optional<std::vector<std::size_t>> perm;
};

// Smallest pivot / triangular diagonal magnitude accepted by the
// elimination kernels before they raise SingularError.
inline constexpr double kSingularPivot = 1e-300;

// alpha*a*b + beta*c with a fixed k-ascending accumulation per element;
// repeated calls are bit-identical regardless of thread count.
Matrix gemm(double alpha, const Matrix& a, const Matrix& b, double beta, const Matrix& c);
Matrix matmul(const Matrix& a, const Matrix& b);  // alpha=1, beta=0
Matrix gemm_blocked(double alpha, const Matrix& a, const Matrix& b, double beta,
                    const Matrix& c, std::size_t block);

// Unblocked Householder QR (rows >= cols). Sign convention: the R diagonal
// takes -sign(leading entry of the column subproblem); a zero subdiagonal
// yields tau = 0 and no reflection.
QrFactors geqr2(const Matrix& a);
// Blocked variant: panel reflectors, then the trailing matrix is updated by
// multiplying with the accumulated reflector product via gemm.
QrFactors geqrf(const Matrix& a, std::size_t block);

// LU factorization of a square matrix; pivot=false matches the
// elimination-only path (raises SingularError on a tiny pivot).
LuFactors getrf2(const Matrix& a, bool pivot);
LuFactors getrf(const Matrix& a, bool pivot, std::size_t block);

// Solve r*X = b for upper-triangular r (only the upper triangle of r is
// referenced).
Matrix trsm_upper(const Matrix& r, const Matrix& b);

// Factor application helpers shared by the Schur-complement engine,
// the solver oracle, and the test suites.
Matrix apply_q_transpose(const QrFactors& f, const Matrix& b);  // Q^T * b
Matrix form_q(const QrFactors& f);                              // explicit m x m Q
Matrix extract_r(const QrFactors& f);
Matrix extract_l(const LuFactors& f);
Matrix extract_u(const LuFactors& f);
Matrix permute_rows(const std::vector<std::size_t>& perm, const Matrix& b);
Matrix lu_solve(const LuFactors& f, const Matrix& b);
// Pivoted-LU linear solve; the reference route used as independent oracle.
Matrix solve(const Matrix& a, const Matrix& b);

/// Serial reference implementations, kept alongside the OpenMP kernels for
/// testing and benchmarking; results are bit-identical by construction.
namespace serial {
Matrix gemm(double alpha, const Matrix& a, const Matrix& b, double beta, const Matrix& c);
Matrix gemm_blocked(double alpha, const Matrix& a, const Matrix& b, double beta,
                    const Matrix& c, std::size_t block);
QrFactors geqr2(const Matrix& a);
QrFactors geqrf(const Matrix& a, std::size_t block);
LuFactors getrf2(const Matrix& a, bool pivot);
LuFactors getrf(const Matrix& a, bool pivot, std::size_t block);
Matrix trsm_upper(const Matrix& r, const Matrix& b);
}  // namespace serial

}  // namespace mfakf::dense
