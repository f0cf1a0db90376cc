// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "mfakf/matrix.hpp"

namespace mfakf::faddeeva {

/// The 2x2 block operand [[A, B], [-C, D]]. The constructor receives C
/// un-negated and stores -C. A must be square.
class CompoundMatrix {
public:
  CompoundMatrix(Matrix a, Matrix b, Matrix neg_c, Matrix d);

  const Matrix& a() const { return a_; }
  const Matrix& b() const { return b_; }
  const Matrix& neg_c() const { return neg_c_; }
  const Matrix& d() const { return d_; }

  std::size_t n() const { return a_.rows(); }  // A is n x n
  std::size_t p() const { return b_.cols(); }
  std::size_t k() const { return neg_c_.rows(); }

private:
  Matrix a_, b_, neg_c_, d_;
};

struct SchurResult {
  Matrix value;             // k x p, D + C*inv(A)*B
  double r_diag_min_abs;    // smallest |R_ii| met while eliminating
};

CompoundMatrix build_compound(const Matrix& a, const Matrix& b, const Matrix& c,
                              const Matrix& d);

/// Two-step Schur-complement evaluation: QR-triangularize A (updating B with
/// the same reflectors), then eliminate the -C rows against R's diagonal,
/// carrying the row operations into D. Pure function of its input.
SchurResult mfa(const CompoundMatrix& m);

// Operation menu: each constructor arranges the blocks so that the engine
// above computes the named result.
Matrix op_multiply(const Matrix& c, const Matrix& b);           // c * b
Matrix op_add(const Matrix& b, const Matrix& d);                // d + b
Matrix op_solve(const Matrix& a, const Matrix& b);              // inv(a) * b
Matrix op_schur(const Matrix& a, const Matrix& b, const Matrix& c,
                const Matrix& d);                               // d + c*inv(a)*b

/// Call recorder used to check structurally that a computation routed all
/// of its matrix work through the operation menu. Installs itself for the
/// current thread; entries with a "direct:" prefix mark raw kernel calls.
class CallLogScope {
public:
  CallLogScope();
  ~CallLogScope();
  CallLogScope(const CallLogScope&) = delete;
  CallLogScope& operator=(const CallLogScope&) = delete;

  const std::vector<std::string>& entries() const { return entries_; }
  bool has_direct_calls() const;

  static void record(std::string_view name);
  static bool active();

private:
  std::vector<std::string> entries_;
  CallLogScope* prev_;
};

}  // namespace mfakf::faddeeva
