// SPDX-License-Identifier: Apache-2.0
#include "mfakf/faddeeva.hpp"

#include <cmath>

#include "mfakf/kernels.hpp"

namespace mfakf::faddeeva {

namespace {
// Panel width for the QR step; any value gives the same contracts.
constexpr std::size_t kQrPanel = 8;

thread_local CallLogScope* g_active_log = nullptr;
}  // namespace

CallLogScope::CallLogScope() : prev_(g_active_log) { g_active_log = this; }
CallLogScope::~CallLogScope() { g_active_log = prev_; }

bool CallLogScope::has_direct_calls() const {
  for (const auto& e : entries_)
    if (e.rfind("direct:", 0) == 0) return true;
  return false;
}

void CallLogScope::record(std::string_view name) {
  if (g_active_log) g_active_log->entries_.emplace_back(name);
}

bool CallLogScope::active() { return g_active_log != nullptr; }

CompoundMatrix::CompoundMatrix(Matrix a, Matrix b, Matrix neg_c, Matrix d)
    : a_(std::move(a)), b_(std::move(b)), neg_c_(std::move(neg_c)), d_(std::move(d)) {
  if (a_.rows() != a_.cols())
    throw DimensionError("compound: A must be square, got " + std::to_string(a_.rows()) +
                         "x" + std::to_string(a_.cols()));
  if (b_.rows() != a_.rows())
    throw DimensionError("compound: B.rows (" + std::to_string(b_.rows()) +
                         ") != A.rows (" + std::to_string(a_.rows()) + ")");
  if (neg_c_.cols() != a_.cols())
    throw DimensionError("compound: C.cols (" + std::to_string(neg_c_.cols()) +
                         ") != A.cols (" + std::to_string(a_.cols()) + ")");
  if (d_.rows() != neg_c_.rows())
    throw DimensionError("compound: D.rows (" + std::to_string(d_.rows()) +
                         ") != C.rows (" + std::to_string(neg_c_.rows()) + ")");
  if (d_.cols() != b_.cols())
    throw DimensionError("compound: D.cols (" + std::to_string(d_.cols()) +
                         ") != B.cols (" + std::to_string(b_.cols()) + ")");
}

CompoundMatrix build_compound(const Matrix& a, const Matrix& b, const Matrix& c,
                              const Matrix& d) {
  return CompoundMatrix(a, b, negate(c), d);
}

SchurResult mfa(const CompoundMatrix& m) {
  CallLogScope::record("mfa");
  const std::size_t n = m.n(), p = m.p(), k = m.k();

  // Step 1: triangularize A, apply the same reflectors to B.
  dense::QrFactors f = dense::geqrf(m.a(), kQrPanel);
  Matrix bp = dense::apply_q_transpose(f, m.b());

  const double a_max = m.a().max_abs();
  const double thresh = 1e-12 * a_max;
  double r_min = std::fabs(f.packed(0, 0));
  std::size_t r_argmin = 0;
  for (std::size_t i = 1; i < n; ++i) {
    double v = std::fabs(f.packed(i, i));
    if (v < r_min) { r_min = v; r_argmin = i; }
  }
  if (r_min <= thresh)
    throw SingularError("mfa: near-singular A, |R(" + std::to_string(r_argmin) +
                            "," + std::to_string(r_argmin) + ")| = " +
                            std::to_string(r_min) + " <= 1e-12*max|A|",
                        r_argmin, r_min);

  // Step 2: eliminate the -C rows against R's diagonal, same row operations
  // applied to D. Rows are independent; a zero multiplier is skipped so a
  // zero C block leaves D untouched bit-for-bit.
  Matrix cw = m.neg_c();
  Matrix dw = m.d();
#pragma omp parallel for schedule(static) if (k * n * (n + p) > 4096)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(k); ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double mult = cw(i, j) / f.packed(j, j);
      if (mult == 0.0) continue;
      for (std::size_t jj = j + 1; jj < n; ++jj) cw(i, jj) -= mult * f.packed(j, jj);
      for (std::size_t c = 0; c < p; ++c) dw(i, c) -= mult * bp(j, c);
    }
  }
  return {std::move(dw), r_min};
}

Matrix op_multiply(const Matrix& c, const Matrix& b) {
  CallLogScope::record("op_multiply");
  if (c.cols() != b.rows())
    throw DimensionError("op_multiply: c.cols (" + std::to_string(c.cols()) +
                         ") != b.rows (" + std::to_string(b.rows()) + ")");
  CompoundMatrix m(Matrix::identity(b.rows()), b, negate(c), Matrix(c.rows(), b.cols()));
  return mfa(m).value;
}

Matrix op_add(const Matrix& b, const Matrix& d) {
  CallLogScope::record("op_add");
  if (!same_shape(b, d))
    throw DimensionError("op_add: shapes differ, " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + " vs " + std::to_string(d.rows()) +
                         "x" + std::to_string(d.cols()));
  CompoundMatrix m(Matrix::identity(b.rows()), b, negate(Matrix::identity(b.rows())), d);
  return mfa(m).value;
}

Matrix op_solve(const Matrix& a, const Matrix& b) {
  CallLogScope::record("op_solve");
  if (a.rows() != a.cols())
    throw DimensionError("op_solve: a must be square");
  if (a.rows() != b.rows())
    throw DimensionError("op_solve: a.rows (" + std::to_string(a.rows()) +
                         ") != b.rows (" + std::to_string(b.rows()) + ")");
  CompoundMatrix m(a, b, negate(Matrix::identity(a.rows())), Matrix(a.rows(), b.cols()));
  return mfa(m).value;
}

Matrix op_schur(const Matrix& a, const Matrix& b, const Matrix& c, const Matrix& d) {
  CallLogScope::record("op_schur");
  return mfa(build_compound(a, b, c, d)).value;
}

}  // namespace mfakf::faddeeva
