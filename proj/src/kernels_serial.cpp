// SPDX-License-Identifier: Apache-2.0
//
// Serial reference kernels. These pin down the exact arithmetic the OpenMP
// versions must reproduce bit-for-bit; keep the inner-loop expressions in
// sync with kernels.cpp.
#include <cmath>
#include <numeric>

#include "kernels_checks.hpp"
#include "mfakf/kernels.hpp"

namespace mfakf::dense::serial {

using detail::check_block;
using detail::check_gemm;
using detail::check_qr_shape;
using detail::check_square;

Matrix gemm(double alpha, const Matrix& a, const Matrix& b, double beta, const Matrix& c) {
  check_gemm(a, b, c);
  const std::size_t m = a.rows(), k = a.cols(), p = b.cols();
  Matrix out(m, p);
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t i = 0; i < m; ++i) {
      double acc = 0.0;
      for (std::size_t kk = 0; kk < k; ++kk) acc += a(i, kk) * b(kk, j);
      out(i, j) = alpha * acc + beta * c(i, j);
    }
  return out;
}

Matrix gemm_blocked(double alpha, const Matrix& a, const Matrix& b, double beta,
                    const Matrix& c, std::size_t block) {
  check_gemm(a, b, c);
  check_block(block);
  const std::size_t m = a.rows(), k = a.cols(), p = b.cols();
  Matrix out(m, p);
  for (std::size_t k0 = 0; k0 < k; k0 += block) {
    const std::size_t kb = std::min(block, k - k0);
    const bool first = (k0 == 0);
    const double eff_beta = first ? beta : 1.0;
    for (std::size_t j0 = 0; j0 < p; j0 += block)
      for (std::size_t i0 = 0; i0 < m; i0 += block) {
        const std::size_t jb = std::min(block, p - j0);
        const std::size_t ib = std::min(block, m - i0);
        for (std::size_t j = j0; j < j0 + jb; ++j)
          for (std::size_t i = i0; i < i0 + ib; ++i) {
            double acc = 0.0;
            for (std::size_t kk = k0; kk < k0 + kb; ++kk) acc += a(i, kk) * b(kk, j);
            out(i, j) = alpha * acc + eff_beta * (first ? c(i, j) : out(i, j));
          }
      }
  }
  return out;
}

namespace {

// One Householder column step on packed(0..m, j); returns tau.
double householder_column(Matrix& p, std::size_t m, std::size_t j) {
  double alpha = p(j, j);
  double sumsq = 0.0;
  for (std::size_t i = j + 1; i < m; ++i) sumsq += p(i, j) * p(i, j);
  if (sumsq == 0.0) return 0.0;
  double norm = std::sqrt(alpha * alpha + sumsq);
  double beta = (alpha >= 0.0) ? -norm : norm;
  double tau = (beta - alpha) / beta;
  double denom = alpha - beta;
  for (std::size_t i = j + 1; i < m; ++i) p(i, j) /= denom;
  p(j, j) = beta;
  return tau;
}

// Apply reflector j (stored in packed) to column c of packed.
void apply_reflector(Matrix& p, std::size_t m, std::size_t j, double tau, std::size_t c) {
  double w = p(j, c);
  for (std::size_t i = j + 1; i < m; ++i) w += p(i, j) * p(i, c);
  w *= tau;
  p(j, c) -= w;
  for (std::size_t i = j + 1; i < m; ++i) p(i, c) -= w * p(i, j);
}

}  // namespace

QrFactors geqr2(const Matrix& a) {
  check_qr_shape(a);
  Matrix p = a;
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> tau(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    tau[j] = householder_column(p, m, j);
    if (tau[j] == 0.0) continue;
    for (std::size_t c = j + 1; c < n; ++c) apply_reflector(p, m, j, tau[j], c);
  }
  return {std::move(p), std::move(tau)};
}

QrFactors geqrf(const Matrix& a, std::size_t block) {
  check_qr_shape(a);
  check_block(block);
  Matrix p = a;
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> tau(n, 0.0);
  for (std::size_t j0 = 0; j0 < n; j0 += block) {
    const std::size_t bs = std::min(block, n - j0);
    // Panel factorization, reflectors applied within the panel only.
    for (std::size_t j = j0; j < j0 + bs; ++j) {
      tau[j] = householder_column(p, m, j);
      if (tau[j] == 0.0) continue;
      for (std::size_t c = j + 1; c < j0 + bs; ++c) apply_reflector(p, m, j, tau[j], c);
    }
    if (j0 + bs >= n) continue;
    // Accumulate the panel reflector product Hp = H_bs ... H_1 of size s.
    const std::size_t s = m - j0;
    Matrix hp = Matrix::identity(s);
    for (std::size_t jj = j0; jj < j0 + bs; ++jj) {
      if (tau[jj] == 0.0) continue;
      const std::size_t o = jj - j0;  // offset of the implicit unit element
      for (std::size_t c = 0; c < s; ++c) {
        double w = hp(o, c);
        for (std::size_t i = o + 1; i < s; ++i) w += p(j0 + i, jj) * hp(i, c);
        w *= tau[jj];
        hp(o, c) -= w;
        for (std::size_t i = o + 1; i < s; ++i) hp(i, c) -= w * p(j0 + i, jj);
      }
    }
    // Trailing update through the matrix product.
    Matrix trail = p.block(j0, j0 + bs, s, n - (j0 + bs));
    Matrix upd = gemm(1.0, hp, trail, 0.0, Matrix(s, n - (j0 + bs)));
    p.set_block(j0, j0 + bs, upd);
  }
  return {std::move(p), std::move(tau)};
}

LuFactors getrf2(const Matrix& a, bool pivot) {
  check_square(a, "getrf2");
  Matrix p = a;
  const std::size_t n = a.rows();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t k = 0; k < n; ++k) {
    if (pivot) {
      std::size_t ip = k;
      double best = std::fabs(p(k, k));
      for (std::size_t i = k + 1; i < n; ++i)
        if (std::fabs(p(i, k)) > best) { best = std::fabs(p(i, k)); ip = i; }
      if (best <= kSingularPivot)
        throw SingularError("getrf2: pivot column " + std::to_string(k) + " is zero", k, best);
      if (ip != k) {
        for (std::size_t j = 0; j < n; ++j) std::swap(p(ip, j), p(k, j));
        std::swap(perm[ip], perm[k]);
      }
    } else if (std::fabs(p(k, k)) <= kSingularPivot) {
      throw SingularError("getrf2: zero pivot at k=" + std::to_string(k), k,
                          std::fabs(p(k, k)));
    }
    const double piv = p(k, k);
    for (std::size_t i = k + 1; i < n; ++i) p(i, k) /= piv;
    for (std::size_t j = k + 1; j < n; ++j) {
      const double u = p(k, j);
      for (std::size_t i = k + 1; i < n; ++i) p(i, j) -= p(i, k) * u;
    }
  }
  LuFactors f{std::move(p), std::nullopt};
  if (pivot) f.perm = std::move(perm);
  return f;
}

LuFactors getrf(const Matrix& a, bool pivot, std::size_t block) {
  check_square(a, "getrf");
  check_block(block);
  Matrix p = a;
  const std::size_t n = a.rows();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t k0 = 0; k0 < n; k0 += block) {
    const std::size_t bs = std::min(block, n - k0);
    // Panel over full column height, pivoting across all remaining rows.
    for (std::size_t k = k0; k < k0 + bs; ++k) {
      if (pivot) {
        std::size_t ip = k;
        double best = std::fabs(p(k, k));
        for (std::size_t i = k + 1; i < n; ++i)
          if (std::fabs(p(i, k)) > best) { best = std::fabs(p(i, k)); ip = i; }
        if (best <= kSingularPivot)
          throw SingularError("getrf: pivot column " + std::to_string(k) + " is zero", k, best);
        if (ip != k) {
          for (std::size_t j = 0; j < n; ++j) std::swap(p(ip, j), p(k, j));
          std::swap(perm[ip], perm[k]);
        }
      } else if (std::fabs(p(k, k)) <= kSingularPivot) {
        throw SingularError("getrf: zero pivot at k=" + std::to_string(k), k,
                            std::fabs(p(k, k)));
      }
      const double piv = p(k, k);
      for (std::size_t i = k + 1; i < n; ++i) p(i, k) /= piv;
      for (std::size_t j = k + 1; j < k0 + bs; ++j) {
        const double u = p(k, j);
        for (std::size_t i = k + 1; i < n; ++i) p(i, j) -= p(i, k) * u;
      }
    }
    const std::size_t rest = n - (k0 + bs);
    if (rest == 0) continue;
    // U12: forward-substitute through the unit-lower panel block.
    for (std::size_t r = k0 + 1; r < k0 + bs; ++r)
      for (std::size_t j = k0 + bs; j < n; ++j) {
        double v = p(r, j);
        for (std::size_t q = k0; q < r; ++q) v -= p(r, q) * p(q, j);
        p(r, j) = v;
      }
    // Trailing update via gemm: A22 -= L21 * U12.
    Matrix l21 = p.block(k0 + bs, k0, rest, bs);
    Matrix u12 = p.block(k0, k0 + bs, bs, rest);
    Matrix a22 = p.block(k0 + bs, k0 + bs, rest, rest);
    Matrix upd = gemm(-1.0, l21, u12, 1.0, a22);
    p.set_block(k0 + bs, k0 + bs, upd);
  }
  LuFactors f{std::move(p), std::nullopt};
  if (pivot) f.perm = std::move(perm);
  return f;
}

Matrix trsm_upper(const Matrix& r, const Matrix& b) {
  check_square(r, "trsm_upper");
  if (r.rows() != b.rows())
    throw DimensionError("trsm_upper: r.rows (" + std::to_string(r.rows()) +
                         ") != b.rows (" + std::to_string(b.rows()) + ")");
  const std::size_t n = r.rows(), p = b.cols();
  for (std::size_t k = 0; k < n; ++k)
    if (std::fabs(r(k, k)) <= kSingularPivot)
      throw SingularError("trsm_upper: zero diagonal at k=" + std::to_string(k), k,
                          std::fabs(r(k, k)));
  Matrix x = b;
  for (std::size_t c = 0; c < p; ++c)
    for (std::size_t k = n; k-- > 0;) {
      double v = x(k, c);
      for (std::size_t j = k + 1; j < n; ++j) v -= r(k, j) * x(j, c);
      x(k, c) = v / r(k, k);
    }
  return x;
}

}  // namespace mfakf::dense::serial
