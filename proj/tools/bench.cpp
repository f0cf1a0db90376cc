// SPDX-License-Identifier: Apache-2.0
//
// Benchmark comparing the serial reference kernels with the OpenMP kernels.
// Results are checked bit-for-bit; timings are wall clock.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mfakf/kernels.hpp"
#include "mfakf/rng.hpp"

using namespace mfakf;

namespace {

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
  Matrix m(r, c);
  for (double& v : m.data()) v = rng.uniform(-1.0, 1.0);
  return m;
}

Matrix diag_dominant(Rng& rng, std::size_t n) {
  Matrix m = random_matrix(rng, n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) += static_cast<double>(n);
  return m;
}

double time_ms(const std::function<void()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

void row(const char* name, std::size_t n, double serial_ms, double parallel_ms,
         bool identical) {
  std::printf("%-12s %5zu %12.2f %12.2f %9.2fx   %s\n", name, n, serial_ms, parallel_ms,
              serial_ms / parallel_ms, identical ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
  std::printf("OpenMP not enabled; both columns run the same serial code path.\n");
#endif
  std::printf("%-12s %5s %12s %12s %10s\n", "kernel", "n", "serial(ms)", "openmp(ms)",
              "speedup");

  Rng rng(7);
  for (std::size_t n : {128, 256, 384}) {
    Matrix a = random_matrix(rng, n, n);
    Matrix b = random_matrix(rng, n, n);
    Matrix c(n, n);

    Matrix r1(1, 1), r2(1, 1);
    double ts = time_ms([&] { r1 = dense::serial::gemm(1.0, a, b, 0.0, c); });
    double tp = time_ms([&] { r2 = dense::gemm(1.0, a, b, 0.0, c); });
    row("gemm", n, ts, tp, bitwise_equal(r1, r2));

    ts = time_ms([&] { r1 = dense::serial::gemm_blocked(1.0, a, b, 0.0, c, 48); });
    tp = time_ms([&] { r2 = dense::gemm_blocked(1.0, a, b, 0.0, c, 48); });
    row("gemm_blocked", n, ts, tp, bitwise_equal(r1, r2));

    dense::QrFactors q1, q2;
    ts = time_ms([&] { q1 = dense::serial::geqrf(a, 32); });
    tp = time_ms([&] { q2 = dense::geqrf(a, 32); });
    row("geqrf", n, ts, tp, bitwise_equal(q1.packed, q2.packed));

    Matrix dd = diag_dominant(rng, n);
    dense::LuFactors l1, l2;
    ts = time_ms([&] { l1 = dense::serial::getrf(dd, false, 32); });
    tp = time_ms([&] { l2 = dense::getrf(dd, false, 32); });
    row("getrf", n, ts, tp, bitwise_equal(l1.packed, l2.packed));

    Matrix upper(n, n);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < j; ++i) upper(i, j) = a(i, j);
      upper(j, j) = 2.0 + std::fabs(a(j, j));
    }
    ts = time_ms([&] { r1 = dense::serial::trsm_upper(upper, b); });
    tp = time_ms([&] { r2 = dense::trsm_upper(upper, b); });
    row("trsm_upper", n, ts, tp, bitwise_equal(r1, r2));
  }
  return 0;
}
