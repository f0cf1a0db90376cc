// SPDX-License-Identifier: Apache-2.0
#include "mfakf/kalman.hpp"

#include <cmath>
#include <string>

#include "mfakf/faddeeva.hpp"
#include "mfakf/kernels.hpp"
#include "mfakf/rng.hpp"

namespace mfakf::kalman {

using faddeeva::CallLogScope;
using faddeeva::op_add;
using faddeeva::op_multiply;
using faddeeva::op_schur;
using faddeeva::op_solve;

namespace {

bool is_symmetric(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = 1.0 + m.max_abs();
  for (std::size_t j = 0; j < m.cols(); ++j)
    for (std::size_t i = 0; i < j; ++i)
      if (std::fabs(m(i, j) - m(j, i)) > tol * scale) return false;
  return true;
}

// Cholesky probe; true iff m is positive definite.
bool cholesky_ok(const Matrix& m) {
  const std::size_t n = m.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = m(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (d <= 0.0) return false;
    l(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = m(i, j);
      for (std::size_t k = 0; k < j; ++k) v -= l(i, k) * l(j, k);
      l(i, j) = v / l(j, j);
    }
  }
  return true;
}

void check_state(const KalmanState& s, const KalmanModel& mdl) {
  const std::size_t n = mdl.f.rows();
  if (s.x.rows() != n || s.x.cols() != 1)
    throw DimensionError("kalman: state x must be " + std::to_string(n) + "x1");
  if (s.p.rows() != n || s.p.cols() != n)
    throw DimensionError("kalman: covariance P must be " + std::to_string(n) + "x" +
                         std::to_string(n));
}

}  // namespace

void validate_model(const KalmanModel& mdl) {
  const std::size_t n = mdl.f.rows();
  if (mdl.f.cols() != n) throw DimensionError("kalman: F must be square");
  if (mdl.h.cols() != n)
    throw DimensionError("kalman: H.cols (" + std::to_string(mdl.h.cols()) +
                         ") != state dim (" + std::to_string(n) + ")");
  const std::size_t m = mdl.h.rows();
  if (mdl.q.rows() != n || mdl.q.cols() != n)
    throw DimensionError("kalman: Q must be " + std::to_string(n) + "x" + std::to_string(n));
  if (mdl.r.rows() != m || mdl.r.cols() != m)
    throw DimensionError("kalman: R must be " + std::to_string(m) + "x" + std::to_string(m));
  if (mdl.g && mdl.g->rows() != n)
    throw DimensionError("kalman: G.rows != state dim");
  if (!is_symmetric(mdl.q, 1e-12)) throw ValueError("kalman: Q not symmetric");
  if (!is_symmetric(mdl.r, 1e-12)) throw ValueError("kalman: R not symmetric");
  if (!cholesky_ok(mdl.r)) throw ValueError("kalman: R not positive definite");
}

Matrix symmetrize(const Matrix& p) {
  Matrix out = p;
  for (std::size_t j = 0; j < p.cols(); ++j)
    for (std::size_t i = 0; i < j; ++i) {
      const double v = 0.5 * (p(i, j) + p(j, i));
      out(i, j) = v;
      out(j, i) = v;
    }
  return out;
}

KalmanState predict(const KalmanState& s, const KalmanModel& mdl,
                    const std::optional<Matrix>& u) {
  check_state(s, mdl);
  Matrix x = op_multiply(mdl.f, s.x);
  if (u) {
    if (!mdl.g) throw DimensionError("kalman: control input given but model has no G");
    x = op_add(op_multiply(*mdl.g, *u), x);
  }
  // P' = Q + F (P F^T): one multiply, then the Schur form with A = I.
  Matrix t = op_multiply(s.p, transpose(mdl.f));
  Matrix p = op_schur(Matrix::identity(t.rows()), t, mdl.f, mdl.q);
  return {std::move(x), symmetrize(p)};
}

KalmanState update(const KalmanState& s, const KalmanModel& mdl, const Matrix& z) {
  check_state(s, mdl);
  const std::size_t m = mdl.h.rows();
  if (z.rows() != m || z.cols() != 1)
    throw DimensionError("kalman: z must be " + std::to_string(m) + "x1");

  Matrix t = op_multiply(s.p, transpose(mdl.h));                       // P H^T, n x m
  Matrix innov_cov = op_schur(Matrix::identity(t.rows()), t, mdl.h, mdl.r);  // R + H P H^T
  Matrix gain_t = op_solve(innov_cov, transpose(t));                   // K^T = S^-1 (P H^T)^T
  Matrix gain = transpose(gain_t);
  Matrix innov = op_schur(Matrix::identity(s.x.rows()), s.x, negate(mdl.h), z);  // z - H x
  Matrix x = op_schur(Matrix::identity(innov.rows()), innov, gain, s.x);         // x + K y
  Matrix w = op_multiply(mdl.h, s.p);                                  // H P
  Matrix p = op_schur(Matrix::identity(w.rows()), w, negate(gain), s.p);  // P - K H P
  return {std::move(x), symmetrize(p)};
}

KalmanState direct_predict(const KalmanState& s, const KalmanModel& mdl,
                           const std::optional<Matrix>& u) {
  check_state(s, mdl);
  CallLogScope::record("direct:gemm");
  Matrix x = dense::matmul(mdl.f, s.x);
  if (u) {
    if (!mdl.g) throw DimensionError("kalman: control input given but model has no G");
    x = add(x, dense::matmul(*mdl.g, *u));
  }
  Matrix p = dense::gemm(1.0, dense::matmul(mdl.f, s.p), transpose(mdl.f), 1.0, mdl.q);
  return {std::move(x), symmetrize(p)};
}

KalmanState direct_update(const KalmanState& s, const KalmanModel& mdl, const Matrix& z) {
  check_state(s, mdl);
  const std::size_t m = mdl.h.rows();
  if (z.rows() != m || z.cols() != 1)
    throw DimensionError("kalman: z must be " + std::to_string(m) + "x1");
  CallLogScope::record("direct:gemm");
  Matrix t = dense::matmul(s.p, transpose(mdl.h));                 // P H^T
  Matrix innov_cov = dense::gemm(1.0, mdl.h, t, 1.0, mdl.r);       // S = R + H P H^T
  CallLogScope::record("direct:lu_solve");
  Matrix gain = transpose(dense::solve(innov_cov, transpose(t)));  // K = P H^T S^-1
  Matrix innov = sub(z, dense::matmul(mdl.h, s.x));                // y = z - H x
  Matrix x = add(s.x, dense::matmul(gain, innov));                 // x + K y
  Matrix w = dense::matmul(mdl.h, s.p);                            // H P
  Matrix p = dense::gemm(-1.0, gain, w, 1.0, s.p);                 // P - K H P
  return {std::move(x), symmetrize(p)};
}

ScenarioTrace run_scenario(const Scenario& sc, Engine engine) {
  if (sc.measurements.empty())
    throw ConfigError("scenario: measurement count must be >= 1");
  validate_model(sc.model);
  KalmanState state{sc.x0, sc.p0};
  check_state(state, sc.model);
  ScenarioTrace trace;
  trace.steps.reserve(sc.measurements.size());
  const std::size_t m = sc.model.h.rows();
  for (std::size_t k = 0; k < sc.measurements.size(); ++k) {
    try {
      const Matrix& z = sc.measurements[k];
      if (z.rows() != m || z.cols() != 1)
        throw DimensionError("measurement must be " + std::to_string(m) + "x1, got " +
                             std::to_string(z.rows()) + "x" + std::to_string(z.cols()));
      state = (engine == Engine::Mfa) ? predict(state, sc.model)
                                      : direct_predict(state, sc.model);
      Matrix predicted = dense::matmul(sc.model.h, state.x);
      double inn = 0.0;
      for (std::size_t i = 0; i < z.rows(); ++i) {
        double d = z(i, 0) - predicted(i, 0);
        inn += d * d;
      }
      inn = std::sqrt(inn);
      state = (engine == Engine::Mfa) ? update(state, sc.model, z)
                                      : direct_update(state, sc.model, z);
      double tr = 0.0;
      for (std::size_t i = 0; i < state.p.rows(); ++i) tr += state.p(i, i);
      trace.steps.push_back({k, state, tr, inn});
    } catch (const SingularError& e) {
      throw SingularError("scenario step " + std::to_string(k) + ": " + e.what(),
                          e.index, e.magnitude);
    } catch (const Error& e) {
      throw Error("scenario step " + std::to_string(k) + ": " + e.what());
    }
  }
  return trace;
}

Scenario make_constant_velocity(double dt, double q_intensity, double r_diag,
                                std::uint64_t seed, std::size_t steps) {
  if (dt <= 0.0) throw ValueError("make_constant_velocity: dt must be positive");
  Scenario sc;
  sc.seed = seed;
  sc.model.f = Matrix::from_rows({{1, 0, dt, 0}, {0, 1, 0, dt}, {0, 0, 1, 0}, {0, 0, 0, 1}});
  sc.model.h = Matrix::from_rows({{1, 0, 0, 0}, {0, 1, 0, 0}});
  const double d3 = dt * dt * dt / 3.0, d2 = dt * dt / 2.0;
  sc.model.q = scale(q_intensity, Matrix::from_rows({{d3, 0, d2, 0},
                                                     {0, d3, 0, d2},
                                                     {d2, 0, dt, 0},
                                                     {0, d2, 0, dt}}));
  sc.model.r = scale(r_diag, Matrix::identity(2));
  sc.x0 = Matrix(4, 1);
  sc.p0 = Matrix::identity(4);

  Matrix truth = Matrix::from_rows({{0.0}, {0.0}, {1.0}, {0.5}});
  Rng rng(seed);
  const double noise_sd = std::sqrt(r_diag);
  for (std::size_t k = 0; k < steps; ++k) {
    truth = dense::matmul(sc.model.f, truth);
    sc.truth.push_back(truth);
    Matrix z(2, 1);
    z(0, 0) = truth(0, 0) + (noise_sd > 0 ? rng.gaussian(0.0, noise_sd) : 0.0);
    z(1, 0) = truth(1, 0) + (noise_sd > 0 ? rng.gaussian(0.0, noise_sd) : 0.0);
    sc.measurements.push_back(z);
  }
  return sc;
}

}  // namespace mfakf::kalman
