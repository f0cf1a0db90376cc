// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mfakf/matrix.hpp"

namespace mfakf::kalman {

/// Discrete-time linear system: x' = F x (+ G u) + w, z = H x + v, with
/// process noise covariance Q and measurement noise covariance R.
struct KalmanModel {
  Matrix f;                  // n x n
  std::optional<Matrix> g;   // n x u
  Matrix h;                  // m x n
  Matrix q;                  // n x n
  Matrix r;                  // m x m
};

/// Checks shape consistency, symmetry of Q and R (within 1e-12 of their
/// scale), and positive definiteness of R.
void validate_model(const KalmanModel& mdl);

struct KalmanState {
  Matrix x;  // n x 1
  Matrix p;  // n x n, kept exactly symmetric after every public step
};

struct Scenario {
  KalmanModel model;
  Matrix x0;
  Matrix p0;
  std::vector<Matrix> truth;         // per-step true state, n x 1
  std::vector<Matrix> measurements;  // per-step z, m x 1; at least one
  std::uint64_t seed = 0;
};

enum class Engine { Mfa, Direct };

struct StepRecord {
  std::size_t step;
  KalmanState state;
  double trace_p;
  double innovation_norm;
};

struct ScenarioTrace {
  std::vector<StepRecord> steps;
};

/// Time update. All products run through the operation menu
/// (op_multiply / op_add / op_schur); covariance is re-symmetrized.
KalmanState predict(const KalmanState& s, const KalmanModel& mdl,
                    const std::optional<Matrix>& u = std::nullopt);

/// Measurement update via the menu schedule: S = R + H P H^T through
/// op_schur, gain through the QR-based op_solve, state and covariance
/// corrections through op_schur.
KalmanState update(const KalmanState& s, const KalmanModel& mdl, const Matrix& z);

/// Same mathematical contract as update, implemented on the raw kernels
/// with a pivoted-LU solve; the independent cross-check path.
KalmanState direct_update(const KalmanState& s, const KalmanModel& mdl, const Matrix& z);

/// Time update on the raw kernels, companion to direct_update.
KalmanState direct_predict(const KalmanState& s, const KalmanModel& mdl,
                           const std::optional<Matrix>& u = std::nullopt);

ScenarioTrace run_scenario(const Scenario& sc, Engine engine = Engine::Mfa);

/// Standard 2-D constant-velocity test system: state (px, py, vx, vy),
/// position measurements, straight-line truth, gaussian measurement noise
/// drawn from the seed.
Scenario make_constant_velocity(double dt, double q_intensity, double r_diag,
                                std::uint64_t seed, std::size_t steps = 100);

/// (p + p^T) / 2 with both mirror entries written from the same value.
Matrix symmetrize(const Matrix& p);

}  // namespace mfakf::kalman
