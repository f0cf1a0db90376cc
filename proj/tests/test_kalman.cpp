// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "mfakf/faddeeva.hpp"
#include "mfakf/kalman.hpp"
#include "mfakf/kernels.hpp"
#include "support/oracles.hpp"

using namespace mfakf;
using namespace mfakf::kalman;

namespace {

KalmanModel scalar_model(double f, double h, double q, double r) {
  KalmanModel m;
  m.f = Matrix(1, 1, {f});
  m.h = Matrix(1, 1, {h});
  m.q = Matrix(1, 1, {q});
  m.r = Matrix(1, 1, {r});
  return m;
}

KalmanModel random_model(Rng& rng, std::size_t n, std::size_t m) {
  KalmanModel mdl;
  mdl.f = test::random_matrix(rng, n, n);
  for (std::size_t i = 0; i < n; ++i) mdl.f(i, i) += 1.0;
  mdl.h = test::random_matrix(rng, m, n);
  mdl.q = scale(0.05, Matrix::identity(n));
  mdl.r = Matrix::identity(m);
  return mdl;
}

bool exactly_symmetric(const Matrix& p) {
  for (std::size_t j = 0; j < p.cols(); ++j)
    for (std::size_t i = 0; i < j; ++i) {
      if (std::memcmp(&p.data()[j * p.rows() + i], &p.data()[i * p.rows() + j],
                      sizeof(double)) != 0)
        return false;
    }
  return true;
}

}  // namespace

TEST_CASE("validate_model checks symmetry and positive definiteness") {
  Rng rng(101);
  KalmanModel m = random_model(rng, 3, 2);
  CHECK_NOTHROW(validate_model(m));
  KalmanModel bad = m;
  bad.q(0, 1) = bad.q(1, 0) + 1e-6;
  CHECK_THROWS_AS(validate_model(bad), ValueError);
  KalmanModel notpd = m;
  notpd.r = Matrix(2, 2);  // zero matrix
  CHECK_THROWS_AS(validate_model(notpd), ValueError);
  KalmanModel wrongdim = m;
  wrongdim.h = Matrix(2, 4);
  CHECK_THROWS_AS(validate_model(wrongdim), DimensionError);
}

TEST_CASE("predict trivial cases") {
  Rng rng(103);
  KalmanModel mdl;
  mdl.f = Matrix::identity(3);
  mdl.h = Matrix::identity(3);
  mdl.q = Matrix(3, 3);
  mdl.r = Matrix::identity(3);
  Matrix p0 = test::random_spd(rng, 3);
  KalmanState s{test::random_matrix(rng, 3, 1), p0};

  KalmanState s1 = predict(s, mdl);
  CHECK(bitwise_equal(s1.x, s.x));
  CHECK(bitwise_equal(s1.p, s.p));

  mdl.q = Matrix::identity(3);
  KalmanState s2 = predict(s, mdl);
  CHECK(max_abs_diff(s2.p, add(p0, Matrix::identity(3))) == 0.0);
}

TEST_CASE("predict 1-D arithmetic") {
  KalmanModel mdl = scalar_model(2.0, 1.0, 1.0, 1.0);
  KalmanState s{Matrix(1, 1, {1.0}), Matrix(1, 1, {1.0})};
  KalmanState out = predict(s, mdl);
  CHECK(out.x(0, 0) == 2.0);
  CHECK(out.p(0, 0) == 5.0);
}

TEST_CASE("predict with control input") {
  KalmanModel mdl = scalar_model(1.0, 1.0, 0.0, 1.0);
  mdl.g = Matrix(1, 1, {2.0});
  KalmanState s{Matrix(1, 1, {1.0}), Matrix(1, 1, {1.0})};
  KalmanState out = predict(s, mdl, Matrix(1, 1, {3.0}));
  CHECK(out.x(0, 0) == 7.0);  // 1 + 2*3
  CHECK_THROWS_AS(predict(s, scalar_model(1, 1, 0, 1), Matrix(1, 1, {1.0})),
                  DimensionError);
}

TEST_CASE("update scalar arithmetic") {
  KalmanModel mdl = scalar_model(1.0, 1.0, 0.0, 1.0);
  KalmanState s{Matrix(1, 1, {0.0}), Matrix(1, 1, {1.0})};
  KalmanState out = update(s, mdl, Matrix(1, 1, {2.0}));
  CHECK(out.x(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(out.p(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("update with huge measurement noise is a no-op") {
  Rng rng(107);
  KalmanModel mdl;
  mdl.f = Matrix::identity(3);
  mdl.h = Matrix::identity(3);
  mdl.q = Matrix(3, 3);
  mdl.r = scale(1e12, Matrix::identity(3));
  KalmanState s{test::random_matrix(rng, 3, 1), test::random_spd(rng, 3)};
  KalmanState out = update(s, mdl, test::random_matrix(rng, 3, 1));
  CHECK(max_abs_diff(out.x, s.x) <= 1e-6 * (1.0 + s.x.max_abs()));
  CHECK(max_abs_diff(out.p, s.p) <= 1e-6 * (1.0 + s.p.max_abs()));
}

TEST_CASE("update matches direct_update on random SPD state") {
  Rng rng(109);
  KalmanModel mdl = random_model(rng, 4, 2);
  KalmanState s{test::random_matrix(rng, 4, 1), test::random_spd(rng, 4)};
  Matrix z = test::random_matrix(rng, 2, 1);
  KalmanState a = update(s, mdl, z);
  KalmanState b = direct_update(s, mdl, z);
  CHECK(max_abs_diff(a.x, b.x) <= 1e-9 * (1.0 + b.x.max_abs()));
  CHECK(max_abs_diff(a.p, b.p) <= 1e-9 * (1.0 + b.p.max_abs()));
}

TEST_CASE("dual-path property over 100 random steps") {
  Rng rng(113);
  for (int it = 0; it < 100; ++it) {
    std::size_t n = 1 + static_cast<std::size_t>(rng.uniform(0, 8));
    std::size_t m = 1 + static_cast<std::size_t>(rng.uniform(0, std::min<std::size_t>(4, n)));
    KalmanModel mdl = random_model(rng, n, m);
    KalmanState s{test::random_matrix(rng, n, 1), test::random_spd(rng, n)};
    Matrix z = test::random_matrix(rng, m, 1);
    KalmanState sp = predict(s, mdl);
    KalmanState dp = direct_predict(s, mdl);
    CHECK(max_abs_diff(sp.x, dp.x) <= 1e-9 * (1.0 + dp.x.max_abs()));
    CHECK(max_abs_diff(sp.p, dp.p) <= 1e-9 * (1.0 + dp.p.max_abs()));
    KalmanState su = update(sp, mdl, z);
    KalmanState du = direct_update(dp, mdl, z);
    CHECK(max_abs_diff(su.x, du.x) <= 1e-9 * (1.0 + du.x.max_abs()));
    CHECK(max_abs_diff(su.p, du.p) <= 1e-9 * (1.0 + du.p.max_abs()));
    CHECK(exactly_symmetric(su.p));
  }
}

TEST_CASE("covariance stays symmetric bit-exactly and nearly PSD") {
  Scenario sc = make_constant_velocity(1.0, 0.01, 1.0, 42, 60);
  ScenarioTrace tr = run_scenario(sc, Engine::Mfa);
  for (const StepRecord& r : tr.steps) {
    CHECK(exactly_symmetric(r.state.p));
    double mineig = test::min_symmetric_eigenvalue(r.state.p);
    CHECK(mineig >= -1e-10 * r.state.p.max_abs());
  }
}

TEST_CASE("the MFA path records only menu calls; the direct path records kernels") {
  Rng rng(127);
  KalmanModel mdl = random_model(rng, 3, 2);
  KalmanState s{test::random_matrix(rng, 3, 1), test::random_spd(rng, 3)};
  Matrix z = test::random_matrix(rng, 2, 1);
  {
    faddeeva::CallLogScope log;
    (void)update(predict(s, mdl), mdl, z);
    CHECK_FALSE(log.entries().empty());
    CHECK_FALSE(log.has_direct_calls());
  }
  {
    faddeeva::CallLogScope log;
    (void)direct_update(direct_predict(s, mdl), mdl, z);
    CHECK(log.has_direct_calls());
  }
}

TEST_CASE("run_scenario converges on a noiseless identity system") {
  // H = I, Q = 0, tiny R, measurements equal the (static) truth.
  Scenario sc;
  sc.model.f = Matrix::identity(3);
  sc.model.h = Matrix::identity(3);
  sc.model.q = Matrix(3, 3);
  sc.model.r = scale(1e-9, Matrix::identity(3));
  sc.x0 = Matrix(3, 1);
  sc.p0 = Matrix::identity(3);
  Matrix truth = Matrix::from_rows({{1.0}, {-2.0}, {0.5}});
  for (int k = 0; k < 12; ++k) {
    sc.truth.push_back(truth);
    sc.measurements.push_back(truth);
  }
  ScenarioTrace tr = run_scenario(sc);
  CHECK(max_abs_diff(tr.steps.back().state.x, truth) <= 1e-6);
}

TEST_CASE("constant-velocity covariance settles") {
  Scenario sc = make_constant_velocity(1.0, 0.01, 1.0, 7, 100);
  ScenarioTrace tr = run_scenario(sc);
  REQUIRE(tr.steps.size() == 100);
  for (std::size_t k = 50; k < 100; ++k) {
    double d = max_abs_diff(tr.steps[k].state.p, tr.steps[k - 1].state.p);
    CHECK(d <= 1e-6);
  }
}

TEST_CASE("single-step scenario equals predict-then-update") {
  Rng rng(131);
  Scenario sc;
  sc.model = random_model(rng, 3, 2);
  sc.x0 = test::random_matrix(rng, 3, 1);
  sc.p0 = test::random_spd(rng, 3);
  sc.measurements.push_back(test::random_matrix(rng, 2, 1));
  ScenarioTrace tr = run_scenario(sc);
  KalmanState want = update(predict({sc.x0, sc.p0}, sc.model), sc.model,
                            sc.measurements[0]);
  CHECK(bitwise_equal(tr.steps[0].state.x, want.x));
  CHECK(bitwise_equal(tr.steps[0].state.p, want.p));
}

TEST_CASE("run_scenario rejects empty measurement lists and reports step errors") {
  Scenario sc;
  sc.model = scalar_model(1, 1, 0, 1);
  sc.x0 = Matrix(1, 1);
  sc.p0 = Matrix::identity(1);
  CHECK_THROWS_AS(run_scenario(sc), ConfigError);
  sc.measurements.push_back(Matrix(1, 1, {1.0}));
  CHECK_NOTHROW(run_scenario(sc));
}

TEST_CASE("scenario determinism: identical seed, bit-identical trace") {
  Scenario a = make_constant_velocity(1.0, 0.0, 0.01, 99, 50);
  Scenario b = make_constant_velocity(1.0, 0.0, 0.01, 99, 50);
  REQUIRE(a.measurements.size() == b.measurements.size());
  for (std::size_t k = 0; k < a.measurements.size(); ++k)
    CHECK(bitwise_equal(a.measurements[k], b.measurements[k]));
  ScenarioTrace ta = run_scenario(a);
  ScenarioTrace tb = run_scenario(b);
  for (std::size_t k = 0; k < ta.steps.size(); ++k) {
    CHECK(bitwise_equal(ta.steps[k].state.x, tb.steps[k].state.x));
    CHECK(bitwise_equal(ta.steps[k].state.p, tb.steps[k].state.p));
  }
}

TEST_CASE("make_constant_velocity truth is a straight line") {
  Scenario sc = make_constant_velocity(1.0, 0.0, 0.0, 1, 10);
  for (std::size_t k = 0; k < sc.truth.size(); ++k) {
    double t = static_cast<double>(k + 1);
    CHECK(sc.truth[k](0, 0) == doctest::Approx(1.0 * t));
    CHECK(sc.truth[k](1, 0) == doctest::Approx(0.5 * t));
    // zero noise: measurements equal the true positions
    CHECK(sc.measurements[k](0, 0) == sc.truth[k](0, 0));
  }
  CHECK_THROWS_AS(make_constant_velocity(0.0, 0.0, 1.0, 1), ValueError);
}

TEST_CASE("filter beats raw measurements over 20 seeds") {
  int wins = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Scenario sc = make_constant_velocity(1.0, 0.0, 0.01, seed, 100);
    ScenarioTrace tr = run_scenario(sc);
    double filt = 0.0, meas = 0.0;
    for (std::size_t k = 0; k < 100; ++k) {
      for (int d = 0; d < 2; ++d) {
        double fe = tr.steps[k].state.x(d, 0) - sc.truth[k](d, 0);
        double me = sc.measurements[k](d, 0) - sc.truth[k](d, 0);
        filt += fe * fe;
        meas += me * me;
      }
    }
    if (filt < meas) ++wins;
  }
  CHECK(wins == 20);
}

TEST_CASE("a degenerate innovation covariance propagates as a singular error") {
  // P = 0 and R = 0 make S exactly singular inside the update's solve.
  KalmanModel mdl = scalar_model(1.0, 1.0, 0.0, 1.0);
  mdl.r = Matrix(1, 1);  // not PD, bypassing validate_model on purpose
  KalmanState s{Matrix(1, 1), Matrix(1, 1)};
  CHECK_THROWS_AS(update(s, mdl, Matrix(1, 1, {1.0})), SingularError);
}

TEST_CASE("scenario step errors carry the step index and keep their type") {
  Scenario sc;
  sc.model = scalar_model(1.0, 1.0, 0.0, 1.0);
  sc.model.r = Matrix(1, 1, {1.0});
  sc.x0 = Matrix(1, 1);
  sc.p0 = Matrix(1, 1, {1.0});
  sc.measurements.push_back(Matrix(1, 1, {1.0}));
  sc.measurements.push_back(Matrix(2, 1));  // wrong dimension at step 1
  try {
    run_scenario(sc);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("step 1") != std::string::npos);
  }
}
