#include <Eigen/Dense>

#include "ctpanel/linalg.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace ctpanel;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_CASE("discretize: dt = 0 is the identity map") {
  MatrixXd a(2, 2);
  a << -0.5, 0.1, 0.0, -1.0;
  VectorXd b(2);
  b << 1.0, -2.0;
  const auto d = discretize_dynamics(a, b, MatrixXd::Identity(2, 2), 0.0);
  CHECK(d.A_d.isApprox(MatrixXd::Identity(2, 2)));
  CHECK(d.b_d.norm() == 0.0);
  CHECK(d.Q_d.norm() == 0.0);
}

TEST_CASE("discretize: scalar OU closed forms") {
  for (double a : {-2.0, -1.0, -0.1}) {
    for (double dt : {0.1, 1.0, 10.0}) {
      MatrixXd A(1, 1);
      A << a;
      VectorXd b(1);
      b << 0.7;
      MatrixXd q(1, 1);
      q << 1.3;
      const auto d = discretize_dynamics(A, b, q, dt);
      CHECK(d.A_d(0, 0) == doctest::Approx(oracles::ou_a_d(a, dt)).epsilon(1e-10));
      CHECK(d.b_d(0) == doctest::Approx(oracles::ou_b_d(a, 0.7, dt)).epsilon(1e-10));
      CHECK(d.Q_d(0, 0) == doctest::Approx(oracles::ou_q_d(a, 1.3, dt)).epsilon(1e-10));
    }
  }
  // The spec's worked example: a = -0.5, dt = 2.
  MatrixXd A(1, 1);
  A << -0.5;
  const auto d = discretize_dynamics(A, VectorXd::Zero(1), MatrixXd::Identity(1, 1), 2.0);
  CHECK(d.A_d(0, 0) == doctest::Approx(0.36787944117144233).epsilon(1e-12));
  CHECK(d.Q_d(0, 0) == doctest::Approx(0.8646647167633873).epsilon(1e-12));
}

TEST_CASE("discretize: semigroup property on random stable systems") {
  Rng rng(91);
  for (int trial = 0; trial < 25; ++trial) {
    const MatrixXd a = oracles::random_stable_drift(rng, 4);
    const MatrixXd q = oracles::random_spd(rng, 4);
    VectorXd b(4);
    for (int i = 0; i < 4; ++i) b(i) = rng.normal();
    const double dt1 = 0.3 + rng.uniform(), dt2 = 0.2 + 2.0 * rng.uniform();

    const auto d1 = discretize_dynamics(a, b, q, dt1);
    const auto d2 = discretize_dynamics(a, b, q, dt2);
    const auto d12 = discretize_dynamics(a, b, q, dt1 + dt2);

    CHECK(((d2.A_d * d1.A_d) - d12.A_d).norm() < 1e-9);
    CHECK(((d2.A_d * d1.b_d + d2.b_d) - d12.b_d).norm() < 1e-9);
    CHECK(((d2.A_d * d1.Q_d * d2.A_d.transpose() + d2.Q_d) - d12.Q_d).norm() < 1e-9);
  }
}

TEST_CASE("stationary covariance: scalar and diagonal closed forms") {
  MatrixXd a(1, 1);
  a << -0.5;
  MatrixXd q(1, 1);
  q << 1.0;
  CHECK(stationary_covariance(a, q)(0, 0) == doctest::Approx(1.0).epsilon(1e-12));

  const MatrixXd a2 = -MatrixXd::Identity(2, 2);
  const MatrixXd q_inf = stationary_covariance(a2, MatrixXd::Identity(2, 2));
  CHECK(q_inf.isApprox(0.5 * MatrixXd::Identity(2, 2), 1e-12));
}

TEST_CASE("stationary covariance: defining residual on random systems") {
  Rng rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform() * 5.0);
    const MatrixXd a = oracles::random_stable_drift(rng, n);
    const MatrixXd q = oracles::random_spd(rng, n);
    const MatrixXd s = stationary_covariance(a, q);
    CHECK((a * s + s * a.transpose() + q).norm() < 1e-10);
    CHECK(s.isApprox(s.transpose(), 1e-12));
  }
}

TEST_CASE("stationary covariance: unstable drift is signaled") {
  MatrixXd a(2, 2);
  a << 0.1, 0.0, 0.0, -1.0;
  CHECK_THROWS_AS(stationary_covariance(a, MatrixXd::Identity(2, 2)), NumericalError);
}

TEST_CASE("discretize: non-finite input is signaled") {
  MatrixXd a(1, 1);
  a << std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(discretize_dynamics(a, VectorXd::Zero(1), MatrixXd::Identity(1, 1), 1.0),
                  NumericalError);
}

TEST_CASE("psd_project clips negative eigenvalues and reports them") {
  MatrixXd m(2, 2);
  m << 1.0, 0.0, 0.0, -0.5;
  long floored = 0;
  const MatrixXd p = psd_project(m, &floored);
  CHECK(floored == 1);
  CHECK(p(0, 0) == doctest::Approx(1.0));
  CHECK(p(1, 1) == doctest::Approx(0.0));
}
