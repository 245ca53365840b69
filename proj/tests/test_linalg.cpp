#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>

#include "arlp/linalg.hpp"

using namespace arlp::linalg;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_CASE("svec round trip preserves inner products") {
  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_index(12));
    MatrixXd X(n, n), Y(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j <= i; ++j) {
        X(i, j) = X(j, i) = rng.uniform(-2, 2);
        Y(i, j) = Y(j, i) = rng.uniform(-2, 2);
      }
    const VectorXd vx = svec(X), vy = svec(Y);
    CHECK(vx.size() == svec_dim(n));
    CHECK((smat(vx) - X).cwiseAbs().maxCoeff() == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(vx.dot(vy) == doctest::Approx((X.cwiseProduct(Y)).sum()).epsilon(1e-12));
  }
}

TEST_CASE("svec_index matches svec layout") {
  const int n = 5;
  MatrixXd X = MatrixXd::Zero(n, n);
  X(3, 1) = X(1, 3) = 1.0;
  const VectorXd v = svec(X);
  for (int t = 0; t < v.size(); ++t) {
    if (t == svec_index(n, 3, 1)) {
      CHECK(v[t] == doctest::Approx(std::sqrt(2.0)));
    } else {
      CHECK(v[t] == 0.0);
    }
  }
}

TEST_CASE("min_eigenvalue on known matrices") {
  MatrixXd J = MatrixXd::Zero(3, 3);
  J(0, 0) = 1;
  J(1, 1) = -1;
  J(2, 2) = -1;
  CHECK(min_eigenvalue(J) == doctest::Approx(-1.0));
  CHECK(min_eigenvalue(MatrixXd::Identity(4, 4)) == doctest::Approx(1.0));
}

TEST_CASE("rng is deterministic and in range") {
  Rng a(7), b(7);
  for (int i = 0; i < 1000; ++i) {
    const double ua = a.uniform();
    CHECK(ua == b.uniform());
    CHECK(ua >= 0.0);
    CHECK(ua < 1.0);
  }
  Rng c(8);
  double mean = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) mean += c.gaussian();
  mean /= n;
  CHECK(std::abs(mean) < 0.05);
}

TEST_CASE("ball_point stays in the unit ball") {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    CHECK(rng.ball_point(6).norm() <= 1.0 + 1e-12);
    CHECK(rng.unit_direction(4).norm() == doctest::Approx(1.0));
  }
}
