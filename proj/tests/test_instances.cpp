#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>

#include "arlp/cones.hpp"
#include "arlp/instances.hpp"
#include "arlp/model.hpp"

using namespace arlp;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_CASE("temporal dimensions and data pattern") {
  auto t22 = instances::temporal(2, 2);
  CHECK(t22.m() == 4);
  CHECK(t22.k() == 3);
  CHECK(t22.n2() == 2);
  CHECK(t22.n1() == 0);
  // first column of F is all 1/2
  for (int r = 0; r < 4; ++r) CHECK(t22.F(r, 0) == doctest::Approx(0.5));
  // rows 3-4 of B are (-1, 1)
  CHECK(t22.B(2, 0) == -1.0);
  CHECK(t22.B(2, 1) == 1.0);
  CHECK(t22.B(3, 0) == -1.0);
  CHECK(t22.B(3, 1) == 1.0);
  // d is the last unit vector
  CHECK(t22.d[0] == 0.0);
  CHECK(t22.d[1] == 1.0);

  auto t31 = instances::temporal(3, 1);
  CHECK(t31.uncertainty.kind() == cones::UncertaintyCone::Kind::Polyhedral);
  CHECK(t31.uncertainty.P().rows() == 8);  // 2^s sign rows
  for (int r = 0; r < 8; ++r) {
    CHECK(t31.uncertainty.P()(r, 0) == 1.0);
    for (int c = 1; c < 4; ++c) CHECK(std::abs(t31.uncertainty.P()(r, c)) == 1.0);
  }
  CHECK_THROWS(instances::temporal(1, 2));
  CHECK_THROWS(instances::temporal(11, 1));
}

TEST_CASE("newsvendor data") {
  auto inst = instances::newsvendor();
  CHECK(inst.m() == 6);
  CHECK(inst.k() == 7);
  CHECK(inst.n1() == 3);
  CHECK(inst.n2() == 3);
  CHECK(inst.sense_flipped);
  CHECK(inst.c.cwiseAbs().maxCoeff() == 0.0);
  CHECK(inst.d.minCoeff() == 1.0);
  // shortage rows carry coefficient r_j + p_j - c_j on x_j
  CHECK(inst.A(3, 0) == doctest::Approx(70));
  CHECK(inst.A(4, 1) == doctest::Approx(90));
  CHECK(inst.A(5, 2) == doctest::Approx(110));
  // salvage rows carry s_j - c_j
  CHECK(inst.A(0, 0) == doctest::Approx(-50));
  CHECK(inst.A(1, 1) == doctest::Approx(-35));
  CHECK(inst.A(2, 2) == doctest::Approx(-10));
}

TEST_CASE("lot-sizing data") {
  auto inst = instances::lotsizing(instances::LotSizingUncertainty::Ball);
  CHECK(inst.n1() == 8);
  CHECK(inst.n2() == 56);
  CHECK(inst.m() == 64);
  CHECK(inst.k() == 9);
  CHECK(inst.uncertainty.kind() == cones::UncertaintyCone::Kind::SecondOrder);
  CHECK(inst.c.minCoeff() == 20.0);
  CHECK(inst.c.maxCoeff() == 20.0);
  // transport costs: symmetric table with zero diagonal embedded in d;
  // spot-check pair (1,2) -> 4 and (8,3) -> 2 in one-based labels
  // pairs are ordered (i, j), i != j, row-major
  auto pair_index = [&](int i, int j) {
    int t = 0;
    for (int a = 0; a < 8; ++a)
      for (int b = 0; b < 8; ++b) {
        if (a == b) continue;
        if (a == i && b == j) return t;
        ++t;
      }
    return -1;
  };
  CHECK(inst.d[pair_index(0, 1)] == doctest::Approx(4));
  CHECK(inst.d[pair_index(7, 2)] == doctest::Approx(2));
  CHECK(inst.d[pair_index(4, 6)] == doctest::Approx(2));
  // symmetry of the cost table
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j)
      if (i != j) CHECK(inst.d[pair_index(i, j)] == inst.d[pair_index(j, i)]);
  // balance rows: inflow minus outflow with the stock
  CHECK(inst.A(3, 3) == 1.0);
  CHECK(inst.B(0, pair_index(0, 1)) == -1.0);
  CHECK(inst.B(1, pair_index(0, 1)) == 1.0);
  // F scales the ball coordinates by Gamma = 10 sqrt(8)
  CHECK(inst.F(2, 3) == doctest::Approx(10.0 * std::sqrt(8.0)));

  auto budget = instances::lotsizing(instances::LotSizingUncertainty::Budget);
  CHECK(budget.uncertainty.kind() == cones::UncertaintyCone::Kind::Polyhedral);
  CHECK(budget.uncertainty.P().rows() == 17);
  CHECK(budget.F(2, 3) == doctest::Approx(1.0));
}

TEST_CASE("random instances satisfy the construction guarantees") {
  for (std::uint64_t seed : {1ull, 7ull, 42ull}) {
    auto inst = instances::random_instance(seed);
    CHECK(inst.k() == 17);
    CHECK(inst.m() == 16);
    CHECK(inst.n1() == 3);
    CHECK(inst.n2() == 5);
    CHECK(inst.c.minCoeff() >= 0.0);
    CHECK(inst.d.minCoeff() >= 0.0);
    CHECK(inst.first_stage.is_free());
    // rows of F lie in -U-hat, so F u <= 0 on the slice
    linalg::Rng rng(seed + 1);
    cones::SliceSampler sampler(inst.uncertainty);
    for (int t = 0; t < 100; ++t) {
      const VectorXd u = sampler(rng);
      CHECK((inst.F * u).maxCoeff() <= 1e-12);
    }
    CHECK(inst.A.cwiseAbs().maxCoeff() <= 5.0);
    CHECK(inst.F.cwiseAbs().maxCoeff() <= 5.0);
  }
  // determinism
  auto a = instances::random_instance(5);
  auto b = instances::random_instance(5);
  CHECK((a.A - b.A).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.F - b.F).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("every generator passes validation") {
  std::vector<model::AroInstance> insts;
  insts.push_back(instances::temporal(2, 1));
  insts.push_back(instances::temporal(4, 2));
  insts.push_back(instances::newsvendor());
  insts.push_back(instances::lotsizing(instances::LotSizingUncertainty::Ball));
  insts.push_back(instances::random_instance(3));
  for (const auto& inst : insts) {
    auto rep = model::validate(inst);
    CHECK(rep.all_passed());
  }
}
