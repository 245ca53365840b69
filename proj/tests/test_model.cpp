#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>

#include "arlp/instances.hpp"
#include "arlp/model.hpp"
#include "arlp/oracles.hpp"

using namespace arlp;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_CASE("constructor rejects inconsistent dimensions") {
  auto soc = cones::UncertaintyCone::second_order(3);
  MatrixXd A(2, 1), B(2, 2), F(2, 3);
  A.setZero();
  B.setIdentity();
  F.setZero();
  CHECK_THROWS(model::AroInstance(A, B, VectorXd::Zero(2), VectorXd::Zero(2), F,
                                  model::FirstStageSet::free_reals(2), soc));
  CHECK_THROWS(model::AroInstance(A, B, VectorXd::Zero(1), VectorXd::Zero(3), F,
                                  model::FirstStageSet::free_reals(1), soc));
  CHECK_THROWS(model::FirstStageSet::box((VectorXd(1) << 2).finished(),
                                         (VectorXd(1) << 1).finished()));
}

TEST_CASE("homogenization matches the block formula exactly") {
  auto inst = instances::temporal(2, 2);
  auto hom = model::homogenize(inst);
  const int k = 3, m = 4, n2 = 2;
  CHECK(hom.E.rows() == n2);
  CHECK(hom.E.cols() == k + m);
  // E = (-d e1', B'): first column is -d, right block is B'
  for (int q = 0; q < n2; ++q) {
    CHECK(hom.E(q, 0) == -inst.d[q]);
    for (int j = 1; j < k; ++j) CHECK(hom.E(q, j) == 0.0);
    for (int i = 0; i < m; ++i) CHECK(hom.E(q, k + i) == inst.B(i, q));
  }
  CHECK(hom.g1[0] == 1.0);
  CHECK(hom.g1.tail(k + m - 1).cwiseAbs().maxCoeff() == 0.0);

  // E (e1; w) = B'w - d for any w
  linalg::Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    VectorXd w(m);
    for (int i = 0; i < m; ++i) w[i] = rng.uniform(-2, 2);
    VectorXd z(k + m);
    z.setZero();
    z[0] = 1.0;
    z.tail(m) = w;
    const VectorXd lhs = hom.E * z;
    const VectorXd rhs = inst.B.transpose() * w - inst.d;
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() == 0.0);
  }

  // d = 0 zeroes the left block
  auto inst0 = model::AroInstance(inst.A, inst.B, inst.c, VectorXd::Zero(n2), inst.F,
                                  inst.first_stage, inst.uncertainty);
  CHECK(model::homogenize(inst0).E.col(0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("radius bound on the temporal family") {
  auto inst = instances::temporal(2, 2);
  auto rb = model::compute_radius(inst);
  CHECK(rb.method == "vertex-enumeration");
  CHECK(rb.r_w == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(rb.r_z == doctest::Approx(2.0));
  CHECK(rb.r == doctest::Approx(4.0));

  // every enumerated vertex of W satisfies the bound
  auto wv = oracles::w_vertices(inst);
  for (const auto& v : wv.vertices) CHECK(v.squaredNorm() <= rb.r_w + 1e-9);

  // 1-norm uncertainty: slice vertices are +-e_i, so r_z stays 2
  auto inst1 = instances::temporal(3, 1);
  auto rb1 = model::compute_radius(inst1);
  CHECK(rb1.r_w == doctest::Approx(3.0));
  CHECK(rb1.r_z == doctest::Approx(2.0));
}

TEST_CASE("radius bound on the newsvendor") {
  auto inst = instances::newsvendor();
  auto rb = model::compute_radius(inst);
  // pairs (w_j, w_{3+j}) sum to one, so every vertex has squared norm 3
  CHECK(rb.r_w == doctest::Approx(3.0));
  auto wv = oracles::w_vertices(inst);
  CHECK(wv.vertices.size() == 8);
  for (const auto& v : wv.vertices) CHECK(v.squaredNorm() <= rb.r_w + 1e-9);
}

TEST_CASE("validation on the benchmark families") {
  for (int s : {2, 3}) {
    for (int j : {1, 2}) {
      auto rep = model::validate(instances::temporal(s, j));
      CHECK(rep.all_passed());
      CHECK(rep.w_nonempty);
      CHECK(rep.affine_feasible);
      CHECK(rep.slice_bounded);
    }
  }
  auto rep = model::validate(instances::newsvendor());
  CHECK(rep.all_passed());
  CHECK(rep.affine_feasible);
  CHECK_FALSE(rep.warnings.empty());  // Assumption-4 notice
}

TEST_CASE("validation detects an empty W") {
  auto soc = cones::UncertaintyCone::second_order(2);
  MatrixXd A(1, 1), B = MatrixXd::Zero(1, 1), F(1, 2);
  A(0, 0) = 1;
  F.setZero();
  VectorXd d(1);
  d << 1;  // B = 0 but d != 0
  model::AroInstance inst(A, B, VectorXd::Zero(1), d, F, model::FirstStageSet::free_reals(1),
                          soc, "w-empty");
  auto rep = model::validate(inst);
  CHECK_FALSE(rep.w_nonempty);
  CHECK_FALSE(rep.all_passed());
}

namespace {
double max_abs_diff(const MatrixXd& a, const MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return 1e300;
  if (a.size() == 0) return 0.0;
  return (a - b).cwiseAbs().maxCoeff();
}
}  // namespace

TEST_CASE("json round trip") {
  for (auto inst : {instances::newsvendor(), instances::temporal(3, 1),
                    instances::lotsizing(instances::LotSizingUncertainty::Ball)}) {
    const std::string js = model::to_json(inst);
    auto back = model::from_json(js);
    CHECK(back.label == inst.label);
    CHECK(back.sense_flipped == inst.sense_flipped);
    CHECK(max_abs_diff(back.A, inst.A) == 0.0);
    CHECK(max_abs_diff(back.B, inst.B) == 0.0);
    CHECK(max_abs_diff(back.F, inst.F) == 0.0);
    CHECK(max_abs_diff(back.c, inst.c) == 0.0);
    CHECK(max_abs_diff(back.d, inst.d) == 0.0);
    CHECK(back.uncertainty == inst.uncertainty);
    for (int i = 0; i < inst.n1(); ++i) {
      CHECK(back.first_stage.lower[i] == inst.first_stage.lower[i]);
      CHECK(back.first_stage.upper[i] == inst.first_stage.upper[i]);
    }
  }
}
