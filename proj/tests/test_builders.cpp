#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>

#include "arlp/builders.hpp"
#include "arlp/instances.hpp"
#include "arlp/model.hpp"
#include "arlp/oracles.hpp"
#include "arlp/solver.hpp"

using namespace arlp;
using builders::IbOptions;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

double solve_value(const builders::BuildResult& built, double eps = 1e-8) {
  solver::SolverSettings st;
  st.eps = eps;
  auto sol = solver::solve(built.program, st);
  REQUIRE(sol.status == solver::SolveStatus::Optimal);
  return builders::objective_value(built, sol);
}

// Degenerate SDPs (no strict complementarity) cap interior-point accuracy
// near sqrt(machine eps); accept a truncated run whose best iterate still
// carries small residuals.
double solve_value_tolerant(const builders::BuildResult& built, double resid_cap = 1e-4) {
  auto sol = solver::solve(built.program);
  const double worst =
      std::max({sol.primal_residual, sol.dual_residual, sol.relative_gap});
  const bool ok = sol.status == solver::SolveStatus::Optimal ||
                  (sol.status == solver::SolveStatus::IterLimit && worst <= resid_cap);
  REQUIRE(ok);
  return builders::objective_value(built, sol);
}

}  // namespace

TEST_CASE("affine value equals s on the temporal family") {
  for (int s : {2, 3, 4}) {
    for (int j : {1, 2}) {
      auto inst = instances::temporal(s, j);
      auto built = builders::build_affine(inst);
      CHECK(solve_value(built) == doctest::Approx(static_cast<double>(s)).epsilon(1e-6));
    }
  }
}

TEST_CASE("assembler identities") {
  auto inst = instances::random_instance(3);
  builders::GxHyAssembler as(inst);
  linalg::Rng rng(8);
  const int k = inst.k(), m = inst.m(), n1 = inst.n1(), n2 = inst.n2();

  VectorXd x(n1);
  for (int i = 0; i < n1; ++i) x[i] = rng.uniform(-2, 2);
  MatrixXd G = as.G(x);
  const MatrixXd W = inst.F - inst.A * x * VectorXd::Unit(k, 0).transpose();
  CHECK((G.bottomLeftCorner(m, k) - W).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK(G.topLeftCorner(k, k).cwiseAbs().maxCoeff() == 0.0);
  CHECK(G.bottomRightCorner(m, m).cwiseAbs().maxCoeff() == 0.0);
  CHECK((G - G.transpose()).cwiseAbs().maxCoeff() == 0.0);

  // E'L' + L E with L = (Y'; 0) equals H(Y) entrywise
  MatrixXd Y(n2, k);
  for (int i = 0; i < n2; ++i)
    for (int j = 0; j < k; ++j) Y(i, j) = rng.uniform(-1, 1);
  MatrixXd L = MatrixXd::Zero(k + m, n2);
  L.topRows(k) = Y.transpose();
  CHECK((as.sym_EL(L) - as.H(Y)).cwiseAbs().maxCoeff() <= 1e-12);

  // E'Diag(v)E against dense evaluation
  VectorXd v(n2);
  for (int i = 0; i < n2; ++i) v[i] = rng.uniform(-1, 1);
  auto hom = as.homogenization();
  CHECK((as.EDiagE(v) - hom.E.transpose() * v.asDiagonal() * hom.E).cwiseAbs().maxCoeff() <=
        1e-12);
}

TEST_CASE("ia reproduces the affine value") {
  std::vector<model::AroInstance> insts;
  insts.push_back(instances::temporal(3, 2));
  insts.push_back(instances::temporal(2, 1));
  insts.push_back(instances::newsvendor());
  insts.push_back(instances::random_instance(11));
  for (const auto& inst : insts) {
    const double va = solve_value(builders::build_affine(inst));
    const double vi = solve_value(builders::build_ia(inst));
    CHECK(vi == doctest::Approx(va).epsilon(1e-5));
  }
}

TEST_CASE("ib rho-path brackets the adjustable value on the temporal family") {
  // value(rho) lies in [v_ar, v_ar + r rho] for each fixed rho > 0
  for (int s : {2, 3, 4}) {
    auto inst = instances::temporal(s, 2);
    auto radius = model::compute_radius(inst);
    const double target = 0.5 * (std::sqrt(static_cast<double>(s)) + s);
    for (double rho : {1e-1, 1e-2}) {
      IbOptions opt;
      opt.form = IbOptions::Form::VDiagonal;
      opt.regularize = true;
      opt.radius = radius;
      opt.fixed_rho = rho;
      auto built = builders::build_ib(inst, opt);
      const double v = solve_value_tolerant(built);
      CHECK(v >= target - 1e-3);
      CHECK(v <= target + radius.r * rho + 1e-3);
    }
  }
}

TEST_CASE("ib lambda-general sits between the adjustable and affine values") {
  for (int s : {2, 3}) {
    auto inst = instances::temporal(s, 2);
    auto built = builders::build_ib(inst);
    const double v = solve_value_tolerant(built);
    const double var = 0.5 * (std::sqrt(static_cast<double>(s)) + s);
    CHECK(v >= var - 1e-5);
    CHECK(v <= static_cast<double>(s) + 1e-5);
  }
}

TEST_CASE("restriction map: a solved IA point is IB-feasible with the same value") {
  auto inst = instances::random_instance(21);
  auto built = builders::build_ia(inst);
  auto sol = solver::solve(built.program);
  REQUIRE(sol.status == solver::SolveStatus::Optimal);
  auto ext = builders::extract_affine(built, sol, inst);

  builders::GxHyAssembler as(inst);
  const int n = inst.k() + inst.m();
  MatrixXd L = MatrixXd::Zero(n, inst.n2());
  L.topRows(inst.k()) = ext.Y.transpose();
  MatrixXd T = MatrixXd::Zero(n, n);
  T(0, 0) = ext.lambda;
  T -= 0.5 * as.G(ext.x);
  T += 0.5 * as.sym_EL(L);
  // identical to the IA target by the assembler identity
  MatrixXd Tia = MatrixXd::Zero(n, n);
  Tia(0, 0) = ext.lambda;
  Tia -= 0.5 * as.G(ext.x);
  Tia += 0.5 * as.H(ext.Y);
  CHECK((T - Tia).cwiseAbs().maxCoeff() <= 1e-10);

  cones::MatrixConeSpec spec(inst.k(), inst.m(), cones::MatrixConeVariant::IB, inst.uncertainty);
  auto cert = builders::membership_check(spec, T, 1e-6);
  CHECK(cert.has_value());
}

TEST_CASE("ib extraction reconstructs its certificate") {
  auto inst = instances::random_instance(5);
  auto built = builders::build_ib(inst);
  auto sol = solver::solve(built.program);
  REQUIRE((sol.status == solver::SolveStatus::Optimal ||
           sol.status == solver::SolveStatus::IterLimit));
  REQUIRE(std::max({sol.primal_residual, sol.dual_residual, sol.relative_gap}) <= 1e-5);
  auto ext = builders::extract_ib(built, sol, inst);
  CHECK(ext.reconstruction_error <= 1e-6);
  CHECK(ext.value == doctest::Approx(sol.primal_objective).epsilon(1e-6));
  // ordering against the affine side
  const double va = solve_value(builders::build_affine(inst));
  CHECK(ext.value <= va + 1e-5 * (1.0 + std::abs(va)));
}

TEST_CASE("diagonal multiplier form upper-bounds the general form on the temporal family") {
  for (int s : {2, 3}) {
    auto inst = instances::temporal(s, 2);
    IbOptions diag;
    diag.form = IbOptions::Form::VDiagonal;
    auto vd = solve_value_tolerant(builders::build_ib(inst, diag));
    auto vg = solve_value_tolerant(builders::build_ib(inst));
    CHECK(vd >= vg - 1e-4 * (1.0 + std::abs(vg)));
  }
}

TEST_CASE("dual relaxation value on the temporal family") {
  for (int s : {2, 3, 4}) {
    auto inst = instances::temporal(s, 2);
    auto radius = model::compute_radius(inst);
    auto built = builders::build_dual_relaxation(inst, VectorXd(0), radius);
    const double target = 0.5 * (std::sqrt(static_cast<double>(s)) + s);
    CHECK(solve_value_tolerant(built) == doctest::Approx(target).epsilon(1e-5));
  }
  for (int s : {2, 3}) {
    auto inst = instances::temporal(s, 1);
    auto radius = model::compute_radius(inst);
    auto built = builders::build_dual_relaxation(inst, VectorXd(0), radius);
    const double target = 0.5 * (std::sqrt(static_cast<double>(s)) + s);
    CHECK(solve_value_tolerant(built) == doctest::Approx(target).epsilon(1e-5));
  }
}

TEST_CASE("weak duality between the fixed-x restriction and the dual relaxation") {
  auto inst = instances::random_instance(33);
  auto radius = model::compute_radius(inst);
  const VectorXd xhat = VectorXd::Zero(inst.n1());

  // pin x by a degenerate box; the unregularized restriction upper-bounds
  // the relaxation value by weak duality
  model::AroInstance pinned(inst.A, inst.B, inst.c, inst.d, inst.F,
                            model::FirstStageSet::box(xhat, xhat), inst.uncertainty,
                            inst.label + "-pinned");
  auto prim = builders::build_ib(pinned);
  const double vprim = solve_value_tolerant(prim) - inst.c.dot(xhat);
  auto dual = builders::build_dual_relaxation(inst, xhat, radius);
  const double vdual = solve_value_tolerant(dual);
  CHECK(vprim >= vdual - 1e-5 * (1.0 + std::abs(vdual)));
}

TEST_CASE("newsvendor affine and first stage") {
  auto inst = instances::newsvendor();
  auto built = builders::build_affine(inst);
  auto sol = solver::solve(built.program);
  REQUIRE(sol.status == solver::SolveStatus::Optimal);
  auto ext = builders::extract_affine(built, sol, inst);
  CHECK(ext.value == doctest::Approx(-41.83).epsilon(2e-3));
  CHECK(ext.x[0] == doctest::Approx(52.083).epsilon(1e-3));
  CHECK(ext.x[1] == doctest::Approx(104.400).epsilon(1e-3));
  CHECK(ext.x[2] == doctest::Approx(80.000).epsilon(1e-3));
  CHECK(ext.feasibility_violation <= 1e-6);
}

TEST_CASE("program json dump carries the cone inventory") {
  auto built = builders::build_ib(instances::temporal(2, 2));
  const auto st = built.program.stats();
  CHECK(st.psd_orders.size() == 1);
  CHECK(st.psd_orders[0] == 7);  // k + m = 3 + 4
  CHECK(st.soc_blocks == 5);     // alpha + one per row of S21 (m = 4)
  const std::string js = built.program.to_json();
  CHECK(js.find("psd") != std::string::npos);
}
