#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>

#include "arlp/linalg.hpp"
#include "arlp/solver.hpp"

using namespace arlp::solver;
using arlp::linalg::Rng;
using arlp::linalg::svec;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// min x  s.t.  x >= lo
ConicProgram bound_lp(double lo) {
  ConicProgram p;
  const int x = p.add_vars(1, "x");
  p.set_objective(x, 1.0);
  const int r = p.add_block(ConeKind::Nonneg, 1);
  p.add_entry(r, x, -1.0);
  p.set_rhs(r, -lo);
  return p;
}

}  // namespace

TEST_CASE("lp: min x s.t. x >= 1") {
  auto p = bound_lp(1.0);
  auto sol = solve(p);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.x[0] == doctest::Approx(1.0).epsilon(1e-7));
  auto rep = check_solution(p, sol);
  CHECK(rep.primal_residual <= 1e-8);
  CHECK(rep.dual_residual <= 1e-8);
  CHECK_FALSE(rep.mismatch_flagged);
}

TEST_CASE("lp with equalities and boxes") {
  // min -x1 - 2 x2  s.t.  x1 + x2 = 1, 0 <= x1, 0 <= x2 <= 0.75  ->  x2 = 0.75
  ConicProgram p;
  const int x = p.add_vars(2, "x");
  p.set_objective(x, -1.0);
  p.set_objective(x + 1, -2.0);
  const int eq = p.add_block(ConeKind::Zero, 1);
  p.add_entry(eq, x, 1.0);
  p.add_entry(eq, x + 1, 1.0);
  p.set_rhs(eq, 1.0);
  const int lo = p.add_block(ConeKind::Nonneg, 2);
  p.add_entry(lo, x, -1.0);
  p.add_entry(lo + 1, x + 1, -1.0);
  const int hi = p.add_block(ConeKind::Nonneg, 1);
  p.add_entry(hi, x + 1, 1.0);
  p.set_rhs(hi, 0.75);
  auto sol = solve(p);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.x[0] == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(sol.x[1] == doctest::Approx(0.75).epsilon(1e-6));
  CHECK(sol.primal_objective == doctest::Approx(-1.75).epsilon(1e-7));
}

TEST_CASE("soc: distance objective") {
  // min t s.t. (t, 3, 4) in SOC  ->  t = 5
  ConicProgram p;
  const int t = p.add_vars(1, "t");
  p.set_objective(t, 1.0);
  const int r = p.add_block(ConeKind::SecondOrder, 3);
  p.add_entry(r, t, -1.0);
  p.set_rhs(r + 1, 3.0);
  p.set_rhs(r + 2, 4.0);
  auto sol = solve(p);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.x[0] == doctest::Approx(5.0).epsilon(1e-7));
}

TEST_CASE("sdp: max eigenvalue of Diag(1,-1)") {
  // min t s.t. t I - J >= 0  ->  t = 1
  ConicProgram p;
  const int t = p.add_vars(1, "t");
  p.set_objective(t, 1.0);
  const int r = p.add_block(ConeKind::Psd, 2);
  MatrixXd I2 = MatrixXd::Identity(2, 2);
  MatrixXd J = I2;
  J(1, 1) = -1;
  const VectorXd vi = svec(I2), vj = svec(-J);
  for (int k = 0; k < vi.size(); ++k) {
    p.add_entry(r + k, t, -vi[k]);
    p.set_rhs(r + k, vj[k]);
  }
  auto sol = solve(p);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.x[0] == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("sdp: random max-eigenvalue problems match the eigensolver") {
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 3 + static_cast<int>(rng.uniform_index(6));
    MatrixXd C(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j <= i; ++j) C(i, j) = C(j, i) = rng.uniform(-1, 1);
    ConicProgram p;
    const int t = p.add_vars(1, "t");
    p.set_objective(t, 1.0);
    const int r = p.add_block(ConeKind::Psd, n);
    const VectorXd vi = svec(MatrixXd::Identity(n, n)), vc = svec(-C);
    for (int k = 0; k < vi.size(); ++k) {
      p.add_entry(r + k, t, -vi[k]);
      p.set_rhs(r + k, vc[k]);
    }
    SolverSettings st;
    st.eps = 1e-7;  // degenerate optimal faces cap double-precision normal equations near 1e-8
    auto sol = solve(p, st);
    REQUIRE(sol.status == SolveStatus::Optimal);
    const double lmax = arlp::linalg::sym_eigenvalues(C).maxCoeff();
    CHECK(sol.x[0] == doctest::Approx(lmax).epsilon(1e-6));
    auto rep = check_solution(p, sol);
    CHECK(rep.worst_slack_violation <= 1e-7);
    CHECK(rep.weak_duality_slack <= 1e-7);
  }
}

TEST_CASE("sdp with equality rows: min trace X s.t. X11 = 1, X psd") {
  ConicProgram p;
  const int n = 3;
  const int sd = arlp::linalg::svec_dim(n);
  const int xv = p.add_vars(sd, "X");
  const VectorXd tr = svec(MatrixXd::Identity(n, n));
  for (int k = 0; k < sd; ++k) p.set_objective(xv + k, tr[k]);
  const int rp = p.add_block(ConeKind::Psd, n);
  for (int k = 0; k < sd; ++k) p.add_entry(rp + k, xv + k, -1.0);
  const int re = p.add_block(ConeKind::Zero, 1);
  p.add_entry(re, xv + arlp::linalg::svec_index(n, 0, 0), 1.0);
  p.set_rhs(re, 1.0);
  auto sol = solve(p);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.primal_objective == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("primal infeasible lp is certified") {
  // x >= 1 and -x >= 0
  ConicProgram p;
  const int x = p.add_vars(1, "x");
  p.set_objective(x, 1.0);
  const int r = p.add_block(ConeKind::Nonneg, 2);
  p.add_entry(r, x, -1.0);
  p.set_rhs(r, -1.0);
  p.add_entry(r + 1, x, 1.0);
  auto sol = solve(p);
  CHECK(sol.status == SolveStatus::PrimalInfeasible);
}

TEST_CASE("unbounded lp reported as dual infeasible") {
  // min -x s.t. x >= 0
  ConicProgram p;
  const int x = p.add_vars(1, "x");
  p.set_objective(x, -1.0);
  const int r = p.add_block(ConeKind::Nonneg, 1);
  p.add_entry(r, x, -1.0);
  auto sol = solve(p);
  CHECK(sol.status == SolveStatus::DualInfeasible);
}

TEST_CASE("mixed cone program with all block kinds") {
  // min x1 + x2 + t
  //  s.t. x1 + x2 + t = 2 (zero), x1 >= 0.3, (t, x1 - x2) in SOC(2),
  //       [x1, 0; 0, x2] - 0.1 I psd (diagonal entries >= 0.1)
  ConicProgram p;
  const int v = p.add_vars(3, "v");
  p.set_objective(v, 1.0);
  p.set_objective(v + 1, 1.0);
  p.set_objective(v + 2, 1.0);
  const int eq = p.add_block(ConeKind::Zero, 1);
  for (int k = 0; k < 3; ++k) p.add_entry(eq, v + k, 1.0);
  p.set_rhs(eq, 2.0);
  const int lo = p.add_block(ConeKind::Nonneg, 1);
  p.add_entry(lo, v, -1.0);
  p.set_rhs(lo, -0.3);
  const int sr = p.add_block(ConeKind::SecondOrder, 2);
  p.add_entry(sr, v + 2, -1.0);
  p.add_entry(sr + 1, v, -1.0);
  p.add_entry(sr + 1, v + 1, 1.0);
  const int pr = p.add_block(ConeKind::Psd, 2);
  // slack = diag(x1, x2) - 0.1 I
  p.add_entry(pr + 0, v, -1.0);
  p.set_rhs(pr + 0, -0.1);
  p.add_entry(pr + 2, v + 1, -1.0);
  p.set_rhs(pr + 2, -0.1);
  auto sol = solve(p);
  REQUIRE(sol.status == SolveStatus::Optimal);
  // objective equals 2 by the equality; check feasibility of the pieces
  CHECK(sol.primal_objective == doctest::Approx(2.0).epsilon(1e-7));
  CHECK(sol.x[0] >= 0.3 - 1e-7);
  CHECK(sol.x[2] >= std::abs(sol.x[0] - sol.x[1]) - 1e-6);
  auto rep = check_solution(p, sol);
  CHECK(rep.worst_slack_violation <= 1e-7);
  CHECK(rep.worst_dual_violation <= 1e-7);
}

TEST_CASE("deterministic iterate trace for identical solves") {
  Rng rng(5);
  ConicProgram p;
  const int n = 8, m = 14;
  const int x = p.add_vars(n, "x");
  for (int j = 0; j < n; ++j) p.set_objective(x + j, rng.uniform(-1, 1));
  const int r = p.add_block(ConeKind::Nonneg, m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) p.add_entry(r + i, x + j, rng.uniform(-1, 1));
    p.set_rhs(r + i, rng.uniform(0.5, 2.0));
  }
  // keep it bounded
  const int box = p.add_block(ConeKind::Nonneg, 2 * n);
  for (int j = 0; j < n; ++j) {
    p.add_entry(box + j, x + j, -1.0);
    p.set_rhs(box + j, 10.0);
    p.add_entry(box + n + j, x + j, 1.0);
    p.set_rhs(box + n + j, 10.0);
  }
  auto s1 = solve(p);
  auto s2 = solve(p);
  REQUIRE(s1.status == s2.status);
  REQUIRE(s1.trace.size() == s2.trace.size());
  for (size_t i = 0; i < s1.trace.size(); ++i) {
    CHECK(s1.trace[i].mu == s2.trace[i].mu);
    CHECK(s1.trace[i].pcost == s2.trace[i].pcost);
    CHECK(s1.trace[i].step == s2.trace[i].step);
  }
}

TEST_CASE("check_solution flags a perturbed solution") {
  auto p = bound_lp(1.0);
  auto sol = solve(p);
  REQUIRE(sol.status == SolveStatus::Optimal);
  sol.x[0] += 1e-3;
  sol.s[0] += 2e-3;  // break Ax + s = b
  auto rep = check_solution(p, sol);
  CHECK(rep.primal_residual >= 1e-4);
  CHECK(rep.mismatch_flagged);
}

TEST_CASE("random feasible socp satisfies weak duality and cone membership") {
  Rng rng(17);
  for (int trial = 0; trial < 4; ++trial) {
    const int n = 6;
    ConicProgram p;
    const int x = p.add_vars(n, "x");
    for (int j = 0; j < n; ++j) p.set_objective(x + j, rng.uniform(-1, 1));
    // || x - x0 || <= 3 via (3, x - x0) in SOC
    const int r = p.add_block(ConeKind::SecondOrder, n + 1);
    p.set_rhs(r, 3.0);
    VectorXd x0(n);
    for (int j = 0; j < n; ++j) {
      x0[j] = rng.uniform(-1, 1);
      p.add_entry(r + 1 + j, x + j, -1.0);
      p.set_rhs(r + 1 + j, -x0[j]);
    }
    auto sol = solve(p);
    REQUIRE(sol.status == SolveStatus::Optimal);
    // optimum is x0 - 3 c / ||c||
    const VectorXd c = p.objective();
    const double expect = c.dot(x0) - 3.0 * c.norm();
    CHECK(sol.primal_objective == doctest::Approx(expect).epsilon(1e-6));
    auto rep = check_solution(p, sol);
    CHECK(rep.worst_slack_violation <= 1e-7);
    CHECK(rep.relative_gap <= 1e-6);
  }
}

TEST_CASE("program stats and json dump") {
  auto p = bound_lp(2.0);
  p.label = "bound";
  auto st = p.stats();
  CHECK(st.scalars == 1);
  CHECK(st.nonneg_rows == 1);
  const std::string js = p.to_json();
  CHECK(js.find("conic-program/1") != std::string::npos);
  CHECK(js.find("nonneg") != std::string::npos);
}
