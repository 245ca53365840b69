// Assembles the four conic programs behind the bound chain
// v_AR <= v_IB <= v_IA = v_Aff in solver standard form:
//
//   affine   min c'x + lambda, lambda e1 - Y'd in U*, Rows(A x e1' - F + B Y) in U*
//   IA       min c'x + lambda, lambda g1 g1' - G(x)/2 + H(Y)/2 in IA(U x R+^m)
//   IB       min c'x + lambda (+ r rho),
//            lambda g1 g1' - G(x)/2 + (E'L' + L E)/2 (or E'Diag(v)E) + rho I
//              in IB(U x R+^m)
//   dual     max (F - A x e1') . Z21 over the SDP relaxation at fixed x
//
// and maps solver output back to decision-level objects with residuals
// recomputed from the raw instance data.
#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "arlp/cones.hpp"
#include "arlp/model.hpp"
#include "arlp/solver.hpp"

namespace arlp::builders {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Index maps placing G(x) and H(Y) into constraint rows as affine
/// functions of x and Y, plus numeric evaluators used by the identity
/// tests.
class GxHyAssembler {
public:
  explicit GxHyAssembler(const model::AroInstance& inst);

  /// G(x) = [0, (F - A x e1')' ; F - A x e1', 0], order k+m.
  MatrixXd G(const VectorXd& x) const;
  /// H(Y) = [-e1 d'Y - Y'd e1', (BY)' ; BY, 0], order k+m.
  MatrixXd H(const MatrixXd& Y) const;
  /// E' L' + L E for L of shape (k+m) x n2.
  MatrixXd sym_EL(const MatrixXd& L) const;
  /// E' Diag(v) E.
  MatrixXd EDiagE(const VectorXd& v) const;

  const model::Homogenization& homogenization() const { return hom_; }

private:
  const model::AroInstance* inst_;
  model::Homogenization hom_;
};

enum class ProgramKind { Affine, IA, IbLambda, IbDiagonal, DualRelaxation };

/// A built program plus the variable layout needed to recover solutions.
struct BuildResult {
  solver::ConicProgram program;
  ProgramKind kind = ProgramKind::Affine;
  int k = 0, m = 0, n1 = 0, n2 = 0;

  int x0 = -1;       // first-stage block (n1 vars)
  int lambda0 = -1;  // epigraph scalar
  int Y0 = -1;       // affine / IA: n2 x k row-major
  int L0 = -1;       // IB general: (k+m) x n2 row-major
  int v0 = -1;       // IB diagonal: n2
  int rho0 = -1;     // regularized IB
  double fixed_rho = -1.0;
  double objective_offset = 0.0;  // r * fixed_rho when the path is pinned
  double radius = 0.0;            // r used (regularized IB / dual relaxation)

  // certificate variables (IB) or identification rows (IA)
  int alpha0 = -1;            // second-order case
  int nu_alpha0 = -1;         // polyhedral case: alpha = P' nu
  int s21v0 = -1;             // IB: S21 variables (m x k row-major), SOC case
  int nu_s21_0 = -1;          // IB polyhedral: m blocks of p multipliers
  int s22v0 = -1;             // IB: lower triangle of S22
  int tau0 = -1, Nv0 = -1;    // copositive block
  int psd_row = -1;           // IB: membership slack block start (M lives here)
  int Z0 = -1;                // dual relaxation: svec of the reduced Z
  int x_stat_row = -1;        // ib dual: x-stationarity row block
  MatrixXd null_basis;        // dual relaxation: Z = Nb Zhat Nb'
};

BuildResult build_affine(const model::AroInstance& inst);
BuildResult build_ia(const model::AroInstance& inst);

struct IbOptions {
  enum class Form { LambdaGeneral, VDiagonal };
  Form form = Form::LambdaGeneral;
  bool regularize = false;
  std::optional<model::RadiusBound> radius;  // required when regularize
  /// When >= 0 together with regularize, rho is pinned to this value
  /// instead of entering as a variable (the rho-path mode).
  double fixed_rho = -1.0;
};

BuildResult build_ib(const model::AroInstance& inst, const IbOptions& options = {});

/// SDP relaxation of pi(x) at fixed first stage (the Z-program): maximize
/// (F - A x e1') . Z21 subject to diag(E Z E') = 0, I.Z <= r,
/// g1 g1'.Z = 1, Z psd, Z22 >= 0 and the uncertainty-side rows (J.Z11 >= 0,
/// Z11 e1 in U, Rows(Z21) in U for second-order cones; P Z11 e1 >= 0,
/// P Z11 P' >= 0, P Z21' >= 0 for polyhedral cones).
BuildResult build_dual_relaxation(const model::AroInstance& inst, const VectorXd& x,
                                  const model::RadiusBound& radius);

/// Exact dual of the unregularized IB program for a free first stage:
/// maximize F . Z21 with the x-stationarity rows A'Z21 e1 = c added to the
/// Z-program (no trace bound). The first stage is recoverable from the
/// multipliers of the stationarity rows. Requires X = R^n1.
BuildResult build_ib_dual(const model::AroInstance& inst);

/// First stage recovered from a solved build_ib_dual program.
VectorXd extract_ib_dual_x(const BuildResult& built, const solver::Solution& sol);

struct AffineSolution {
  VectorXd x;
  MatrixXd Y;  // n2 x k
  double lambda = 0;
  double value = 0;  // c'x + lambda
  double feasibility_violation = 0;  // worst dual-cone violation, recomputed from raw data
};

struct IbSolution {
  VectorXd x;
  double lambda = 0;
  std::optional<MatrixXd> Lambda;  // (k+m) x n2
  std::optional<VectorXd> v;      // n2
  double rho = 0;
  cones::ConeCertificate certificate;
  double value = 0;  // c'x + lambda + r rho
  double reconstruction_error = 0;  // ||target - certificate.reconstruct()||_inf
};

/// Throws std::runtime_error unless the solution status is Optimal.
AffineSolution extract_affine(const BuildResult& built, const solver::Solution& sol,
                              const model::AroInstance& inst);
IbSolution extract_ib(const BuildResult& built, const solver::Solution& sol,
                      const model::AroInstance& inst);

/// Objective value of a solved program including any fixed-rho offset.
double objective_value(const BuildResult& built, const solver::Solution& sol);

/// Z matrix of a solved dual relaxation.
MatrixXd extract_dual_Z(const BuildResult& built, const solver::Solution& sol);

/// Feasibility program for "target in IA/IB cone" with the target a fixed
/// numeric matrix; consumes the emit_membership_blocks plan. Returns the
/// witnessing certificate or nullopt when infeasible.
std::optional<cones::ConeCertificate> membership_check(const cones::MatrixConeSpec& spec,
                                                       const MatrixXd& target,
                                                       double tol = 1e-7);

}  // namespace arlp::builders
