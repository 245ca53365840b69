// Standard-form conic optimization:
//
//   minimize    c'x
//   subject to  A x + s = b,   s in K,
//
// where K is an ordered product of zero, nonnegative, second-order and
// positive-semidefinite cone blocks and x is free. PSD blocks live in
// svec coordinates (sqrt(2) scaling on off-diagonal entries).
//
// The solver is a homogeneous self-dual interior-point method with
// Nesterov-Todd scaling and a Mehrotra predictor-corrector step. Newton
// systems are reduced to dense normal equations (Cholesky via LAPACK)
// bordered by the zero-cone rows, with static regularization and
// iterative refinement.
#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <cstdint>
#include <string>
#include <vector>

namespace arlp::solver {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class ConeKind { Zero, Nonneg, SecondOrder, Psd };

struct ConeBlock {
  ConeKind kind;
  int size = 0;   // vector length (svec length for Psd)
  int order = 0;  // matrix order, Psd only
  int row = 0;    // starting row in the constraint matrix
};

class ConicProgram {
public:
  int add_vars(int count, const std::string& name = "");
  void set_objective(int var, double coef);
  void add_objective(int var, double coef);

  /// Appends a cone block of `size` rows (svec length for Psd, which takes
  /// the matrix order instead) and returns the starting row index.
  int add_block(ConeKind kind, int size_or_order);

  void add_entry(int row, int var, double coef);
  void set_rhs(int row, double value);
  void add_rhs(int row, double value);

  int num_vars() const { return static_cast<int>(c_.size()); }
  int num_rows() const { return rows_; }
  const std::vector<ConeBlock>& blocks() const { return blocks_; }
  const VectorXd objective() const;
  VectorXd rhs() const;
  Eigen::SparseMatrix<double> matrix() const;

  const std::string& var_name(int var) const;
  std::string label;

  /// Problem-size statistics for reporting (scalar variables, cone counts,
  /// PSD orders, constraint rows).
  struct Stats {
    int scalars = 0;
    int rows = 0;
    int nonneg_rows = 0;
    int zero_rows = 0;
    int soc_blocks = 0;
    std::vector<int> psd_orders;
  };
  Stats stats() const;

  std::string to_json() const;

private:
  std::vector<double> c_;
  std::vector<std::string> names_;
  std::vector<ConeBlock> blocks_;
  std::vector<Eigen::Triplet<double>> entries_;
  std::vector<double> b_;
  int rows_ = 0;
};

enum class SolveStatus { Optimal, PrimalInfeasible, DualInfeasible, IllPosed, IterLimit };

const char* to_string(SolveStatus s);

struct SolverSettings {
  double eps = 1e-8;
  int max_iter = 200;
  int verbosity = 0;  // 0 silent, 1 per-solve summary, 2 per-iteration lines
};

struct IterationStat {
  int iter = 0;
  double pcost = 0, dcost = 0, pres = 0, dres = 0, relgap = 0, mu = 0, step = 0, tau = 0,
         kappa = 0;
};

struct Solution {
  SolveStatus status = SolveStatus::IllPosed;
  VectorXd x;  // primal variables
  VectorXd y;  // dual multipliers (in K*)
  VectorXd s;  // slacks (in K)
  double primal_objective = 0;
  double dual_objective = 0;
  double primal_residual = 0;
  double dual_residual = 0;
  double relative_gap = 0;
  int iterations = 0;
  double wall_time_s = 0;
  std::vector<IterationStat> trace;

  bool optimalish() const { return status == SolveStatus::Optimal; }
};

Solution solve(const ConicProgram& p, const SolverSettings& settings = {});

/// Infinity-norm distance of v from the block's cone (0 when inside).
double cone_violation(const ConeBlock& blk, const Eigen::Ref<const VectorXd>& v);

struct ResidualReport {
  double primal_residual = 0;   // ||Ax + s - b|| / (1 + ||b||), extended accumulation
  double dual_residual = 0;     // ||A'y + c|| / (1 + ||c||)
  double relative_gap = 0;      // <s,y> / max(1, |c'x|)
  double weak_duality_slack = 0;  // max(0, dual obj - primal obj), minimization
  double worst_slack_violation = 0;
  double worst_dual_violation = 0;
  bool mismatch_flagged = false;  // reported vs recomputed residuals differ by > 10x eps
};

/// Recomputes residuals from raw program data in long-double accumulation and
/// compares them with the solver-reported figures.
ResidualReport check_solution(const ConicProgram& p, const Solution& sol, double eps = 1e-8);

}  // namespace arlp::solver
