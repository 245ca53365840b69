// Problem data for the two-stage adjustable robust linear program
//
//   min_{x, y(.)}  c'x + max_{u in U} d'y(u)
//   s.t.           A x + B y(u) >= F u   for all u in U,   x in X,
//
// with right-hand-side uncertainty U = {u in U-hat : u1 = 1}. Holds the
// standing-assumption checks that are decidable, the homogenization
// E = (-d e1', B'), and the ball radius r bounding (u; w) over the slice
// and the extreme points of W = {w >= 0 : B'w = d}.
#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "arlp/cones.hpp"

namespace arlp::model {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct FirstStageSet {
  VectorXd lower;  // +-inf allowed
  VectorXd upper;
  MatrixXd G;  // optional extra rows G x >= g
  VectorXd g;

  static FirstStageSet free_reals(int n1);
  static FirstStageSet box(VectorXd lo, VectorXd hi);
  static FirstStageSet nonneg(int n1);

  int dim() const { return static_cast<int>(lower.size()); }
  bool is_free() const;
};

struct AroInstance {
  MatrixXd A;  // m x n1
  MatrixXd B;  // m x n2
  VectorXd c;  // n1
  VectorXd d;  // n2
  MatrixXd F;  // m x k
  FirstStageSet first_stage;
  cones::UncertaintyCone uncertainty;
  std::string label;
  /// Set when the source problem was a maximization folded into this
  /// minimization form; reported values keep the minimization sign, which
  /// is the convention the benchmark families are quoted in.
  bool sense_flipped = false;

  AroInstance(MatrixXd A_, MatrixXd B_, VectorXd c_, VectorXd d_, MatrixXd F_,
              FirstStageSet fs, cones::UncertaintyCone unc, std::string label_ = "");

  int n1() const { return static_cast<int>(c.size()); }
  int n2() const { return static_cast<int>(d.size()); }
  int m() const { return static_cast<int>(B.rows()); }
  int k() const { return uncertainty.dim(); }
};

struct Homogenization {
  MatrixXd E;   // n2 x (k+m) = (-d e1', B')
  VectorXd g1;  // (e1; 0) in R^{k+m}
};

Homogenization homogenize(const AroInstance& inst);

struct RadiusBound {
  double r_w = 0;  // w'w <= r_w on extreme points of W
  double r_z = 0;  // u'u <= r_z on the slice
  double r = 0;    // r_w + r_z
  std::string method;  // "vertex-enumeration" or "hadamard"
};

/// Throws std::runtime_error when W is empty or no bound is computable.
RadiusBound compute_radius(const AroInstance& inst);

struct ValidationReport {
  bool dims_ok = false;
  bool slice_nonempty = false;
  bool slice_bounded = false;
  bool first_coord_convention = false;  // e1'u >= 0 on the cone
  bool w_nonempty = false;
  bool affine_feasible = false;  // sufficient for Assumption 2
  std::vector<std::string> warnings;   // includes the Assumption 4 notice
  std::vector<std::string> failures;

  bool all_passed() const { return failures.empty(); }
};

ValidationReport validate(const AroInstance& inst);

/// JSON instance schema "aro-instance/1" (dense row-major matrices).
std::string to_json(const AroInstance& inst);
AroInstance from_json(const std::string& text);

}  // namespace arlp::model
