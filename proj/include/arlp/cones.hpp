// Vector-cone and matrix-cone algebra. The uncertainty cone U-hat lives in
// R^k with the first-coordinate slice convention u1 = 1; matrix cones are the
// tractable inner approximations of COP(U-hat x R+^m) built from dual-cone
// blocks (IA) plus a PSD term and a copositive R11 block (IB).
#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "arlp/linalg.hpp"

namespace arlp::cones {

using Eigen::MatrixXd;
using Eigen::VectorXd;

class UncertaintyCone {
public:
  enum class Kind { SecondOrder, Polyhedral };

  /// {u in R^k : ||(u_2..u_k)|| <= u_1}.
  static UncertaintyCone second_order(int k);
  /// {u : P u >= 0}; P must have k >= 2 columns and every generator must
  /// have a nonnegative first coordinate (checked for the slice convention
  /// by the model-level validation, not here).
  static UncertaintyCone polyhedral(MatrixXd P);

  Kind kind() const { return kind_; }
  int dim() const { return k_; }
  const MatrixXd& P() const;

  bool operator==(const UncertaintyCone& o) const;

private:
  UncertaintyCone(Kind kind, int k, MatrixXd P);
  Kind kind_;
  int k_;
  MatrixXd P_;  // Polyhedral only
};

/// Infinity-norm violation of cone membership (0 inside).
double violation(const UncertaintyCone& cone, const VectorXd& u);

/// u within `tol` of the cone.
bool contains(const UncertaintyCone& cone, const VectorXd& u, double tol = 1e-8);

/// Membership of `a` in the dual cone. Second-order cones are self-dual;
/// polyhedral dual membership {a = P' nu, nu >= 0} is decided by a
/// feasibility LP on the in-repo solver. Throws std::runtime_error when the
/// LP terminates without a verdict.
bool dual_contains(const UncertaintyCone& cone, const VectorXd& a, double tol = 1e-8);

/// Infinity-norm distance from `a` to the dual cone (0 inside); the
/// polyhedral case reports the optimal value of the fitting LP behind
/// dual_contains.
double dual_violation(const UncertaintyCone& cone, const VectorXd& a);

/// Draws points from the slice {u in U-hat : u1 = 1}. Construction may
/// enumerate slice vertices (small polyhedral cones); larger polyhedral
/// cones fall back to hit-and-run from a Chebyshev center. The sampler owns
/// no rng; pass one per call site for reproducibility.
class SliceSampler {
public:
  explicit SliceSampler(const UncertaintyCone& cone);
  VectorXd operator()(linalg::Rng& rng) const;
  const std::vector<VectorXd>& slice_vertices() const;  // empty if hit-and-run
private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
};

/// One-shot slice sample (builds a sampler internally; prefer SliceSampler
/// in loops).
VectorXd sample(const UncertaintyCone& cone, linalg::Rng& rng);

/// Random point of the cone itself (slice sample times a nonnegative scale).
VectorXd sample_cone_point(const UncertaintyCone& cone, linalg::Rng& rng);

/// Random point of the dual cone.
VectorXd sample_dual_point(const UncertaintyCone& cone, linalg::Rng& rng);

// ---------------------------------------------------------------------------

enum class MatrixConeVariant { IA, IB };

/// Symmetric matrices of order k+m partitioned into S11 (k x k), S21 (m x k)
/// and S22 (m x m).
struct MatrixConeSpec {
  int k = 0;
  int m = 0;
  MatrixConeVariant variant = MatrixConeVariant::IA;
  UncertaintyCone uncertainty;

  MatrixConeSpec(int k_, int m_, MatrixConeVariant v, UncertaintyCone unc);
  int order() const { return k + m; }
};

/// Certificate of membership in the IA or IB matrix cone:
///   reconstruct() = S + M + R,
/// S11 = e1 a' + a e1', rows of S21 and a in the dual uncertainty cone,
/// S22 >= 0 entrywise, M psd (IB only), R11 = tau J (second-order) or
/// P' N P (polyhedral), R21 = R22 = 0.
struct ConeCertificate {
  VectorXd alpha;
  MatrixXd S21;
  MatrixXd S22;
  MatrixXd M;                    // empty for IA
  std::optional<double> tau;     // second-order IB
  std::optional<MatrixXd> N;     // polyhedral IB, symmetric nonnegative

  MatrixXd reconstruct(const MatrixConeSpec& spec) const;
  std::string to_json() const;
};

/// Uniformly structured random member of the cone (used by the sampling
/// falsification suites).
ConeCertificate random_certificate(const MatrixConeSpec& spec, linalg::Rng& rng);

/// Block plan tying the certificate variables to a target symmetric matrix
/// of order k+m: variable groups with their cone assignments and the sparse
/// linear map  svec(target) = sum coef * var. Builders and the membership
/// feasibility program consume this plan as the single source of truth.
struct MembershipBlocks {
  enum class GroupCone { DualUncertainty, DualUncertaintyRows, NonnegSym, Psd, NonnegScalar };
  struct Group {
    std::string name;
    GroupCone cone;
    int count = 0;  // scalar variables
    int rows = 0, cols = 0;
  };
  struct Entry {
    int slot;   // svec slot in the order-(k+m) target
    int group;  // index into groups
    int var;    // local variable index within the group
    double coef;
  };
  int target_order = 0;
  std::vector<Group> groups;
  std::vector<Entry> recon;

  int group_index(const std::string& name) const;
};

MembershipBlocks emit_membership_blocks(const MatrixConeSpec& spec);

/// Decomposition R11 = tau J + M11 with tau >= 0 and M11 psd, when one
/// exists within tol; decided by scalar search over tau maximizing the
/// smallest eigenvalue of R11 - tau J (concave in tau).
std::optional<std::pair<double, MatrixXd>> cop_soc_check(const MatrixXd& R11, double tol = 1e-8);

}  // namespace arlp::cones
