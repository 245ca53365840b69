// Shared dense linear-algebra helpers: symmetric vectorization, eigenvalue
// wrappers, and a deterministic random number generator used by samplers
// and generators. The svec convention carries sqrt(2) on off-diagonal
// entries so that svec(X) . svec(Y) = X . Y exactly.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace arlp::linalg {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Dimension of svec for a symmetric matrix of the given order.
inline int svec_dim(int order) { return order * (order + 1) / 2; }

/// Order of the symmetric matrix backing an svec of the given length,
/// or -1 if the length is not triangular.
int svec_order(int len);

/// Lower-triangular column-major index of entry (i,j), i >= j, in svec space.
int svec_index(int order, int i, int j);

VectorXd svec(const MatrixXd& X);
MatrixXd smat(const VectorXd& v);

/// Eigenvalues of a symmetric matrix, ascending.
VectorXd sym_eigenvalues(const MatrixXd& S);

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const MatrixXd& S);

/// Eigendecomposition S = V diag(w) V^T with w ascending.
void sym_eigen(const MatrixXd& S, VectorXd& w, MatrixXd& V);

/// Deterministic 64-bit generator (xoshiro256++). The standard library
/// distributions are implementation-defined, so uniform and gaussian
/// draws are mapped here explicitly to keep seeded runs reproducible
/// across toolchains.
class Rng {
public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64();

  /// Uniform in [0,1).
  double uniform();
  /// Uniform in [lo,hi).
  double uniform(double lo, double hi);
  /// Standard normal via Box-Muller.
  double gaussian();
  /// Uniform integer in [0,n).
  std::uint64_t uniform_index(std::uint64_t n);

  /// Uniform direction on the unit sphere in R^dim.
  VectorXd unit_direction(int dim);
  /// Uniform point in the closed unit ball in R^dim.
  VectorXd ball_point(int dim);

private:
  std::uint64_t state_[4];
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace arlp::linalg
