// Exhaustive vertex enumeration for small polyhedra given by equalities and
// inequalities, via basis enumeration with QR rank checks. Shared plumbing
// for the oracle layer and for polyhedral slice sampling.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace arlp::polytope {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Description {
  MatrixXd Aeq;  // Aeq x = beq
  VectorXd beq;
  MatrixXd Ain;  // Ain x >= bin
  VectorXd bin;
  int dim() const { return static_cast<int>(Aeq.cols() ? Aeq.cols() : Ain.cols()); }
};

struct EnumOptions {
  std::uint64_t max_bases = 2'000'000;  // candidate basis cap
  double feas_tol = 1e-9;
  double dedupe_tol = 1e-7;
};

/// All vertices of the (assumed bounded) polyhedron. Throws
/// std::runtime_error when the basis cap is exceeded or dimensions are
/// inconsistent.
std::vector<VectorXd> enumerate_vertices(const Description& d, const EnumOptions& opt = {});

std::uint64_t count_bases(int num_inequalities, int need);

}  // namespace arlp::polytope
