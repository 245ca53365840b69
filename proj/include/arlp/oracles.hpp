// Independent ground truth for the bound chain: Monte Carlo lower bounds,
// exact polyhedral two-stage values by vertex enumeration, brute-force
// evaluation of the bilinear second-stage cost pi(x), the closed-form
// temporal-network values, and the analytic primal/dual certificates of the
// temporal family.
#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "arlp/linalg.hpp"
#include "arlp/model.hpp"
#include "arlp/polytope.hpp"

namespace arlp::oracles {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct VertexSet {
  std::vector<VectorXd> vertices;
  polytope::Description description;
  std::string method;  // "basis-enumeration"
};

/// All vertices of a bounded polyhedron (dimension <= 24, basis count
/// capped). Throws on cap excess; unboundedness is detected by coordinate
/// LPs and reported as an error.
VertexSet enumerate_vertices(const polytope::Description& d, bool check_bounded = true);

/// Vertices of W = {w >= 0 : B'w = d} for an instance.
VertexSet w_vertices(const model::AroInstance& inst);

/// Vertices of the uncertainty slice {u : u in U-hat, u1 = 1} (polyhedral
/// cones only).
VertexSet slice_vertices(const model::AroInstance& inst);

struct MonteCarloResult {
  double value = 0;       // max over samples of the scenario LP value
  VectorXd best_u;
  int samples = 0;
  int skipped = 0;        // infeasible scenarios
};

/// Scenario-sampling lower bound: always <= v_AR.
MonteCarloResult monte_carlo_lb(const model::AroInstance& inst, int n_samples,
                                linalg::Rng& rng);

struct ExactAroResult {
  double value = 0;
  VectorXd x;
  int scenario_count = 0;
};

/// Exact v_AR for polyhedral uncertainty: one LP with a recourse copy per
/// slice vertex (the worst case of the convex recourse cost is attained at
/// a vertex).
ExactAroResult exact_aro_polyhedral(const model::AroInstance& inst);

/// pi(x) = max over vertices w of W of the slice-maximum of (F u - A x)'w;
/// ball slices use the closed form, polyhedral slices the vertex maximum.
double pi_bruteforce(const model::AroInstance& inst, const VectorXd& x);

struct TemporalValues {
  double v_ar = 0;
  double v_aff = 0;
};

/// Closed-form temporal-network values: v_aff = s for both uncertainty
/// sets; v_ar = (s+1)/2 for the 1-norm set and (sqrt(s)+s)/2 for the ball.
TemporalValues temporal_analytic(int s, int j);

/// Analytic primal and dual certificates of the temporal family (ball
/// uncertainty), verified on construction; any failed check throws.
struct TemporalCertificates {
  int s = 0;
  // primal side
  double lambda = 0;           // (sqrt(s)+s)/2
  double tau = 0;              // sqrt(s)/4
  MatrixXd S22;                // (1/(2 sqrt(s))) sum f_{2i} f_{2i-1}' + sym
  MatrixXd V;                  // order 3s+1
  double null_min_eig = 0;     // min eig of Nb' V Nb over Null(E)
  double sos_max_err = 0;      // worst deviation of the sum-of-squares identity
  double mu = 0;               // scalar with rho I + V + mu E'E psd
  double rho = 0;
  // dual side
  MatrixXd Z;
  double ez_max_abs = 0;       // max |E Z|
  double dual_objective = 0;   // F . Z21 = (sqrt(s)+s)/2
  double z_min_eig = 0;
  bool polyhedral_feasible = false;  // Prop-9 side checks (s <= 10)
};

TemporalCertificates temporal_certificates(int s, int sos_points = 100,
                                           linalg::Rng* rng = nullptr);

/// (v_aff - v_ib) / (v_aff - v_lb) * 100 in the minimization convention;
/// nullopt when the denominator vanishes.
std::optional<double> gap_closed(double v_aff, double v_ib, double v_lb);

}  // namespace arlp::oracles
