// Bound-chain computation and reporting: drives the solves requested for an
// instance, assembles the v_LB <= v_AR <= v_IB <= v_IA = v_Aff chain with
// solver diagnostics, and renders CSV/markdown rows.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "arlp/builders.hpp"
#include "arlp/model.hpp"

namespace arlp::report {

using Eigen::VectorXd;

struct SolveDiag {
  std::string program;
  std::string status;
  double value = 0;
  double pres = 0, dres = 0, relgap = 0;
  int iterations = 0;
  double seconds = 0;
  int scalars = 0, rows = 0, soc_blocks = 0;
  std::vector<int> psd_orders;
};

struct BoundReport {
  std::string label;
  bool sense_flipped = false;
  std::optional<double> v_lb;
  int mc_samples = 0;
  std::uint64_t mc_seed = 0;
  std::optional<double> v_ar;
  std::optional<double> v_ib;
  std::string ib_form;
  bool ib_regularized = false;
  double radius = 0;
  std::optional<double> v_ia;
  std::optional<double> v_aff;
  std::optional<double> v_ar_analytic;
  std::optional<double> v_aff_analytic;
  std::optional<double> gap_closed_pct;
  VectorXd x_aff, x_ib;
  std::string certificate_json;  // IB certificate dump, when IB was solved
  std::vector<std::pair<double, double>> rho_curve;  // (rho, value)
  std::vector<SolveDiag> solves;
  double total_seconds = 0;

  /// v_lb <= v_ar <= v_ib <= v_ia/v_aff within tol, over the present entries.
  bool ordering_ok(double tol = 1e-5) const;
};

struct BoundOptions {
  bool want_lb = false;
  bool want_ar = false;
  bool want_ib = false;
  bool want_ia = false;
  bool want_aff = false;
  int samples = 10000;
  std::uint64_t seed = 0;
  builders::IbOptions::Form ib_form = builders::IbOptions::Form::LambdaGeneral;
  bool regularize = false;
  std::vector<double> rho_path;   // fixed-rho ladder, reported as a curve
  bool ib_via_dual = false;       // IB value from the Eq-17/18 dual form (empty first stage)
  double eps = 1e-8;
  int max_iter = 200;
  int verbosity = 0;
};

/// Throws report::SolverFailure when a requested solve neither converges nor
/// lands near-optimal.
struct SolverFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

BoundReport compute_bounds(const model::AroInstance& inst, const BoundOptions& opt);

std::string csv_header();
std::string csv_row(const BoundReport& r);
std::string markdown(const BoundReport& r);

}  // namespace arlp::report
