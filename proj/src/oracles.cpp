#include "arlp/oracles.hpp"

#include <cmath>
#include <stdexcept>

#include "arlp/instances.hpp"
#include "arlp/solver.hpp"

namespace arlp::oracles {

using model::AroInstance;
using solver::ConeKind;
using solver::ConicProgram;
using solver::SolveStatus;

namespace {

// min c'x + d'y  s.t.  A x + B y >= F u, x in X, for a fixed scenario u.
struct ScenarioOutcome {
  SolveStatus status;
  double value = 0;
  VectorXd x;
};

ScenarioOutcome scenario_lp(const AroInstance& inst, const VectorXd& u) {
  const int n1 = inst.n1(), n2 = inst.n2(), m = inst.m();
  ConicProgram p;
  p.label = inst.label + "/scenario";
  const int x0 = n1 ? p.add_vars(n1, "x") : -1;
  const int y0 = p.add_vars(n2, "y");
  for (int i = 0; i < n1; ++i) p.set_objective(x0 + i, inst.c[i]);
  for (int i = 0; i < n2; ++i) p.set_objective(y0 + i, inst.d[i]);
  const VectorXd fu = inst.F * u;
  const int rows = p.add_block(ConeKind::Nonneg, m);
  for (int r = 0; r < m; ++r) {
    for (int cIdx = 0; cIdx < n1; ++cIdx) p.add_entry(rows + r, x0 + cIdx, -inst.A(r, cIdx));
    for (int i = 0; i < n2; ++i) p.add_entry(rows + r, y0 + i, -inst.B(r, i));
    p.set_rhs(rows + r, -fu[r]);
  }
  if (n1) {
    for (int i = 0; i < n1; ++i) {
      if (std::isfinite(inst.first_stage.lower[i])) {
        const int rr = p.add_block(ConeKind::Nonneg, 1);
        p.add_entry(rr, x0 + i, -1.0);
        p.set_rhs(rr, -inst.first_stage.lower[i]);
      }
      if (std::isfinite(inst.first_stage.upper[i])) {
        const int rr = p.add_block(ConeKind::Nonneg, 1);
        p.add_entry(rr, x0 + i, 1.0);
        p.set_rhs(rr, inst.first_stage.upper[i]);
      }
    }
    if (inst.first_stage.G.rows() > 0) {
      const int rr = p.add_block(ConeKind::Nonneg, static_cast<int>(inst.first_stage.G.rows()));
      for (int q = 0; q < inst.first_stage.G.rows(); ++q) {
        for (int i = 0; i < n1; ++i) p.add_entry(rr + q, x0 + i, -inst.first_stage.G(q, i));
        p.set_rhs(rr + q, -inst.first_stage.g[q]);
      }
    }
  }
  auto sol = solver::solve(p);
  ScenarioOutcome out;
  out.status = sol.status;
  if (sol.status == SolveStatus::Optimal) {
    out.value = sol.primal_objective;
    out.x = n1 ? VectorXd(sol.x.segment(x0, n1)) : VectorXd(0);
  }
  return out;
}

}  // namespace

VertexSet enumerate_vertices(const polytope::Description& d, bool check_bounded) {
  const int dim = d.dim();
  if (dim > 24) throw std::invalid_argument("enumerate_vertices: dimension cap (24) exceeded");
  if (check_bounded) {
    for (int j = 0; j < dim; ++j) {
      for (int sign : {+1, -1}) {
        ConicProgram lp;
        const int x0 = lp.add_vars(dim, "x");
        lp.set_objective(x0 + j, sign);
        if (d.Aeq.rows() > 0) {
          const int eq = lp.add_block(ConeKind::Zero, static_cast<int>(d.Aeq.rows()));
          for (int r = 0; r < d.Aeq.rows(); ++r) {
            for (int c = 0; c < dim; ++c) lp.add_entry(eq + r, x0 + c, d.Aeq(r, c));
            lp.set_rhs(eq + r, d.beq[r]);
          }
        }
        if (d.Ain.rows() > 0) {
          const int rr = lp.add_block(ConeKind::Nonneg, static_cast<int>(d.Ain.rows()));
          for (int r = 0; r < d.Ain.rows(); ++r) {
            for (int c = 0; c < dim; ++c) lp.add_entry(rr + r, x0 + c, -d.Ain(r, c));
            lp.set_rhs(rr + r, -d.bin[r]);
          }
        }
        auto sol = solver::solve(lp);
        if (sol.status == SolveStatus::DualInfeasible)
          throw std::runtime_error("enumerate_vertices: polyhedron is unbounded");
        if (sol.status == SolveStatus::PrimalInfeasible)
          throw std::runtime_error("enumerate_vertices: polyhedron is empty");
      }
    }
  }
  VertexSet out;
  out.description = d;
  out.method = "basis-enumeration";
  out.vertices = polytope::enumerate_vertices(d);
  return out;
}

VertexSet w_vertices(const AroInstance& inst) {
  const int m = inst.m();
  polytope::Description d;
  d.Aeq = inst.B.transpose();
  d.beq = inst.d;
  d.Ain = MatrixXd::Identity(m, m);
  d.bin = VectorXd::Zero(m);
  // W is bounded on every family this oracle serves; a cheap certificate
  // would need an LP per coordinate, which enumerate_vertices provides
  return enumerate_vertices(d, false);
}

VertexSet slice_vertices(const AroInstance& inst) {
  if (inst.uncertainty.kind() != cones::UncertaintyCone::Kind::Polyhedral)
    throw std::invalid_argument("slice_vertices: polyhedral uncertainty required");
  const auto& P = inst.uncertainty.P();
  const int k = inst.k();
  polytope::Description d;
  d.Aeq = MatrixXd::Zero(1, k);
  d.Aeq(0, 0) = 1.0;
  d.beq = VectorXd::Ones(1);
  d.Ain = P;
  d.bin = VectorXd::Zero(P.rows());
  return enumerate_vertices(d, false);
}

MonteCarloResult monte_carlo_lb(const AroInstance& inst, int n_samples, linalg::Rng& rng) {
  MonteCarloResult out;
  cones::SliceSampler sampler(inst.uncertainty);
  bool have = false;
  for (int t = 0; t < n_samples; ++t) {
    const VectorXd u = sampler(rng);
    auto sc = scenario_lp(inst, u);
    if (sc.status == SolveStatus::PrimalInfeasible) {
      ++out.skipped;
      continue;
    }
    if (sc.status != SolveStatus::Optimal)
      throw std::runtime_error(std::string("monte_carlo_lb: scenario LP ") +
                               solver::to_string(sc.status));
    ++out.samples;
    if (!have || sc.value > out.value) {
      out.value = sc.value;
      out.best_u = u;
      have = true;
    }
  }
  if (!have) throw std::runtime_error("monte_carlo_lb: every scenario was infeasible");
  return out;
}

ExactAroResult exact_aro_polyhedral(const AroInstance& inst) {
  const auto vs = slice_vertices(inst);
  if (vs.vertices.empty()) throw std::runtime_error("exact_aro_polyhedral: empty slice");
  const int n1 = inst.n1(), n2 = inst.n2(), m = inst.m();
  const int nv = static_cast<int>(vs.vertices.size());

  ConicProgram p;
  p.label = inst.label + "/exact-aro";
  const int x0 = n1 ? p.add_vars(n1, "x") : -1;
  const int t0 = p.add_vars(1, "t");
  std::vector<int> y0(nv);
  for (int v = 0; v < nv; ++v) y0[v] = p.add_vars(n2, "y" + std::to_string(v));
  for (int i = 0; i < n1; ++i) p.set_objective(x0 + i, inst.c[i]);
  p.set_objective(t0, 1.0);

  for (int v = 0; v < nv; ++v) {
    const VectorXd fu = inst.F * vs.vertices[v];
    // t >= d'y_v
    const int epi = p.add_block(ConeKind::Nonneg, 1);
    p.add_entry(epi, t0, -1.0);
    for (int i = 0; i < n2; ++i) p.add_entry(epi, y0[v] + i, inst.d[i]);
    // A x + B y_v >= F u_v
    const int rows = p.add_block(ConeKind::Nonneg, m);
    for (int r = 0; r < m; ++r) {
      for (int cIdx = 0; cIdx < n1; ++cIdx) p.add_entry(rows + r, x0 + cIdx, -inst.A(r, cIdx));
      for (int i = 0; i < n2; ++i) p.add_entry(rows + r, y0[v] + i, -inst.B(r, i));
      p.set_rhs(rows + r, -fu[r]);
    }
  }
  if (n1) {
    for (int i = 0; i < n1; ++i) {
      if (std::isfinite(inst.first_stage.lower[i])) {
        const int rr = p.add_block(ConeKind::Nonneg, 1);
        p.add_entry(rr, x0 + i, -1.0);
        p.set_rhs(rr, -inst.first_stage.lower[i]);
      }
      if (std::isfinite(inst.first_stage.upper[i])) {
        const int rr = p.add_block(ConeKind::Nonneg, 1);
        p.add_entry(rr, x0 + i, 1.0);
        p.set_rhs(rr, inst.first_stage.upper[i]);
      }
    }
    if (inst.first_stage.G.rows() > 0) {
      const int rr = p.add_block(ConeKind::Nonneg, static_cast<int>(inst.first_stage.G.rows()));
      for (int q = 0; q < inst.first_stage.G.rows(); ++q) {
        for (int i = 0; i < n1; ++i) p.add_entry(rr + q, x0 + i, -inst.first_stage.G(q, i));
        p.set_rhs(rr + q, -inst.first_stage.g[q]);
      }
    }
  }
  auto sol = solver::solve(p);
  if (sol.status != SolveStatus::Optimal)
    throw std::runtime_error(std::string("exact_aro_polyhedral: ") +
                             solver::to_string(sol.status));
  ExactAroResult out;
  out.value = sol.primal_objective;
  out.x = n1 ? VectorXd(sol.x.segment(x0, n1)) : VectorXd(0);
  out.scenario_count = nv;
  return out;
}

double pi_bruteforce(const AroInstance& inst, const VectorXd& x) {
  if (x.size() != inst.n1()) throw std::invalid_argument("pi_bruteforce: x dimension");
  const auto wv = w_vertices(inst);
  if (wv.vertices.empty()) throw std::runtime_error("pi_bruteforce: W is empty");

  std::vector<VectorXd> slice;
  const bool soc = inst.uncertainty.kind() == cones::UncertaintyCone::Kind::SecondOrder;
  if (!soc) slice = slice_vertices(inst).vertices;

  double best = -std::numeric_limits<double>::infinity();
  for (const auto& w : wv.vertices) {
    const VectorXd q = inst.F.transpose() * w;
    const double ax = inst.n1() ? w.dot(inst.A * x) : 0.0;
    double val;
    if (soc) {
      // max of q'u over the unit-ball slice in closed form
      val = q[0] + q.tail(q.size() - 1).norm() - ax;
    } else {
      val = -std::numeric_limits<double>::infinity();
      for (const auto& u : slice) val = std::max(val, q.dot(u) - ax);
    }
    best = std::max(best, val);
  }
  return best;
}

TemporalValues temporal_analytic(int s, int j) {
  if (s < 2) throw std::invalid_argument("temporal_analytic: s >= 2 required");
  if (j != 1 && j != 2) throw std::invalid_argument("temporal_analytic: j must be 1 or 2");
  TemporalValues out;
  out.v_aff = static_cast<double>(s);
  out.v_ar = j == 1 ? 0.5 * (s + 1.0) : 0.5 * (std::sqrt(static_cast<double>(s)) + s);
  return out;
}

std::optional<double> gap_closed(double v_aff, double v_ib, double v_lb) {
  const double den = v_aff - v_lb;
  if (std::abs(den) <= 1e-12 * (1.0 + std::abs(v_aff))) return std::nullopt;
  return (v_aff - v_ib) / den * 100.0;
}

// ---------------------------------------------------------------------------
// Temporal certificates
// ---------------------------------------------------------------------------

namespace {
void require(bool ok, const std::string& what) {
  if (!ok) throw std::runtime_error("temporal_certificates: check failed: " + what);
}
}  // namespace

TemporalCertificates temporal_certificates(int s, int sos_points, linalg::Rng* rng) {
  if (s < 2) throw std::invalid_argument("temporal_certificates: s >= 2 required");
  linalg::Rng fallback_rng(20240817u + static_cast<std::uint64_t>(s));
  linalg::Rng& rr = rng ? *rng : fallback_rng;

  const auto inst = instances::temporal(s, 2);
  const auto hom = model::homogenize(inst);
  const int k = s + 1, m = 2 * s, n = 3 * s + 1;
  const double rs = std::sqrt(static_cast<double>(s));

  TemporalCertificates out;
  out.s = s;
  out.lambda = 0.5 * (rs + s);
  out.tau = 0.25 * rs;

  // primal certificate pieces
  out.S22 = MatrixXd::Zero(m, m);
  for (int i = 0; i < s; ++i) {
    out.S22(2 * i, 2 * i + 1) = 1.0 / (2.0 * rs);
    out.S22(2 * i + 1, 2 * i) = 1.0 / (2.0 * rs);
  }
  MatrixXd J = -MatrixXd::Identity(k, k);
  J(0, 0) = 1.0;
  out.V = MatrixXd::Zero(n, n);
  out.V(0, 0) += 0.5 * (s + rs);
  out.V.topLeftCorner(k, k) -= 0.25 * rs * J;
  out.V.bottomLeftCorner(m, k) = -0.5 * inst.F;
  out.V.topRightCorner(k, m) = -0.5 * inst.F.transpose();
  out.V.bottomRightCorner(m, m) = -out.S22;

  // Null(E): pair sums w_{2i} + w_{2i+1} = u_0 (zero-based), parametrized
  // by u and the odd w slots
  MatrixXd basis = MatrixXd::Zero(n, 2 * s + 1);
  basis(0, 0) = 1.0;
  for (int i = 0; i < s; ++i) basis(k + 2 * i, 0) = 1.0;
  for (int j = 1; j <= s; ++j) basis(j, j) = 1.0;
  for (int i = 0; i < s; ++i) {
    basis(k + 2 * i + 1, k + i) = 1.0;
    basis(k + 2 * i, k + i) = -1.0;
  }
  require((hom.E * basis).cwiseAbs().maxCoeff() <= 1e-12, "null-space parametrization");
  Eigen::HouseholderQR<MatrixXd> qr(basis);
  MatrixXd Nb = MatrixXd(qr.householderQ()).leftCols(2 * s + 1);
  const double vscale = 1.0 + out.V.cwiseAbs().maxCoeff();
  out.null_min_eig = linalg::min_eigenvalue(Nb.transpose() * out.V * Nb);
  require(out.null_min_eig >= -1e-9 * vscale, "V psd on Null(E)");

  // sum-of-squares identity on random null-space points
  out.sos_max_err = 0;
  const double s14 = std::pow(static_cast<double>(s), 0.25);
  for (int t = 0; t < sos_points; ++t) {
    VectorXd g(2 * s + 1);
    for (int i = 0; i < g.size(); ++i) g[i] = rr.uniform(-1.0, 1.0);
    VectorXd z = basis * g;
    const double lhs = 4.0 * z.dot(out.V * z);
    double rhs = 0;
    for (int i = 0; i < s; ++i) {
      const double term = -z[0] / s14 + s14 * z[1 + i] + 2.0 * z[k + 2 * i + 1] / s14;
      rhs += term * term;
    }
    out.sos_max_err = std::max(out.sos_max_err, std::abs(lhs - rhs) / (1.0 + z.squaredNorm()));
  }
  require(out.sos_max_err <= 1e-9, "sum-of-squares identity");

  // Lemma-3 scalar: rho I + V + mu E'E strictly psd for mu large enough;
  // search past a positive margin so downstream feasibility tests see an
  // interior point
  out.rho = 1e-3;
  const MatrixXd EtE = hom.E.transpose() * hom.E;
  out.mu = 1.0;
  while (out.mu < 1e14 &&
         linalg::min_eigenvalue(out.rho * MatrixXd::Identity(n, n) + out.V + out.mu * EtE) <
             1e-5 * out.rho)
    out.mu *= 2.0;
  require(out.mu < 1e14, "Lemma-3 scalar search");

  // dual certificate
  VectorXd a0 = VectorXd::Zero(n);
  a0[0] = 2.0;
  a0.segment(k, m).setOnes();
  out.Z = a0 * a0.transpose();
  for (int i = 0; i < s; ++i) {
    VectorXd ai = VectorXd::Zero(n);
    ai[1 + i] = 2.0 / rs;
    ai[k + 2 * i] = 1.0;
    ai[k + 2 * i + 1] = -1.0;
    out.Z += ai * ai.transpose();
  }
  out.Z *= 0.25;

  out.ez_max_abs = (hom.E * out.Z).cwiseAbs().maxCoeff();
  require(out.ez_max_abs <= 1e-12, "E Z = 0");
  require(std::abs(out.Z(0, 0) - 1.0) <= 1e-12, "g1 g1' . Z = 1");
  out.dual_objective = (inst.F.cwiseProduct(out.Z.bottomLeftCorner(m, k))).sum();
  require(std::abs(out.dual_objective - 0.5 * (rs + s)) <= 1e-12 * (1.0 + s),
          "dual objective (sqrt(s)+s)/2");
  out.z_min_eig = linalg::min_eigenvalue(out.Z);
  require(out.z_min_eig >= -1e-12 * (1.0 + s), "Z psd");
  require(out.Z.bottomRightCorner(m, m).minCoeff() >= -1e-12, "Z22 >= 0");
  // proof-side structure: Z11 diagonal and the explicit Z22 formula
  {
    MatrixXd Z11 = out.Z.topLeftCorner(k, k);
    MatrixXd D = MatrixXd::Zero(k, k);
    D(0, 0) = 1.0;
    for (int i = 1; i < k; ++i) D(i, i) = 1.0 / s;
    require((Z11 - D).cwiseAbs().maxCoeff() <= 1e-12, "Z11 = Diag(1, 1/s, ...)");
    double jz = 0;
    for (int i = 0; i < k; ++i) jz += (i == 0 ? 1.0 : -1.0) * Z11(i, i);
    require(jz >= -1e-12, "J . Z11 >= 0");
    MatrixXd Z22ref = MatrixXd::Identity(m, m) + MatrixXd::Ones(m, m);
    for (int i = 0; i < s; ++i) {
      Z22ref(2 * i, 2 * i + 1) -= 1.0;
      Z22ref(2 * i + 1, 2 * i) -= 1.0;
    }
    Z22ref *= 0.25;
    require((out.Z.bottomRightCorner(m, m) - Z22ref).cwiseAbs().maxCoeff() <= 1e-12,
            "Z22 closed form");
  }
  for (int r2 = 0; r2 < m; ++r2)
    require(cones::contains(inst.uncertainty, out.Z.bottomLeftCorner(m, k).row(r2).transpose(),
                            1e-12),
            "Rows(Z21) in U-hat");
  require(cones::contains(inst.uncertainty, out.Z.topLeftCorner(k, k).col(0), 1e-12),
          "Z11 e1 in U-hat");
  const auto radius = model::compute_radius(inst);
  require(out.Z.trace() <= radius.r + 1e-9, "I . Z <= r");

  // polyhedral side (Prop 9): the same Z is feasible for the 1-norm family
  if (s <= 10) {
    const auto inst1 = instances::temporal(s, 1);
    const auto& P = inst1.uncertainty.P();
    const MatrixXd Z11 = out.Z.topLeftCorner(k, k);
    const MatrixXd Z21 = out.Z.bottomLeftCorner(m, k);
    require((P * Z11.col(0)).minCoeff() >= -1e-12, "P Z11 e1 >= 0");
    require((P * Z11 * P.transpose()).minCoeff() >= -1e-12, "P Z11 P' >= 0");
    require((P * Z21.transpose()).minCoeff() >= -1e-12, "P Z21' >= 0");
    out.polyhedral_feasible = true;
  }
  return out;
}

}  // namespace arlp::oracles
