#include "arlp/builders.hpp"

#include <cmath>
#include <stdexcept>

#include "arlp/linalg.hpp"

namespace arlp::builders {

using cones::MatrixConeSpec;
using cones::MatrixConeVariant;
using cones::UncertaintyCone;
using linalg::svec_dim;
using linalg::svec_index;
using solver::ConeKind;
using solver::ConicProgram;

namespace {

constexpr double kSqrt2 = 1.4142135623730950488;

struct LinExpr {
  std::vector<std::pair<int, double>> terms;
  double constant = 0;
  void add(int var, double coef) {
    if (coef != 0.0) terms.emplace_back(var, coef);
  }
};

// Membership "expr in U*" for a k-component affine expression. Second-order
// cones are self-dual and take a direct slack block; polyhedral duals
// introduce multipliers nu >= 0 with the tie rows expr = P' nu.
void add_dual_membership(ConicProgram& p, const UncertaintyCone& cone,
                         const std::vector<LinExpr>& expr, const std::string& name) {
  const int k = cone.dim();
  if (static_cast<int>(expr.size()) != k)
    throw std::invalid_argument("add_dual_membership: expression arity mismatch");
  if (cone.kind() == UncertaintyCone::Kind::SecondOrder) {
    const int r = p.add_block(ConeKind::SecondOrder, k);
    for (int j = 0; j < k; ++j) {
      for (const auto& [var, coef] : expr[j].terms) p.add_entry(r + j, var, -coef);
      p.set_rhs(r + j, expr[j].constant);
    }
  } else {
    const auto& P = cone.P();
    const int np = static_cast<int>(P.rows());
    const int nu = p.add_vars(np, "nu_" + name);
    const int tie = p.add_block(ConeKind::Zero, k);
    for (int j = 0; j < k; ++j) {
      for (const auto& [var, coef] : expr[j].terms) p.add_entry(tie + j, var, coef);
      for (int i = 0; i < np; ++i) p.add_entry(tie + j, nu + i, -P(i, j));
      p.set_rhs(tie + j, -expr[j].constant);
    }
    const int rn = p.add_block(ConeKind::Nonneg, np);
    for (int i = 0; i < np; ++i) p.add_entry(rn + i, nu + i, -1.0);
  }
}

void add_first_stage_rows(ConicProgram& p, const model::FirstStageSet& fs, int x0) {
  const int n1 = fs.dim();
  std::vector<std::pair<int, double>> lower, upper, pinned;
  for (int i = 0; i < n1; ++i) {
    if (std::isfinite(fs.lower[i]) && fs.lower[i] == fs.upper[i]) {
      pinned.emplace_back(i, fs.lower[i]);  // equality keeps an interior elsewhere
      continue;
    }
    if (std::isfinite(fs.lower[i])) lower.emplace_back(i, fs.lower[i]);
    if (std::isfinite(fs.upper[i])) upper.emplace_back(i, fs.upper[i]);
  }
  if (!pinned.empty()) {
    const int r = p.add_block(ConeKind::Zero, static_cast<int>(pinned.size()));
    int t = 0;
    for (const auto& [i, v] : pinned) {
      p.add_entry(r + t, x0 + i, 1.0);
      p.set_rhs(r + t, v);
      ++t;
    }
  }
  if (!lower.empty() || !upper.empty()) {
    const int r = p.add_block(ConeKind::Nonneg,
                              static_cast<int>(lower.size() + upper.size()));
    int t = 0;
    for (const auto& [i, lo] : lower) {
      p.add_entry(r + t, x0 + i, -1.0);
      p.set_rhs(r + t, -lo);
      ++t;
    }
    for (const auto& [i, hi] : upper) {
      p.add_entry(r + t, x0 + i, 1.0);
      p.set_rhs(r + t, hi);
      ++t;
    }
  }
  if (fs.G.rows() > 0) {
    const int r = p.add_block(ConeKind::Nonneg, static_cast<int>(fs.G.rows()));
    for (int q = 0; q < fs.G.rows(); ++q) {
      for (int i = 0; i < n1; ++i) p.add_entry(r + q, x0 + i, -fs.G(q, i));
      p.set_rhs(r + q, -fs.g[q]);
    }
  }
}

// Realization of one membership-blocks variable group as solver columns:
// each local variable maps to a list of (column, coefficient).
struct GroupRealization {
  std::vector<std::vector<std::pair<int, double>>> vars;
};

}  // namespace

// ---------------------------------------------------------------------------
// GxHyAssembler
// ---------------------------------------------------------------------------

GxHyAssembler::GxHyAssembler(const model::AroInstance& inst)
    : inst_(&inst), hom_(model::homogenize(inst)) {}

MatrixXd GxHyAssembler::G(const VectorXd& x) const {
  const int k = inst_->k(), m = inst_->m();
  MatrixXd W = inst_->F;
  if (inst_->n1() > 0) W.col(0) -= inst_->A * x;
  MatrixXd out = MatrixXd::Zero(k + m, k + m);
  out.bottomLeftCorner(m, k) = W;
  out.topRightCorner(k, m) = W.transpose();
  return out;
}

MatrixXd GxHyAssembler::H(const MatrixXd& Y) const {
  const int k = inst_->k(), m = inst_->m();
  MatrixXd out = MatrixXd::Zero(k + m, k + m);
  VectorXd e1 = VectorXd::Zero(k);
  e1[0] = 1.0;
  const Eigen::RowVectorXd dY = inst_->d.transpose() * Y;  // 1 x k
  out.topLeftCorner(k, k) = -e1 * dY - dY.transpose() * e1.transpose();
  MatrixXd BY = inst_->B * Y;
  out.bottomLeftCorner(m, k) = BY;
  out.topRightCorner(k, m) = BY.transpose();
  return out;
}

MatrixXd GxHyAssembler::sym_EL(const MatrixXd& L) const {
  return hom_.E.transpose() * L.transpose() + L * hom_.E;
}

MatrixXd GxHyAssembler::EDiagE(const VectorXd& v) const {
  return hom_.E.transpose() * v.asDiagonal() * hom_.E;
}

// ---------------------------------------------------------------------------
// Affine policy (robust counterpart form)
// ---------------------------------------------------------------------------

BuildResult build_affine(const model::AroInstance& inst) {
  const int n1 = inst.n1(), n2 = inst.n2(), m = inst.m(), k = inst.k();
  BuildResult out;
  out.kind = ProgramKind::Affine;
  out.k = k;
  out.m = m;
  out.n1 = n1;
  out.n2 = n2;
  ConicProgram& p = out.program;
  p.label = inst.label + "/affine";

  out.x0 = n1 ? p.add_vars(n1, "x") : -1;
  out.Y0 = p.add_vars(n2 * k, "Y");
  out.lambda0 = p.add_vars(1, "lambda");
  for (int i = 0; i < n1; ++i) p.set_objective(out.x0 + i, inst.c[i]);
  p.set_objective(out.lambda0, 1.0);

  // lambda e1 - Y'd in U*
  std::vector<LinExpr> epi(k);
  for (int j = 0; j < k; ++j) {
    if (j == 0) epi[j].add(out.lambda0, 1.0);
    for (int i = 0; i < n2; ++i) epi[j].add(out.Y0 + i * k + j, -inst.d[i]);
  }
  add_dual_membership(p, inst.uncertainty, epi, "epi");

  // Rows(A x e1' - F + B Y) in U*
  for (int r = 0; r < m; ++r) {
    std::vector<LinExpr> row(k);
    for (int j = 0; j < k; ++j) {
      row[j].constant = -inst.F(r, j);
      if (j == 0)
        for (int cIdx = 0; cIdx < n1; ++cIdx) row[j].add(out.x0 + cIdx, inst.A(r, cIdx));
      for (int i = 0; i < n2; ++i) row[j].add(out.Y0 + i * k + j, inst.B(r, i));
    }
    add_dual_membership(p, inst.uncertainty, row, "row" + std::to_string(r));
  }

  if (n1) add_first_stage_rows(p, inst.first_stage, out.x0);
  return out;
}

// ---------------------------------------------------------------------------
// IA form (matrix-cone encoding of the same policy)
// ---------------------------------------------------------------------------

BuildResult build_ia(const model::AroInstance& inst) {
  const int n1 = inst.n1(), n2 = inst.n2(), m = inst.m(), k = inst.k();
  BuildResult out;
  out.kind = ProgramKind::IA;
  out.k = k;
  out.m = m;
  out.n1 = n1;
  out.n2 = n2;
  ConicProgram& p = out.program;
  p.label = inst.label + "/ia";

  out.x0 = n1 ? p.add_vars(n1, "x") : -1;
  out.Y0 = p.add_vars(n2 * k, "Y");
  out.lambda0 = p.add_vars(1, "lambda");
  for (int i = 0; i < n1; ++i) p.set_objective(out.x0 + i, inst.c[i]);
  p.set_objective(out.lambda0, 1.0);

  const bool soc = inst.uncertainty.kind() == UncertaintyCone::Kind::SecondOrder;
  const int np = soc ? 0 : static_cast<int>(inst.uncertainty.P().rows());

  // alpha in U*: direct variables (self-dual case) or alpha = P' nu
  std::vector<std::vector<std::pair<int, double>>> alpha(k);
  if (soc) {
    out.alpha0 = p.add_vars(k, "alpha");
    for (int j = 0; j < k; ++j) alpha[j] = {{out.alpha0 + j, 1.0}};
    const int r = p.add_block(ConeKind::SecondOrder, k);
    for (int j = 0; j < k; ++j) p.add_entry(r + j, out.alpha0 + j, -1.0);
  } else {
    const auto& P = inst.uncertainty.P();
    out.nu_alpha0 = p.add_vars(np, "nu_alpha");
    for (int j = 0; j < k; ++j)
      for (int i = 0; i < np; ++i)
        if (P(i, j) != 0.0) alpha[j].emplace_back(out.nu_alpha0 + i, P(i, j));
    const int r = p.add_block(ConeKind::Nonneg, np);
    for (int i = 0; i < np; ++i) p.add_entry(r + i, out.nu_alpha0 + i, -1.0);
  }

  // T11 identification: lambda e1 e1' - (e1 d'Y + Y'd e1')/2 = e1 a' + a e1'.
  // Only the first column carries information; the remaining block of T11
  // is identically zero on both sides.
  {
    const int tie = p.add_block(ConeKind::Zero, k);
    // slot (0,0): lambda - (Y'd)_0 = 2 a_0
    p.add_entry(tie, out.lambda0, 1.0);
    for (int i = 0; i < n2; ++i) p.add_entry(tie, out.Y0 + i * k + 0, -inst.d[i]);
    for (const auto& [var, coef] : alpha[0]) p.add_entry(tie, var, -2.0 * coef);
    // slots (j,0), j >= 1: -(Y'd)_j / 2 = a_j
    for (int j = 1; j < k; ++j) {
      for (int i = 0; i < n2; ++i) p.add_entry(tie + j, out.Y0 + i * k + j, -0.5 * inst.d[i]);
      for (const auto& [var, coef] : alpha[j]) p.add_entry(tie + j, var, -coef);
    }
  }

  // Rows(T21) in U* with T21 = (A x e1' - F + B Y) / 2; S22 = T22 = 0.
  for (int r = 0; r < m; ++r) {
    std::vector<LinExpr> row(k);
    for (int j = 0; j < k; ++j) {
      row[j].constant = -0.5 * inst.F(r, j);
      if (j == 0)
        for (int cIdx = 0; cIdx < n1; ++cIdx)
          row[j].add(out.x0 + cIdx, 0.5 * inst.A(r, cIdx));
      for (int i = 0; i < n2; ++i) row[j].add(out.Y0 + i * k + j, 0.5 * inst.B(r, i));
    }
    add_dual_membership(p, inst.uncertainty, row, "s21_" + std::to_string(r));
  }

  if (n1) add_first_stage_rows(p, inst.first_stage, out.x0);
  return out;
}

// ---------------------------------------------------------------------------
// IB form
// ---------------------------------------------------------------------------

BuildResult build_ib(const model::AroInstance& inst, const IbOptions& options) {
  const int n1 = inst.n1(), n2 = inst.n2(), m = inst.m(), k = inst.k();
  const int n = k + m;
  if (options.regularize && !options.radius.has_value())
    throw std::invalid_argument("build_ib: regularization requested without a radius bound");
  const bool soc = inst.uncertainty.kind() == UncertaintyCone::Kind::SecondOrder;
  const bool diag = options.form == IbOptions::Form::VDiagonal;

  BuildResult out;
  out.kind = diag ? ProgramKind::IbDiagonal : ProgramKind::IbLambda;
  out.k = k;
  out.m = m;
  out.n1 = n1;
  out.n2 = n2;
  ConicProgram& p = out.program;
  p.label = inst.label + (diag ? "/ib-vdiag" : "/ib-lambda");

  const model::Homogenization hom = model::homogenize(inst);

  out.x0 = n1 ? p.add_vars(n1, "x") : -1;
  out.lambda0 = p.add_vars(1, "lambda");
  if (diag) {
    out.v0 = p.add_vars(n2, "v");
  } else {
    out.L0 = p.add_vars(n * n2, "Lambda");
  }
  const double rr = options.regularize ? options.radius->r : 0.0;
  out.radius = rr;
  if (options.regularize) {
    if (options.fixed_rho >= 0.0) {
      out.fixed_rho = options.fixed_rho;
      out.objective_offset = rr * options.fixed_rho;
    } else {
      out.rho0 = p.add_vars(1, "rho");
      p.set_objective(out.rho0, rr);
      const int r = p.add_block(ConeKind::Nonneg, 1);
      p.add_entry(r, out.rho0, -1.0);
    }
  }
  for (int i = 0; i < n1; ++i) p.set_objective(out.x0 + i, inst.c[i]);
  p.set_objective(out.lambda0, 1.0);

  // certificate variable groups from the membership plan
  MatrixConeSpec spec(k, m, MatrixConeVariant::IB, inst.uncertainty);
  const auto plan = cones::emit_membership_blocks(spec);
  const int np = soc ? 0 : static_cast<int>(inst.uncertainty.P().rows());

  std::vector<GroupRealization> realized(plan.groups.size());
  for (size_t gi = 0; gi < plan.groups.size(); ++gi) {
    const auto& grp = plan.groups[gi];
    auto& real = realized[gi];
    real.vars.resize(grp.count);
    switch (grp.cone) {
      case cones::MembershipBlocks::GroupCone::DualUncertainty: {
        if (soc) {
          out.alpha0 = p.add_vars(k, "alpha");
          for (int j = 0; j < k; ++j) real.vars[j] = {{out.alpha0 + j, 1.0}};
          const int r = p.add_block(ConeKind::SecondOrder, k);
          for (int j = 0; j < k; ++j) p.add_entry(r + j, out.alpha0 + j, -1.0);
        } else {
          const auto& P = inst.uncertainty.P();
          out.nu_alpha0 = p.add_vars(np, "nu_alpha");
          for (int j = 0; j < k; ++j)
            for (int i = 0; i < np; ++i)
              if (P(i, j) != 0.0) real.vars[j].emplace_back(out.nu_alpha0 + i, P(i, j));
          const int r = p.add_block(ConeKind::Nonneg, np);
          for (int i = 0; i < np; ++i) p.add_entry(r + i, out.nu_alpha0 + i, -1.0);
        }
        break;
      }
      case cones::MembershipBlocks::GroupCone::DualUncertaintyRows: {
        if (soc) {
          out.s21v0 = p.add_vars(m * k, "S21");
          for (int t = 0; t < m * k; ++t) real.vars[t] = {{out.s21v0 + t, 1.0}};
          for (int r = 0; r < m; ++r) {
            const int blk = p.add_block(ConeKind::SecondOrder, k);
            for (int j = 0; j < k; ++j) p.add_entry(blk + j, out.s21v0 + r * k + j, -1.0);
          }
        } else {
          const auto& P = inst.uncertainty.P();
          out.nu_s21_0 = p.add_vars(m * np, "nu_S21");
          for (int r = 0; r < m; ++r)
            for (int j = 0; j < k; ++j)
              for (int i = 0; i < np; ++i)
                if (P(i, j) != 0.0)
                  real.vars[r * k + j].emplace_back(out.nu_s21_0 + r * np + i, P(i, j));
          const int blk = p.add_block(ConeKind::Nonneg, m * np);
          for (int t = 0; t < m * np; ++t) p.add_entry(blk + t, out.nu_s21_0 + t, -1.0);
        }
        break;
      }
      case cones::MembershipBlocks::GroupCone::NonnegSym: {
        const int v0 = p.add_vars(grp.count, grp.name);
        if (grp.name == "S22")
          out.s22v0 = v0;
        else
          out.Nv0 = v0;
        for (int t = 0; t < grp.count; ++t) real.vars[t] = {{v0 + t, 1.0}};
        const int blk = p.add_block(ConeKind::Nonneg, grp.count);
        for (int t = 0; t < grp.count; ++t) p.add_entry(blk + t, v0 + t, -1.0);
        break;
      }
      case cones::MembershipBlocks::GroupCone::NonnegScalar: {
        out.tau0 = p.add_vars(1, "tau");
        real.vars[0] = {{out.tau0, 1.0}};
        const int blk = p.add_block(ConeKind::Nonneg, 1);
        p.add_entry(blk, out.tau0, -1.0);
        break;
      }
      case cones::MembershipBlocks::GroupCone::Psd:
        // M is realized as the membership slack itself
        break;
    }
  }

  // membership slack: svec(T - S - R) psd, with M absorbed as the slack
  out.psd_row = p.add_block(ConeKind::Psd, n);
  const int row0 = out.psd_row;
  // T: lambda g1 g1'
  p.add_entry(row0 + svec_index(n, 0, 0), out.lambda0, -1.0);
  // T: -(1/2) G(x) and its constant part
  for (int r = 0; r < m; ++r)
    for (int j = 0; j < k; ++j) {
      const int slot = row0 + svec_index(n, k + r, j);
      p.add_rhs(slot, -0.5 * inst.F(r, j) * kSqrt2);
      if (j == 0)
        for (int cIdx = 0; cIdx < n1; ++cIdx)
          p.add_entry(slot, out.x0 + cIdx, -0.5 * inst.A(r, cIdx) * kSqrt2);
    }
  // T: multiplier term
  if (diag) {
    for (int q = 0; q < n2; ++q) {
      for (int i = 0; i < n; ++i) {
        const double ei = hom.E(q, i);
        if (ei == 0.0) continue;
        p.add_entry(row0 + svec_index(n, i, i), out.v0 + q, -ei * ei);
        for (int j = 0; j < i; ++j) {
          const double ej = hom.E(q, j);
          if (ej != 0.0)
            p.add_entry(row0 + svec_index(n, i, j), out.v0 + q, -kSqrt2 * ei * ej);
        }
      }
    }
  } else {
    for (int pr = 0; pr < n; ++pr)
      for (int q = 0; q < n2; ++q) {
        const int col = out.L0 + pr * n2 + q;
        for (int j = 0; j < n; ++j) {
          const double e = hom.E(q, j);
          if (e == 0.0) continue;
          if (j == pr)
            p.add_entry(row0 + svec_index(n, pr, pr), col, -e);
          else
            p.add_entry(row0 + svec_index(n, pr, j), col, -e / kSqrt2);
        }
      }
  }
  // T: rho I
  if (out.rho0 >= 0) {
    for (int i = 0; i < n; ++i) p.add_entry(row0 + svec_index(n, i, i), out.rho0, -1.0);
  } else if (out.fixed_rho >= 0.0) {
    for (int i = 0; i < n; ++i) p.add_rhs(row0 + svec_index(n, i, i), out.fixed_rho);
  }
  // minus S and R via the membership plan
  for (const auto& entry : plan.recon) {
    if (plan.groups[entry.group].cone == cones::MembershipBlocks::GroupCone::Psd) continue;
    for (const auto& [var, coef] : realized[entry.group].vars[entry.var])
      p.add_entry(row0 + entry.slot, var, entry.coef * coef);
  }

  if (n1) add_first_stage_rows(p, inst.first_stage, out.x0);
  return out;
}

// ---------------------------------------------------------------------------
// Dual relaxation at fixed x (the Z-program)
// ---------------------------------------------------------------------------

namespace {

// Shared Z-program assembly: fixed-x relaxation (with the trace bound) or
// the exact dual of the unregularized free-x IB (with x-stationarity rows).
BuildResult build_z_program(const model::AroInstance& inst, const VectorXd* x_fixed,
                            const model::RadiusBound* radius) {
  const int n1 = inst.n1(), n2 = inst.n2(), m = inst.m(), k = inst.k();
  const int n = k + m;
  const bool soc = inst.uncertainty.kind() == UncertaintyCone::Kind::SecondOrder;

  BuildResult out;
  out.kind = ProgramKind::DualRelaxation;
  out.k = k;
  out.m = m;
  out.n1 = n1;
  out.n2 = n2;
  out.radius = radius ? radius->r : 0.0;
  ConicProgram& p = out.program;
  p.label = inst.label + (x_fixed ? "/dual-relaxation" : "/ib-dual");
  const model::Homogenization hom = model::homogenize(inst);

  // Under Z psd, diag(E Z E') = 0 is equivalent to Z E' = 0, i.e. the range
  // of Z lies in Null(E). The program is posed in that reduced coordinate
  // system, Z = Nb Zhat Nb' with Nb an orthonormal null-space basis: the
  // literal diag-row form leaves the feasible set without interior (every
  // feasible Z is singular), which stalls interior-point convergence near
  // 1e-4, while the reduced form satisfies Slater's condition.
  Eigen::ColPivHouseholderQR<MatrixXd> qr(hom.E.transpose());
  const int rankE = static_cast<int>(qr.rank());
  MatrixXd Q = qr.householderQ();
  const MatrixXd Nb = Q.rightCols(n - rankE);
  out.null_basis = Nb;
  const int nr = n - rankE;
  const int sd = svec_dim(nr);
  out.Z0 = p.add_vars(sd, "Zr");

  // svec coefficient vector of the linear functional Z(i,j) = n_i' Zhat n_j
  auto entry_coef = [&](int i, int j) {
    const MatrixXd M = 0.5 * (Nb.row(i).transpose() * Nb.row(j) +
                              Nb.row(j).transpose() * Nb.row(i));
    return linalg::svec(M);
  };
  // cache every entry of Z once
  std::vector<VectorXd> coef(svec_dim(n));
  for (int j = 0; j < n; ++j)
    for (int i = j; i < n; ++i) coef[svec_index(n, i, j)] = entry_coef(i, j);
  auto add_row = [&](int row, const VectorXd& cvec, double scale) {
    for (int t = 0; t < sd; ++t)
      if (cvec[t] != 0.0) p.add_entry(row, out.Z0 + t, scale * cvec[t]);
  };

  // objective: maximize (F - A x e1') . Z21, or F . Z21 when x is dualized
  MatrixXd W = inst.F;
  if (x_fixed && n1 > 0) W.col(0) -= inst.A * (*x_fixed);
  {
    VectorXd cobj = VectorXd::Zero(sd);
    for (int r = 0; r < m; ++r)
      for (int j = 0; j < k; ++j) cobj += W(r, j) * coef[svec_index(n, k + r, j)];
    for (int t = 0; t < sd; ++t) p.add_objective(out.Z0 + t, -cobj[t]);
  }
  // g1 g1' . Z = 1
  {
    const int eq = p.add_block(ConeKind::Zero, 1);
    add_row(eq, coef[svec_index(n, 0, 0)], 1.0);
    p.set_rhs(eq, 1.0);
  }
  if (!x_fixed && n1 > 0) {
    // first stage dualized coordinate-wise with q_j = c_j - (A'Z21 e1)_j:
    //   free x_j:        q_j  = 0
    //   x_j >= L:        q_j >= 0, objective term L q_j
    //   x_j <= U:        q_j <= 0, objective term U q_j
    //   L <= x_j <= U:   term L q_j - (U - L) t_j, t_j >= max(0, -q_j)
    std::vector<VectorXd> qcoef(n1);
    for (int j = 0; j < n1; ++j) {
      qcoef[j] = VectorXd::Zero(sd);
      for (int r = 0; r < m; ++r)
        if (inst.A(r, j) != 0.0) qcoef[j] -= inst.A(r, j) * coef[svec_index(n, k + r, 0)];
    }
    auto add_obj_q = [&](int j, double w) {
      // the true (max-form) objective gains w * q_j; in the stored
      // minimization the z-part is negated and the constant w * c_j is
      // carried by the offset, which objective_value() negates once more
      for (int t = 0; t < sd; ++t)
        if (qcoef[j][t] != 0.0) p.add_objective(out.Z0 + t, -w * qcoef[j][t]);
      out.objective_offset -= w * inst.c[j];
    };
    std::vector<int> boxed;
    for (int j = 0; j < n1; ++j) {
      const double lo = inst.first_stage.lower[j], hi = inst.first_stage.upper[j];
      const bool fl = std::isfinite(lo), fh = std::isfinite(hi);
      if (!fl && !fh) {
        // handled below via equality rows
      } else if (fl && fh) {
        boxed.push_back(j);
        if (lo != 0.0) add_obj_q(j, lo);
      } else if (fl) {
        if (lo != 0.0) add_obj_q(j, lo);
      } else {
        add_obj_q(j, hi);
      }
    }
    // free coordinates: q_j = 0 as equality rows (x recoverable from the
    // multipliers when every coordinate is free)
    {
      std::vector<int> free_idx;
      for (int j = 0; j < n1; ++j)
        if (!std::isfinite(inst.first_stage.lower[j]) &&
            !std::isfinite(inst.first_stage.upper[j]))
          free_idx.push_back(j);
      if (!free_idx.empty()) {
        out.x_stat_row = p.add_block(ConeKind::Zero, static_cast<int>(free_idx.size()));
        int t = 0;
        for (int j : free_idx) {
          // q_j = 0  <=>  (A'Z21 e1)_j = c_j
          add_row(out.x_stat_row + t, qcoef[j], -1.0);
          p.set_rhs(out.x_stat_row + t, inst.c[j]);
          ++t;
        }
      }
    }
    // one-sided coordinates: sign rows on q_j
    for (int j = 0; j < n1; ++j) {
      const bool fl = std::isfinite(inst.first_stage.lower[j]);
      const bool fh = std::isfinite(inst.first_stage.upper[j]);
      if (fl == fh) continue;  // free or boxed
      const int r = p.add_block(ConeKind::Nonneg, 1);
      // s = q_j >= 0 for a lower bound; s = -q_j >= 0 for an upper bound
      add_row(r, qcoef[j], fl ? -1.0 : 1.0);
      p.set_rhs(r, fl ? inst.c[j] : -inst.c[j]);
    }
    // two-sided coordinates: epigraph scalars
    if (!boxed.empty()) {
      const int t0 = p.add_vars(static_cast<int>(boxed.size()), "t_box");
      int t = 0;
      for (int j : boxed) {
        const double width = inst.first_stage.upper[j] - inst.first_stage.lower[j];
        p.add_objective(t0 + t, width);
        const int r = p.add_block(ConeKind::Nonneg, 2);
        p.add_entry(r, t0 + t, -1.0);  // t >= 0
        p.add_entry(r + 1, t0 + t, -1.0);  // t + q >= 0
        add_row(r + 1, qcoef[j], -1.0);
        p.set_rhs(r + 1, inst.c[j]);
        ++t;
      }
    }
  }
  if (radius) {
    // I . Z <= r; the basis is orthonormal so trace(Z) = trace(Zhat)
    const int r = p.add_block(ConeKind::Nonneg, 1);
    for (int i = 0; i < nr; ++i) p.add_entry(r, out.Z0 + svec_index(nr, i, i), 1.0);
    p.set_rhs(r, radius->r);
  }
  // Z22 >= 0
  {
    const int blk = p.add_block(ConeKind::Nonneg, svec_dim(m));
    int t = 0;
    for (int j = 0; j < m; ++j)
      for (int i = j; i < m; ++i, ++t)
        add_row(blk + t, coef[svec_index(n, k + i, k + j)], -1.0);
  }
  if (soc) {
    // J . Z11 >= 0
    const int r = p.add_block(ConeKind::Nonneg, 1);
    for (int i = 0; i < k; ++i)
      add_row(r, coef[svec_index(n, i, i)], i == 0 ? -1.0 : 1.0);
    // Z11 e1 in U
    const int rs = p.add_block(ConeKind::SecondOrder, k);
    for (int j = 0; j < k; ++j) add_row(rs + j, coef[svec_index(n, j, 0)], -1.0);
    // Rows(Z21) in U
    for (int r2 = 0; r2 < m; ++r2) {
      const int blk = p.add_block(ConeKind::SecondOrder, k);
      for (int j = 0; j < k; ++j) add_row(blk + j, coef[svec_index(n, k + r2, j)], -1.0);
    }
  } else {
    const auto& P = inst.uncertainty.P();
    const int np = static_cast<int>(P.rows());
    // P Z11 e1 >= 0
    {
      const int blk = p.add_block(ConeKind::Nonneg, np);
      for (int a = 0; a < np; ++a) {
        VectorXd cv = VectorXd::Zero(sd);
        for (int j = 0; j < k; ++j)
          if (P(a, j) != 0.0) cv += P(a, j) * coef[svec_index(n, j, 0)];
        add_row(blk + a, cv, -1.0);
      }
    }
    // P Z11 P' >= 0 (symmetric; lower triangle suffices)
    {
      const int blk = p.add_block(ConeKind::Nonneg, svec_dim(np));
      int t = 0;
      for (int b = 0; b < np; ++b)
        for (int a = b; a < np; ++a, ++t) {
          VectorXd cv = VectorXd::Zero(sd);
          for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) {
              const double w = P(a, i) * P(b, j);
              if (w != 0.0) cv += w * coef[svec_index(n, std::max(i, j), std::min(i, j))];
            }
          add_row(blk + t, cv, -1.0);
        }
    }
    // P Z21' >= 0
    {
      const int blk = p.add_block(ConeKind::Nonneg, np * m);
      for (int a = 0; a < np; ++a)
        for (int r2 = 0; r2 < m; ++r2) {
          VectorXd cv = VectorXd::Zero(sd);
          for (int j = 0; j < k; ++j)
            if (P(a, j) != 0.0) cv += P(a, j) * coef[svec_index(n, k + r2, j)];
          add_row(blk + a * m + r2, cv, -1.0);
        }
    }
  }
  // Zhat psd
  {
    const int blk = p.add_block(ConeKind::Psd, nr);
    for (int t = 0; t < sd; ++t) p.add_entry(blk + t, out.Z0 + t, -1.0);
  }
  return out;
}

}  // namespace

BuildResult build_dual_relaxation(const model::AroInstance& inst, const VectorXd& x,
                                  const model::RadiusBound& radius) {
  if (x.size() != inst.n1())
    throw std::invalid_argument("build_dual_relaxation: x dimension");
  return build_z_program(inst, &x, &radius);
}

BuildResult build_ib_dual(const model::AroInstance& inst) {
  if (inst.first_stage.G.rows() > 0)
    throw std::invalid_argument("build_ib_dual: extra first-stage rows not supported");
  return build_z_program(inst, nullptr, nullptr);
}


// ---------------------------------------------------------------------------
// extraction
// ---------------------------------------------------------------------------

namespace {

// optimal or near-optimal (a truncated run whose best iterate still has
// small residuals); anything else propagates as an error
void require_optimal(const solver::Solution& sol) {
  if (sol.status == solver::SolveStatus::Optimal) return;
  if (sol.status == solver::SolveStatus::IterLimit &&
      std::max({sol.primal_residual, sol.dual_residual, sol.relative_gap}) <= 1e-4)
    return;
  throw std::runtime_error(std::string("extract: solver status ") +
                           solver::to_string(sol.status));
}

}  // namespace

VectorXd extract_ib_dual_x(const BuildResult& built, const solver::Solution& sol) {
  require_optimal(sol);
  if (built.x_stat_row < 0) throw std::invalid_argument("extract_ib_dual_x: no stationarity rows");
  return sol.y.segment(built.x_stat_row, built.n1);
}

double objective_value(const BuildResult& built, const solver::Solution& sol) {
  double v = sol.primal_objective + built.objective_offset;
  if (built.kind == ProgramKind::DualRelaxation) v = -v;  // stored as a minimization
  return v;
}

AffineSolution extract_affine(const BuildResult& built, const solver::Solution& sol,
                              const model::AroInstance& inst) {
  require_optimal(sol);
  AffineSolution out;
  const int n1 = built.n1, n2 = built.n2, k = built.k;
  out.x = n1 ? VectorXd(sol.x.segment(built.x0, n1)) : VectorXd(0);
  out.Y.resize(n2, k);
  for (int i = 0; i < n2; ++i)
    for (int j = 0; j < k; ++j) out.Y(i, j) = sol.x[built.Y0 + i * k + j];
  out.lambda = sol.x[built.lambda0];
  out.value = (n1 ? inst.c.dot(out.x) : 0.0) + out.lambda;

  VectorXd e1 = VectorXd::Zero(k);
  e1[0] = 1.0;
  VectorXd epi = out.lambda * e1 - out.Y.transpose() * inst.d;
  out.feasibility_violation = cones::dual_violation(inst.uncertainty, epi);
  MatrixXd rows = -inst.F + inst.B * out.Y;
  if (n1) rows.col(0) += inst.A * out.x;
  for (int r = 0; r < built.m; ++r)
    out.feasibility_violation =
        std::max(out.feasibility_violation,
                 cones::dual_violation(inst.uncertainty, rows.row(r).transpose()));
  return out;
}

IbSolution extract_ib(const BuildResult& built, const solver::Solution& sol,
                      const model::AroInstance& inst) {
  require_optimal(sol);
  if (built.kind != ProgramKind::IbLambda && built.kind != ProgramKind::IbDiagonal)
    throw std::invalid_argument("extract_ib: not an IB build");
  const int n1 = built.n1, n2 = built.n2, k = built.k, m = built.m;
  const int n = k + m;
  const bool soc = inst.uncertainty.kind() == UncertaintyCone::Kind::SecondOrder;

  IbSolution out;
  out.x = n1 ? VectorXd(sol.x.segment(built.x0, n1)) : VectorXd(0);
  out.lambda = sol.x[built.lambda0];
  if (built.kind == ProgramKind::IbLambda) {
    MatrixXd L(n, n2);
    for (int i = 0; i < n; ++i)
      for (int q = 0; q < n2; ++q) L(i, q) = sol.x[built.L0 + i * n2 + q];
    out.Lambda = L;
  } else {
    out.v = VectorXd(sol.x.segment(built.v0, n2));
  }
  out.rho = built.rho0 >= 0 ? sol.x[built.rho0] : std::max(0.0, built.fixed_rho);
  out.value = (n1 ? inst.c.dot(out.x) : 0.0) + out.lambda + built.radius * out.rho;

  // certificate
  auto& cert = out.certificate;
  if (soc) {
    cert.alpha = sol.x.segment(built.alpha0, k);
    cert.S21.resize(m, k);
    for (int r = 0; r < m; ++r)
      for (int j = 0; j < k; ++j) cert.S21(r, j) = sol.x[built.s21v0 + r * k + j];
    cert.tau = sol.x[built.tau0];
  } else {
    const auto& P = inst.uncertainty.P();
    const int np = static_cast<int>(P.rows());
    cert.alpha = P.transpose() * sol.x.segment(built.nu_alpha0, np);
    cert.S21.resize(m, k);
    for (int r = 0; r < m; ++r)
      cert.S21.row(r) =
          (P.transpose() * sol.x.segment(built.nu_s21_0 + r * np, np)).transpose();
    MatrixXd N(np, np);
    int t = 0;
    for (int j = 0; j < np; ++j)
      for (int i = j; i < np; ++i, ++t) N(i, j) = N(j, i) = sol.x[built.Nv0 + t];
    cert.N = N;
  }
  cert.S22.setZero(m, m);
  {
    int t = 0;
    for (int j = 0; j < m; ++j)
      for (int i = j + 1; i < m; ++i, ++t)
        cert.S22(i, j) = cert.S22(j, i) = sol.x[built.s22v0 + t];
  }
  cert.M = linalg::smat(sol.s.segment(built.psd_row, svec_dim(n)));

  // target reconstruction from raw data
  GxHyAssembler asm_(inst);
  MatrixXd T = MatrixXd::Zero(n, n);
  T(0, 0) = out.lambda;
  T -= 0.5 * asm_.G(out.x);
  if (out.Lambda.has_value()) T += 0.5 * asm_.sym_EL(*out.Lambda);
  if (out.v.has_value()) T += asm_.EDiagE(*out.v);
  T += out.rho * MatrixXd::Identity(n, n);
  MatrixConeSpec spec(k, m, MatrixConeVariant::IB, inst.uncertainty);
  out.reconstruction_error = (T - cert.reconstruct(spec)).cwiseAbs().maxCoeff();
  return out;
}

MatrixXd extract_dual_Z(const BuildResult& built, const solver::Solution& sol) {
  require_optimal(sol);
  if (built.kind != ProgramKind::DualRelaxation)
    throw std::invalid_argument("extract_dual_Z: not a dual relaxation build");
  const int nr = static_cast<int>(built.null_basis.cols());
  const MatrixXd Zr = linalg::smat(sol.x.segment(built.Z0, svec_dim(nr)));
  return built.null_basis * Zr * built.null_basis.transpose();
}

// ---------------------------------------------------------------------------
// membership feasibility
// ---------------------------------------------------------------------------

std::optional<cones::ConeCertificate> membership_check(const cones::MatrixConeSpec& spec,
                                                       const MatrixXd& target, double tol) {
  const int k = spec.k, m = spec.m, n = k + m;
  if (target.rows() != n || target.cols() != n)
    throw std::invalid_argument("membership_check: target order mismatch");

  if (spec.variant == MatrixConeVariant::IA) {
    // direct algebra: T11 must equal e1 a' + a e1' with a in U*, rows of
    // T21 in U*, T22 entrywise nonnegative
    const double scale = 1.0 + target.cwiseAbs().maxCoeff();
    if (k > 1 &&
        target.block(1, 1, k - 1, k - 1).cwiseAbs().maxCoeff() > tol * scale)
      return std::nullopt;
    cones::ConeCertificate cert;
    cert.alpha = VectorXd(k);
    cert.alpha[0] = 0.5 * target(0, 0);
    for (int j = 1; j < k; ++j) cert.alpha[j] = target(j, 0);
    if (!cones::dual_contains(spec.uncertainty, cert.alpha, tol * scale)) return std::nullopt;
    cert.S21 = target.bottomLeftCorner(m, k);
    for (int r = 0; r < m; ++r)
      if (!cones::dual_contains(spec.uncertainty, cert.S21.row(r).transpose(), tol * scale))
        return std::nullopt;
    cert.S22 = target.bottomRightCorner(m, m);
    if (m > 0 && cert.S22.minCoeff() < -tol * scale) return std::nullopt;
    return cert;
  }

  // IB: feasibility program over the membership plan with M as the slack
  const auto plan = cones::emit_membership_blocks(spec);
  ConicProgram p;
  p.label = "ib-membership";
  const bool soc = spec.uncertainty.kind() == UncertaintyCone::Kind::SecondOrder;
  const int np = soc ? 0 : static_cast<int>(spec.uncertainty.P().rows());

  std::vector<GroupRealization> realized(plan.groups.size());
  int alpha0 = -1, nu_alpha0 = -1, s21v0 = -1, nu_s21_0 = -1, s22v0 = -1, tau0 = -1, Nv0 = -1;
  for (size_t gi = 0; gi < plan.groups.size(); ++gi) {
    const auto& grp = plan.groups[gi];
    auto& real = realized[gi];
    real.vars.resize(grp.count);
    switch (grp.cone) {
      case cones::MembershipBlocks::GroupCone::DualUncertainty:
        if (soc) {
          alpha0 = p.add_vars(k, "alpha");
          for (int j = 0; j < k; ++j) real.vars[j] = {{alpha0 + j, 1.0}};
          const int r = p.add_block(ConeKind::SecondOrder, k);
          for (int j = 0; j < k; ++j) p.add_entry(r + j, alpha0 + j, -1.0);
        } else {
          const auto& P = spec.uncertainty.P();
          nu_alpha0 = p.add_vars(np, "nu_alpha");
          for (int j = 0; j < k; ++j)
            for (int i = 0; i < np; ++i)
              if (P(i, j) != 0.0) real.vars[j].emplace_back(nu_alpha0 + i, P(i, j));
          const int r = p.add_block(ConeKind::Nonneg, np);
          for (int i = 0; i < np; ++i) p.add_entry(r + i, nu_alpha0 + i, -1.0);
        }
        break;
      case cones::MembershipBlocks::GroupCone::DualUncertaintyRows:
        if (soc) {
          s21v0 = p.add_vars(m * k, "S21");
          for (int t = 0; t < m * k; ++t) real.vars[t] = {{s21v0 + t, 1.0}};
          for (int r = 0; r < m; ++r) {
            const int blk = p.add_block(ConeKind::SecondOrder, k);
            for (int j = 0; j < k; ++j) p.add_entry(blk + j, s21v0 + r * k + j, -1.0);
          }
        } else {
          const auto& P = spec.uncertainty.P();
          nu_s21_0 = p.add_vars(m * np, "nu_S21");
          for (int r = 0; r < m; ++r)
            for (int j = 0; j < k; ++j)
              for (int i = 0; i < np; ++i)
                if (P(i, j) != 0.0)
                  real.vars[r * k + j].emplace_back(nu_s21_0 + r * np + i, P(i, j));
          const int blk = p.add_block(ConeKind::Nonneg, m * np);
          for (int t = 0; t < m * np; ++t) p.add_entry(blk + t, nu_s21_0 + t, -1.0);
        }
        break;
      case cones::MembershipBlocks::GroupCone::NonnegSym: {
        const int v0 = p.add_vars(grp.count, grp.name);
        if (grp.name == "S22")
          s22v0 = v0;
        else
          Nv0 = v0;
        for (int t = 0; t < grp.count; ++t) real.vars[t] = {{v0 + t, 1.0}};
        const int blk = p.add_block(ConeKind::Nonneg, grp.count);
        for (int t = 0; t < grp.count; ++t) p.add_entry(blk + t, v0 + t, -1.0);
        break;
      }
      case cones::MembershipBlocks::GroupCone::NonnegScalar: {
        tau0 = p.add_vars(1, "tau");
        real.vars[0] = {{tau0, 1.0}};
        const int blk = p.add_block(ConeKind::Nonneg, 1);
        p.add_entry(blk, tau0, -1.0);
        break;
      }
      case cones::MembershipBlocks::GroupCone::Psd: break;
    }
  }
  const int psd = p.add_block(ConeKind::Psd, n);
  const VectorXd tv = linalg::svec(target);
  for (int t = 0; t < tv.size(); ++t) p.set_rhs(psd + t, tv[t]);
  for (const auto& entry : plan.recon) {
    if (plan.groups[entry.group].cone == cones::MembershipBlocks::GroupCone::Psd) continue;
    for (const auto& [var, coef] : realized[entry.group].vars[entry.var])
      p.add_entry(psd + entry.slot, var, entry.coef * coef);
  }
  solver::SolverSettings st;
  st.eps = std::min(1e-8, tol);
  auto sol = solver::solve(p, st);
  if (sol.status != solver::SolveStatus::Optimal &&
      sol.status != solver::SolveStatus::IterLimit)
    return std::nullopt;

  cones::ConeCertificate cert;
  if (soc) {
    cert.alpha = sol.x.segment(alpha0, k);
    cert.S21.resize(m, k);
    for (int r = 0; r < m; ++r)
      for (int j = 0; j < k; ++j) cert.S21(r, j) = sol.x[s21v0 + r * k + j];
    cert.tau = sol.x[tau0];
  } else {
    const auto& P = spec.uncertainty.P();
    cert.alpha = P.transpose() * sol.x.segment(nu_alpha0, np);
    cert.S21.resize(m, k);
    for (int r = 0; r < m; ++r)
      cert.S21.row(r) = (P.transpose() * sol.x.segment(nu_s21_0 + r * np, np)).transpose();
    MatrixXd N(np, np);
    int t = 0;
    for (int j = 0; j < np; ++j)
      for (int i = j; i < np; ++i, ++t) N(i, j) = N(j, i) = sol.x[Nv0 + t];
    cert.N = N;
  }
  cert.S22.setZero(m, m);
  {
    int t = 0;
    for (int j = 0; j < m; ++j)
      for (int i = j + 1; i < m; ++i, ++t) cert.S22(i, j) = cert.S22(j, i) = sol.x[s22v0 + t];
  }
  cert.M = linalg::smat(sol.s.segment(psd, svec_dim(n)));

  // verify the witness directly on the extracted numbers rather than
  // trusting the solve status: a truncated (IterLimit) run can still carry
  // an exact-enough certificate, and a clean status still deserves the check
  const double scale = 1.0 + target.cwiseAbs().maxCoeff();
  const double vtol = std::max(tol, 1e-7) * scale;
  if ((target - cert.reconstruct(spec)).cwiseAbs().maxCoeff() > 10.0 * vtol) return std::nullopt;
  if (linalg::min_eigenvalue(cert.M) < -vtol) return std::nullopt;
  if (m > 0 && cert.S22.minCoeff() < -vtol) return std::nullopt;
  if (cert.tau.has_value() && *cert.tau < -vtol) return std::nullopt;
  if (cert.N.has_value() && cert.N->size() > 0 && cert.N->minCoeff() < -vtol) return std::nullopt;
  return cert;
}

}  // namespace arlp::builders
