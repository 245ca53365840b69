#include "arlp/cones.hpp"

#include <Eigen/QR>
#include <cmath>
#include <stdexcept>

#include "arlp/polytope.hpp"
#include "arlp/solver.hpp"
#include "json.hpp"

namespace arlp::cones {

namespace {
constexpr double kSqrt2 = 1.4142135623730950488;
}

// ---------------------------------------------------------------------------
// UncertaintyCone
// ---------------------------------------------------------------------------

UncertaintyCone::UncertaintyCone(Kind kind, int k, MatrixXd P)
    : kind_(kind), k_(k), P_(std::move(P)) {}

UncertaintyCone UncertaintyCone::second_order(int k) {
  if (k < 2) throw std::invalid_argument("UncertaintyCone: k >= 2 required");
  return UncertaintyCone(Kind::SecondOrder, k, MatrixXd());
}

UncertaintyCone UncertaintyCone::polyhedral(MatrixXd P) {
  if (P.cols() < 2) throw std::invalid_argument("UncertaintyCone: k >= 2 required");
  if (P.rows() < 1) throw std::invalid_argument("UncertaintyCone: P needs at least one row");
  const int k = static_cast<int>(P.cols());
  return UncertaintyCone(Kind::Polyhedral, k, std::move(P));
}

const MatrixXd& UncertaintyCone::P() const {
  if (kind_ != Kind::Polyhedral)
    throw std::logic_error("UncertaintyCone::P: not a polyhedral cone");
  return P_;
}

bool UncertaintyCone::operator==(const UncertaintyCone& o) const {
  if (kind_ != o.kind_ || k_ != o.k_) return false;
  if (kind_ == Kind::Polyhedral) {
    if (P_.rows() != o.P_.rows()) return false;
    return P_.size() == 0 || (P_ - o.P_).cwiseAbs().maxCoeff() == 0.0;
  }
  return true;
}

double violation(const UncertaintyCone& cone, const VectorXd& u) {
  if (u.size() != cone.dim())
    throw std::invalid_argument("cones::violation: dimension mismatch");
  if (cone.kind() == UncertaintyCone::Kind::SecondOrder) {
    return std::max(0.0, u.tail(u.size() - 1).norm() - u[0]);
  }
  const VectorXd r = cone.P() * u;
  return std::max(0.0, -r.minCoeff());
}

bool contains(const UncertaintyCone& cone, const VectorXd& u, double tol) {
  return violation(cone, u) <= tol;
}

bool dual_contains(const UncertaintyCone& cone, const VectorXd& a, double tol) {
  if (a.size() != cone.dim())
    throw std::invalid_argument("cones::dual_contains: dimension mismatch");
  if (cone.kind() == UncertaintyCone::Kind::SecondOrder) return contains(cone, a, tol);
  return dual_violation(cone, a) <= tol;
}

double dual_violation(const UncertaintyCone& cone, const VectorXd& a) {
  if (a.size() != cone.dim())
    throw std::invalid_argument("cones::dual_violation: dimension mismatch");
  if (cone.kind() == UncertaintyCone::Kind::SecondOrder) return violation(cone, a);

  // distance of a to {P' nu : nu >= 0} in the infinity norm:
  //   min t  s.t.  P' nu + w = a,  -t <= w_j <= t,  nu >= 0, t >= 0
  const MatrixXd& P = cone.P();
  const int p = static_cast<int>(P.rows()), k = cone.dim();
  solver::ConicProgram lp;
  lp.label = "dual-membership";
  const int nu = lp.add_vars(p, "nu");
  const int w = lp.add_vars(k, "w");
  const int t = lp.add_vars(1, "t");
  lp.set_objective(t, 1.0);
  const int eq = lp.add_block(solver::ConeKind::Zero, k);
  for (int j = 0; j < k; ++j) {
    for (int i = 0; i < p; ++i) lp.add_entry(eq + j, nu + i, P(i, j));
    lp.add_entry(eq + j, w + j, 1.0);
    lp.set_rhs(eq + j, a[j]);
  }
  const int rnu = lp.add_block(solver::ConeKind::Nonneg, p);
  for (int i = 0; i < p; ++i) lp.add_entry(rnu + i, nu + i, -1.0);
  const int rw = lp.add_block(solver::ConeKind::Nonneg, 2 * k + 1);
  for (int j = 0; j < k; ++j) {
    lp.add_entry(rw + j, t, -1.0);
    lp.add_entry(rw + j, w + j, 1.0);
    lp.add_entry(rw + k + j, t, -1.0);
    lp.add_entry(rw + k + j, w + j, -1.0);
  }
  lp.add_entry(rw + 2 * k, t, -1.0);
  auto sol = solver::solve(lp);
  const bool usable =
      sol.status == solver::SolveStatus::Optimal ||
      (sol.status == solver::SolveStatus::IterLimit &&
       std::max({sol.primal_residual, sol.dual_residual, sol.relative_gap}) <= 1e-6);
  if (!usable)
    throw std::runtime_error("dual_violation: membership LP did not solve (" +
                             std::string(solver::to_string(sol.status)) + ")");
  return std::max(0.0, sol.primal_objective);
}

// ---------------------------------------------------------------------------
// Slice sampling
// ---------------------------------------------------------------------------

struct SliceSampler::Impl {
  UncertaintyCone cone;
  std::vector<VectorXd> vertices;  // vertex-combination mode when nonempty
  // hit-and-run mode
  VectorXd start;
  MatrixXd null_basis;  // basis of the slice's affine hull directions
  Impl(UncertaintyCone c) : cone(std::move(c)) {}
};

SliceSampler::SliceSampler(const UncertaintyCone& cone) {
  auto impl = std::make_shared<Impl>(cone);
  if (cone.kind() == UncertaintyCone::Kind::Polyhedral) {
    const MatrixXd& P = cone.P();
    const int k = cone.dim();
    const int p = static_cast<int>(P.rows());
    const auto bases = polytope::count_bases(p, k - 1);
    bool enumerated = false;
    if (bases <= 300'000) {
      polytope::Description d;
      d.Aeq = MatrixXd::Zero(1, k);
      d.Aeq(0, 0) = 1.0;
      d.beq = VectorXd::Ones(1);
      d.Ain = P;
      d.bin = VectorXd::Zero(p);
      impl->vertices = polytope::enumerate_vertices(d);
      enumerated = !impl->vertices.empty();
    }
    if (!enumerated) {
      // Per-row max slack over the slice; rows that cannot be made slack
      // are implicit equalities of the slice's affine hull. The average of
      // the per-row maximizers is a relative-interior starting point.
      std::vector<int> eq_rows;
      VectorXd avg = VectorXd::Zero(k);
      int navg = 0;
      double scale = 1.0 + P.cwiseAbs().maxCoeff();
      for (int i = 0; i < p; ++i) {
        solver::ConicProgram lp;
        const int u = lp.add_vars(k, "u");
        lp.set_objective(u, 0.0);
        for (int j = 0; j < k; ++j) lp.set_objective(u + j, -P(i, j));  // max P_i u
        const int eq = lp.add_block(solver::ConeKind::Zero, 1);
        lp.add_entry(eq, u, 1.0);
        lp.set_rhs(eq, 1.0);
        const int rows = lp.add_block(solver::ConeKind::Nonneg, p);
        for (int r = 0; r < p; ++r)
          for (int j = 0; j < k; ++j) lp.add_entry(rows + r, u + j, -P(r, j));
        // cap the objective row so an unbounded slice still reports; slices
        // are validated bounded before sampling in practice
        const int cap = lp.add_block(solver::ConeKind::Nonneg, 1);
        for (int j = 0; j < k; ++j) lp.add_entry(cap, u + j, P(i, j));
        lp.set_rhs(cap, 1e6 * scale);
        auto sol = solver::solve(lp);
        if (sol.status != solver::SolveStatus::Optimal)
          throw std::runtime_error("SliceSampler: slack LP failed");
        const double slack = -sol.primal_objective;
        if (slack <= 1e-9 * scale) {
          eq_rows.push_back(i);
        } else {
          avg += sol.x.head(k);
          ++navg;
        }
      }
      if (navg == 0) throw std::runtime_error("SliceSampler: slice has empty relative interior");
      impl->start = avg / navg;
      MatrixXd E(1 + eq_rows.size(), k);
      E.row(0).setZero();
      E(0, 0) = 1.0;
      for (size_t i = 0; i < eq_rows.size(); ++i) E.row(1 + i) = P.row(eq_rows[i]);
      Eigen::ColPivHouseholderQR<MatrixXd> qr(E.transpose());
      MatrixXd Q = qr.householderQ();
      impl->null_basis = Q.rightCols(k - qr.rank());
    }
  }
  impl_ = std::move(impl);
}

const std::vector<VectorXd>& SliceSampler::slice_vertices() const { return impl_->vertices; }

VectorXd SliceSampler::operator()(linalg::Rng& rng) const {
  const auto& im = *impl_;
  const int k = im.cone.dim();
  if (im.cone.kind() == UncertaintyCone::Kind::SecondOrder) {
    // half volume-uniform in the ball (relative-interior coverage), half on
    // the sphere: scenario maxima concentrate on the boundary, and a
    // boundary component tightens the Monte Carlo lower bound materially
    VectorXd u(k);
    u[0] = 1.0;
    if (rng.uniform() < 0.5)
      u.tail(k - 1) = rng.ball_point(k - 1);
    else
      u.tail(k - 1) = rng.unit_direction(k - 1);
    return u;
  }
  if (!im.vertices.empty()) {
    // Dirichlet(1,...,1) weights cover the relative interior
    VectorXd w(im.vertices.size());
    for (int i = 0; i < w.size(); ++i) w[i] = -std::log(std::max(rng.uniform(), 1e-300));
    w /= w.sum();
    VectorXd u = VectorXd::Zero(k);
    for (size_t i = 0; i < im.vertices.size(); ++i) u += w[i] * im.vertices[i];
    return u;
  }
  // hit-and-run from the relative-interior start
  const MatrixXd& P = im.cone.P();
  VectorXd u = im.start;
  const int steps = 16 + 2 * k;
  const int ndir = static_cast<int>(im.null_basis.cols());
  for (int s = 0; s < steps; ++s) {
    if (ndir == 0) break;
    VectorXd dir = im.null_basis * rng.unit_direction(ndir);
    double tlo = -1e6, thi = 1e6;
    const VectorXd slack = P * u;
    const VectorXd pd = P * dir;
    for (int i = 0; i < P.rows(); ++i) {
      if (pd[i] > 1e-14)
        tlo = std::max(tlo, -slack[i] / pd[i]);
      else if (pd[i] < -1e-14)
        thi = std::min(thi, -slack[i] / pd[i]);
    }
    if (thi <= tlo) continue;
    u += (tlo + (thi - tlo) * rng.uniform()) * dir;
  }
  return u;
}

VectorXd sample(const UncertaintyCone& cone, linalg::Rng& rng) {
  return SliceSampler(cone)(rng);
}

VectorXd sample_cone_point(const UncertaintyCone& cone, linalg::Rng& rng) {
  return rng.uniform(0.0, 2.0) * sample(cone, rng);
}

VectorXd sample_dual_point(const UncertaintyCone& cone, linalg::Rng& rng) {
  if (cone.kind() == UncertaintyCone::Kind::SecondOrder) return sample_cone_point(cone, rng);
  const MatrixXd& P = cone.P();
  VectorXd nu(P.rows());
  for (int i = 0; i < nu.size(); ++i) nu[i] = -std::log(std::max(rng.uniform(), 1e-300));
  return P.transpose() * nu * rng.uniform(0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Matrix cones
// ---------------------------------------------------------------------------

MatrixConeSpec::MatrixConeSpec(int k_, int m_, MatrixConeVariant v, UncertaintyCone unc)
    : k(k_), m(m_), variant(v), uncertainty(std::move(unc)) {
  if (k != uncertainty.dim())
    throw std::invalid_argument("MatrixConeSpec: k must match the uncertainty dimension");
  if (m < 0) throw std::invalid_argument("MatrixConeSpec: m >= 0 required");
}

MatrixXd ConeCertificate::reconstruct(const MatrixConeSpec& spec) const {
  const int k = spec.k, m = spec.m, n = k + m;
  MatrixXd S = MatrixXd::Zero(n, n);
  VectorXd e1 = VectorXd::Zero(k);
  e1[0] = 1.0;
  S.topLeftCorner(k, k) = e1 * alpha.transpose() + alpha * e1.transpose();
  S.bottomLeftCorner(m, k) = S21;
  S.topRightCorner(k, m) = S21.transpose();
  S.bottomRightCorner(m, m) = S22;
  if (spec.variant == MatrixConeVariant::IB) {
    if (M.size()) S += M;
    if (tau.has_value()) {
      MatrixXd J = -MatrixXd::Identity(k, k);
      J(0, 0) = 1.0;
      S.topLeftCorner(k, k) += *tau * J;
    }
    if (N.has_value()) {
      const MatrixXd& P = spec.uncertainty.P();
      S.topLeftCorner(k, k) += P.transpose() * (*N) * P;
    }
  }
  return S;
}

std::string ConeCertificate::to_json() const {
  nlohmann::json j;
  j["schema"] = "cone-certificate/1";
  auto mat = [](const MatrixXd& X) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < X.rows(); ++i) {
      nlohmann::json r = nlohmann::json::array();
      for (int c = 0; c < X.cols(); ++c) r.push_back(X(i, c));
      rows.push_back(r);
    }
    return rows;
  };
  j["alpha"] = std::vector<double>(alpha.data(), alpha.data() + alpha.size());
  j["S21"] = mat(S21);
  j["S22"] = mat(S22);
  if (M.size()) j["M"] = mat(M);
  if (tau.has_value()) j["tau"] = *tau;
  if (N.has_value()) j["N"] = mat(*N);
  return j.dump();
}

ConeCertificate random_certificate(const MatrixConeSpec& spec, linalg::Rng& rng) {
  const int k = spec.k, m = spec.m;
  ConeCertificate cert;
  cert.alpha = sample_dual_point(spec.uncertainty, rng);
  cert.S21.resize(m, k);
  for (int r = 0; r < m; ++r) cert.S21.row(r) = sample_dual_point(spec.uncertainty, rng).transpose();
  cert.S22.resize(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j <= i; ++j) cert.S22(i, j) = cert.S22(j, i) = rng.uniform(0.0, 1.0);
  if (spec.variant == MatrixConeVariant::IB) {
    const int n = k + m;
    MatrixXd G(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) G(i, j) = rng.gaussian();
    cert.M = G.transpose() * G / n;
    if (spec.uncertainty.kind() == UncertaintyCone::Kind::SecondOrder) {
      cert.tau = rng.uniform(0.0, 1.0);
    } else {
      const int p = static_cast<int>(spec.uncertainty.P().rows());
      MatrixXd N(p, p);
      for (int i = 0; i < p; ++i)
        for (int j = 0; j <= i; ++j) N(i, j) = N(j, i) = rng.uniform(0.0, 1.0 / p);
      cert.N = N;
    }
  }
  return cert;
}

int MembershipBlocks::group_index(const std::string& name) const {
  for (size_t i = 0; i < groups.size(); ++i)
    if (groups[i].name == name) return static_cast<int>(i);
  return -1;
}

MembershipBlocks emit_membership_blocks(const MatrixConeSpec& spec) {
  using linalg::svec_index;
  const int k = spec.k, m = spec.m, n = k + m;
  MembershipBlocks out;
  out.target_order = n;

  auto add_group = [&](const std::string& name, MembershipBlocks::GroupCone c, int count,
                       int rows, int cols) {
    out.groups.push_back({name, c, count, rows, cols});
    return static_cast<int>(out.groups.size() - 1);
  };

  // alpha: S11 = e1 alpha' + alpha e1'
  const int g_alpha = add_group("alpha", MembershipBlocks::GroupCone::DualUncertainty, k, k, 1);
  out.recon.push_back({svec_index(n, 0, 0), g_alpha, 0, 2.0});
  for (int i = 1; i < k; ++i)
    out.recon.push_back({svec_index(n, i, 0), g_alpha, i, kSqrt2});

  // S21: rows in the dual uncertainty cone
  const int g_s21 =
      add_group("S21", MembershipBlocks::GroupCone::DualUncertaintyRows, m * k, m, k);
  for (int r = 0; r < m; ++r)
    for (int j = 0; j < k; ++j)
      out.recon.push_back({svec_index(n, k + r, j), g_s21, r * k + j, kSqrt2});

  // S22: symmetric entrywise-nonnegative. For the IB variant only the
  // strict lower triangle is materialized: a nonnegative diagonal can be
  // absorbed into the psd block M, so dropping it leaves the cone unchanged
  // and removes a flat direction from the decomposition.
  const bool ib = spec.variant == MatrixConeVariant::IB;
  const int s22_count = ib ? m * (m - 1) / 2 : linalg::svec_dim(m);
  const int g_s22 = add_group("S22", MembershipBlocks::GroupCone::NonnegSym, s22_count, m, m);
  {
    int t = 0;
    for (int j = 0; j < m; ++j)
      for (int i = j; i < m; ++i) {
        if (ib && i == j) continue;
        out.recon.push_back({svec_index(n, k + i, k + j), g_s22, t, i == j ? 1.0 : kSqrt2});
        ++t;
      }
  }

  if (spec.variant == MatrixConeVariant::IB) {
    // M: psd of order k+m, stored in svec coordinates
    const int g_m = add_group("M", MembershipBlocks::GroupCone::Psd, linalg::svec_dim(n), n, n);
    for (int t = 0; t < linalg::svec_dim(n); ++t) out.recon.push_back({t, g_m, t, 1.0});

    if (spec.uncertainty.kind() == UncertaintyCone::Kind::SecondOrder) {
      // R11 = tau J, J = Diag(1, -1, ..., -1)
      const int g_tau = add_group("tau", MembershipBlocks::GroupCone::NonnegScalar, 1, 1, 1);
      for (int i = 0; i < k; ++i)
        out.recon.push_back({svec_index(n, i, i), g_tau, 0, i == 0 ? 1.0 : -1.0});
    } else {
      // R11 = P' N P with N symmetric nonnegative (lower triangle stored)
      const MatrixXd& P = spec.uncertainty.P();
      const int p = static_cast<int>(P.rows());
      const int g_nn =
          add_group("N", MembershipBlocks::GroupCone::NonnegSym, linalg::svec_dim(p), p, p);
      for (int i = 0; i < k; ++i)
        for (int j = 0; j <= i; ++j) {
          const double sc = (i == j) ? 1.0 : kSqrt2;
          int t = 0;
          for (int b = 0; b < p; ++b)
            for (int a = b; a < p; ++a, ++t) {
              const double coef = (a == b) ? P(a, i) * P(a, j)
                                           : P(a, i) * P(b, j) + P(b, i) * P(a, j);
              if (coef != 0.0)
                out.recon.push_back({svec_index(n, i, j), g_nn, t, sc * coef});
            }
        }
    }
  }
  return out;
}

std::optional<std::pair<double, MatrixXd>> cop_soc_check(const MatrixXd& R11, double tol) {
  const int k = static_cast<int>(R11.rows());
  if (R11.cols() != k || k < 1) throw std::invalid_argument("cop_soc_check: square matrix required");
  MatrixXd J = -MatrixXd::Identity(k, k);
  J(0, 0) = 1.0;
  const VectorXd eigs = linalg::sym_eigenvalues(R11);
  const double tau_max = std::max(std::abs(eigs[0]), std::abs(eigs[k - 1]));
  auto f = [&](double tau) { return linalg::min_eigenvalue(R11 - tau * J); };

  // golden-section search: f is concave in tau
  const double gr = 0.6180339887498948482;
  double a = 0.0, b = std::max(tau_max, 1e-12);
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > 1e-10 * (1.0 + tau_max)) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = f(x1);
    }
  }
  double tau = 0.5 * (a + b);
  // prefer the endpoints when they do at least as well (exact tau = 0 case)
  if (f(0.0) >= f(tau)) tau = 0.0;
  if (f(tau) < -tol) return std::nullopt;
  return std::make_pair(tau, MatrixXd(R11 - tau * J));
}

}  // namespace arlp::cones
