#include "arlp/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "arlp/builders.hpp"
#include "arlp/polytope.hpp"
#include "arlp/solver.hpp"
#include "json.hpp"

namespace arlp::model {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

FirstStageSet FirstStageSet::free_reals(int n1) {
  FirstStageSet fs;
  fs.lower = VectorXd::Constant(n1, -kInf);
  fs.upper = VectorXd::Constant(n1, kInf);
  return fs;
}

FirstStageSet FirstStageSet::box(VectorXd lo, VectorXd hi) {
  if (lo.size() != hi.size()) throw std::invalid_argument("FirstStageSet::box: size mismatch");
  for (int i = 0; i < lo.size(); ++i)
    if (lo[i] > hi[i]) throw std::invalid_argument("FirstStageSet::box: empty box");
  FirstStageSet fs;
  fs.lower = std::move(lo);
  fs.upper = std::move(hi);
  return fs;
}

FirstStageSet FirstStageSet::nonneg(int n1) {
  FirstStageSet fs;
  fs.lower = VectorXd::Zero(n1);
  fs.upper = VectorXd::Constant(n1, kInf);
  return fs;
}

bool FirstStageSet::is_free() const {
  if (G.rows() > 0) return false;
  for (int i = 0; i < lower.size(); ++i)
    if (std::isfinite(lower[i]) || std::isfinite(upper[i])) return false;
  return true;
}

AroInstance::AroInstance(MatrixXd A_, MatrixXd B_, VectorXd c_, VectorXd d_, MatrixXd F_,
                         FirstStageSet fs, cones::UncertaintyCone unc, std::string label_)
    : A(std::move(A_)),
      B(std::move(B_)),
      c(std::move(c_)),
      d(std::move(d_)),
      F(std::move(F_)),
      first_stage(std::move(fs)),
      uncertainty(std::move(unc)),
      label(std::move(label_)) {
  const int mm = static_cast<int>(B.rows());
  if (A.rows() != mm || F.rows() != mm)
    throw std::invalid_argument("AroInstance: row counts of A, B, F must agree");
  if (A.cols() != c.size()) throw std::invalid_argument("AroInstance: A/c mismatch");
  if (B.cols() != d.size()) throw std::invalid_argument("AroInstance: B/d mismatch");
  if (F.cols() != uncertainty.dim()) throw std::invalid_argument("AroInstance: F/k mismatch");
  if (first_stage.dim() != c.size())
    throw std::invalid_argument("AroInstance: first-stage dimension mismatch");
  if (first_stage.G.rows() > 0 && first_stage.G.cols() != c.size())
    throw std::invalid_argument("AroInstance: first-stage G mismatch");
}

Homogenization homogenize(const AroInstance& inst) {
  const int k = inst.k(), m = inst.m(), n2 = inst.n2();
  Homogenization h;
  h.E = MatrixXd::Zero(n2, k + m);
  h.E.col(0) = -inst.d;
  h.E.rightCols(m) = inst.B.transpose();
  h.g1 = VectorXd::Zero(k + m);
  h.g1[0] = 1.0;
  return h;
}

namespace {

// Linear program over the uncertainty slice: optimize obj'u over
// {u : u in U-hat, u1 = 1}. Returns nullopt when unbounded.
std::optional<double> slice_extreme(const cones::UncertaintyCone& cone, const VectorXd& obj,
                                    bool maximize) {
  using solver::ConeKind;
  const int k = cone.dim();
  solver::ConicProgram lp;
  const int u = lp.add_vars(k, "u");
  for (int j = 0; j < k; ++j) lp.set_objective(u + j, maximize ? -obj[j] : obj[j]);
  const int eq = lp.add_block(ConeKind::Zero, 1);
  lp.add_entry(eq, u, 1.0);
  lp.set_rhs(eq, 1.0);
  if (cone.kind() == cones::UncertaintyCone::Kind::SecondOrder) {
    const int r = lp.add_block(ConeKind::SecondOrder, k);
    for (int j = 0; j < k; ++j) lp.add_entry(r + j, u + j, -1.0);
  } else {
    const auto& P = cone.P();
    const int r = lp.add_block(ConeKind::Nonneg, static_cast<int>(P.rows()));
    for (int i = 0; i < P.rows(); ++i)
      for (int j = 0; j < k; ++j) lp.add_entry(r + i, u + j, -P(i, j));
  }
  auto sol = solver::solve(lp);
  if (sol.status == solver::SolveStatus::DualInfeasible) return std::nullopt;
  if (sol.status != solver::SolveStatus::Optimal)
    throw std::runtime_error("slice LP failed: " + std::string(solver::to_string(sol.status)));
  return maximize ? -sol.primal_objective : sol.primal_objective;
}

bool nearly_integer(const MatrixXd& M) {
  for (int i = 0; i < M.rows(); ++i)
    for (int j = 0; j < M.cols(); ++j)
      if (std::abs(M(i, j) - std::round(M(i, j))) > 1e-9) return false;
  return true;
}

}  // namespace

RadiusBound compute_radius(const AroInstance& inst) {
  const int m = inst.m(), n2 = inst.n2(), k = inst.k();
  RadiusBound rb;

  // r_w from the extreme points of W = {w >= 0 : B'w = d}
  bool enumerated = false;
  if (m <= 24) {
    polytope::Description d;
    d.Aeq = inst.B.transpose();
    d.beq = inst.d;
    d.Ain = MatrixXd::Identity(m, m);
    d.bin = VectorXd::Zero(m);
    polytope::EnumOptions opt;
    if (polytope::count_bases(m, m - std::min(m, n2)) <= opt.max_bases) {
      auto verts = polytope::enumerate_vertices(d);
      if (verts.empty()) throw std::runtime_error("compute_radius: W is empty");
      double best = 0;
      for (const auto& v : verts) best = std::max(best, v.squaredNorm());
      rb.r_w = best;
      rb.method = "vertex-enumeration";
      enumerated = true;
    }
  }
  if (!enumerated) {
    // Cramer-rule style bound: for integer (B, d) every vertex coordinate
    // is a ratio of determinants with |numerator| bounded by Hadamard's
    // inequality and |denominator| >= 1.
    MatrixXd Bd(n2, m + 1);
    Bd.leftCols(m) = inst.B.transpose();
    Bd.col(m) = inst.d;
    if (!nearly_integer(Bd))
      throw std::runtime_error("compute_radius: W too large to enumerate and data not integral");
    double had = 1.0;
    for (int i = 0; i < n2; ++i) {
      double rownorm = Bd.row(i).norm();
      had *= std::max(1.0, rownorm);
    }
    rb.r_w = static_cast<double>(m) * had * had;
    rb.method = "hadamard";
  }
  if (rb.r_w < 1e-12) rb.r_w = 1.0;  // degenerate W = {0}

  // r_z over the slice
  if (inst.uncertainty.kind() == cones::UncertaintyCone::Kind::SecondOrder) {
    rb.r_z = 2.0;  // u'u = 1 + ||tail||^2 <= 2 on the unit-ball slice
  } else {
    const auto& P = inst.uncertainty.P();
    bool done = false;
    if (polytope::count_bases(static_cast<int>(P.rows()), k - 1) <= 300'000) {
      polytope::Description d;
      d.Aeq = MatrixXd::Zero(1, k);
      d.Aeq(0, 0) = 1.0;
      d.beq = VectorXd::Ones(1);
      d.Ain = P;
      d.bin = VectorXd::Zero(P.rows());
      auto verts = polytope::enumerate_vertices(d);
      if (!verts.empty()) {
        double best = 0;
        for (const auto& v : verts) best = std::max(best, v.squaredNorm());
        rb.r_z = best;
        done = true;
      }
    }
    if (!done) {
      // coordinate-box bound: u'u <= sum_i max(|u_i|)^2 over the slice
      double total = 0;
      for (int j = 0; j < k; ++j) {
        VectorXd e = VectorXd::Zero(k);
        e[j] = 1.0;
        auto hi = slice_extreme(inst.uncertainty, e, true);
        auto lo = slice_extreme(inst.uncertainty, e, false);
        if (!hi || !lo) throw std::runtime_error("compute_radius: slice unbounded");
        total += std::pow(std::max(std::abs(*hi), std::abs(*lo)), 2);
      }
      rb.r_z = total;
    }
  }
  if (rb.r_z < 1e-12) rb.r_z = 1.0;
  rb.r = rb.r_w + rb.r_z;
  return rb;
}

ValidationReport validate(const AroInstance& inst) {
  ValidationReport rep;
  rep.dims_ok = true;  // enforced by the constructor

  const int k = inst.k();
  // slice nonempty and bounded
  try {
    if (inst.uncertainty.kind() == cones::UncertaintyCone::Kind::SecondOrder) {
      rep.slice_nonempty = true;
      rep.slice_bounded = true;
      rep.first_coord_convention = true;
    } else {
      bool bounded = true, nonempty = true;
      for (int j = 0; j < k && nonempty; ++j) {
        VectorXd e = VectorXd::Zero(k);
        e[j] = 1.0;
        try {
          auto hi = slice_extreme(inst.uncertainty, e, true);
          auto lo = slice_extreme(inst.uncertainty, e, false);
          if (!hi || !lo) bounded = false;
        } catch (const std::exception&) {
          nonempty = false;
        }
      }
      rep.slice_nonempty = nonempty;
      rep.slice_bounded = nonempty && bounded;
      if (!nonempty) rep.failures.push_back("uncertainty slice is empty");
      if (nonempty && !bounded) rep.failures.push_back("uncertainty slice is unbounded");

      // e1'u >= 0 on the cone: minimize u1 over the cone intersected with
      // the unit box; a pointed cone obeying the convention yields 0
      if (nonempty && bounded) {
        solver::ConicProgram lp;
        const auto& P = inst.uncertainty.P();
        const int u = lp.add_vars(k, "u");
        lp.set_objective(u, 1.0);
        const int r = lp.add_block(solver::ConeKind::Nonneg, static_cast<int>(P.rows()));
        for (int i = 0; i < P.rows(); ++i)
          for (int j = 0; j < k; ++j) lp.add_entry(r + i, u + j, -P(i, j));
        const int bx = lp.add_block(solver::ConeKind::Nonneg, 2 * k);
        for (int j = 0; j < k; ++j) {
          lp.add_entry(bx + j, u + j, -1.0);
          lp.set_rhs(bx + j, 1.0);
          lp.add_entry(bx + k + j, u + j, 1.0);
          lp.set_rhs(bx + k + j, 1.0);
        }
        auto sol = solver::solve(lp);
        rep.first_coord_convention =
            sol.status == solver::SolveStatus::Optimal && sol.primal_objective >= -1e-7;
        if (!rep.first_coord_convention)
          rep.failures.push_back("cone has generators with negative first coordinate");
      }
    }
  } catch (const std::exception& e) {
    rep.failures.push_back(std::string("slice checks failed: ") + e.what());
  }

  // W nonempty
  {
    solver::ConicProgram lp;
    const int m = inst.m();
    const int w = lp.add_vars(m, "w");
    const int eq = lp.add_block(solver::ConeKind::Zero, inst.n2());
    for (int q = 0; q < inst.n2(); ++q) {
      for (int i = 0; i < m; ++i)
        if (inst.B(i, q) != 0.0) lp.add_entry(eq + q, w + i, inst.B(i, q));
      lp.set_rhs(eq + q, inst.d[q]);
    }
    const int nn = lp.add_block(solver::ConeKind::Nonneg, m);
    for (int i = 0; i < m; ++i) lp.add_entry(nn + i, w + i, -1.0);
    auto sol = solver::solve(lp);
    rep.w_nonempty = sol.status == solver::SolveStatus::Optimal;
    if (!rep.w_nonempty) rep.failures.push_back("W = {w >= 0 : B'w = d} is empty");
  }

  // existence of an affine policy certifies Assumption 2; a truncated solve
  // whose best iterate is feasible to high accuracy is equally affirmative
  try {
    auto built = builders::build_affine(inst);
    auto sol = solver::solve(built.program);
    rep.affine_feasible =
        sol.status == solver::SolveStatus::Optimal ||
        (sol.status == solver::SolveStatus::IterLimit &&
         std::max({sol.primal_residual, sol.dual_residual, sol.relative_gap}) <= 1e-6);
    if (!rep.affine_feasible)
      rep.failures.push_back(std::string("affine policy program: ") +
                             solver::to_string(sol.status));
  } catch (const std::exception& e) {
    rep.failures.push_back(std::string("affine feasibility check failed: ") + e.what());
  }

  rep.warnings.push_back(
      "relatively complete recourse (Assumption 4) not checked; bounds remain valid upper "
      "bounds without it");
  return rep;
}

// ---------------------------------------------------------------------------
// JSON round trip
// ---------------------------------------------------------------------------

namespace {

nlohmann::json mat_json(const MatrixXd& M) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < M.rows(); ++i) {
    nlohmann::json r = nlohmann::json::array();
    for (int j = 0; j < M.cols(); ++j) r.push_back(M(i, j));
    rows.push_back(r);
  }
  return rows;
}

MatrixXd mat_from(const nlohmann::json& j) {
  const int rows = static_cast<int>(j.size());
  if (rows == 0) return MatrixXd(0, 0);
  const int cols = static_cast<int>(j[0].size());
  MatrixXd M(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int c = 0; c < cols; ++c) M(i, c) = j[i][c].get<double>();
  return M;
}

nlohmann::json vec_json(const VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

VectorXd vec_from(const nlohmann::json& j) {
  VectorXd v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

}  // namespace

std::string to_json(const AroInstance& inst) {
  nlohmann::json j;
  j["schema"] = "aro-instance/1";
  j["label"] = inst.label;
  j["A"] = mat_json(inst.A);
  j["B"] = mat_json(inst.B);
  j["c"] = vec_json(inst.c);
  j["d"] = vec_json(inst.d);
  j["F"] = mat_json(inst.F);
  if (inst.uncertainty.kind() == cones::UncertaintyCone::Kind::SecondOrder) {
    j["uncertainty"] = {{"kind", "soc"}, {"k", inst.k()}};
  } else {
    j["uncertainty"] = {{"kind", "poly"}, {"P", mat_json(inst.uncertainty.P())}};
  }
  nlohmann::json fs;
  nlohmann::json lo = nlohmann::json::array(), hi = nlohmann::json::array();
  for (int i = 0; i < inst.n1(); ++i) {
    if (std::isfinite(inst.first_stage.lower[i]))
      lo.push_back(inst.first_stage.lower[i]);
    else
      lo.push_back(nullptr);
    if (std::isfinite(inst.first_stage.upper[i]))
      hi.push_back(inst.first_stage.upper[i]);
    else
      hi.push_back(nullptr);
  }
  fs["lower"] = lo;
  fs["upper"] = hi;
  if (inst.first_stage.G.rows() > 0) {
    fs["G"] = mat_json(inst.first_stage.G);
    fs["g"] = vec_json(inst.first_stage.g);
  }
  j["firstStage"] = fs;
  j["senseFlip"] = inst.sense_flipped;
  return j.dump(2);
}

AroInstance from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  if (j.value("schema", "") != "aro-instance/1")
    throw std::invalid_argument("from_json: unsupported schema");
  MatrixXd A = mat_from(j.at("A")), B = mat_from(j.at("B")), F = mat_from(j.at("F"));
  VectorXd c = vec_from(j.at("c")), d = vec_from(j.at("d"));
  const auto& ju = j.at("uncertainty");
  auto cone = ju.at("kind").get<std::string>() == "soc"
                  ? cones::UncertaintyCone::second_order(ju.at("k").get<int>())
                  : cones::UncertaintyCone::polyhedral(mat_from(ju.at("P")));
  const auto& fs = j.at("firstStage");
  const int n1 = static_cast<int>(c.size());
  FirstStageSet f = FirstStageSet::free_reals(n1);
  for (int i = 0; i < n1; ++i) {
    if (!fs.at("lower")[i].is_null()) f.lower[i] = fs.at("lower")[i].get<double>();
    if (!fs.at("upper")[i].is_null()) f.upper[i] = fs.at("upper")[i].get<double>();
  }
  if (fs.contains("G")) {
    f.G = mat_from(fs.at("G"));
    f.g = vec_from(fs.at("g"));
  }
  AroInstance inst(std::move(A), std::move(B), std::move(c), std::move(d), std::move(F),
                   std::move(f), std::move(cone), j.value("label", ""));
  inst.sense_flipped = j.value("senseFlip", false);
  return inst;
}

}  // namespace arlp::model
