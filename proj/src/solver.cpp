#include "arlp/solver.hpp"

#include <lapacke.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "arlp/linalg.hpp"
#include "json.hpp"

namespace arlp::solver {

using linalg::smat;
using linalg::svec;
using linalg::svec_dim;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSqrt2 = 1.4142135623730950488;
}  // namespace

// ---------------------------------------------------------------------------
// ConicProgram
// ---------------------------------------------------------------------------

int ConicProgram::add_vars(int count, const std::string& name) {
  const int start = num_vars();
  c_.resize(c_.size() + count, 0.0);
  for (int i = 0; i < count; ++i) {
    names_.push_back(count == 1 ? name : name + "[" + std::to_string(i) + "]");
  }
  return start;
}

void ConicProgram::set_objective(int var, double coef) { c_.at(var) = coef; }
void ConicProgram::add_objective(int var, double coef) { c_.at(var) += coef; }

int ConicProgram::add_block(ConeKind kind, int size_or_order) {
  ConeBlock blk;
  blk.kind = kind;
  blk.row = rows_;
  if (kind == ConeKind::Psd) {
    blk.order = size_or_order;
    blk.size = svec_dim(size_or_order);
  } else {
    blk.size = size_or_order;
  }
  if (blk.size <= 0) throw std::invalid_argument("add_block: empty cone block");
  blocks_.push_back(blk);
  rows_ += blk.size;
  b_.resize(rows_, 0.0);
  return blk.row;
}

void ConicProgram::add_entry(int row, int var, double coef) {
  if (row < 0 || row >= rows_ || var < 0 || var >= num_vars())
    throw std::out_of_range("add_entry: index out of range");
  if (coef != 0.0) entries_.emplace_back(row, var, coef);
}

void ConicProgram::set_rhs(int row, double value) { b_.at(row) = value; }
void ConicProgram::add_rhs(int row, double value) { b_.at(row) += value; }

const VectorXd ConicProgram::objective() const {
  return Eigen::Map<const VectorXd>(c_.data(), c_.size());
}

VectorXd ConicProgram::rhs() const { return Eigen::Map<const VectorXd>(b_.data(), b_.size()); }

Eigen::SparseMatrix<double> ConicProgram::matrix() const {
  Eigen::SparseMatrix<double> A(rows_, num_vars());
  A.setFromTriplets(entries_.begin(), entries_.end());
  A.makeCompressed();
  return A;
}

const std::string& ConicProgram::var_name(int var) const { return names_.at(var); }

ConicProgram::Stats ConicProgram::stats() const {
  Stats st;
  st.scalars = num_vars();
  st.rows = rows_;
  for (const auto& blk : blocks_) {
    switch (blk.kind) {
      case ConeKind::Zero: st.zero_rows += blk.size; break;
      case ConeKind::Nonneg: st.nonneg_rows += blk.size; break;
      case ConeKind::SecondOrder: st.soc_blocks += 1; break;
      case ConeKind::Psd: st.psd_orders.push_back(blk.order); break;
    }
  }
  return st;
}

std::string ConicProgram::to_json() const {
  nlohmann::json j;
  j["schema"] = "conic-program/1";
  j["label"] = label;
  j["objective"] = c_;
  j["rhs"] = b_;
  nlohmann::json jb = nlohmann::json::array();
  for (const auto& blk : blocks_) {
    const char* kind = blk.kind == ConeKind::Zero ? "zero"
                       : blk.kind == ConeKind::Nonneg ? "nonneg"
                       : blk.kind == ConeKind::SecondOrder ? "soc"
                                                           : "psd";
    jb.push_back({{"kind", kind}, {"size", blk.size}, {"order", blk.order}, {"row", blk.row}});
  }
  j["cones"] = jb;
  nlohmann::json je = nlohmann::json::array();
  for (const auto& t : entries_) je.push_back({t.row(), t.col(), t.value()});
  j["matrix"] = {{"rows", rows_}, {"cols", num_vars()}, {"entries", je}};
  return j.dump();
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::PrimalInfeasible: return "PrimalInfeasible";
    case SolveStatus::DualInfeasible: return "DualInfeasible";
    case SolveStatus::IllPosed: return "IllPosed";
    case SolveStatus::IterLimit: return "IterLimit";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Cone violation (also used by check_solution)
// ---------------------------------------------------------------------------

double cone_violation(const ConeBlock& blk, const Eigen::Ref<const VectorXd>& v) {
  switch (blk.kind) {
    case ConeKind::Zero: return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
    case ConeKind::Nonneg: return std::max(0.0, -v.minCoeff());
    case ConeKind::SecondOrder: {
      const double head = v[0];
      const double tail = v.size() > 1 ? v.tail(v.size() - 1).norm() : 0.0;
      return std::max(0.0, tail - head);
    }
    case ConeKind::Psd: return std::max(0.0, -linalg::min_eigenvalue(smat(v)));
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Internal solver machinery
// ---------------------------------------------------------------------------

namespace {

// "Minimum eigenvalue" of a point w.r.t. its cone block, used for the
// interior shift at initialization.
double block_min_eig(const ConeBlock& blk, const Eigen::Ref<const VectorXd>& v) {
  switch (blk.kind) {
    case ConeKind::Zero: return 0.0;
    case ConeKind::Nonneg: return v.minCoeff();
    case ConeKind::SecondOrder:
      return v[0] - (v.size() > 1 ? v.tail(v.size() - 1).norm() : 0.0);
    case ConeKind::Psd: return linalg::min_eigenvalue(smat(v));
  }
  return 0.0;
}

void block_identity(const ConeBlock& blk, Eigen::Ref<VectorXd> v) {
  v.setZero();
  switch (blk.kind) {
    case ConeKind::Zero: break;
    case ConeKind::Nonneg: v.setOnes(); break;
    case ConeKind::SecondOrder: v[0] = 1.0; break;
    case ConeKind::Psd: {
      int t = 0;
      for (int j = 0; j < blk.order; ++j) {
        v[t] = 1.0;
        t += blk.order - j;
      }
      break;
    }
  }
}

double block_degree(const ConeBlock& blk) {
  switch (blk.kind) {
    case ConeKind::Zero: return 0;
    case ConeKind::Nonneg: return blk.size;
    case ConeKind::SecondOrder: return 1;
    case ConeKind::Psd: return blk.order;
  }
  return 0;
}

// Nesterov-Todd scaling state for one proper cone block.
struct Scaling {
  ConeKind kind = ConeKind::Nonneg;
  int size = 0, order = 0;
  VectorXd lambda;  // scaled point, s = W lambda, y = W^{-1} lambda

  // nonneg
  VectorXd h_diag, hinv_diag;
  // soc
  double eta = 1.0;
  VectorXd wbar;
  // psd
  MatrixXd R, Rinv, Wm, Wminv;
  VectorXd sigma;

  void compute(const ConeBlock& blk, const Eigen::Ref<const VectorXd>& s,
               const Eigen::Ref<const VectorXd>& y);
  void identity(const ConeBlock& blk);

  void apply_W(const Eigen::Ref<const VectorXd>& u, Eigen::Ref<VectorXd> out) const;
  void apply_Wt(const Eigen::Ref<const VectorXd>& u, Eigen::Ref<VectorXd> out) const;
  void apply_Winv(const Eigen::Ref<const VectorXd>& u, Eigen::Ref<VectorXd> out) const;
  void apply_H(const Eigen::Ref<const VectorXd>& u, Eigen::Ref<VectorXd> out) const;
  void apply_Hinv(const Eigen::Ref<const VectorXd>& u, Eigen::Ref<VectorXd> out) const;

  // Jordan algebra in the scaled frame.
  void jmul(const Eigen::Ref<const VectorXd>& u, const Eigen::Ref<const VectorXd>& v,
            Eigen::Ref<VectorXd> out) const;
  void jdiv_lambda(const Eigen::Ref<const VectorXd>& v, Eigen::Ref<VectorXd> out) const;
  double max_step(const Eigen::Ref<const VectorXd>& dir) const;

private:
  void soc_apply_V(const Eigen::Ref<const VectorXd>& u, Eigen::Ref<VectorXd> out,
                   bool inverse) const;
};

void Scaling::identity(const ConeBlock& blk) {
  kind = blk.kind;
  size = blk.size;
  order = blk.order;
  lambda.setZero(size);
  switch (kind) {
    case ConeKind::Nonneg:
      h_diag = VectorXd::Ones(size);
      hinv_diag = VectorXd::Ones(size);
      break;
    case ConeKind::SecondOrder:
      eta = 1.0;
      wbar.setZero(size);
      wbar[0] = 1.0;
      break;
    case ConeKind::Psd:
      R = MatrixXd::Identity(order, order);
      Rinv = R;
      Wm = R;
      Wminv = R;
      sigma = VectorXd::Ones(order);
      break;
    default: break;
  }
}

void Scaling::compute(const ConeBlock& blk, const Eigen::Ref<const VectorXd>& s,
                      const Eigen::Ref<const VectorXd>& y) {
  kind = blk.kind;
  size = blk.size;
  order = blk.order;
  switch (kind) {
    case ConeKind::Nonneg: {
      h_diag = s.cwiseQuotient(y);
      hinv_diag = y.cwiseQuotient(s);
      lambda = (s.cwiseProduct(y)).cwiseSqrt();
      break;
    }
    case ConeKind::SecondOrder: {
      const int n = size;
      const double sres = s[0] * s[0] - s.tail(n - 1).squaredNorm();
      const double yres = y[0] * y[0] - y.tail(n - 1).squaredNorm();
      const double snorm = std::sqrt(std::max(sres, 1e-300));
      const double ynorm = std::sqrt(std::max(yres, 1e-300));
      VectorXd sb = s / snorm, yb = y / ynorm;
      const double gamma = std::sqrt(std::max(0.5 * (1.0 + sb.dot(yb)), 1e-300));
      wbar.resize(n);
      wbar[0] = (sb[0] + yb[0]) / (2.0 * gamma);
      wbar.tail(n - 1) = (sb.tail(n - 1) - yb.tail(n - 1)) / (2.0 * gamma);
      eta = std::sqrt(snorm / ynorm);
      lambda.resize(n);
      apply_W(y, lambda);
      break;
    }
    case ConeKind::Psd: {
      MatrixXd S = smat(s), Y = smat(y);
      Eigen::LLT<MatrixXd> llts(S), llty(Y);
      MatrixXd Ls, Ly;
      if (llts.info() == Eigen::Success) {
        Ls = llts.matrixL();
      } else {
        // fall back to an eigenvalue square root when the iterate has
        // drifted to the cone boundary
        VectorXd w;
        MatrixXd V;
        linalg::sym_eigen(S, w, V);
        Ls = V * w.cwiseMax(1e-150).cwiseSqrt().asDiagonal();
      }
      if (llty.info() == Eigen::Success) {
        Ly = llty.matrixL();
      } else {
        VectorXd w;
        MatrixXd V;
        linalg::sym_eigen(Y, w, V);
        Ly = V * w.cwiseMax(1e-150).cwiseSqrt().asDiagonal();
      }
      Eigen::BDCSVD<MatrixXd> svd(Ly.transpose() * Ls,
                                  Eigen::ComputeThinU | Eigen::ComputeThinV);
      sigma = svd.singularValues();
      const VectorXd sqrt_sig = sigma.cwiseMax(1e-150).cwiseSqrt();
      R = Ls * svd.matrixV() * sqrt_sig.cwiseInverse().asDiagonal();
      Rinv = sqrt_sig.cwiseInverse().asDiagonal() * svd.matrixU().transpose() * Ly.transpose();
      Wm = R * R.transpose();
      Wminv = Rinv.transpose() * Rinv;
      MatrixXd lam = sigma.asDiagonal();
      lambda = svec(lam);
      break;
    }
    default: break;
  }
}

void Scaling::soc_apply_V(const Eigen::Ref<const VectorXd>& u, Eigen::Ref<VectorXd> out,
                          bool inverse) const {
  // V = [w0, w1'; w1, I + w1 w1'/(1+w0)], V^{-1} = J V J
  const int n = size;
  const double w0 = wbar[0];
  const auto w1 = wbar.tail(n - 1);
  const double sgn = inverse ? -1.0 : 1.0;
  const double dot = w1.dot(u.tail(n - 1));
  out[0] = w0 * u[0] + sgn * dot;
  out.tail(n - 1) =
      u.tail(n - 1) + (sgn * u[0] + dot / (1.0 + w0)) * w1;
}

void Scaling::apply_W(const Eigen::Ref<const VectorXd>& u, Eigen::Ref<VectorXd> out) const {
  switch (kind) {
    case ConeKind::Nonneg: out = h_diag.cwiseSqrt().cwiseProduct(u); break;
    case ConeKind::SecondOrder:
      soc_apply_V(u, out, false);
      out *= eta;
      break;
    case ConeKind::Psd: out = svec(R * smat(u) * R.transpose()); break;
    default: out = u; break;
  }
}

void Scaling::apply_Wt(const Eigen::Ref<const VectorXd>& u, Eigen::Ref<VectorXd> out) const {
  if (kind == ConeKind::Psd) {
    out = svec(R.transpose() * smat(u) * R);
  } else {
    apply_W(u, out);
  }
}

void Scaling::apply_Winv(const Eigen::Ref<const VectorXd>& u, Eigen::Ref<VectorXd> out) const {
  switch (kind) {
    case ConeKind::Nonneg: out = u.cwiseQuotient(h_diag.cwiseSqrt()); break;
    case ConeKind::SecondOrder:
      soc_apply_V(u, out, true);
      out /= eta;
      break;
    case ConeKind::Psd: out = svec(Rinv * smat(u) * Rinv.transpose()); break;
    default: out = u; break;
  }
}

void Scaling::apply_H(const Eigen::Ref<const VectorXd>& u, Eigen::Ref<VectorXd> out) const {
  switch (kind) {
    case ConeKind::Nonneg: out = h_diag.cwiseProduct(u); break;
    case ConeKind::SecondOrder: {
      // H = eta^2 (2 wbar wbar' - J)
      const int n = size;
      const double wu = wbar.dot(u) * 2.0;
      out = wu * wbar;
      out[0] -= u[0];
      out.tail(n - 1) += u.tail(n - 1);
      out *= eta * eta;
      break;
    }
    case ConeKind::Psd: out = svec(Wm * smat(u) * Wm); break;
    default: out = u; break;
  }
}

void Scaling::apply_Hinv(const Eigen::Ref<const VectorXd>& u, Eigen::Ref<VectorXd> out) const {
  switch (kind) {
    case ConeKind::Nonneg: out = hinv_diag.cwiseProduct(u); break;
    case ConeKind::SecondOrder: {
      // H^{-1} = eta^{-2} (2 (J wbar)(J wbar)' - J)
      const int n = size;
      double ju = wbar[0] * u[0] - wbar.tail(n - 1).dot(u.tail(n - 1));
      out = (2.0 * ju) * wbar;
      out.tail(n - 1) = -out.tail(n - 1);
      out[0] -= u[0];
      out.tail(n - 1) += u.tail(n - 1);
      out /= eta * eta;
      break;
    }
    case ConeKind::Psd: out = svec(Wminv * smat(u) * Wminv); break;
    default: out = u; break;
  }
}

void Scaling::jmul(const Eigen::Ref<const VectorXd>& u, const Eigen::Ref<const VectorXd>& v,
                   Eigen::Ref<VectorXd> out) const {
  switch (kind) {
    case ConeKind::Nonneg: out = u.cwiseProduct(v); break;
    case ConeKind::SecondOrder:
      out[0] = u.dot(v);
      out.tail(size - 1) = u[0] * v.tail(size - 1) + v[0] * u.tail(size - 1);
      break;
    case ConeKind::Psd: {
      MatrixXd U = smat(u), V = smat(v);
      out = svec(0.5 * (U * V + V * U));
      break;
    }
    default: out.setZero(); break;
  }
}

void Scaling::jdiv_lambda(const Eigen::Ref<const VectorXd>& v, Eigen::Ref<VectorXd> out) const {
  switch (kind) {
    case ConeKind::Nonneg: out = v.cwiseQuotient(lambda); break;
    case ConeKind::SecondOrder: {
      const int n = size;
      const double l0 = lambda[0];
      const auto l1 = lambda.tail(n - 1);
      const double det = l0 * l0 - l1.squaredNorm();
      const double l1v = l1.dot(v.tail(n - 1));
      out[0] = (l0 * v[0] - l1v) / det;
      out.tail(n - 1) = v.tail(n - 1) / l0 + ((-v[0] + l1v / l0) / det) * l1;
      break;
    }
    case ConeKind::Psd: {
      // lambda is diagonal (sigma) in the scaled frame, so division acts
      // entrywise on matrix slots: out_ij = v_ij / ((sigma_i + sigma_j)/2)
      int t = 0;
      for (int j = 0; j < order; ++j)
        for (int i = j; i < order; ++i, ++t) out[t] = v[t] / (0.5 * (sigma[i] + sigma[j]));
      break;
    }
    default: out.setZero(); break;
  }
}

double Scaling::max_step(const Eigen::Ref<const VectorXd>& dir) const {
  switch (kind) {
    case ConeKind::Nonneg: {
      double a = kInf;
      for (int i = 0; i < size; ++i)
        if (dir[i] < 0.0) a = std::min(a, -lambda[i] / dir[i]);
      return a;
    }
    case ConeKind::SecondOrder: {
      const int n = size;
      const double a = dir[0] * dir[0] - dir.tail(n - 1).squaredNorm();
      const double b = 2.0 * (lambda[0] * dir[0] - lambda.tail(n - 1).dot(dir.tail(n - 1)));
      const double c = lambda[0] * lambda[0] - lambda.tail(n - 1).squaredNorm();
      double best = kInf;
      if (std::abs(a) < 1e-300) {
        if (b < 0.0) best = -c / b;
      } else {
        const double disc = b * b - 4.0 * a * c;
        if (disc >= 0.0) {
          const double sq = std::sqrt(disc);
          for (double r : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)})
            if (r > 0.0) best = std::min(best, r);
        }
      }
      // head must stay nonnegative; this also catches rays that pass
      // through the origin (tiny tail), where the quadratic's discriminant
      // can round below zero
      if (dir[0] < 0.0) best = std::min(best, -lambda[0] / dir[0]);
      return best;
    }
    case ConeKind::Psd: {
      MatrixXd B = smat(dir);
      VectorXd is = sigma.cwiseMax(1e-150).cwiseSqrt().cwiseInverse();
      MatrixXd C = is.asDiagonal() * B * is.asDiagonal();
      const double lmin = linalg::min_eigenvalue(C);
      return lmin >= 0.0 ? kInf : 1.0 / (-lmin);
    }
    default: return kInf;
  }
}

// Compiled program + per-block row access.
struct Compiled {
  int n = 0, m = 0;
  Eigen::SparseMatrix<double> A;  // m x n, column-major
  VectorXd b, c;
  std::vector<ConeBlock> proper;  // non-zero-cone blocks
  std::vector<ConeBlock> zero;    // zero-cone blocks
  MatrixXd Ae;                    // dense equality rows (m_e x n)
  VectorXd be;
  std::vector<int> eq_rows;       // global row index per equality row
  // per proper block: CSR of its rows
  struct Rows {
    std::vector<int> ptr;
    std::vector<int> col;
    std::vector<double> val;
  };
  std::vector<Rows> rows;
  double degree = 0.0;
};

Compiled compile(const ConicProgram& p) {
  Compiled cp;
  cp.n = p.num_vars();
  cp.m = p.num_rows();
  cp.A = p.matrix();
  cp.b = p.rhs();
  cp.c = p.objective();
  for (const auto& blk : p.blocks()) {
    if (blk.kind == ConeKind::Zero)
      cp.zero.push_back(blk);
    else {
      cp.proper.push_back(blk);
      cp.degree += block_degree(blk);
    }
  }
  int me = 0;
  for (const auto& blk : cp.zero) me += blk.size;
  cp.Ae.setZero(me, cp.n);
  cp.be.resize(me);
  cp.eq_rows.resize(me);
  {
    int t = 0;
    for (const auto& blk : cp.zero)
      for (int r = 0; r < blk.size; ++r, ++t) {
        cp.eq_rows[t] = blk.row + r;
        cp.be[t] = cp.b[blk.row + r];
      }
  }
  // global CSR restricted to block rows
  std::vector<int> rowOf(cp.m, -1), localOf(cp.m, 0);
  for (size_t bi = 0; bi < cp.proper.size(); ++bi) {
    const auto& blk = cp.proper[bi];
    for (int r = 0; r < blk.size; ++r) {
      rowOf[blk.row + r] = static_cast<int>(bi);
      localOf[blk.row + r] = r;
    }
  }
  std::vector<int> counts(cp.m, 0);
  for (int k = 0; k < cp.A.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(cp.A, k); it; ++it) ++counts[it.row()];
  cp.rows.resize(cp.proper.size());
  for (size_t bi = 0; bi < cp.proper.size(); ++bi) {
    const auto& blk = cp.proper[bi];
    auto& rs = cp.rows[bi];
    rs.ptr.assign(blk.size + 1, 0);
    for (int r = 0; r < blk.size; ++r) rs.ptr[r + 1] = rs.ptr[r] + counts[blk.row + r];
    rs.col.resize(rs.ptr[blk.size]);
    rs.val.resize(rs.ptr[blk.size]);
  }
  std::vector<int> cursor(cp.m, 0);
  std::vector<int> eqOf(cp.m, -1);
  for (int t = 0; t < me; ++t) eqOf[cp.eq_rows[t]] = t;
  for (int k = 0; k < cp.A.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(cp.A, k); it; ++it) {
      const int r = static_cast<int>(it.row());
      if (rowOf[r] >= 0) {
        auto& rs = cp.rows[rowOf[r]];
        const int slot = rs.ptr[localOf[r]] + cursor[r]++;
        rs.col[slot] = static_cast<int>(it.col());
        rs.val[slot] = it.value();
      } else if (eqOf[r] >= 0) {
        cp.Ae(eqOf[r], it.col()) = it.value();
      }
    }
  return cp;
}

// KKT solver: D = sum_C A_C' H_C^{-1} A_C (+ delta I), bordered by the
// equality rows. Factored with LAPACK dpotrf; solves refined against the
// exact operator.
struct Kkt {
  const Compiled& cp;
  const std::vector<Scaling>& sc;
  MatrixXd D;        // n x n
  MatrixXd Xe;       // D^{-1} Ae'
  MatrixXd Se;       // Ae D^{-1} Ae' + delta I (factored)
  double delta = 0;
  double dscale = 1.0;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> panel;

  Kkt(const Compiled& cp_, const std::vector<Scaling>& sc_) : cp(cp_), sc(sc_) {}

  bool factor(double delta_floor = 0.0);
  // Solves [0 A'; A -H][dx;dy] = [g;h]; h spans all m rows (equality rows
  // use their slots in h). Returns the scaled residual of the computed
  // direction.
  double solve(const VectorXd& g, const VectorXd& h, VectorXd& dx, VectorXd& dy,
               int refine = 1) const;

private:
  void solve_raw(const VectorXd& g, const VectorXd& h, VectorXd& dx, VectorXd& dy) const;
  void chol_solve(Eigen::Ref<MatrixXd> rhs) const;
};

bool Kkt::factor(double delta_floor) {
  const int n = cp.n;
  D.setZero(n, n);
  VectorXd tvec(n);
  for (size_t bi = 0; bi < cp.proper.size(); ++bi) {
    const auto& blk = cp.proper[bi];
    const auto& rs = cp.rows[bi];
    const auto& s = sc[bi];
    switch (blk.kind) {
      case ConeKind::Nonneg: {
        for (int r = 0; r < blk.size; ++r) {
          const double w = s.hinv_diag[r];
          for (int a = rs.ptr[r]; a < rs.ptr[r + 1]; ++a)
            for (int bIdx = rs.ptr[r]; bIdx < rs.ptr[r + 1]; ++bIdx)
              D(rs.col[a], rs.col[bIdx]) += w * rs.val[a] * rs.val[bIdx];
        }
        break;
      }
      case ConeKind::SecondOrder: {
        // H^{-1} = eta^{-2}(2 (J wbar)(J wbar)' - J)
        const double ieta2 = 1.0 / (s.eta * s.eta);
        tvec.setZero();
        std::vector<int> support;
        for (int r = 0; r < blk.size; ++r) {
          const double jw = (r == 0 ? s.wbar[0] : -s.wbar[r]);
          for (int a = rs.ptr[r]; a < rs.ptr[r + 1]; ++a) {
            if (tvec[rs.col[a]] == 0.0) support.push_back(rs.col[a]);
            tvec[rs.col[a]] += jw * rs.val[a];
          }
        }
        for (int ci : support)
          for (int cj : support) D(ci, cj) += 2.0 * ieta2 * tvec[ci] * tvec[cj];
        for (int ci : support) tvec[ci] = 0.0;
        for (int r = 0; r < blk.size; ++r) {
          const double w = (r == 0 ? -ieta2 : ieta2);
          for (int a = rs.ptr[r]; a < rs.ptr[r + 1]; ++a)
            for (int bIdx = rs.ptr[r]; bIdx < rs.ptr[r + 1]; ++bIdx)
              D(rs.col[a], rs.col[bIdx]) += w * rs.val[a] * rs.val[bIdx];
        }
        break;
      }
      case ConeKind::Psd: {
        const int nu = blk.order;
        const int sd = blk.size;
        panel.setZero(sd, n);
        // map svec slot -> (i, j)
        std::vector<std::pair<int, int>> ij(sd);
        {
          int t = 0;
          for (int j = 0; j < nu; ++j)
            for (int i = j; i < nu; ++i, ++t) ij[t] = {i, j};
        }
        MatrixXd Mj(nu, nu);
        std::vector<int> active;
        // column-wise pass over A restricted to this block's rows
        for (int col = 0; col < cp.A.outerSize(); ++col) {
          bool any = false;
          Mj.setZero();
          for (Eigen::SparseMatrix<double>::InnerIterator it(cp.A, col); it; ++it) {
            const int r = static_cast<int>(it.row()) - blk.row;
            if (r < 0 || r >= sd) continue;
            any = true;
            const auto [i, j] = ij[r];
            if (i == j) {
              Mj += it.value() * (s.Wminv.col(i) * s.Wminv.col(i).transpose());
            } else {
              const double w = it.value() / kSqrt2;
              Mj += w * (s.Wminv.col(i) * s.Wminv.col(j).transpose() +
                         s.Wminv.col(j) * s.Wminv.col(i).transpose());
            }
          }
          if (!any) continue;
          active.push_back(col);
          int t = 0;
          for (int j = 0; j < nu; ++j) {
            panel(t++, col) = Mj(j, j);
            for (int i = j + 1; i < nu; ++i) panel(t++, col) = kSqrt2 * Mj(i, j);
          }
        }
        for (int r = 0; r < sd; ++r) {
          for (int a = rs.ptr[r]; a < rs.ptr[r + 1]; ++a)
            D.col(rs.col[a]).noalias() += rs.val[a] * panel.row(r).transpose();
        }
        break;
      }
      default: break;
    }
  }
  // Keep the static regularization tiny relative to the smallest useful
  // pivot, not to the largest diagonal: the diagonal grows like 1/mu near
  // convergence and a scale-proportional shift would swamp the small
  // eigenvalues and defeat iterative refinement. Escalate only when the
  // factorization actually fails.
  if (!D.allFinite()) return false;
  dscale = std::max(1.0, D.diagonal().maxCoeff());
  const MatrixXd Dsave = D;
  delta = delta_floor;
  const int me = static_cast<int>(cp.Ae.rows());
  for (int attempt = 0; attempt < 8; ++attempt) {
    if (attempt > 0) delta = (delta == 0.0 ? 1e-14 * dscale : delta * 1e3);
    D = Dsave;
    if (delta > 0.0) D.diagonal().array() += delta;
    if (LAPACKE_dpotrf(LAPACK_COL_MAJOR, 'L', cp.n, D.data(), cp.n) != 0) continue;
    if (me > 0) {
      Xe = cp.Ae.transpose();
      chol_solve(Xe);
      Se = cp.Ae * Xe;
      if (!Se.allFinite()) continue;
      if (delta > 0.0) Se.diagonal().array() += delta;
      Eigen::LLT<MatrixXd> llt(Se);
      if (llt.info() != Eigen::Success) continue;
      Se = llt.matrixL();
    }
    return true;
  }
  return false;
}

void Kkt::chol_solve(Eigen::Ref<MatrixXd> rhs) const {
  LAPACKE_dpotrs(LAPACK_COL_MAJOR, 'L', cp.n, static_cast<int>(rhs.cols()),
                 const_cast<double*>(D.data()), cp.n, rhs.data(),
                 static_cast<int>(rhs.outerStride()));
}

void Kkt::solve_raw(const VectorXd& g, const VectorXd& h, VectorXd& dx, VectorXd& dy) const {
  const int n = cp.n;
  VectorXd gt = g;
  VectorXd hh;
  for (size_t bi = 0; bi < cp.proper.size(); ++bi) {
    const auto& blk = cp.proper[bi];
    hh.resize(blk.size);
    sc[bi].apply_Hinv(h.segment(blk.row, blk.size), hh);
    const auto& rs = cp.rows[bi];
    for (int r = 0; r < blk.size; ++r)
      for (int a = rs.ptr[r]; a < rs.ptr[r + 1]; ++a) gt[rs.col[a]] += rs.val[a] * hh[r];
  }
  MatrixXd w = gt;
  chol_solve(w);
  dx.resize(n);
  const int me = static_cast<int>(cp.Ae.rows());
  if (me > 0) {
    VectorXd he(me);
    for (int t = 0; t < me; ++t) he[t] = h[cp.eq_rows[t]];
    VectorXd rhs = cp.Ae * w.col(0) - he;
    // Se holds the Cholesky factor L
    Se.triangularView<Eigen::Lower>().solveInPlace(rhs);
    Se.triangularView<Eigen::Lower>().transpose().solveInPlace(rhs);
    dx = w.col(0) - Xe * rhs;
    dy.resize(cp.m);
    for (int t = 0; t < me; ++t) dy[cp.eq_rows[t]] = rhs[t];
  } else {
    dx = w.col(0);
    dy.resize(cp.m);
  }
  VectorXd tmp;
  for (size_t bi = 0; bi < cp.proper.size(); ++bi) {
    const auto& blk = cp.proper[bi];
    const auto& rs = cp.rows[bi];
    VectorXd Ax(blk.size);
    for (int r = 0; r < blk.size; ++r) {
      double acc = 0;
      for (int a = rs.ptr[r]; a < rs.ptr[r + 1]; ++a) acc += rs.val[a] * dx[rs.col[a]];
      Ax[r] = acc - h[blk.row + r];
    }
    tmp.resize(blk.size);
    sc[bi].apply_Hinv(Ax, tmp);
    dy.segment(blk.row, blk.size) = tmp;
  }
}

double Kkt::solve(const VectorXd& g, const VectorXd& h, VectorXd& dx, VectorXd& dy,
                  int refine) const {
  solve_raw(g, h, dx, dy);
  VectorXd rg(cp.n), rh(cp.m), ddx, ddy;
  // Residual of [0 A'; A -H][px;py] = [g;h], accumulated in extended
  // precision. Double-precision residuals bottom out near 1e-6 relative on
  // late ill-conditioned iterations, which would cap the attainable
  // direction accuracy; the extra bits let refinement keep contracting.
  auto residual = [&](const VectorXd& px, const VectorXd& py) {
    std::vector<long double> ag(cp.n, 0.0L), ah(cp.m, 0.0L);
    for (int k = 0; k < cp.A.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator itA(cp.A, k); itA; ++itA) {
        ag[itA.col()] += static_cast<long double>(itA.value()) * py[itA.row()];
        ah[itA.row()] += static_cast<long double>(itA.value()) * px[itA.col()];
      }
    for (size_t bi = 0; bi < cp.proper.size(); ++bi) {
      const auto& blk = cp.proper[bi];
      const auto& s = sc[bi];
      const auto yseg = py.segment(blk.row, blk.size);
      switch (s.kind) {
        case ConeKind::Nonneg:
          for (int r = 0; r < blk.size; ++r)
            ah[blk.row + r] -= static_cast<long double>(s.h_diag[r]) * yseg[r];
          break;
        case ConeKind::SecondOrder: {
          long double wu = 0.0L;
          for (int r = 0; r < blk.size; ++r)
            wu += static_cast<long double>(s.wbar[r]) * yseg[r];
          const long double e2 = static_cast<long double>(s.eta) * s.eta;
          for (int r = 0; r < blk.size; ++r) {
            long double v = 2.0L * wu * s.wbar[r] + (r == 0 ? -yseg[0] : yseg[r]);
            ah[blk.row + r] -= e2 * v;
          }
          break;
        }
        case ConeKind::Psd: {
          const int nu = blk.order;
          MatrixXd U = smat(yseg);
          std::vector<long double> T(nu * nu, 0.0L);
          for (int i = 0; i < nu; ++i)
            for (int j = 0; j < nu; ++j) {
              long double acc = 0.0L;
              for (int k2 = 0; k2 < nu; ++k2)
                acc += static_cast<long double>(s.Wm(i, k2)) * U(k2, j);
              T[i * nu + j] = acc;
            }
          int t = 0;
          for (int j = 0; j < nu; ++j)
            for (int i = j; i < nu; ++i, ++t) {
              long double acc = 0.0L;
              for (int k2 = 0; k2 < nu; ++k2)
                acc += T[i * nu + k2] * static_cast<long double>(s.Wm(k2, j));
              ah[blk.row + t] -= (i == j ? acc : acc * 1.4142135623730950488L);
            }
          break;
        }
        default: break;
      }
    }
    long double nrm = 0.0L;
    for (int j = 0; j < cp.n; ++j) {
      const long double v = static_cast<long double>(g[j]) - ag[j];
      rg[j] = static_cast<double>(v);
      nrm += v * v;
    }
    for (int r = 0; r < cp.m; ++r) {
      const long double v = static_cast<long double>(h[r]) - ah[r];
      rh[r] = static_cast<double>(v);
      nrm += v * v;
    }
    return static_cast<double>(sqrtl(nrm));
  };
  // Safeguarded: accept a correction only while it keeps reducing the
  // residual materially.
  double res = residual(dx, dy);
  const double scale = 1.0 + std::sqrt(g.squaredNorm() + h.squaredNorm());
  for (int round = 0; round < std::max(refine, 8); ++round) {
    if (res <= 1e-15 * scale) break;
    solve_raw(rg, rh, ddx, ddy);
    ddx += dx;
    ddy += dy;
    const double res2 = residual(ddx, ddy);
    if (res2 >= 0.9 * res) break;
    dx.swap(ddx);
    dy.swap(ddy);
    res = res2;
  }
  return res / scale;
}

struct Iterate {
  VectorXd x, y, s;
  double tau = 1.0, kappa = 1.0;
};

}  // namespace

// ---------------------------------------------------------------------------
// solve()
// ---------------------------------------------------------------------------

Solution solve(const ConicProgram& p, const SolverSettings& settings) {
  const auto t_start = std::chrono::steady_clock::now();
  Solution out;
  Compiled cp = compile(p);
  const int n = cp.n, m = cp.m;
  if (n == 0) throw std::invalid_argument("solve: program has no variables");

  const double bnorm = cp.b.norm(), cnorm = cp.c.norm();
  const double eps = settings.eps;

  std::vector<Scaling> sc(cp.proper.size());
  for (size_t bi = 0; bi < cp.proper.size(); ++bi) sc[bi].identity(cp.proper[bi]);

  Kkt kkt(cp, sc);
  Iterate it;
  it.x.setZero(n);
  it.y.setZero(m);
  it.s.setZero(m);

  // least-squares initialization, then shift slacks/duals into the interior
  if (!kkt.factor()) {
    out.status = SolveStatus::IllPosed;
    return out;
  }
  {
    VectorXd dx, dy;
    kkt.solve(VectorXd::Zero(n), cp.b, dx, dy, 1);
    it.x = dx;
    VectorXd shat = -dy;  // b - A x on proper rows
    for (size_t bi = 0; bi < cp.proper.size(); ++bi) {
      const auto& blk = cp.proper[bi];
      VectorXd sblk = shat.segment(blk.row, blk.size);
      const double me = block_min_eig(blk, sblk);
      // shift well into the interior; a boundary start freezes the ratio test
      const double margin = 1e-3 * (1.0 + sblk.cwiseAbs().maxCoeff());
      if (me < margin) {
        VectorXd e(blk.size);
        block_identity(blk, e);
        sblk += (1.0 + margin - me) * e;
      }
      it.s.segment(blk.row, blk.size) = sblk;
    }
    kkt.solve(-cp.c, VectorXd::Zero(m), dx, dy, 1);
    for (size_t bi = 0; bi < cp.proper.size(); ++bi) {
      const auto& blk = cp.proper[bi];
      VectorXd yblk = dy.segment(blk.row, blk.size);
      const double me = block_min_eig(blk, yblk);
      const double margin = 1e-3 * (1.0 + yblk.cwiseAbs().maxCoeff());
      if (me < margin) {
        VectorXd e(blk.size);
        block_identity(blk, e);
        yblk += (1.0 + margin - me) * e;
      }
      it.y.segment(blk.row, blk.size) = yblk;
    }
    for (int t = 0; t < static_cast<int>(cp.eq_rows.size()); ++t)
      it.y[cp.eq_rows[t]] = dy[cp.eq_rows[t]];
  }

  const double deg = cp.degree + 1.0;
  auto gap_of = [&](const Iterate& q) {
    double g = q.tau * q.kappa;
    for (const auto& blk : cp.proper)
      g += q.s.segment(blk.row, blk.size).dot(q.y.segment(blk.row, blk.size));
    return g;
  };

  VectorXd rp(m), rd(n);
  double rg = 0;
  VectorXd vx, vy, ux, uy;
  VectorXd dx_a(n), dy_a(m), ds_a(m), dx(n), dy(m), ds(m);
  VectorXd ws(m), tmp, tmp2;
  std::vector<VectorXd> ds_scaled(cp.proper.size()), dy_scaled(cp.proper.size()),
      eta_corr(cp.proper.size());

  int iter = 0;
  bool factor_ok = true;
  double delta_floor = 0.0;
  int consecutive_bad = 0;
  Iterate best = it;
  double best_score = kInf;
  double best_metrics[5] = {0, 0, kInf, kInf, kInf};  // pcost dcost pres dres relgap
  int stalls = 0;
  for (; iter <= settings.max_iter; ++iter) {
    // residuals
    rp = cp.A * it.x + it.s - cp.b * it.tau;
    rd = cp.A.transpose() * it.y + cp.c * it.tau;
    rg = cp.c.dot(it.x) + cp.b.dot(it.y) + it.kappa;
    const double gap = gap_of(it) - it.tau * it.kappa;
    const double mu = (gap + it.tau * it.kappa) / deg;

    const double pcost = cp.c.dot(it.x) / it.tau;
    const double dcost = -cp.b.dot(it.y) / it.tau;
    const double pres = (rp.norm() / it.tau) / (1.0 + bnorm);
    const double dres = (rd.norm() / it.tau) / (1.0 + cnorm);
    // relative duality gap as the objective mismatch; the complementarity
    // measure <s,y>/tau^2 carries a factor of the barrier degree and
    // overstates the gap on large cone products
    const double gap_scaled = gap / (it.tau * it.tau);
    const double relgap =
        std::min(gap_scaled, std::abs(pcost - dcost)) / std::max({1.0, std::abs(pcost), std::abs(dcost)});

    const double by = cp.b.dot(it.y);
    const double cx = cp.c.dot(it.x);
    const double pinf_res =
        by < -1e-300 ? ((cp.A.transpose() * it.y).norm() / (-by)) / (1.0 + cnorm) : kInf;
    double dinf_res = kInf;
    if (cx < -1e-300) dinf_res = ((cp.A * it.x + it.s).norm() / (-cx)) / (1.0 + bnorm);

    IterationStat st;
    st.iter = iter;
    st.pcost = pcost;
    st.dcost = dcost;
    st.pres = pres;
    st.dres = dres;
    st.relgap = relgap;
    st.mu = mu;
    st.tau = it.tau;
    st.kappa = it.kappa;
    out.trace.push_back(st);
    if (settings.verbosity >= 2) {
      std::printf("iter=%3d pcost=% .9e dcost=% .9e pres=%.3e dres=%.3e relgap=%.3e mu=%.3e\n",
                  iter, pcost, dcost, pres, dres, relgap, mu);
    }

    const double score = std::max({pres, dres, relgap});
    if (std::isfinite(score) && score < best_score) {
      best_score = score;
      best = it;
      best_metrics[0] = pcost;
      best_metrics[1] = dcost;
      best_metrics[2] = pres;
      best_metrics[3] = dres;
      best_metrics[4] = relgap;
    }

    auto finish = [&](SolveStatus status) {
      // a stalled run whose best iterate already met the tolerances is a
      // converged run
      if (status == SolveStatus::IterLimit && best_score <= eps) status = SolveStatus::Optimal;
      out.status = status;
      out.iterations = iter;
      if (status == SolveStatus::Optimal && best_score < std::max({pres, dres, relgap})) {
        out.x = best.x / best.tau;
        out.y = best.y / best.tau;
        out.s = best.s / best.tau;
        out.primal_objective = best_metrics[0];
        out.dual_objective = best_metrics[1];
        out.primal_residual = best_metrics[2];
        out.dual_residual = best_metrics[3];
        out.relative_gap = best_metrics[4];
      } else if (status == SolveStatus::Optimal) {
        out.x = it.x / it.tau;
        out.y = it.y / it.tau;
        out.s = it.s / it.tau;
        out.primal_objective = pcost;
        out.dual_objective = dcost;
        out.primal_residual = pres;
        out.dual_residual = dres;
        out.relative_gap = relgap;
      } else if (status == SolveStatus::IterLimit || status == SolveStatus::IllPosed) {
        out.x = best.x / best.tau;
        out.y = best.y / best.tau;
        out.s = best.s / best.tau;
        out.primal_objective = best_metrics[0];
        out.dual_objective = best_metrics[1];
        out.primal_residual = best_metrics[2];
        out.dual_residual = best_metrics[3];
        out.relative_gap = best_metrics[4];
      } else if (status == SolveStatus::PrimalInfeasible) {
        out.x.setZero(n);
        out.s.setZero(m);
        out.y = it.y / (-by);
        out.primal_residual = pinf_res;
      } else {
        out.y.setZero(m);
        out.x = it.x / (-cx);
        out.s = it.s / (-cx);
        out.dual_residual = dinf_res;
      }
      out.wall_time_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
      if (settings.verbosity >= 1)
        std::printf("[solver] %s %s iters=%d obj=%.9e pres=%.2e dres=%.2e gap=%.2e (%.2fs)\n",
                    p.label.c_str(), to_string(status), iter, out.primal_objective,
                    out.primal_residual, out.dual_residual, out.relative_gap, out.wall_time_s);
    };

    if (pres <= eps && dres <= eps && relgap <= eps) {
      finish(SolveStatus::Optimal);
      return out;
    }
    if (pinf_res <= eps) {
      finish(SolveStatus::PrimalInfeasible);
      return out;
    }
    if (dinf_res <= eps) {
      finish(SolveStatus::DualInfeasible);
      return out;
    }
    // a numerically dead end after substantial progress is a truncated run,
    // not an ill-posed problem
    if (!std::isfinite(mu) || !std::isfinite(score)) {
      finish(best_score < 1e-2 ? SolveStatus::IterLimit : SolveStatus::IllPosed);
      return out;
    }
    if (it.tau <= 1e-10 * std::max(1.0, it.kappa) && mu <= 1e-14) {
      finish(best_score < 1e-2 ? SolveStatus::IterLimit : SolveStatus::IllPosed);
      return out;
    }
    if (iter == settings.max_iter || !factor_ok || stalls >= 2) {
      finish(SolveStatus::IterLimit);
      return out;
    }

    // NT scalings
    for (size_t bi = 0; bi < cp.proper.size(); ++bi) {
      const auto& blk = cp.proper[bi];
      sc[bi].compute(blk, it.s.segment(blk.row, blk.size), it.y.segment(blk.row, blk.size));
    }
    factor_ok = kkt.factor(delta_floor);
    if (!factor_ok) continue;  // next loop iteration reports IllPosed

    kkt.solve(-cp.c, cp.b, vx, vy, 4);
    // c'vx + b'vy = -vy' H vy on the proper rows; the explicit quadratic
    // form keeps the sign certain when the solve is inexact
    double vhv = 0.0;
    for (size_t bi = 0; bi < cp.proper.size(); ++bi) {
      const auto& blk = cp.proper[bi];
      tmp.resize(blk.size);
      sc[bi].apply_H(vy.segment(blk.row, blk.size), tmp);
      vhv += tmp.dot(vy.segment(blk.row, blk.size));
    }
    const double denom = std::min(-vhv - it.kappa / it.tau, -1e-300);

    // --- affine (predictor) direction
    VectorXd h(m);
    for (const auto& blk : cp.proper) {
      h.segment(blk.row, blk.size) =
          -rp.segment(blk.row, blk.size) + it.s.segment(blk.row, blk.size);
    }
    for (int t = 0; t < static_cast<int>(cp.eq_rows.size()); ++t) {
      const int r = cp.eq_rows[t];
      h[r] = -rp[r];
    }
    kkt.solve(-rd, h, ux, uy, 4);
    const double rhs_tau_a = -rg + it.kappa;
    const double dtau_a = (rhs_tau_a - cp.c.dot(ux) - cp.b.dot(uy)) / denom;
    dx_a = ux + dtau_a * vx;
    dy_a = uy + dtau_a * vy;
    ds_a.setZero();
    for (size_t bi = 0; bi < cp.proper.size(); ++bi) {
      const auto& blk = cp.proper[bi];
      tmp.resize(blk.size);
      sc[bi].apply_H(dy_a.segment(blk.row, blk.size), tmp);
      ds_a.segment(blk.row, blk.size) = -it.s.segment(blk.row, blk.size) - tmp;
    }
    const double dkappa_a = -it.kappa - (it.kappa / it.tau) * dtau_a;

    // affine step length
    double alpha_a = 1.0;
    for (size_t bi = 0; bi < cp.proper.size(); ++bi) {
      const auto& blk = cp.proper[bi];
      ds_scaled[bi].resize(blk.size);
      dy_scaled[bi].resize(blk.size);
      sc[bi].apply_Winv(ds_a.segment(blk.row, blk.size), ds_scaled[bi]);
      sc[bi].apply_Wt(dy_a.segment(blk.row, blk.size), dy_scaled[bi]);
      alpha_a = std::min({alpha_a, sc[bi].max_step(ds_scaled[bi]), sc[bi].max_step(dy_scaled[bi])});
    }
    if (dtau_a < 0) alpha_a = std::min(alpha_a, -it.tau / dtau_a);
    if (dkappa_a < 0) alpha_a = std::min(alpha_a, -it.kappa / dkappa_a);
    double sigma = std::pow(1.0 - alpha_a, 3.0);
    sigma = std::min(1.0, std::max(sigma, 1e-8));

    // --- combined (corrector) direction
    for (size_t bi = 0; bi < cp.proper.size(); ++bi) {
      eta_corr[bi].resize(cp.proper[bi].size);
      sc[bi].jmul(ds_scaled[bi], dy_scaled[bi], eta_corr[bi]);
    }
    const double smu = sigma * mu;
    for (size_t bi = 0; bi < cp.proper.size(); ++bi) {
      const auto& blk = cp.proper[bi];
      VectorXd e(blk.size);
      block_identity(blk, e);
      VectorXd dsv(blk.size), q(blk.size);
      // d_s in the scaled frame
      sc[bi].jmul(sc[bi].lambda, sc[bi].lambda, dsv);
      dsv = -dsv - eta_corr[bi] + smu * e;
      sc[bi].jdiv_lambda(dsv, q);
      tmp.resize(blk.size);
      sc[bi].apply_W(q, tmp);
      ws.segment(blk.row, blk.size) = tmp;
    }
    const double dkap_rhs = -it.tau * it.kappa - dtau_a * dkappa_a + smu;
    for (const auto& blk : cp.proper) {
      h.segment(blk.row, blk.size) =
          -(1.0 - sigma) * rp.segment(blk.row, blk.size) - ws.segment(blk.row, blk.size);
    }
    for (int t = 0; t < static_cast<int>(cp.eq_rows.size()); ++t) {
      const int r = cp.eq_rows[t];
      h[r] = -(1.0 - sigma) * rp[r];
    }
    const double dir_res = kkt.solve(-(1.0 - sigma) * rd, h, ux, uy, 4);
    const double rhs_tau = -(1.0 - sigma) * rg - dkap_rhs / it.tau;
    const double dtau = (rhs_tau - cp.c.dot(ux) - cp.b.dot(uy)) / denom;
    dx = ux + dtau * vx;
    dy = uy + dtau * vy;
    for (size_t bi = 0; bi < cp.proper.size(); ++bi) {
      const auto& blk = cp.proper[bi];
      tmp.resize(blk.size);
      sc[bi].apply_H(dy.segment(blk.row, blk.size), tmp);
      ds.segment(blk.row, blk.size) = ws.segment(blk.row, blk.size) - tmp;
    }
    const double dkappa = (dkap_rhs - it.kappa * dtau) / it.tau;

    double alpha = 1.0;
    for (size_t bi = 0; bi < cp.proper.size(); ++bi) {
      const auto& blk = cp.proper[bi];
      tmp.resize(blk.size);
      tmp2.resize(blk.size);
      sc[bi].apply_Winv(ds.segment(blk.row, blk.size), tmp);
      sc[bi].apply_Wt(dy.segment(blk.row, blk.size), tmp2);
      alpha = std::min({alpha, sc[bi].max_step(tmp), sc[bi].max_step(tmp2)});
    }
    if (dtau < 0) alpha = std::min(alpha, -it.tau / dtau);
    if (dkappa < 0) alpha = std::min(alpha, -it.kappa / dkappa);
    alpha = std::min(1.0, 0.997 * alpha);
    out.trace.back().step = alpha;
    if (settings.verbosity >= 3)
      std::printf("   dir: alpha=%.3e alpha_a=%.3e sigma=%.3e dir_res=%.3e delta=%.3e\n", alpha,
                  alpha_a, sigma, dir_res, kkt.delta);

    // An unusable direction means the factorization has degraded past
    // double precision. "Unusable" is relative: a direction is worth taking
    // while its residual is small against the current convergence level.
    // Retry the iteration with a larger static shift; give up only after
    // several consecutive failures, and decay the shift once directions
    // recover.
    if (dir_res > 0.25 * score + 1e-10) {
      if (++consecutive_bad > 3 || kkt.delta >= 1e-4 * kkt.dscale) {
        stalls = 2;
        continue;
      }
      delta_floor = (kkt.delta == 0.0 ? 1e-14 * kkt.dscale : kkt.delta * 1e4);
      continue;
    }
    consecutive_bad = 0;
    delta_floor = (delta_floor > 1e-280) ? delta_floor * 1e-4 : 0.0;
    if (alpha < 1e-8)
      ++stalls;
    else
      stalls = 0;

    it.x += alpha * dx;
    it.y += alpha * dy;
    for (const auto& blk : cp.proper)
      it.s.segment(blk.row, blk.size) += alpha * ds.segment(blk.row, blk.size);
    it.tau += alpha * dtau;
    it.kappa += alpha * dkappa;
  }
  // loop always returns via finish()
  out.status = SolveStatus::IterLimit;
  return out;
}

// ---------------------------------------------------------------------------
// check_solution
// ---------------------------------------------------------------------------

ResidualReport check_solution(const ConicProgram& p, const Solution& sol, double eps) {
  ResidualReport rep;
  if (sol.status != SolveStatus::Optimal) return rep;
  const auto A = p.matrix();
  const VectorXd b = p.rhs();
  const VectorXd c = p.objective();
  const int m = p.num_rows(), n = p.num_vars();

  // extended-precision accumulation of the two residual vectors
  std::vector<long double> r1(m, 0.0L), r2(n, 0.0L);
  for (int k = 0; k < A.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it) {
      r1[it.row()] += static_cast<long double>(it.value()) * sol.x[it.col()];
      r2[it.col()] += static_cast<long double>(it.value()) * sol.y[it.row()];
    }
  long double pnorm2 = 0.0L, dnorm2 = 0.0L;
  for (int r = 0; r < m; ++r) {
    const long double v = r1[r] + sol.s[r] - b[r];
    pnorm2 += v * v;
  }
  for (int j = 0; j < n; ++j) {
    const long double v = r2[j] + c[j];
    dnorm2 += v * v;
  }
  rep.primal_residual = static_cast<double>(sqrtl(pnorm2)) / (1.0 + b.norm());
  rep.dual_residual = static_cast<double>(sqrtl(dnorm2)) / (1.0 + c.norm());

  long double gap = 0.0L;
  for (int r = 0; r < m; ++r) gap += static_cast<long double>(sol.s[r]) * sol.y[r];
  const double pcost = c.dot(sol.x);
  const double dcost = -b.dot(sol.y);
  rep.relative_gap = std::min(static_cast<double>(fabsl(gap)), std::abs(pcost - dcost)) /
                     std::max({1.0, std::abs(pcost), std::abs(dcost)});
  rep.weak_duality_slack = std::max(0.0, dcost - pcost - 1e-7 * (1.0 + std::abs(pcost)));

  for (const auto& blk : p.blocks()) {
    const auto sseg = sol.s.segment(blk.row, blk.size);
    const auto yseg = sol.y.segment(blk.row, blk.size);
    rep.worst_slack_violation = std::max(rep.worst_slack_violation, cone_violation(blk, sseg));
    if (blk.kind != ConeKind::Zero)
      rep.worst_dual_violation = std::max(rep.worst_dual_violation, cone_violation(blk, yseg));
  }
  rep.mismatch_flagged = rep.primal_residual > 10.0 * std::max(eps, sol.primal_residual) ||
                         rep.dual_residual > 10.0 * std::max(eps, sol.dual_residual);
  return rep;
}

}  // namespace arlp::solver
