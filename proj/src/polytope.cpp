#include "arlp/polytope.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <stdexcept>

namespace arlp::polytope {

std::uint64_t count_bases(int num_inequalities, int need) {
  if (need < 0 || need > num_inequalities) return 0;
  need = std::min(need, num_inequalities - need);
  std::uint64_t r = 1;
  for (int i = 0; i < need; ++i) {
    const std::uint64_t factor = static_cast<std::uint64_t>(num_inequalities - i);
    if (r > UINT64_MAX / factor) return UINT64_MAX;  // overflow
    r = r * factor / (i + 1);
  }
  return r;
}

namespace {

// Incremental halfspace intersection (double-description style) in the
// reduced coordinates of the equality subspace. Effective when the facet
// count is large but the dimension and vertex count are small (the
// cross-polytope-like slices), where basis enumeration is exponential.
std::vector<VectorXd> dd_vertices(const MatrixXd& Ain, const VectorXd& bin, int dim,
                                  const EnumOptions& opt) {
  const double big = 1e7;
  struct Vert {
    VectorXd x;
    std::vector<int> active;  // rows of [box; Ain] tight at the vertex
  };
  // start from the bounding box [-big, big]^dim; box facets are rows
  // 0..2*dim-1 (x_i <= big, then -x_i <= big)
  const int nbox = 2 * dim;
  auto box_row = [&](int r) {
    VectorXd a = VectorXd::Zero(dim);
    a[r % dim] = r < dim ? 1.0 : -1.0;
    return a;
  };
  std::vector<Vert> verts;
  for (std::uint64_t mask = 0; mask < (1ull << dim); ++mask) {
    Vert v;
    v.x.resize(dim);
    for (int i = 0; i < dim; ++i) {
      const bool hi = (mask >> i) & 1;
      v.x[i] = hi ? big : -big;
      v.active.push_back(hi ? i : dim + i);
    }
    verts.push_back(std::move(v));
  }
  auto row_vec = [&](int r) {
    return r < nbox ? VectorXd(box_row(r)) : VectorXd(Ain.row(r - nbox).transpose());
  };
  // adjacency: the shared active rows span a (dim-1)-dimensional face
  auto adjacent = [&](const Vert& a, const Vert& b) {
    std::vector<int> shared;
    for (int r : a.active)
      if (std::find(b.active.begin(), b.active.end(), r) != b.active.end()) shared.push_back(r);
    if (static_cast<int>(shared.size()) < dim - 1) return false;
    MatrixXd M(shared.size(), dim);
    for (size_t i = 0; i < shared.size(); ++i) M.row(i) = row_vec(shared[i]).transpose();
    Eigen::ColPivHouseholderQR<MatrixXd> qr(M);
    return static_cast<int>(qr.rank()) == dim - 1;
  };
  const double scale = 1.0 + (bin.size() ? bin.cwiseAbs().maxCoeff() : 0.0);
  for (int h = 0; h < Ain.rows(); ++h) {
    const VectorXd a = Ain.row(h).transpose();
    const double b = bin[h];
    std::vector<double> s(verts.size());
    bool any_neg = false;
    for (size_t i = 0; i < verts.size(); ++i) {
      s[i] = a.dot(verts[i].x) - b;
      if (s[i] < -1e-12 * scale) any_neg = true;
    }
    if (!any_neg) {
      for (size_t i = 0; i < verts.size(); ++i)
        if (std::abs(s[i]) <= 1e-9 * scale * (1.0 + verts[i].x.cwiseAbs().maxCoeff()))
          verts[i].active.push_back(nbox + h);
      continue;
    }
    std::vector<Vert> next;
    const double on_tol = 1e-11 * scale;
    for (size_t i = 0; i < verts.size(); ++i) {
      if (s[i] >= -on_tol) {
        Vert v = verts[i];
        if (s[i] <= on_tol) v.active.push_back(nbox + h);
        next.push_back(std::move(v));
      }
    }
    for (size_t i = 0; i < verts.size(); ++i) {
      if (s[i] >= -on_tol) continue;
      for (size_t j2 = 0; j2 < verts.size(); ++j2) {
        if (s[j2] <= on_tol) continue;  // strictly positive partners only
        if (!adjacent(verts[i], verts[j2])) continue;
        const double t = s[j2] / (s[j2] - s[i]);
        Vert v;
        v.x = verts[j2].x + t * (verts[i].x - verts[j2].x);
        for (int r : verts[i].active)
          if (std::find(verts[j2].active.begin(), verts[j2].active.end(), r) !=
              verts[j2].active.end())
            v.active.push_back(r);
        v.active.push_back(nbox + h);
        bool dup = false;
        for (const auto& w : next)
          if ((w.x - v.x).cwiseAbs().maxCoeff() <= opt.dedupe_tol) {
            dup = true;
            break;
          }
        if (!dup) next.push_back(std::move(v));
      }
    }
    verts.swap(next);
    if (verts.size() > 100000) throw std::runtime_error("enumerate_vertices: vertex explosion");
  }
  std::vector<VectorXd> out;
  for (const auto& v : verts) {
    if (v.x.cwiseAbs().maxCoeff() >= 0.5 * big)
      throw std::runtime_error("enumerate_vertices: polyhedron appears unbounded");
    out.push_back(v.x);
  }
  return out;
}

}  // namespace

std::vector<VectorXd> enumerate_vertices(const Description& d, const EnumOptions& opt) {
  const int n = d.dim();
  const int me = static_cast<int>(d.Aeq.rows());
  const int mi = static_cast<int>(d.Ain.rows());
  if ((me && d.Aeq.cols() != n) || (mi && d.Ain.cols() != n))
    throw std::invalid_argument("enumerate_vertices: inconsistent dimensions");

  int rank_eq = 0;
  if (me) {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(d.Aeq.transpose());
    rank_eq = static_cast<int>(qr.rank());
  }
  const int need = n - rank_eq;
  if (need < 0) throw std::invalid_argument("enumerate_vertices: overdetermined equalities");
  if (count_bases(mi, need) > opt.max_bases) {
    if (need <= 12) {
      // facet-heavy, low-dimensional: reduce to the equality subspace and
      // intersect halfspaces incrementally
      VectorXd x0 = VectorXd::Zero(n);
      MatrixXd Nb = MatrixXd::Identity(n, n);
      if (me) {
        Eigen::ColPivHouseholderQR<MatrixXd> qr(d.Aeq);
        x0 = qr.solve(d.beq);
        if ((d.Aeq * x0 - d.beq).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + d.beq.cwiseAbs().maxCoeff()))
          return {};
        Eigen::ColPivHouseholderQR<MatrixXd> qrt(d.Aeq.transpose());
        MatrixXd Q = qrt.householderQ();
        Nb = Q.rightCols(n - rank_eq);
      }
      const MatrixXd Ar = d.Ain * Nb;
      const VectorXd br = d.bin - d.Ain * x0;
      auto reduced = dd_vertices(Ar, br, need, opt);
      std::vector<VectorXd> out;
      out.reserve(reduced.size());
      for (const auto& t : reduced) out.push_back(x0 + Nb * t);
      return out;
    }
    throw std::runtime_error("enumerate_vertices: basis cap exceeded");
  }

  const double scale =
      1.0 + std::max(me ? d.beq.cwiseAbs().maxCoeff() : 0.0, mi ? d.bin.cwiseAbs().maxCoeff() : 0.0);

  std::vector<VectorXd> verts;
  MatrixXd M(me + need, n);
  VectorXd rhs(me + need);
  if (me) {
    M.topRows(me) = d.Aeq;
    rhs.head(me) = d.beq;
  }

  std::vector<int> pick(need);
  for (int i = 0; i < need; ++i) pick[i] = i;
  const bool empty_choice = (need == 0);
  bool done = (mi < need);
  if (empty_choice) done = false;

  while (!done) {
    for (int i = 0; i < need; ++i) {
      M.row(me + i) = d.Ain.row(pick[i]);
      rhs[me + i] = d.bin[pick[i]];
    }
    Eigen::ColPivHouseholderQR<MatrixXd> qr(M);
    if (static_cast<int>(qr.rank()) == n) {
      const VectorXd x = qr.solve(rhs);
      if ((M * x - rhs).cwiseAbs().maxCoeff() <= opt.feas_tol * scale) {
        bool feas = true;
        for (int r = 0; r < mi && feas; ++r)
          feas = d.Ain.row(r).dot(x) >= d.bin[r] - opt.feas_tol * scale;
        if (me && feas)
          feas = (d.Aeq * x - d.beq).cwiseAbs().maxCoeff() <= opt.feas_tol * scale;
        if (feas) {
          bool dup = false;
          for (const auto& v : verts)
            if ((v - x).cwiseAbs().maxCoeff() <= opt.dedupe_tol) {
              dup = true;
              break;
            }
          if (!dup) verts.push_back(x);
        }
      }
    }
    if (empty_choice) break;
    // next combination
    int i = need - 1;
    while (i >= 0 && pick[i] == mi - need + i) --i;
    if (i < 0) break;
    ++pick[i];
    for (int j = i + 1; j < need; ++j) pick[j] = pick[j - 1] + 1;
  }
  return verts;
}

}  // namespace arlp::polytope
