#include "arlp/instances.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "arlp/linalg.hpp"

namespace arlp::instances {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using model::AroInstance;
using model::FirstStageSet;

model::AroInstance temporal(int s, int j) {
  if (s < 2) throw std::invalid_argument("temporal: s >= 2 required");
  if (j != 1 && j != 2) throw std::invalid_argument("temporal: j must be 1 or 2");
  if (j == 1 && s > 10)
    throw std::invalid_argument("temporal: j = 1 capped at s <= 10 (P has 2^s rows)");
  const int m = 2 * s, k = s + 1, n2 = s;

  MatrixXd B = MatrixXd::Zero(m, n2);
  for (int i = 0; i < s; ++i) {
    B(2 * i, i) = 1.0;
    B(2 * i + 1, i) = 1.0;
    if (i >= 1) {
      B(2 * i, i - 1) = -1.0;
      B(2 * i + 1, i - 1) = -1.0;
    }
  }
  MatrixXd F = MatrixXd::Zero(m, k);
  for (int i = 0; i < s; ++i) {
    F(2 * i, 0) = 0.5;
    F(2 * i, 1 + i) = 0.5;
    F(2 * i + 1, 0) = 0.5;
    F(2 * i + 1, 1 + i) = -0.5;
  }
  VectorXd d = VectorXd::Zero(n2);
  d[n2 - 1] = 1.0;

  auto cone = [&]() {
    if (j == 2) return cones::UncertaintyCone::second_order(k);
    const int rows = 1 << s;
    MatrixXd P(rows, k);
    for (int r = 0; r < rows; ++r) {
      P(r, 0) = 1.0;
      for (int b = 0; b < s; ++b) P(r, 1 + b) = (r >> b) & 1 ? 1.0 : -1.0;
    }
    return cones::UncertaintyCone::polyhedral(std::move(P));
  }();

  AroInstance inst(MatrixXd::Zero(m, 0), std::move(B), VectorXd(0), std::move(d), std::move(F),
                   FirstStageSet::free_reals(0), std::move(cone),
                   "temporal-s" + std::to_string(s) + "-j" + std::to_string(j));
  return inst;
}

model::AroInstance newsvendor() {
  const int nprod = 3;
  const VectorXd r = (VectorXd(3) << 80, 80, 80).finished();
  const VectorXd c = (VectorXd(3) << 70, 50, 20).finished();
  const VectorXd sv = (VectorXd(3) << 20, 15, 10).finished();
  const VectorXd pv = (VectorXd(3) << 60, 60, 50).finished();

  const int m = 2 * nprod, k = 7, n1 = nprod, n2 = nprod;
  // demand maps xi(zeta) with u = (1, zeta+, zeta-)
  MatrixXd xi = MatrixXd::Zero(nprod, k);
  xi(0, 0) = 80;
  xi(0, 1) = 30;
  xi(0, 2) = 30;
  xi(0, 4) = -30;
  xi(0, 5) = -30;
  xi(1, 0) = 80;
  xi(1, 2) = 30;
  xi(1, 3) = 30;
  xi(1, 5) = -30;
  xi(1, 6) = -30;
  xi(2, 0) = 60;
  xi(2, 3) = 20;
  xi(2, 1) = 20;
  xi(2, 6) = -20;
  xi(2, 4) = -20;

  // minimization form: y_j >= (c_j - s_j) x_j - (r_j - s_j) xi_j
  //                    y_j >= (c_j - r_j - p_j) x_j + p_j xi_j
  MatrixXd A = MatrixXd::Zero(m, n1), B = MatrixXd::Zero(m, n2), F = MatrixXd::Zero(m, k);
  for (int jdx = 0; jdx < nprod; ++jdx) {
    A(jdx, jdx) = sv[jdx] - c[jdx];
    B(jdx, jdx) = 1.0;
    F.row(jdx) = -(r[jdx] - sv[jdx]) * xi.row(jdx);
    A(nprod + jdx, jdx) = r[jdx] + pv[jdx] - c[jdx];
    B(nprod + jdx, jdx) = 1.0;
    F.row(nprod + jdx) = pv[jdx] * xi.row(jdx);
  }

  // lifted uncertainty polytope in (zeta+, zeta-):
  // zeta >= 0, zeta_j^+ + zeta_j^- <= 1, sum = 2
  MatrixXd P = MatrixXd::Zero(11, k);
  for (int t = 0; t < 6; ++t) P(t, 1 + t) = 1.0;
  for (int jdx = 0; jdx < nprod; ++jdx) {
    P(6 + jdx, 0) = 1.0;
    P(6 + jdx, 1 + jdx) = -1.0;
    P(6 + jdx, 4 + jdx) = -1.0;
  }
  P(9, 0) = -2.0;
  for (int t = 0; t < 6; ++t) P(9, 1 + t) = 1.0;
  P(10, 0) = 2.0;
  for (int t = 0; t < 6; ++t) P(10, 1 + t) = -1.0;

  AroInstance inst(std::move(A), std::move(B), VectorXd::Zero(n1), VectorXd::Ones(n2),
                   std::move(F), FirstStageSet::nonneg(n1),
                   cones::UncertaintyCone::polyhedral(std::move(P)), "newsvendor");
  inst.sense_flipped = true;
  return inst;
}

model::AroInstance lotsizing(LotSizingUncertainty uncertainty) {
  const int N = 8;
  const double cost[N][N] = {
      {0, 4, 3, 2, 2, 2, 3, 5},
      {4, 0, 6, 5, 4, 4, 2, 8},
      {3, 6, 0, 1, 5, 2, 6, 2},
      {2, 5, 1, 0, 4, 1, 4, 3},
      {2, 4, 5, 4, 0, 4, 2, 7},
      {2, 4, 2, 1, 4, 0, 4, 4},
      {3, 2, 6, 4, 2, 4, 0, 7},
      {5, 8, 2, 3, 7, 4, 7, 0},
  };
  const double gamma = 10.0 * std::sqrt(static_cast<double>(N));
  const double cap = 20.0;

  // shipping variables over ordered pairs i != j (self-loops carry zero
  // cost and cancel in every balance row, so they are dropped)
  const int n2 = N * (N - 1);
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(n2);
  for (int i = 0; i < N; ++i)
    for (int jdx = 0; jdx < N; ++jdx)
      if (i != jdx) pairs.emplace_back(i, jdx);

  const int m = N + n2;
  const int k = N + 1;
  MatrixXd A = MatrixXd::Zero(m, N), B = MatrixXd::Zero(m, n2), F = MatrixXd::Zero(m, k);
  VectorXd d(n2);
  for (int t = 0; t < n2; ++t) {
    const auto [from, to] = pairs[t];
    d[t] = cost[from][to];
    B(from, t) -= 1.0;  // outflow
    B(to, t) += 1.0;    // inflow
    B(N + t, t) = 1.0;  // y >= 0 row
  }
  for (int i = 0; i < N; ++i) A(i, i) = 1.0;

  auto cone = [&]() {
    if (uncertainty == LotSizingUncertainty::Ball) {
      // u = (1, xi / Gamma) over the unit-ball slice
      for (int i = 0; i < N; ++i) F(i, 1 + i) = gamma;
      return cones::UncertaintyCone::second_order(k);
    }
    // budget set 0 <= xi <= 20, sum xi <= 20 sqrt(N); u = (1, xi)
    for (int i = 0; i < N; ++i) F(i, 1 + i) = 1.0;
    MatrixXd P = MatrixXd::Zero(2 * N + 1, k);
    for (int i = 0; i < N; ++i) {
      P(i, 1 + i) = 1.0;
      P(N + i, 0) = 20.0;
      P(N + i, 1 + i) = -1.0;
    }
    P(2 * N, 0) = 20.0 * std::sqrt(static_cast<double>(N));
    for (int i = 0; i < N; ++i) P(2 * N, 1 + i) = -1.0;
    return cones::UncertaintyCone::polyhedral(std::move(P));
  }();

  return AroInstance(std::move(A), std::move(B), VectorXd::Constant(N, 20.0), std::move(d),
                     std::move(F), FirstStageSet::box(VectorXd::Zero(N), VectorXd::Constant(N, cap)),
                     std::move(cone),
                     uncertainty == LotSizingUncertainty::Ball ? "lotsizing-ball"
                                                               : "lotsizing-budget");
}

model::AroInstance random_instance(std::uint64_t seed) {
  const int k = 17, m = 16, n1 = 3, n2 = 5;
  linalg::Rng rng(seed);
  for (int attempt = 0; attempt < 64; ++attempt) {
    MatrixXd A(m, n1), B(m, n2);
    for (int i = 0; i < m; ++i) {
      for (int jdx = 0; jdx < n1; ++jdx) A(i, jdx) = rng.uniform(-5.0, 5.0);
      for (int jdx = 0; jdx < n2; ++jdx) B(i, jdx) = rng.uniform(-5.0, 5.0);
    }
    // rows of F in -U-hat (so F u <= 0 on the slice): first coordinate in
    // [-5, 0), remainder uniform in the ball of that radius. A literal
    // accept/reject over the [-5,5]^k box has acceptance odds near 1e-7
    // per row and is not viable.
    MatrixXd F(m, k);
    for (int i = 0; i < m; ++i) {
      const double head = -rng.uniform(0.0, 5.0);
      F(i, 0) = head;
      F.row(i).tail(k - 1) = (-head) * rng.ball_point(k - 1).transpose();
    }
    // mu in [0,1]^m with c = A'mu >= 0 and d = B'mu >= 0
    VectorXd mu(m);
    bool ok = false;
    for (int draw = 0; draw < 100000 && !ok; ++draw) {
      for (int i = 0; i < m; ++i) mu[i] = rng.uniform();
      ok = (A.transpose() * mu).minCoeff() >= 0.0 && (B.transpose() * mu).minCoeff() >= 0.0;
    }
    if (!ok) continue;  // fresh A, B, F from the same stream
    VectorXd c = A.transpose() * mu, d = B.transpose() * mu;
    AroInstance inst(std::move(A), std::move(B), std::move(c), std::move(d), std::move(F),
                     FirstStageSet::free_reals(n1), cones::UncertaintyCone::second_order(k),
                     "random-" + std::to_string(seed));
    return inst;
  }
  throw std::runtime_error("random_instance: rejection budget exceeded");
}

}  // namespace arlp::instances
