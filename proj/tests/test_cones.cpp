#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>

#include "arlp/builders.hpp"
#include "arlp/cones.hpp"
#include "arlp/instances.hpp"
#include "arlp/linalg.hpp"
#include "arlp/model.hpp"
#include "arlp/oracles.hpp"

using namespace arlp;
using cones::MatrixConeSpec;
using cones::MatrixConeVariant;
using cones::UncertaintyCone;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {
UncertaintyCone box_cone_2d() {
  MatrixXd P(2, 2);
  P << 1, 1, 1, -1;  // |u2| <= u1
  return UncertaintyCone::polyhedral(P);
}
}  // namespace

TEST_CASE("contains on boundary and outside points") {
  auto soc = UncertaintyCone::second_order(3);
  VectorXd u(3);
  u << 1, 0.6, 0.8;  // ||(0.6, 0.8)|| = 1 exactly
  CHECK(cones::contains(soc, u, 1e-9));
  u << 1, 1, 1;
  CHECK_FALSE(cones::contains(soc, u, 1e-9));

  auto poly = box_cone_2d();
  VectorXd v(2);
  v << 1, 0.5;
  CHECK(cones::contains(poly, v));
  v << 1, 1.5;
  CHECK_FALSE(cones::contains(poly, v));
}

TEST_CASE("dual membership") {
  auto soc = UncertaintyCone::second_order(4);
  VectorXd e1 = VectorXd::Zero(4);
  e1[0] = 1;
  CHECK(cones::dual_contains(soc, e1));
  CHECK(cones::dual_contains(soc, VectorXd::Zero(4)));

  // temporal-style rows (1, +-1, +-1): e1 = P' nu with uniform weights
  auto poly = instances::temporal(3, 1).uncertainty;
  VectorXd e1k = VectorXd::Zero(4);
  e1k[0] = 1;
  CHECK(cones::dual_contains(poly, e1k));
  CHECK(cones::dual_contains(poly, VectorXd::Zero(4)));
  // something outside: -e1 cannot be a nonnegative combination of rows
  // whose first coordinate is 1
  CHECK_FALSE(cones::dual_contains(poly, -e1k));
}

TEST_CASE("second-order dual membership coincides with primal membership") {
  auto soc = UncertaintyCone::second_order(5);
  linalg::Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    VectorXd a(5);
    for (int i = 0; i < 5; ++i) a[i] = rng.uniform(-1.5, 1.5);
    CHECK(cones::dual_contains(soc, a) == cones::contains(soc, a));
  }
}

TEST_CASE("slice sampling stays inside the slice") {
  linalg::Rng rng(9);
  auto soc = UncertaintyCone::second_order(3);
  CHECK(cones::contains(soc, (VectorXd(3) << 1, 0, 0).finished()));
  cones::SliceSampler ss(soc);
  for (int t = 0; t < 500; ++t) {
    const VectorXd u = ss(rng);
    CHECK(u[0] == 1.0);
    CHECK(u.tail(2).norm() <= 1.0 + 1e-12);
  }

  // vertex-combination path
  auto poly = instances::temporal(3, 1).uncertainty;
  cones::SliceSampler sp(poly);
  CHECK(sp.slice_vertices().size() == 6);  // cross-polytope
  for (int t = 0; t < 500; ++t) {
    const VectorXd u = sp(rng);
    CHECK(u[0] == doctest::Approx(1.0));
    CHECK(cones::contains(poly, u, 1e-9));
  }

  // lifted newsvendor polytope has an implicit equality; samples must obey it
  auto nv = instances::newsvendor().uncertainty;
  cones::SliceSampler sn(nv);
  for (int t = 0; t < 200; ++t) {
    const VectorXd u = sn(rng);
    CHECK(cones::contains(nv, u, 1e-9));
    CHECK(u.tail(6).sum() == doctest::Approx(2.0).epsilon(1e-9));
  }

  // hit-and-run fallback beyond the enumeration cap
  auto big = instances::temporal(9, 1).uncertainty;
  cones::SliceSampler sb(big);
  CHECK(sb.slice_vertices().empty());
  for (int t = 0; t < 50; ++t) {
    const VectorXd u = sb(rng);
    CHECK(cones::contains(big, u, 1e-8));
    CHECK(u[0] == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("membership plan: zero target is IA-feasible") {
  for (auto cone : {UncertaintyCone::second_order(3), box_cone_2d()}) {
    MatrixConeSpec spec(cone.dim(), 2, MatrixConeVariant::IA, cone);
    const MatrixXd T = MatrixXd::Zero(spec.order(), spec.order());
    auto cert = builders::membership_check(spec, T);
    REQUIRE(cert.has_value());
    CHECK(cert->alpha.cwiseAbs().maxCoeff() <= 1e-7);
    CHECK((cert->reconstruct(spec) - T).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("membership plan: blockdiag(J, 0) is IB-feasible via tau") {
  auto soc = UncertaintyCone::second_order(3);
  MatrixConeSpec spec(3, 2, MatrixConeVariant::IB, soc);
  MatrixXd T = MatrixXd::Zero(5, 5);
  T(0, 0) = 1;
  T(1, 1) = -1;
  T(2, 2) = -1;
  auto cert = builders::membership_check(spec, T);
  REQUIRE(cert.has_value());
  CHECK((cert->reconstruct(spec) - T).cwiseAbs().maxCoeff() <= 1e-6);
  // the negative diagonal can only come from the copositive block
  CHECK(*cert->tau >= 0.99);
}

TEST_CASE("membership plan: temporal s=2 certificate matrix is IB-feasible") {
  const int s = 2;
  auto certs = oracles::temporal_certificates(s);
  auto inst = instances::temporal(s, 2);
  builders::GxHyAssembler asm_(inst);
  const int n = 3 * s + 1;
  MatrixXd T = MatrixXd::Zero(n, n);
  T(0, 0) = certs.lambda;
  T -= 0.5 * asm_.G(VectorXd(0));
  T += asm_.EDiagE(VectorXd::Constant(s, certs.mu));
  T += certs.rho * MatrixXd::Identity(n, n);
  MatrixConeSpec spec(s + 1, 2 * s, MatrixConeVariant::IB, inst.uncertainty);
  auto cert = builders::membership_check(spec, T);
  REQUIRE(cert.has_value());
  CHECK((cert->reconstruct(spec) - T).cwiseAbs().maxCoeff() <= 1e-5);
}

TEST_CASE("cop_soc_check on the three reference cases") {
  MatrixXd J = MatrixXd::Identity(2, 2);
  J(1, 1) = -1;
  auto r1 = cones::cop_soc_check(J);
  REQUIRE(r1.has_value());
  CHECK(r1->first == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r1->second.cwiseAbs().maxCoeff() <= 1e-6);

  auto r2 = cones::cop_soc_check(MatrixXd::Identity(2, 2));
  REQUIRE(r2.has_value());
  CHECK(r2->first == doctest::Approx(0.0).epsilon(1e-8));
  CHECK((r2->second - MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-6);

  MatrixXd bad = MatrixXd::Zero(2, 2);
  bad(0, 0) = 1;
  bad(1, 1) = -2;
  CHECK_FALSE(cones::cop_soc_check(bad).has_value());
}

TEST_CASE("cop_soc_check round trip on random decomposable matrices") {
  linalg::Rng rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    const int k = 2 + static_cast<int>(rng.uniform_index(5));
    MatrixXd J = -MatrixXd::Identity(k, k);
    J(0, 0) = 1;
    MatrixXd G(k, k);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) G(i, j) = rng.gaussian();
    MatrixXd M = G.transpose() * G / k;
    const double tau = rng.uniform(0.0, 2.0);
    MatrixXd R = tau * J + M;
    auto res = cones::cop_soc_check(R, 1e-8);
    REQUIRE(res.has_value());
    CHECK((R - res->first * J - res->second).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(linalg::min_eigenvalue(res->second) >= -1e-8);
  }
}

namespace {

void falsify(const MatrixConeSpec& spec, int n_certs, int n_points, linalg::Rng& rng) {
  const int k = spec.k, m = spec.m;
  for (int cidx = 0; cidx < n_certs; ++cidx) {
    auto cert = cones::random_certificate(spec, rng);
    const MatrixXd S = cert.reconstruct(spec);
    const double snorm = S.norm();
    for (int t = 0; t < n_points; ++t) {
      VectorXd z(k + m);
      z.head(k) = cones::sample_cone_point(spec.uncertainty, rng);
      for (int i = 0; i < m; ++i) z[k + i] = rng.uniform(0.0, 1.5);
      const double q = z.dot(S * z);
      CHECK(q >= -1e-9 * (1.0 + snorm) * z.squaredNorm());
    }
  }
}

}  // namespace

TEST_CASE("sampling falsification of the IA and IB cones") {
  linalg::Rng rng(77);
  for (auto variant : {MatrixConeVariant::IA, MatrixConeVariant::IB}) {
    MatrixConeSpec soc_spec(4, 3, variant, UncertaintyCone::second_order(4));
    falsify(soc_spec, 60, 40, rng);
    MatrixConeSpec poly_spec(4, 3, variant, instances::temporal(3, 1).uncertainty);
    falsify(poly_spec, 60, 40, rng);
  }
}

TEST_CASE("certificate json dump") {
  linalg::Rng rng(5);
  MatrixConeSpec spec(3, 2, MatrixConeVariant::IB, UncertaintyCone::second_order(3));
  auto cert = cones::random_certificate(spec, rng);
  const std::string js = cert.to_json();
  CHECK(js.find("cone-certificate/1") != std::string::npos);
  CHECK(js.find("tau") != std::string::npos);
}

TEST_CASE("emit_membership_blocks group inventory") {
  MatrixConeSpec ia(3, 2, MatrixConeVariant::IA, UncertaintyCone::second_order(3));
  auto plan_ia = cones::emit_membership_blocks(ia);
  CHECK(plan_ia.group_index("alpha") >= 0);
  CHECK(plan_ia.group_index("S21") >= 0);
  CHECK(plan_ia.group_index("S22") >= 0);
  CHECK(plan_ia.group_index("M") < 0);

  // dimension mismatch must throw
  CHECK_THROWS(MatrixConeSpec(3, 2, MatrixConeVariant::IB, box_cone_2d()));
  MatrixConeSpec ib2(2, 2, MatrixConeVariant::IB, box_cone_2d());
  auto plan_ib = cones::emit_membership_blocks(ib2);
  CHECK(plan_ib.group_index("M") >= 0);
  CHECK(plan_ib.group_index("N") >= 0);
  CHECK(plan_ib.group_index("tau") < 0);

  // reconstruction map reproduces reconstruct() on a random certificate;
  // the IB plan stores only the strict lower triangle of S22 (its diagonal
  // is absorbed by M), so compare against a zero-diagonal witness
  linalg::Rng rng(3);
  auto cert = cones::random_certificate(ib2, rng);
  cert.S22.diagonal().setZero();
  VectorXd assembled = VectorXd::Zero(linalg::svec_dim(ib2.order()));
  auto value_of = [&](const cones::MembershipBlocks::Group& g, int local) {
    using GC = cones::MembershipBlocks::GroupCone;
    switch (g.cone) {
      case GC::DualUncertainty: return cert.alpha[local];
      case GC::DualUncertaintyRows: return cert.S21(local / ib2.k, local % ib2.k);
      case GC::NonnegSym: {
        const MatrixXd& M = g.name == "S22" ? cert.S22 : *cert.N;
        const bool strict = g.count == g.rows * (g.rows - 1) / 2;
        int t = 0;
        for (int j = 0; j < M.cols(); ++j)
          for (int i = strict ? j + 1 : j; i < M.rows(); ++i, ++t)
            if (t == local) return M(i, j);
        return 0.0;
      }
      case GC::Psd: return linalg::svec(cert.M)[local];
      case GC::NonnegScalar: return *cert.tau;
    }
    return 0.0;
  };
  for (const auto& e : plan_ib.recon)
    assembled[e.slot] += e.coef * value_of(plan_ib.groups[e.group], e.var);
  const VectorXd direct = linalg::svec(cert.reconstruct(ib2));
  CHECK((assembled - direct).cwiseAbs().maxCoeff() <= 1e-10);
}
