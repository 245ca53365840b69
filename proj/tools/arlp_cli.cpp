// Command-line front end: generate benchmark instances, compute the bound
// chain v_LB <= v_AR <= v_IB <= v_IA = v_Aff, verify the analytic
// certificates and cone properties, and emit report tables.
//
// Exit codes: 0 success, 2 instance validation failure, 3 solver failure,
// 4 bound-ordering violation, 1 verification failure / usage error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "arlp/builders.hpp"
#include "arlp/cones.hpp"
#include "arlp/instances.hpp"
#include "arlp/model.hpp"
#include "arlp/oracles.hpp"
#include "arlp/report.hpp"
#include "arlp/solver.hpp"

using namespace arlp;

namespace {

struct RunArgs {
  std::string instance = "temporal";
  std::string path;
  int s = 4;
  int j = 2;
  std::string uncertainty = "ball";
  std::uint64_t seed = 0;
  std::string bounds = "aff,ib";
  std::string form = "lambda";
  bool regularize = false;
  std::string rho_path;
  bool ib_via_dual = false;
  int samples = 10000;
  double eps = 1e-8;
  int max_iter = 200;
  std::string out_dir;
  bool dump_json = false;
  int verbosity = 0;
};

model::AroInstance make_instance(const RunArgs& a) {
  if (a.instance == "temporal") return instances::temporal(a.s, a.j);
  if (a.instance == "newsvendor") return instances::newsvendor();
  if (a.instance == "lotsizing")
    return instances::lotsizing(a.uncertainty == "budget"
                                    ? instances::LotSizingUncertainty::Budget
                                    : instances::LotSizingUncertainty::Ball);
  if (a.instance == "random") return instances::random_instance(a.seed);
  if (a.instance == "json") {
    std::ifstream in(a.path);
    if (!in) throw std::runtime_error("cannot open instance file: " + a.path);
    std::stringstream ss;
    ss << in.rdbuf();
    return model::from_json(ss.str());
  }
  throw std::runtime_error("unknown instance family: " + a.instance);
}

bool contains_token(const std::string& csv, const std::string& tok) {
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ','))
    if (item == tok) return true;
  return false;
}

std::vector<double> parse_doubles(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

std::pair<int, int> parse_range(const std::string& text) {
  const auto pos = text.find("..");
  if (pos == std::string::npos) {
    const int v = std::stoi(text);
    return {v, v};
  }
  return {std::stoi(text.substr(0, pos)), std::stoi(text.substr(pos + 2))};
}

int cmd_run(const RunArgs& a) {
  auto inst = make_instance(a);
  auto vrep = model::validate(inst);
  if (!vrep.all_passed()) {
    std::fprintf(stderr, "validation failed for %s:\n", inst.label.c_str());
    for (const auto& f : vrep.failures) std::fprintf(stderr, "  - %s\n", f.c_str());
    return 2;
  }
  for (const auto& w : vrep.warnings) std::fprintf(stderr, "note: %s\n", w.c_str());

  report::BoundOptions opt;
  opt.want_aff = contains_token(a.bounds, "aff");
  opt.want_ia = contains_token(a.bounds, "ia");
  opt.want_ib = contains_token(a.bounds, "ib");
  opt.want_ar = contains_token(a.bounds, "exact");
  opt.want_lb = contains_token(a.bounds, "mc");
  opt.samples = a.samples;
  opt.seed = a.seed;
  opt.ib_form = a.form == "vdiag" ? builders::IbOptions::Form::VDiagonal
                                  : builders::IbOptions::Form::LambdaGeneral;
  opt.regularize = a.regularize;
  if (!a.rho_path.empty()) opt.rho_path = parse_doubles(a.rho_path);
  opt.ib_via_dual = a.ib_via_dual;
  opt.eps = a.eps;
  opt.max_iter = a.max_iter;
  opt.verbosity = a.verbosity;

  report::BoundReport rep;
  try {
    rep = report::compute_bounds(inst, opt);
  } catch (const report::SolverFailure& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
    return 3;
  }
  if (contains_token(a.bounds, "analytic") && a.instance == "temporal") {
    auto tv = oracles::temporal_analytic(a.s, a.j);
    rep.v_ar_analytic = tv.v_ar;
    rep.v_aff_analytic = tv.v_aff;
  }

  std::cout << report::markdown(rep) << "\n";

  if (!a.out_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(a.out_dir);
    const fs::path dir(a.out_dir);
    const fs::path csv = dir / "report.csv";
    const bool fresh = !fs::exists(csv);
    std::ofstream c(csv, std::ios::app);
    if (fresh) c << report::csv_header() << "\n";
    c << report::csv_row(rep) << "\n";
    std::ofstream md(dir / "report.md", std::ios::app);
    md << report::markdown(rep) << "\n";
    for (const auto& d : rep.solves) {
      std::string name = d.program;
      for (auto& ch : name)
        if (ch == '/' || ch == ' ') ch = '_';
      std::ofstream log(dir / (name + ".log"));
      log << "program: " << d.program << "\nstatus: " << d.status << "\nvalue: " << d.value
          << "\npres: " << d.pres << "\ndres: " << d.dres << "\nrelgap: " << d.relgap
          << "\niterations: " << d.iterations << "\nseconds: " << d.seconds
          << "\nscalars: " << d.scalars << "\nrows: " << d.rows << "\nsoc: " << d.soc_blocks
          << "\n";
    }
    if (a.dump_json) {
      std::ofstream js(dir / (inst.label + ".instance.json"));
      js << model::to_json(inst);
      if (!rep.certificate_json.empty()) {
        std::ofstream cj(dir / (inst.label + ".certificate.json"));
        cj << rep.certificate_json;
      }
    }
  }
  if (!rep.ordering_ok()) {
    std::fprintf(stderr, "bound ordering violated\n");
    return 4;
  }
  return 0;
}

int verify_temporal(int s_lo, int s_hi) {
  bool all = true;
  for (int s = s_lo; s <= s_hi; ++s) {
    try {
      auto certs = oracles::temporal_certificates(s);
      std::printf("temporal s=%d: PASS (dual obj %.12f, EZ %.1e, null min-eig %.1e, sos %.1e, "
                  "mu %.3g%s)\n",
                  s, certs.dual_objective, certs.ez_max_abs, certs.null_min_eig,
                  certs.sos_max_err, certs.mu,
                  certs.polyhedral_feasible ? ", 1-norm side ok" : "");
    } catch (const std::exception& e) {
      std::printf("temporal s=%d: FAIL (%s)\n", s, e.what());
      all = false;
    }
  }
  return all ? 0 : 1;
}

int verify_cones(int n_certs, int n_points, std::uint64_t seed) {
  linalg::Rng rng(seed);
  bool all = true;
  auto falsify = [&](const cones::MatrixConeSpec& spec, const char* name) {
    int bad = 0;
    double worst = 0;
    for (int cidx = 0; cidx < n_certs; ++cidx) {
      auto cert = cones::random_certificate(spec, rng);
      const Eigen::MatrixXd S = cert.reconstruct(spec);
      const double bound = 1e-9 * (1.0 + S.norm());
      for (int t = 0; t < n_points; ++t) {
        Eigen::VectorXd z(spec.order());
        z.head(spec.k) = cones::sample_cone_point(spec.uncertainty, rng);
        for (int i = 0; i < spec.m; ++i) z[spec.k + i] = rng.uniform(0.0, 1.5);
        const double q = z.dot(S * z);
        worst = std::min(worst, q / z.squaredNorm());
        if (q < -bound * z.squaredNorm()) ++bad;
      }
    }
    std::printf("%s: %s (%d certificates x %d points, worst normalized form %.2e)\n", name,
                bad == 0 ? "PASS" : "FAIL", n_certs, n_points, worst);
    if (bad) all = false;
  };
  using cones::MatrixConeVariant;
  auto soc = cones::UncertaintyCone::second_order(4);
  auto poly = instances::temporal(3, 1).uncertainty;
  falsify(cones::MatrixConeSpec(4, 3, MatrixConeVariant::IA, soc), "IA / second-order");
  falsify(cones::MatrixConeSpec(4, 3, MatrixConeVariant::IB, soc), "IB / second-order");
  falsify(cones::MatrixConeSpec(4, 3, MatrixConeVariant::IA, poly), "IA / polyhedral");
  falsify(cones::MatrixConeSpec(4, 3, MatrixConeVariant::IB, poly), "IB / polyhedral");
  return all ? 0 : 1;
}

int verify_random(int count, std::uint64_t seed, double eps) {
  bool all = true;
  for (int i = 0; i < count; ++i) {
    const std::uint64_t s = seed + i;
    try {
      auto inst = instances::random_instance(s);
      report::BoundOptions opt;
      opt.want_aff = true;
      opt.want_ib = true;
      opt.ib_via_dual = true;
      opt.want_lb = true;
      opt.samples = 500;
      opt.seed = s;
      opt.eps = eps;
      auto rep = report::compute_bounds(inst, opt);
      const bool ok = rep.ordering_ok();
      std::printf("random seed=%llu: %s (lb %.6f <= ib %.6f <= aff %.6f)\n",
                  static_cast<unsigned long long>(s), ok ? "PASS" : "FAIL", *rep.v_lb, *rep.v_ib,
                  *rep.v_aff);
      if (!ok) all = false;
    } catch (const std::exception& e) {
      std::printf("random seed=%llu: FAIL (%s)\n", static_cast<unsigned long long>(s), e.what());
      all = false;
    }
  }
  return all ? 0 : 1;
}

int cmd_bench(const std::string& family, int count, std::uint64_t seed) {
  if (family == "newsvendor" || family == "lotsizing") {
    auto inst = family == "newsvendor"
                    ? instances::newsvendor()
                    : instances::lotsizing(instances::LotSizingUncertainty::Ball);
    auto built = builders::build_ib(inst);
    const auto st = built.program.stats();
    std::string psd;
    for (int o : st.psd_orders) psd += (psd.empty() ? "" : "+") + std::to_string(o);
    std::printf("%s IB program: scalars=%d soc_cones=%d psd=(%s) rows=%d\n", inst.label.c_str(),
                st.scalars, st.soc_blocks, psd.c_str(), st.rows);
    return 0;
  }
  if (family != "random") {
    std::fprintf(stderr, "unknown bench family: %s\n", family.c_str());
    return 1;
  }
  int improvers = 0, failures = 0;
  double gap_sum = 0;
  double time_sum = 0;
  report::SolveDiag size_probe;
  for (int i = 0; i < count; ++i) {
    const std::uint64_t s = seed + i;
    try {
      auto inst = instances::random_instance(s);
      report::BoundOptions opt;
      opt.want_aff = true;
      opt.want_ib = true;
      opt.ib_via_dual = true;
      opt.want_lb = true;
      opt.samples = 500;
      opt.seed = s;
      auto rep = report::compute_bounds(inst, opt);
      time_sum += rep.total_seconds;
      if (i == 0)
        for (const auto& d : rep.solves)
          if (d.program.find("ib") != std::string::npos) size_probe = d;
      const bool improved = *rep.v_ib < *rep.v_aff - 1e-4 * (1.0 + std::abs(*rep.v_aff));
      if (improved) {
        ++improvers;
        if (rep.gap_closed_pct) gap_sum += *rep.gap_closed_pct;
      }
    } catch (const std::exception& e) {
      std::fprintf(stderr, "seed %llu failed: %s\n", static_cast<unsigned long long>(s),
                   e.what());
      ++failures;
    }
  }
  std::string psd;
  for (int o : size_probe.psd_orders) psd += (psd.empty() ? "" : "+") + std::to_string(o);
  std::printf("random family (%d instances, seeds %llu..%llu):\n", count,
              static_cast<unsigned long long>(seed),
              static_cast<unsigned long long>(seed + count - 1));
  std::printf("  ib program size: scalars=%d soc_cones=%d psd=(%s) rows=%d\n", size_probe.scalars,
              size_probe.soc_blocks, psd.c_str(), size_probe.rows);
  std::printf("  strict improvers (v_IB < v_Aff): %d / %d\n", improvers, count - failures);
  if (improvers)
    std::printf("  mean gap closed over improvers: %.1f%%\n", gap_sum / improvers);
  std::printf("  mean wall time per instance: %.2fs\n", time_sum / std::max(1, count - failures));
  if (failures) std::printf("  failures: %d\n", failures);
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bound chain for two-stage adjustable robust LPs with rhs uncertainty"};
  app.require_subcommand(1);

  RunArgs ra;
  if (const char* e = std::getenv("ARLP_EPS")) ra.eps = std::atof(e);
  if (const char* e = std::getenv("ARLP_MAX_ITER")) ra.max_iter = std::atoi(e);
  if (const char* e = std::getenv("ARLP_VERBOSITY")) ra.verbosity = std::atoi(e);
  auto* run = app.add_subcommand("run", "compute bounds for one instance");
  run->add_option("--instance", ra.instance, "temporal|newsvendor|lotsizing|random|json");
  run->add_option("--path", ra.path, "instance json path (with --instance json)");
  run->add_option("--s", ra.s, "temporal stages");
  run->add_option("--j", ra.j, "temporal uncertainty norm (1 or 2)");
  run->add_option("--uncertainty", ra.uncertainty, "lotsizing: ball|budget");
  run->add_option("--seed", ra.seed, "random instance / Monte Carlo seed");
  run->add_option("--bounds", ra.bounds, "csv of aff,ia,ib,mc,exact,analytic");
  run->add_option("--form", ra.form, "ib multiplier form: lambda|vdiag");
  run->add_flag("--regularize", ra.regularize, "add the rho I term with weight r");
  run->add_option("--rho-path", ra.rho_path, "csv of fixed rho values to trace");
  run->add_flag("--ib-via-dual", ra.ib_via_dual,
                "compute the IB value from the dual relaxation (empty first stage)");
  run->add_option("--samples", ra.samples, "Monte Carlo samples");
  run->add_option("--eps", ra.eps, "solver tolerance");
  run->add_option("--max-iter", ra.max_iter, "solver iteration cap");
  run->add_option("--out", ra.out_dir, "output directory (report.csv, report.md, *.log)");
  run->add_flag("--json", ra.dump_json, "dump the instance json into --out");
  run->add_option("--verbosity", ra.verbosity, "solver verbosity");

  auto* verify = app.add_subcommand("verify", "certificate and invariant suites");
  std::string vt_range = "2..9";
  auto* vt = verify->add_subcommand("temporal", "analytic certificates");
  vt->add_option("--s", vt_range, "stage range, e.g. 2..9");
  int vc_samples = 1000;
  std::uint64_t vc_seed = 0;
  auto* vc = verify->add_subcommand("cones", "IA/IB sampling falsification");
  vc->add_option("--samples", vc_samples, "points per certificate");
  vc->add_option("--seed", vc_seed, "rng seed");
  int vr_count = 50;
  std::uint64_t vr_seed = 7;
  double vr_eps = 1e-8;
  auto* vr = verify->add_subcommand("random", "ordering chain on random instances");
  vr->add_option("--count", vr_count, "instances");
  vr->add_option("--seed", vr_seed, "first seed");
  vr->add_option("--eps", vr_eps, "solver tolerance");
  verify->require_subcommand(1);

  auto* bench = app.add_subcommand("bench", "size and improvement statistics");
  std::string bench_family = "random";
  int bench_count = 50;
  std::uint64_t bench_seed = 7;
  bench->add_option("family", bench_family, "random|newsvendor|lotsizing");
  bench->add_option("--count", bench_count, "instances (random family)");
  bench->add_option("--seed", bench_seed, "first seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(ra);
    if (verify->parsed()) {
      if (vt->parsed()) {
        auto [lo, hi] = parse_range(vt_range);
        return verify_temporal(lo, hi);
      }
      if (vc->parsed()) return verify_cones(std::max(1, vc_samples / 10), 10, vc_seed);
      if (vr->parsed()) return verify_random(vr_count, vr_seed, vr_eps);
    }
    if (bench->parsed()) return cmd_bench(bench_family, bench_count, bench_seed);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
