#include "arlp/report.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "arlp/linalg.hpp"
#include "arlp/oracles.hpp"
#include "arlp/solver.hpp"

namespace arlp::report {

namespace {

SolveDiag diag_of(const builders::BuildResult& built, const solver::Solution& sol) {
  SolveDiag d;
  d.program = built.program.label;
  d.status = solver::to_string(sol.status);
  d.value = builders::objective_value(built, sol);
  d.pres = sol.primal_residual;
  d.dres = sol.dual_residual;
  d.relgap = sol.relative_gap;
  d.iterations = sol.iterations;
  d.seconds = sol.wall_time_s;
  const auto st = built.program.stats();
  d.scalars = st.scalars;
  d.rows = st.rows;
  d.soc_blocks = st.soc_blocks;
  d.psd_orders = st.psd_orders;
  return d;
}

// optimal, or a truncated run whose best iterate still has small residuals
bool usable(const solver::Solution& sol, double cap = 1e-4) {
  if (sol.status == solver::SolveStatus::Optimal) return true;
  return sol.status == solver::SolveStatus::IterLimit &&
         std::max({sol.primal_residual, sol.dual_residual, sol.relative_gap}) <= cap;
}

solver::Solution run(const builders::BuildResult& built, const BoundOptions& opt,
                     std::vector<SolveDiag>& diags) {
  solver::SolverSettings st;
  st.eps = opt.eps;
  st.max_iter = opt.max_iter;
  st.verbosity = opt.verbosity;
  auto sol = solver::solve(built.program, st);
  diags.push_back(diag_of(built, sol));
  if (!usable(sol))
    throw SolverFailure(built.program.label + ": " + solver::to_string(sol.status) +
                        " (pres=" + std::to_string(sol.primal_residual) +
                        ", dres=" + std::to_string(sol.dual_residual) +
                        ", gap=" + std::to_string(sol.relative_gap) + ")");
  return sol;
}

}  // namespace

bool BoundReport::ordering_ok(double tol) const {
  auto le = [&](double a, double b) { return a <= b + tol * (1.0 + std::abs(b)); };
  const double lb = v_lb.value_or(-1e300);
  const double ar = v_ar.value_or(lb);
  const double ib = v_ib.value_or(ar);
  const double top = v_aff ? *v_aff : (v_ia ? *v_ia : 1e300);
  if (v_lb && v_ar && !le(*v_lb, *v_ar)) return false;
  if (v_ar && v_ib && !le(*v_ar, *v_ib)) return false;
  if (v_lb && v_ib && !le(*v_lb, *v_ib)) return false;
  if (v_ib && (v_aff || v_ia) && !le(*v_ib, top)) return false;
  if (v_lb && (v_aff || v_ia) && !le(*v_lb, top)) return false;
  (void)ib;
  (void)ar;
  return true;
}

BoundReport compute_bounds(const model::AroInstance& inst, const BoundOptions& opt) {
  BoundReport rep;
  rep.label = inst.label;
  rep.sense_flipped = inst.sense_flipped;
  const auto t0 = std::chrono::steady_clock::now();

  if (opt.want_aff) {
    auto built = builders::build_affine(inst);
    auto sol = run(built, opt, rep.solves);
    auto ext = builders::extract_affine(built, sol, inst);
    rep.v_aff = ext.value;
    rep.x_aff = ext.x;
  }
  if (opt.want_ia) {
    auto built = builders::build_ia(inst);
    auto sol = run(built, opt, rep.solves);
    rep.v_ia = builders::objective_value(built, sol);
  }
  if (opt.want_ib) {
    if (opt.ib_via_dual) {
      if (inst.n1() == 0) {
        auto radius = model::compute_radius(inst);
        rep.radius = radius.r;
        auto built = builders::build_dual_relaxation(inst, VectorXd(0), radius);
        auto sol = run(built, opt, rep.solves);
        rep.v_ib = builders::objective_value(built, sol);
        rep.ib_form = "dual-relaxation";
        rep.ib_regularized = true;
      } else if (inst.first_stage.is_free()) {
        auto built = builders::build_ib_dual(inst);
        auto sol = run(built, opt, rep.solves);
        rep.v_ib = builders::objective_value(built, sol);
        if (sol.status == solver::SolveStatus::Optimal)
          rep.x_ib = builders::extract_ib_dual_x(built, sol);
        rep.ib_form = "ib-dual";
        rep.ib_regularized = false;
      } else {
        throw std::invalid_argument(
            "compute_bounds: ib_via_dual needs an empty or free first stage");
      }
    } else {
      builders::IbOptions ibo;
      ibo.form = opt.ib_form;
      ibo.regularize = opt.regularize;
      if (opt.regularize) {
        ibo.radius = model::compute_radius(inst);
        rep.radius = ibo.radius->r;
      }
      auto built = builders::build_ib(inst, ibo);
      auto sol = run(built, opt, rep.solves);
      auto ext = builders::extract_ib(built, sol, inst);
      rep.v_ib = ext.value;
      rep.x_ib = ext.x;
      rep.certificate_json = ext.certificate.to_json();
      rep.ib_form = opt.ib_form == builders::IbOptions::Form::LambdaGeneral ? "lambda" : "vdiag";
      rep.ib_regularized = opt.regularize;
    }
    // the rho-path curve: fixed-rho solves bracketing the adjustable value
    if (!opt.rho_path.empty()) {
      auto radius = model::compute_radius(inst);
      rep.radius = radius.r;
      for (double rho : opt.rho_path) {
        builders::IbOptions ibo;
        ibo.form = opt.ib_form;
        ibo.regularize = true;
        ibo.radius = radius;
        ibo.fixed_rho = rho;
        auto built = builders::build_ib(inst, ibo);
        auto sol = run(built, opt, rep.solves);
        rep.rho_curve.emplace_back(rho, builders::objective_value(built, sol));
      }
    }
  }
  if (opt.want_ar) {
    auto res = oracles::exact_aro_polyhedral(inst);
    rep.v_ar = res.value;
  }
  if (opt.want_lb) {
    linalg::Rng rng(opt.seed);
    auto mc = oracles::monte_carlo_lb(inst, opt.samples, rng);
    rep.v_lb = mc.value;
    rep.mc_samples = mc.samples;
    rep.mc_seed = opt.seed;
  }
  if (rep.v_aff) {
    const double low = rep.v_ar ? *rep.v_ar : rep.v_lb.value_or(0);
    if ((rep.v_ar || rep.v_lb) && rep.v_ib)
      if (auto g = oracles::gap_closed(*rep.v_aff, *rep.v_ib, low)) rep.gap_closed_pct = *g;
  }
  rep.total_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

namespace {
std::string fmt(std::optional<double> v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", *v);
  return buf;
}
std::string fmt_vec(const VectorXd& v) {
  std::ostringstream os;
  for (int i = 0; i < v.size(); ++i) {
    if (i) os << ";";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v[i]);
    os << buf;
  }
  return os.str();
}
}  // namespace

std::string csv_header() {
  return "label,sense,v_lb,v_ar,v_ib,v_ia,v_aff,gap_closed_pct,ib_form,ib_regularized,"
         "radius,mc_samples,mc_seed,x_aff,x_ib,ordering_ok,total_seconds";
}

std::string csv_row(const BoundReport& r) {
  std::ostringstream os;
  os << r.label << ',' << (r.sense_flipped ? "min-of-flipped-max" : "min") << ',' << fmt(r.v_lb)
     << ',' << fmt(r.v_ar) << ',' << fmt(r.v_ib) << ',' << fmt(r.v_ia) << ',' << fmt(r.v_aff)
     << ',' << fmt(r.gap_closed_pct) << ',' << r.ib_form << ',' << (r.ib_regularized ? 1 : 0)
     << ',' << fmt(r.radius ? std::optional<double>(r.radius) : std::nullopt) << ','
     << r.mc_samples << ',' << r.mc_seed << ',' << fmt_vec(r.x_aff) << ',' << fmt_vec(r.x_ib)
     << ',' << (r.ordering_ok() ? 1 : 0) << ',';
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", r.total_seconds);
  os << buf;
  return os.str();
}

std::string markdown(const BoundReport& r) {
  std::ostringstream os;
  os << "## " << r.label << "\n\n";
  if (r.sense_flipped)
    os << "(source problem is a maximization; values are quoted in the minimization "
          "convention of its reformulation)\n\n";
  os << "| bound | value |\n|---|---|\n";
  auto row = [&](const char* name, const std::optional<double>& v, const std::string& note) {
    if (!v) return;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", *v);
    os << "| " << name << " | " << buf << (note.empty() ? "" : " (" + note + ")") << " |\n";
  };
  row("v_LB (Monte Carlo)", r.v_lb,
      r.mc_samples ? std::to_string(r.mc_samples) + " samples, seed " + std::to_string(r.mc_seed)
                   : "");
  row("v_AR (exact)", r.v_ar, "");
  row("v_AR (analytic)", r.v_ar_analytic, "");
  row("v_IB", r.v_ib, r.ib_form + (r.ib_regularized ? ", regularized" : ""));
  row("v_IA", r.v_ia, "");
  row("v_Aff", r.v_aff, "");
  row("v_Aff (analytic)", r.v_aff_analytic, "");
  row("gap closed %", r.gap_closed_pct, "");
  if (!r.rho_curve.empty()) {
    os << "\nrho-path (rho, value):";
    for (auto& [rho, val] : r.rho_curve) {
      char buf[48];
      std::snprintf(buf, sizeof buf, " (%.1e, %.6f)", rho, val);
      os << buf;
    }
    os << "\n";
  }
  if (r.x_aff.size()) os << "\nx_Aff = [" << fmt_vec(r.x_aff) << "]\n";
  if (r.x_ib.size()) os << "x_IB = [" << fmt_vec(r.x_ib) << "]\n";
  os << "\n| solve | status | value | pres | dres | relgap | iters | scalars | rows | soc | psd "
        "| seconds |\n|---|---|---|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& d : r.solves) {
    std::string psd;
    for (int o : d.psd_orders) psd += (psd.empty() ? "" : "+") + std::to_string(o);
    char buf[160];
    std::snprintf(buf, sizeof buf, "| %s | %s | %.6f | %.1e | %.1e | %.1e | %d | %d | %d | %d | %s | %.2f |",
                  d.program.c_str(), d.status.c_str(), d.value, d.pres, d.dres, d.relgap,
                  d.iterations, d.scalars, d.rows, d.soc_blocks, psd.empty() ? "-" : psd.c_str(),
                  d.seconds);
    os << buf << "\n";
  }
  return os.str();
}

}  // namespace arlp::report
