// Acceptance suite: one runnable check per numbered criterion, each printing
// a pass/fail line per clause. Exit code is the number of failed clauses.
//
// Clauses that encode rounded literature values are asserted exactly as
// pinned; where the precise computation lands outside such a band the clause
// reports FAIL together with the measured value and the analysis note, rather
// than silently loosening the threshold.
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fouport/experiments.hpp"
#include "fouport/merton_engine.hpp"

using namespace fouport;

namespace {

int g_failures = 0;

void clause(bool ok, const char* fmt, ...) {
  va_list args;
  va_start(args, fmt);
  char buf[512];
  std::vsnprintf(buf, sizeof buf, fmt, args);
  va_end(args);
  std::printf("[%s] %s\n", ok ? "PASS" : "FAIL", buf);
  if (!ok) ++g_failures;
}

void note(const char* fmt, ...) {
  va_list args;
  va_start(args, fmt);
  char buf[512];
  std::vsnprintf(buf, sizeof buf, fmt, args);
  va_end(args);
  std::printf("       %s\n", buf);
}

// ---- criterion 1: closed-form kernel fidelity -------------------------------
void criterion1() {
  const fou::FouParams p{1.0, 0.6, 1.0};
  const double quad = fou::kernel_sq_integral(1.0, 0.6);
  clause(std::abs(quad - p.sigma_ou_sq()) < 1e-6,
         "criterion 1a: |int K^2 - sigma_ou^2| = %.3e < 1e-6 (sigma_ou^2 = %.6f)",
         std::abs(quad - p.sigma_ou_sq()), p.sigma_ou_sq());
  double worst = 0.0;
  for (double t = 0.01; t <= 5.0; t += 0.01)
    worst = std::max(worst, std::abs(fou::kernel_K(t, 1.0, 0.5001) - std::exp(-t)));
  clause(worst < 1e-2, "criterion 1b: sup |K(t; H=0.5001) - e^-t| = %.2e < 1e-2 on [0,5]", worst);
}

// ---- criterion 2: invariant averages ----------------------------------------
void criterion2() {
  lab::ExperimentConfig cfg;
  const lab::Setup setup = lab::make_setup(cfg);
  const market::Averages& av = setup.averages;
  const bool a_ok = std::abs(av.lambda_bar_sq - 0.49) <= 1e-6;
  clause(a_ok, "criterion 2a: <lambda^2> = %.9f within 0.49 +- 1e-6", av.lambda_bar_sq);
  if (!a_ok) {
    note("the exact invariant average is 1/2: <Phi(Z/2)> = 1/2 by symmetry for any");
    note("centered Gaussian law, so lambda_bar = 0.7071; the quoted 0.7 is a one-decimal");
    note("rounding and no quadrature can hit 0.49 to 1e-6. See the ledger analysis.");
  }
  clause(std::abs(av.mu_bar - 0.087) <= 0.001, "criterion 2b: <mu> = %.6f within 0.087 +- 0.001",
         av.mu_bar);
  clause(std::abs(av.sigma_bar_sq - 0.0176) <= 0.0003,
         "criterion 2c: <sigma^2> = %.6f within 0.0176 +- 0.0003", av.sigma_bar_sq);
}

// ---- criterion 3: Merton solvers --------------------------------------------
void criterion3() {
  const double gamma = 0.4, lam = 0.7, T = 1.0;
  const auto exact = merton::MertonSolution::power(gamma, lam, T);
  const auto dual = merton::MertonSolution::general(merton::power_utility(gamma), lam, T);
  double worst_v = 0.0, worst_r = 0.0;
  for (int i = 0; i < 20; ++i) {
    for (int j = 0; j < 20; ++j) {
      const double t = 0.95 * T * i / 19.0;
      const double x = 0.3 + 2.7 * j / 19.0;
      worst_v = std::max(worst_v, std::abs(dual.value(t, x) / exact.value(t, x) - 1.0));
      worst_r = std::max(worst_r,
                         std::abs(dual.risk_tolerance(t, x) / exact.risk_tolerance(t, x) - 1.0));
    }
  }
  clause(worst_v < 1e-8 && worst_r < 1e-8,
         "criterion 3a: dual solver matches power closed form on 20x20 grid "
         "(value %.2e, R %.2e < 1e-8)",
         worst_v, worst_r);

  const auto mix = merton::MertonSolution::general(
      merton::make_utility(
          [](double x) { return std::sqrt(x) + std::pow(x, 0.6) / 1.2; },
          [](double x) { return 0.5 * std::pow(x, -0.5) + 0.5 * std::pow(x, -0.4); },
          [](double x) { return -0.25 * std::pow(x, -1.5) - 0.2 * std::pow(x, -1.4); }),
      lam, T);
  const std::vector<double> tg = {0.1, 0.3, 0.5, 0.7, 0.9};
  const std::vector<double> xg = {0.5, 1.0, 2.0};
  const double resid = merton::pde_residual(mix, tg, xg);
  clause(resid < 1e-5, "criterion 3b: mixture-utility PDE residual %.2e < 1e-5", resid);

  double worst_id = 0.0;
  for (double t : tg) {
    for (double x : xg) {
      for (const merton::MertonSolution* s : {&exact, &dual, &mix}) {
        const double R = s->risk_tolerance(t, x);
        const double d1 = R * s->value_x(t, x);
        const double d2 = R * R * s->value_xx(t, x);
        worst_id = std::max(worst_id, std::abs(d1 + d2) / std::abs(d1));
      }
    }
  }
  clause(worst_id < 1e-8, "criterion 3c: D1 v = -D2 v identity, worst %.2e < 1e-8", worst_id);
}

// ---- criterion 4: desk-scale value-table reproduction ------------------------
void criterion4() {
  lab::ExperimentConfig cfg;  // defaults are the pinned desk scale
  cfg.out_dir = "out_acceptance";
  const lab::Table1Result res = lab::run_table1(cfg);
  const double norm = res.norm;

  bool v_band = true, gap1_band = true, gap2_band = true, signs = true;
  for (const auto& row : res.rows) {
    const double v = row.triple.optimal.estimate * norm;
    const double rel1 = row.triple.gap_pi0 / row.triple.optimal.estimate;
    const double rel2 = row.triple.gap_practical / row.triple.optimal.estimate;
    std::printf("       eps=%-6g omega=%u V=%.4f rel_gap_pi0=%.4f%% rel_gap_practical=%.3f%%\n",
                row.eps, row.omega_id, v, 100.0 * rel1, 100.0 * rel2);
    if (row.eps == 0.01) {
      v_band = v_band && v >= 1.40 && v <= 1.47;
      gap1_band = gap1_band && rel1 >= 0.0003 && rel1 <= 0.005;
      gap2_band = gap2_band && rel2 >= 0.03 && rel2 <= 0.09;
    }
    signs = signs && row.triple.gap_pi0 > 2.0 * row.triple.gap_pi0_se &&
            row.triple.gap_practical > 2.0 * row.triple.gap_practical_se &&
            row.triple.gap_pi0_practical > 2.0 * row.triple.gap_pi0_practical_se;
  }
  clause(v_band, "criterion 4a: normalized V at eps=0.01 within [1.40, 1.47] for every omega");
  clause(gap1_band,
         "criterion 4b: relative gap to the leading strategy within [0.03%%, 0.5%%] at eps=0.01");
  if (!gap1_band) {
    note("the control-variate estimator resolves this gap to ~2e-6 SE: it is ~0.013-0.014%%,");
    note("stable under dt refinement 2e-3 -> 2.5e-4, i.e. genuinely below the band. The 0.1%%");
    note("reference value the band was built around is consistent with that table's own Monte");
    note("Carlo noise floor (~2e-3 SE at 500k sampled paths). Bands do hold at eps = 1 and 0.1.");
  }
  clause(gap2_band,
         "criterion 4c: relative gap to the practical strategy within [3%%, 9%%] at eps=0.01");
  clause(signs, "criterion 4d: every gap positive by > 2 paired SE (all omegas, all eps)");
}

// ---- criterion 5: scaling laws ------------------------------------------------
void criterion5() {
  lab::ExperimentConfig cfg;
  cfg.out_dir = "out_acceptance";
  const lab::ScalingResult res = lab::run_scaling_suite(cfg);
  const double target = 1.0 - cfg.H;
  clause(std::abs(res.eta_fit.slope - target) <= 0.15,
         "criterion 5a: ||eta||_2 slope %.3f within %.2f +- 0.15", res.eta_fit.slope, target);
  clause(std::abs(res.kappa_fit.slope - target) <= 0.15,
         "criterion 5b: ||kappa||_2 slope %.3f within %.2f +- 0.15", res.kappa_fit.slope, target);
  clause(std::abs(res.I_fit.slope - target) <= 0.15,
         "criterion 5c: ||I||_2 slope %.3f within %.2f +- 0.15", res.I_fit.slope, target);
  const bool phi_slope_ok = std::abs(res.phi_fit.slope - 2.0 * target) <= 0.15;
  clause(phi_slope_ok, "criterion 5d: Var(phi) slope %.3f within %.2f +- 0.15", res.phi_fit.slope,
         2.0 * target);
  const bool phi_level_ok = res.phi_level_ratio >= 0.75 && res.phi_level_ratio <= 1.25;
  clause(phi_level_ok,
         "criterion 5e: Var(phi)/(eps^{2-2H} sigma_phi^2 T^{2H}) = %.3f within [0.75, 1.25] "
         "at eps=%.3g",
         res.phi_level_ratio, cfg.scaling_eps.back());
  if (!phi_slope_ok || !phi_level_ok) {
    const double corrected = res.phi_level_ratio * 0.5257311121;
    note("Var(phi) is still preasymptotic on this ladder: the limit-law variance is");
    note("approached like eps^{2-2H} only below eps ~ 1e-3. Against the conditional-mean");
    note("variance constant bracket*<ll'>^2/a^2 (the value an independent quadrature");
    note("oracle of Var E[int G(Y)|G_0] converges to) the measured level ratio is %.3f;", corrected);
    note("the printed formula for sigma_phi^2 carries an extra sigma_ou^2 a^2 factor");
    note("relative to that oracle. Full derivation in the decisions ledger.");
  }
}

// ---- criterion 6: optimality probes -------------------------------------------
void criterion6() {
  lab::ExperimentConfig cfg;
  cfg.out_dir = "out_acceptance";
  const lab::OptimalityResult res = lab::run_optimality_suite(cfg);
  const lab::OptimalityCase* case_i = nullptr;
  const lab::OptimalityCase* case_iii = nullptr;
  const lab::OptimalityCase* case_iv = nullptr;
  const lab::OptimalityCase* control = nullptr;
  for (const auto& oc : res.cases) {
    if (oc.name == "case-i") case_i = &oc;
    if (oc.name == "case-iii") case_iii = &oc;
    if (oc.name == "case-iv") case_iv = &oc;
    if (oc.name == "control") control = &oc;
  }
  bool ctrl_ok = control != nullptr;
  if (control)
    for (const auto& pt : control->points) ctrl_ok = ctrl_ok && pt.gap == 0.0;
  clause(ctrl_ok, "criterion 6 control: zero perturbation gives exactly zero gaps");

  const auto& last_i = case_i->points.back();
  clause(std::abs(last_i.gap) <= 3.0 * last_i.gap_se,
         "criterion 6 case (i): |gap|/eps^{1-H} -> 0; at eps=%.3g gap=%.2e within 3 SE (%.2e)",
         last_i.eps, last_i.gap, 3.0 * last_i.gap_se);

  bool iii_neg = true;
  for (const auto& pt : case_iii->points) iii_neg = iii_neg && pt.gap < -2.0 * pt.gap_se;
  clause(iii_neg, "criterion 6 case (iii): gap negative by > 2 SE at every eps");
  clause(case_iii->has_fit && std::abs(case_iii->fit.slope - 0.2) <= 0.2,
         "criterion 6 case (iii): log-log slope %.3f within 2*alpha = 0.2 +- 0.2",
         case_iii->has_fit ? case_iii->fit.slope : std::nan(""));

  bool iv_neg = true;
  double iv_max = 0.0;
  for (const auto& pt : case_iv->points) {
    iv_neg = iv_neg && pt.gap < -2.0 * pt.gap_se;
    iv_max = std::max(iv_max, -pt.gap);
  }
  const double iv_last = -case_iv->points.back().gap;
  clause(iv_neg && iv_last >= 0.25 * iv_max,
         "criterion 6 case (iv): gap negative by > 2 SE everywhere and non-vanishing "
         "(|gap| at smallest eps = %.3f >= 0.25 * max %.3f)",
         iv_last, iv_max);
}

// ---- criterion 7: determinism across thread counts ----------------------------
void criterion7() {
  lab::ExperimentConfig cfg;
  cfg.eps_list = {0.1};
  cfg.n_paths = 4000;
  cfg.n_omegas = 1;
  const auto run = [&](int threads, const std::string& dir) {
    lab::ExperimentConfig c = cfg;
    c.threads = threads;
    c.out_dir = dir;
    const auto res = lab::run_table1(c);
    std::ifstream in(res.csv_path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    // drop the config header (it echoes the thread count by design)
    std::string s = ss.str();
    std::size_t p = s.find('\n');
    p = s.find('\n', p + 1);
    return s.substr(p + 1);
  };
  const std::string t1 = run(1, "out_acceptance/det1");
  const std::string t4 = run(4, "out_acceptance/det4");
  const std::string t8 = run(8, "out_acceptance/det8");
  clause(t1 == t4 && t4 == t8,
         "criterion 7: table CSV payload byte-identical at 1, 4 and 8 threads (%zu bytes)",
         t1.size());
}

}  // namespace

int main(int argc, char** argv) {
  int which = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) which = std::atoi(argv[i + 1]);
  }
  try {
    if (which == 0 || which == 1) criterion1();
    if (which == 0 || which == 2) criterion2();
    if (which == 0 || which == 3) criterion3();
    if (which == 0 || which == 4) criterion4();
    if (which == 0 || which == 5) criterion5();
    if (which == 0 || which == 6) criterion6();
    if (which == 0 || which == 7) criterion7();
  } catch (const std::exception& e) {
    std::printf("[FAIL] unhandled error: %s\n", e.what());
    ++g_failures;
  }
  std::printf("%s: %d clause(s) failed\n", which == 0 ? "acceptance" : "criterion", g_failures);
  return g_failures;
}
