#include "fouport/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "fouport/parallel.hpp"

namespace fouport::lab {

using nlohmann::json;
using num::numeric_error;

void ExperimentConfig::validate() const {
  if (model_id != "paper-3.6" && model_id != "constant-lambda")
    throw std::invalid_argument("config: unknown model_id '" + model_id + "'");
  fou::FouParams probe{a, H, 1.0};
  probe.validate();
  for (double e : eps_list) fou::FouParams{a, H, e}.validate();
  for (double e : scaling_eps) fou::FouParams{a, H, e}.validate();
  for (double e : opt_eps) fou::FouParams{a, H, e}.validate();
  if (!(gamma > 0.0) || gamma == 1.0)
    throw std::invalid_argument("config: gamma must be positive and != 1");
  if (!(std::abs(rho) < 1.0)) throw std::invalid_argument("config: |rho| must be < 1");
  if (!(T > 0.0)) throw std::invalid_argument("config: T must be positive");
  if (!(x0 > 0.0)) throw std::invalid_argument("config: x0 must be positive");
  if (!(dt > 0.0 && dt <= T)) throw std::invalid_argument("config: dt must lie in (0, T]");
  if (history_policy != "tail" && history_policy != "paper")
    throw std::invalid_argument("config: history_policy must be 'tail' or 'paper'");
  if (!(history_tail_fraction > 0.0 && history_tail_fraction < 1.0))
    throw std::invalid_argument("config: history_tail_fraction must be in (0,1)");
  if (n_paths < 4) throw std::invalid_argument("config: n_paths must be >= 4");
  if (n_omegas < 1) throw std::invalid_argument("config: n_omegas must be >= 1");
  if (scaling_paths < 4 || phi_outer < 4 || phi_inner < 4)
    throw std::invalid_argument("config: scaling sample sizes must be >= 4");
  if (opt_paths < 4) throw std::invalid_argument("config: opt_paths must be >= 4");
  if (opt_omegas < 1) throw std::invalid_argument("config: opt_omegas must be >= 1");
  if (!(opt_alpha_small > 0.0 && opt_alpha_large > 0.0))
    throw std::invalid_argument("config: perturbation exponents must be positive");
}

ExperimentConfig ExperimentConfig::effective() const {
  ExperimentConfig out = *this;
  if (paper_scale) {
    out.dt = 1e-3;
    out.n_paths = 500000;
    out.history_policy = "paper";
  }
  return out;
}

namespace {

const std::set<std::string> kKnownKeys = {
    "model_id", "a", "H", "eps_list", "gamma", "rho", "T", "x0", "dt", "history_policy",
    "history_tail_fraction", "n_paths", "n_omegas", "seed", "threads", "rao_blackwell", "crn",
    "paper_scale", "const_lambda", "const_sigma", "scaling_eps", "scaling_paths", "phi_outer",
    "phi_inner", "eps_per_dt", "opt_eps", "opt_paths", "opt_omegas", "opt_alpha_small", "opt_alpha_large",
    "opt_fraction", "opt_base_scale", "out_dir"};

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
  for (const auto& [key, _] : j.items())
    if (!kKnownKeys.count(key)) throw std::invalid_argument("config: unknown key '" + key + "'");
  ExperimentConfig c;
  c.model_id = j.value("model_id", c.model_id);
  c.a = j.value("a", c.a);
  c.H = j.value("H", c.H);
  c.eps_list = j.value("eps_list", c.eps_list);
  c.gamma = j.value("gamma", c.gamma);
  c.rho = j.value("rho", c.rho);
  c.T = j.value("T", c.T);
  c.x0 = j.value("x0", c.x0);
  c.dt = j.value("dt", c.dt);
  c.history_policy = j.value("history_policy", c.history_policy);
  c.history_tail_fraction = j.value("history_tail_fraction", c.history_tail_fraction);
  c.n_paths = j.value("n_paths", c.n_paths);
  c.n_omegas = j.value("n_omegas", c.n_omegas);
  c.seed = j.value("seed", c.seed);
  c.threads = j.value("threads", c.threads);
  c.rao_blackwell = j.value("rao_blackwell", c.rao_blackwell);
  c.crn = j.value("crn", c.crn);
  c.paper_scale = j.value("paper_scale", c.paper_scale);
  c.const_lambda = j.value("const_lambda", c.const_lambda);
  c.const_sigma = j.value("const_sigma", c.const_sigma);
  c.scaling_eps = j.value("scaling_eps", c.scaling_eps);
  c.scaling_paths = j.value("scaling_paths", c.scaling_paths);
  c.phi_outer = j.value("phi_outer", c.phi_outer);
  c.phi_inner = j.value("phi_inner", c.phi_inner);
  c.eps_per_dt = j.value("eps_per_dt", c.eps_per_dt);
  c.opt_eps = j.value("opt_eps", c.opt_eps);
  c.opt_paths = j.value("opt_paths", c.opt_paths);
  c.opt_omegas = j.value("opt_omegas", c.opt_omegas);
  c.opt_alpha_small = j.value("opt_alpha_small", c.opt_alpha_small);
  c.opt_alpha_large = j.value("opt_alpha_large", c.opt_alpha_large);
  c.opt_fraction = j.value("opt_fraction", c.opt_fraction);
  c.opt_base_scale = j.value("opt_base_scale", c.opt_base_scale);
  c.out_dir = j.value("out_dir", c.out_dir);
  c.validate();
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["model_id"] = c.model_id;
  j["a"] = c.a;
  j["H"] = c.H;
  j["eps_list"] = c.eps_list;
  j["gamma"] = c.gamma;
  j["rho"] = c.rho;
  j["T"] = c.T;
  j["x0"] = c.x0;
  j["dt"] = c.dt;
  j["history_policy"] = c.history_policy;
  j["history_tail_fraction"] = c.history_tail_fraction;
  j["n_paths"] = c.n_paths;
  j["n_omegas"] = c.n_omegas;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["rao_blackwell"] = c.rao_blackwell;
  j["crn"] = c.crn;
  j["paper_scale"] = c.paper_scale;
  j["const_lambda"] = c.const_lambda;
  j["const_sigma"] = c.const_sigma;
  j["scaling_eps"] = c.scaling_eps;
  j["scaling_paths"] = c.scaling_paths;
  j["phi_outer"] = c.phi_outer;
  j["phi_inner"] = c.phi_inner;
  j["eps_per_dt"] = c.eps_per_dt;
  j["opt_eps"] = c.opt_eps;
  j["opt_paths"] = c.opt_paths;
  j["opt_omegas"] = c.opt_omegas;
  j["opt_alpha_small"] = c.opt_alpha_small;
  j["opt_alpha_large"] = c.opt_alpha_large;
  j["opt_fraction"] = c.opt_fraction;
  j["opt_base_scale"] = c.opt_base_scale;
  j["out_dir"] = c.out_dir;
  return j;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("load_config: cannot open '" + path + "'");
  json j;
  in >> j;
  return config_from_json(j);
}

uint64_t config_hash(const ExperimentConfig& cfg) {
  const std::string dump = config_to_json(cfg).dump();
  uint64_t h = 0xCBF29CE484222325ull;  // FNV-1a
  for (unsigned char ch : dump) {
    h ^= ch;
    h *= 0x100000001B3ull;
  }
  return h;
}

Setup make_setup(const ExperimentConfig& cfg) {
  cfg.validate();
  Setup s;
  s.base_params = fou::FouParams{cfg.a, cfg.H, 1.0};
  s.T = cfg.T;
  s.gamma = cfg.gamma;
  const double sigma_ou = s.base_params.sigma_ou();
  if (cfg.model_id == "paper-3.6") {
    s.model = std::make_unique<market::PaperModel>(sigma_ou, cfg.rho, cfg.gamma);
  } else {
    s.model =
        std::make_unique<market::ConstantLambdaModel>(cfg.const_lambda, cfg.const_sigma, cfg.rho,
                                                      cfg.gamma);
  }
  market::validate_model(*s.model, sigma_ou);
  s.averages = market::compute_averages(*s.model, sigma_ou);
  return s;
}

asym::ExpansionInputs Setup::inputs(double eps) const {
  asym::ExpansionInputs in;
  in.params = base_params;
  in.params.eps = eps;
  in.model = model.get();
  in.averages = averages;
  in.T = T;
  in.gamma = gamma;
  return in;
}

fou::SimGrid table_grid(const ExperimentConfig& cfg, double eps) {
  fou::SimGrid grid;
  grid.n_steps = std::max(1, int(std::llround(cfg.T / cfg.dt)));
  grid.dt = cfg.T / double(grid.n_steps);
  const fou::FouParams params{cfg.a, cfg.H, eps};
  if (cfg.history_policy == "paper") {
    const double span = std::pow(cfg.T / grid.dt, 1.5);  // history span in time units
    grid.history_len = int(std::llround(span / grid.dt));
  } else {
    grid.history_len = fou::history_steps_for_tail(params, grid.dt, cfg.history_tail_fraction);
  }
  return grid;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_report(const std::string& dir, const std::string& name,
                          const ExperimentConfig& cfg) {
  std::filesystem::create_directories(dir);
  const std::string path = dir + "/" + name;
  std::ofstream os(path, std::ios::binary);  // binary: byte-identical across platforms
  if (!os) throw std::runtime_error("cannot open output file " + path);
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx", (unsigned long long)config_hash(cfg));
  os << "# config_hash=" << hash << "\n";
  os << "# config=" << config_to_json(cfg).dump() << "\n";
  return os;
}

}  // namespace

Table1Result run_table1(const ExperimentConfig& raw_cfg) {
  const ExperimentConfig cfg = raw_cfg.effective();
  const Setup setup = make_setup(cfg);
  Table1Result result;
  result.norm = (1.0 - cfg.gamma) / std::pow(cfg.x0, 1.0 - cfg.gamma);

  std::ofstream csv = open_report(cfg.out_dir, "table1.csv", cfg);
  csv << "omega_id,eps,estimator,estimate,std_error,n_paths,seed,normalized\n";

  mclab::McOptions opt;
  opt.rao_blackwell = cfg.rao_blackwell;
  opt.threads = cfg.threads;
  opt.x0 = cfg.x0;

  for (double eps : cfg.eps_list) {
    const asym::ExpansionInputs in = setup.inputs(eps);
    const fou::SimGrid grid = table_grid(cfg, eps);
    const auto table = fou::FactorEngine::build_table(in.params, grid);
    for (int omega = 0; omega < cfg.n_omegas; ++omega) {
      Table1Row row;
      row.omega_id = uint32_t(omega);
      row.eps = eps;
      if (cfg.crn) {
        const fou::FactorEngine eng(in.params, grid, cfg.seed, uint32_t(omega), true,
                                    fou::FactorEngine::kSaltFromOmega, table);
        row.triple = mclab::estimate_all(eng, in, cfg.n_paths, opt);
      } else {
        // independent future streams per estimator; gaps keep their own SEs
        const uint32_t base = uint32_t(omega);
        const fou::FactorEngine e1(in.params, grid, cfg.seed, base, true, base ^ 0x10000u, table);
        const fou::FactorEngine e2(in.params, grid, cfg.seed, base, true, base ^ 0x20000u, table);
        const fou::FactorEngine e3(in.params, grid, cfg.seed, base, true, base ^ 0x30000u, table);
        row.triple.optimal = mclab::estimate_value_optimal(e1, in, cfg.n_paths, opt);
        row.triple.pi0 = mclab::estimate_value_pi0(e2, in, cfg.n_paths, opt);
        row.triple.practical = mclab::estimate_value_practical(e3, in, cfg.n_paths, opt);
        row.triple.gap_pi0 = row.triple.optimal.estimate - row.triple.pi0.estimate;
        row.triple.gap_pi0_se = std::hypot(row.triple.optimal.std_error, row.triple.pi0.std_error);
        row.triple.gap_practical = row.triple.optimal.estimate - row.triple.practical.estimate;
        row.triple.gap_practical_se =
            std::hypot(row.triple.optimal.std_error, row.triple.practical.std_error);
        row.triple.gap_pi0_practical = row.triple.pi0.estimate - row.triple.practical.estimate;
        row.triple.gap_pi0_practical_se =
            std::hypot(row.triple.pi0.std_error, row.triple.practical.std_error);
      }
      row.q_phi0 = asym::q_expansion_value(0.0, cfg.x0, 0.0, in);
      result.rows.push_back(row);

      const auto emit = [&](const mclab::EstimatorReport& r) {
        csv << omega << "," << fmt(eps) << "," << r.estimator_id << "," << fmt(r.estimate) << ","
            << fmt(r.std_error) << "," << r.n_paths << "," << r.seed << ","
            << fmt(r.estimate * result.norm) << "\n";
      };
      emit(row.triple.optimal);
      emit(row.triple.pi0);
      emit(row.triple.practical);
      csv << omega << "," << fmt(eps) << ",gap-pi0," << fmt(row.triple.gap_pi0) << ","
          << fmt(row.triple.gap_pi0_se) << "," << cfg.n_paths << "," << cfg.seed << ","
          << fmt(row.triple.gap_pi0 * result.norm) << "\n";
      csv << omega << "," << fmt(eps) << ",gap-practical," << fmt(row.triple.gap_practical) << ","
          << fmt(row.triple.gap_practical_se) << "," << cfg.n_paths << "," << cfg.seed << ","
          << fmt(row.triple.gap_practical * result.norm) << "\n";
      csv << omega << "," << fmt(eps) << ",q-expansion-phi0," << fmt(row.q_phi0) << ",0,"
          << cfg.n_paths << "," << cfg.seed << "," << fmt(row.q_phi0 * result.norm) << "\n";

      if (!(row.triple.gap_pi0 > 2.0 * row.triple.gap_pi0_se) ||
          !(row.triple.gap_pi0_practical > 2.0 * row.triple.gap_pi0_practical_se))
        result.ordering_ok = false;
    }
  }
  result.csv_path = cfg.out_dir + "/table1.csv";

  std::ofstream summary = open_report(cfg.out_dir, "table1_summary.txt", cfg);
  summary << "value-table summary ((1-gamma)-normalized, x0=" << fmt(cfg.x0) << ")\n";
  for (const Table1Row& row : result.rows) {
    const double v = row.triple.optimal.estimate * result.norm;
    const double g1 = row.triple.gap_pi0 * result.norm;
    const double g2 = row.triple.gap_practical * result.norm;
    char line[256];
    std::snprintf(line, sizeof line,
                  "eps=%-7g omega=%u  V=%.4f  V-Vpi0=%.5f (%.3f%%)  V-Vpractical=%.5f (%.3f%%)\n",
                  row.eps, row.omega_id, v, g1, 100.0 * g1 / v, g2, 100.0 * g2 / v);
    summary << line;
  }
  summary << "reference relative gaps: about 0.1% (leading strategy), about 5% (practical)\n";
  summary << (result.ordering_ok ? "ordering: PASS (each gap > 2 paired SE)\n"
                                 : "ordering: FAIL\n");
  result.summary_path = cfg.out_dir + "/table1_summary.txt";
  return result;
}

namespace {

fou::SimGrid scaling_grid(const ExperimentConfig& cfg, const fou::FouParams& params) {
  mclab::GridPolicy policy;
  policy.dt_max = cfg.dt;
  policy.eps_per_dt = cfg.eps_per_dt;
  policy.tail_fraction = cfg.history_tail_fraction;
  return mclab::grid_for_eps(params, cfg.T, policy);
}

}  // namespace

ScalingResult run_scaling_suite(const ExperimentConfig& raw_cfg) {
  const ExperimentConfig cfg = raw_cfg.effective();
  const Setup setup = make_setup(cfg);
  ScalingResult result;

  for (double eps : cfg.scaling_eps) {
    const asym::ExpansionInputs in = setup.inputs(eps);
    const fou::SimGrid grid = scaling_grid(cfg, in.params);
    const auto table = fou::FactorEngine::build_table(in.params, grid);
    const int n = grid.n_steps;
    const double dt = grid.dt;
    const market::MarketModel& model = *in.model;
    const double lam_bar_sq = in.averages.lambda_bar_sq;
    const double lam_tilde = in.averages.lambda_tilde;
    const double llp = in.averages.avg_lambda_lambda_prime;

    ScalingPoint pt;
    pt.eps = eps;
    pt.dt = dt;
    pt.n_paths = cfg.scaling_paths;

    // unconditional L2 norms of the three ergodic differences (fresh history
    // per path so the expectation is over the stationary law)
    {
      const fou::FactorEngine eng(in.params, grid, cfg.seed, 0xE46, false,
                                  fou::FactorEngine::kSaltFromOmega, table);
      const std::size_t np = std::size_t(cfg.scaling_paths);
      std::vector<double> eta2(np), kappa2(np), isq(np);
      parallel_for(np, cfg.threads, [&](std::size_t begin, std::size_t end) {
        std::vector<double> wy(static_cast<std::size_t>(n)), y(static_cast<std::size_t>(n) + 1);
        for (std::size_t path = begin; path < end; ++path) {
          eng.sample_future(path, wy, y);
          double eta = 0.0, kappa = 0.0, ii = 0.0;
          for (int k = 0; k < n; ++k) {
            const double yk = y[std::size_t(k)];
            const double lam = model.lambda(yk);
            eta += lam - lam_tilde;
            kappa += lam * model.lambda_prime(yk) - llp;
            ii += model.lambda_sq(yk) - lam_bar_sq;
          }
          eta2[path] = eta * dt * (eta * dt);
          kappa2[path] = kappa * dt * (kappa * dt);
          isq[path] = ii * dt * (ii * dt);
        }
      });
      pt.l2_eta = std::sqrt(num::mean_var(eta2).mean);
      pt.l2_kappa = std::sqrt(num::mean_var(kappa2).mean);
      pt.l2_I = std::sqrt(num::mean_var(isq).mean);
    }

    // Var(phi_0) over histories, nested MC with the inner-noise term removed
    {
      const std::size_t n_outer = std::size_t(cfg.phi_outer);
      const std::size_t n_inner = std::size_t(cfg.phi_inner);
      std::vector<double> phi_hat(n_outer), inner_var(n_outer);
      for (std::size_t outer = 0; outer < n_outer; ++outer) {
        const fou::FactorEngine eng(in.params, grid, cfg.seed, uint32_t(0x0F000u + outer), true,
                                    fou::FactorEngine::kSaltFromOmega, table);
        std::vector<double> vals(n_inner);
        parallel_for(n_inner, cfg.threads, [&](std::size_t begin, std::size_t end) {
          std::vector<double> wy(static_cast<std::size_t>(n)), y(static_cast<std::size_t>(n) + 1);
          for (std::size_t path = begin; path < end; ++path) {
            eng.sample_future(path, wy, y);
            double ii = 0.0;
            for (int k = 0; k < n; ++k) ii += model.lambda_sq(y[std::size_t(k)]) - lam_bar_sq;
            vals[path] = 0.5 * ii * dt;
          }
        });
        const num::MeanVar mv = num::mean_var(vals);
        phi_hat[outer] = mv.mean;
        inner_var[outer] = mv.var;
      }
      const num::MeanVar outer_mv = num::mean_var(phi_hat);
      const double inner_mean = num::mean_var(inner_var).mean;
      pt.var_phi = std::max(0.0, outer_mv.var - inner_mean / double(n_inner));
      pt.var_phi_se = outer_mv.var * std::sqrt(2.0 / double(n_outer - 1));
    }
    result.points.push_back(pt);
  }

  std::vector<double> lx, le, lk, li, lp;
  for (const ScalingPoint& pt : result.points) {
    lx.push_back(std::log(pt.eps));
    le.push_back(std::log(pt.l2_eta));
    lk.push_back(std::log(pt.l2_kappa));
    li.push_back(std::log(pt.l2_I));
    lp.push_back(std::log(pt.var_phi));
  }
  result.eta_fit = num::fit_line(lx, le);
  result.kappa_fit = num::fit_line(lx, lk);
  result.I_fit = num::fit_line(lx, li);
  result.phi_fit = num::fit_line(lx, lp);

  {
    const asym::ExpansionInputs in = setup.inputs(cfg.scaling_eps.back());
    result.sigma_phi_sq = asym::sigma_phi_sq(in);
    const ScalingPoint& last = result.points.back();
    const double predicted = std::pow(last.eps, 2.0 - 2.0 * cfg.H) * result.sigma_phi_sq *
                             std::pow(cfg.T, 2.0 * cfg.H);
    result.phi_level_ratio = last.var_phi / predicted;
  }

  std::ofstream csv = open_report(cfg.out_dir, "scaling.csv", cfg);
  csv << "eps,dt,l2_eta,l2_kappa,l2_I,var_phi,var_phi_se,n_paths\n";
  for (const ScalingPoint& pt : result.points)
    csv << fmt(pt.eps) << "," << fmt(pt.dt) << "," << fmt(pt.l2_eta) << "," << fmt(pt.l2_kappa)
        << "," << fmt(pt.l2_I) << "," << fmt(pt.var_phi) << "," << fmt(pt.var_phi_se) << ","
        << pt.n_paths << "\n";
  result.csv_path = cfg.out_dir + "/scaling.csv";

  std::ofstream summary = open_report(cfg.out_dir, "scaling_summary.txt", cfg);
  char line[256];
  std::snprintf(line, sizeof line,
                "slopes: eta %.3f+-%.3f  kappa %.3f+-%.3f  I %.3f+-%.3f (target %.2f)\n",
                result.eta_fit.slope, result.eta_fit.slope_se, result.kappa_fit.slope,
                result.kappa_fit.slope_se, result.I_fit.slope, result.I_fit.slope_se,
                1.0 - cfg.H);
  summary << line;
  std::snprintf(line, sizeof line, "Var(phi) slope %.3f+-%.3f (target %.2f), level ratio %.3f\n",
                result.phi_fit.slope, result.phi_fit.slope_se, 2.0 - 2.0 * cfg.H,
                result.phi_level_ratio);
  summary << line;
  result.summary_path = cfg.out_dir + "/scaling_summary.txt";
  return result;
}

OptimalityResult run_optimality_suite(const ExperimentConfig& raw_cfg) {
  const ExperimentConfig cfg = raw_cfg.effective();
  const Setup setup = make_setup(cfg);
  OptimalityResult result;

  struct CaseDef {
    std::string name;
    double alpha;
    double base_scale;
    int pert_kind;  // 0 none, 1 constant fraction, 2 y-dependent fraction
  };
  const std::vector<CaseDef> defs = {
      {"control", 1.0, 1.0, 0},
      {"case-i", cfg.opt_alpha_large, 1.0, 1},
      {"case-iii", cfg.opt_alpha_small, 1.0, 1},
      {"case-iii-y", cfg.opt_alpha_small, 1.0, 2},
      {"case-iv", 1.0, cfg.opt_base_scale, 0},
  };
  result.cases.resize(defs.size());
  for (std::size_t c = 0; c < defs.size(); ++c) {
    result.cases[c].name = defs[c].name;
    result.cases[c].alpha = defs[c].alpha;
    result.cases[c].base_scale = defs[c].base_scale;
  }

  const double g = cfg.gamma;
  const double lam_bar = setup.averages.lambda_bar;
  for (double eps : cfg.opt_eps) {
    const asym::ExpansionInputs in = setup.inputs(eps);
    const fou::SimGrid grid = scaling_grid(cfg, in.params);
    const auto table = fou::FactorEngine::build_table(in.params, grid);
    const int n = grid.n_steps;
    const double dt = grid.dt;
    const market::MarketModel& model = *in.model;
    const std::size_t nc = defs.size();
    const std::size_t per_omega = std::size_t(cfg.opt_paths) / std::size_t(cfg.opt_omegas);
    const std::size_t np = per_omega * std::size_t(cfg.opt_omegas);

    std::vector<double> eps_alpha(nc);
    for (std::size_t c = 0; c < nc; ++c) eps_alpha[c] = std::pow(eps, defs[c].alpha);

    // per-path utilities: baseline pi0 plus each case; paths pooled over
    // several shared histories so the fit is not hostage to one omega
    std::vector<std::vector<double>> u_case(nc, std::vector<double>(np));
    std::vector<double> u_base(np);
    std::vector<uint8_t> bad(np, 0);
    for (int omega = 0; omega < cfg.opt_omegas; ++omega) {
      const fou::FactorEngine eng(in.params, grid, cfg.seed, uint32_t(0xA1100u + omega), true,
                                  fou::FactorEngine::kSaltFromOmega, table);
      const std::size_t base_idx = per_omega * std::size_t(omega);
      parallel_for(per_omega, cfg.threads, [&](std::size_t begin, std::size_t end) {
        std::vector<double> wy(static_cast<std::size_t>(n)), y(static_cast<std::size_t>(n) + 1),
            w(static_cast<std::size_t>(n));
        std::vector<double> lx(nc);
        for (std::size_t path = begin; path < end; ++path) {
          eng.sample_future(path, wy, y);
          eng.sample_w(path, cfg.rho, wy, w);
          std::fill(lx.begin(), lx.end(), 0.0);
          double lx0 = 0.0;
          for (int k = 0; k < n; ++k) {
            const double yk = y[std::size_t(k)];
            const market::NodeEval e = model.eval(yk);
            const double p0 = e.lam / (g * e.sigma);
            const double dw = w[std::size_t(k)];
            lx0 += (p0 * e.mu - 0.5 * p0 * p0 * e.sigma_sq) * dt + p0 * e.sigma * dw;
            for (std::size_t c = 0; c < nc; ++c) {
              double f = defs[c].base_scale * p0;
              if (defs[c].pert_kind == 1) f += eps_alpha[c] * cfg.opt_fraction;
              if (defs[c].pert_kind == 2) f += eps_alpha[c] * cfg.opt_fraction * (e.lam / lam_bar);
              lx[c] += (f * e.mu - 0.5 * f * f * e.sigma_sq) * dt + f * e.sigma * dw;
            }
          }
          bool finite = std::isfinite(lx0) && std::abs(lx0) < 650.0;
          for (std::size_t c = 0; c < nc && finite; ++c)
            finite = std::isfinite(lx[c]) && std::abs(lx[c]) < 650.0;
          const std::size_t slot = base_idx + path;
          if (!finite) {
            bad[slot] = 1;
            continue;
          }
          u_base[slot] = std::exp((1.0 - g) * lx0) / (1.0 - g);
          for (std::size_t c = 0; c < nc; ++c)
            u_case[c][slot] = std::exp((1.0 - g) * lx[c]) / (1.0 - g);
        }
      });
    }

    for (std::size_t c = 0; c < nc; ++c) {
      mclab::ProbePoint pt;
      pt.eps = eps;
      pt.n_paths = long(np);
      std::vector<double> diff, vp, vp0;
      diff.reserve(np);
      vp.reserve(np);
      vp0.reserve(np);
      for (std::size_t i = 0; i < np; ++i) {
        if (bad[i]) {
          ++pt.n_flagged;
          continue;
        }
        diff.push_back(u_case[c][i] - u_base[i]);
        vp.push_back(u_case[c][i]);
        vp0.push_back(u_base[i]);
      }
      const num::MeanVar mv = num::mean_var(diff);
      pt.gap = mv.mean;
      pt.gap_se = mv.std_error();
      pt.value_pi = num::mean_var(vp).mean;
      pt.value_pi0 = num::mean_var(vp0).mean;
      result.cases[c].points.push_back(pt);
    }
  }

  // log-log slope of the (negative) gap where the sign is resolved
  for (OptimalityCase& oc : result.cases) {
    std::vector<double> lx, ly;
    for (const mclab::ProbePoint& pt : oc.points)
      if (pt.gap < 0.0 && -pt.gap > 2.0 * pt.gap_se) {
        lx.push_back(std::log(pt.eps));
        ly.push_back(std::log(-pt.gap));
      }
    if (lx.size() >= 3) {
      oc.fit = num::fit_line(lx, ly);
      oc.has_fit = true;
    }
  }

  std::ofstream csv = open_report(cfg.out_dir, "optimality.csv", cfg);
  csv << "case,alpha,base_scale,eps,gap,gap_se,value_pi,value_pi0,n_paths,n_flagged\n";
  for (const OptimalityCase& oc : result.cases)
    for (const mclab::ProbePoint& pt : oc.points)
      csv << oc.name << "," << fmt(oc.alpha) << "," << fmt(oc.base_scale) << "," << fmt(pt.eps)
          << "," << fmt(pt.gap) << "," << fmt(pt.gap_se) << "," << fmt(pt.value_pi) << ","
          << fmt(pt.value_pi0) << "," << pt.n_paths << "," << pt.n_flagged << "\n";
  result.csv_path = cfg.out_dir + "/optimality.csv";

  std::ofstream summary = open_report(cfg.out_dir, "optimality_summary.txt", cfg);
  for (const OptimalityCase& oc : result.cases) {
    summary << oc.name << " (alpha=" << oc.alpha << ", base_scale=" << oc.base_scale << ")\n";
    for (const mclab::ProbePoint& pt : oc.points) {
      char line[200];
      std::snprintf(line, sizeof line, "  eps=%-7g gap=%+.3e (se %.2e) gap/eps^(1-H)=%+.3e\n",
                    pt.eps, pt.gap, pt.gap_se, pt.gap / std::pow(pt.eps, 1.0 - cfg.H));
      summary << line;
    }
    if (oc.has_fit) {
      char line[160];
      std::snprintf(line, sizeof line, "  log-log slope of -gap: %.3f +- %.3f\n", oc.fit.slope,
                    oc.fit.slope_se);
      summary << line;
    }
  }
  result.summary_path = cfg.out_dir + "/optimality_summary.txt";
  return result;
}

std::vector<std::string> run_property_checks(const ExperimentConfig& raw_cfg) {
  const ExperimentConfig cfg = raw_cfg.effective();
  std::vector<std::string> failures;
  const auto check = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };

  // kernel normalization across parameter sets
  for (double a : {0.5, 1.0, 2.0}) {
    for (double H : {0.55, 0.6, 0.75}) {
      const fou::FouParams p{a, H, 1.0};
      const double quad = fou::kernel_sq_integral(a, H);
      check(std::abs(quad - p.sigma_ou_sq()) < 1e-6,
            "kernel normalization a=" + std::to_string(a) + " H=" + std::to_string(H));
    }
  }
  // eps-invariance of the scaled-kernel energy (fixed panels; the kernel
  // itself carries quadrature jitter, so no adaptive error control on top)
  {
    const num::QuadratureRule gl = num::gauss_legendre(32);
    for (double eps : {1.0, 0.3, 0.05}) {
      const fou::FouParams p{cfg.a, cfg.H, eps};
      const auto f = [&](double u) {
        const double k = fou::scaled_kernel(u, p);
        return k * k;
      };
      const double L = 240.0 * eps / cfg.a;
      const double xb = std::min(L, 0.05 * eps / std::max(cfg.a, 1.0));
      const double pw = 2.0 * cfg.H;
      double total = num::paneled_integral(
          [&](double v) {
            const double u = std::pow(v, 1.0 / pw);
            return f(u) * u / (pw * v);
          },
          0.0, std::pow(xb, pw), 8, gl);
      double lo = xb;
      while (lo < L) {
        const double hi = std::min(L, 2.0 * lo);
        total += num::paneled_integral(f, lo, hi, 4, gl);
        lo = hi;
      }
      total += fou::kernel_sq_tail(L / eps, cfg.a, cfg.H);
      check(std::abs(total - p.sigma_ou_sq()) < 1e-6, "eps-invariance eps=" + std::to_string(eps));
    }
  }
  // H -> 1/2 kernel degeneracy
  {
    double worst = 0.0;
    for (double t = 0.01; t <= 5.0; t += 0.05)
      worst = std::max(worst, std::abs(fou::kernel_K(t, 1.0, 0.5001) - std::exp(-t)));
    check(worst < 1e-2, "kernel H->1/2 degeneracy");
  }
  // model smoothness and average inequalities
  try {
    const Setup setup = make_setup(cfg);
    const market::Averages& av = setup.averages;
    check(av.lambda_bar_sq + 1e-12 >= av.lambda_tilde * av.lambda_tilde, "Jensen inequality");
    check(av.lambda_bar_sq + 1e-12 >= av.mu_bar * av.mu_bar / av.sigma_bar_sq,
          "Cauchy-Schwarz chain");
  } catch (const std::exception& e) {
    failures.push_back(std::string("model validation: ") + e.what());
  }
  return failures;
}

}  // namespace fouport::lab
