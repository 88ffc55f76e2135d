#pragma once
// Experiment configuration, the three canned studies (value-table
// reproduction, scaling laws, optimality probes), and CSV/report emission
// with embedded config provenance.
#include <memory>
#include <string>
#include <vector>

#include "fouport/asymptotics.hpp"
#include "fouport/mc_lab.hpp"

#include <json.hpp>

namespace fouport::lab {

struct ExperimentConfig {
  std::string model_id = "paper-3.6";  // or "constant-lambda"
  double a = 1.0;
  double H = 0.6;
  std::vector<double> eps_list = {1.0, 0.1, 0.01};
  double gamma = 0.4;
  double rho = -0.5;
  double T = 1.0;
  double x0 = 1.0;

  double dt = 2e-3;
  std::string history_policy = "tail";  // "tail" (variance budget) or "paper"
  double history_tail_fraction = 1e-3;

  long n_paths = 100000;
  int n_omegas = 3;
  uint64_t seed = 1000003;
  int threads = 0;
  bool rao_blackwell = true;
  bool crn = true;
  bool paper_scale = false;  // 500k paths, dt = 1e-3, power-law history span

  // constant-lambda model knobs
  double const_lambda = 0.7;
  double const_sigma = 0.125;

  // scaling suite
  std::vector<double> scaling_eps = {0.5, 0.2, 0.1, 0.05, 0.02, 0.01};
  int scaling_paths = 1024;
  int phi_outer = 192;
  int phi_inner = 384;
  double eps_per_dt = 20.0;  // refine dt to eps/eps_per_dt for small eps

  // optimality suite
  std::vector<double> opt_eps = {0.2, 0.1, 0.05, 0.02, 0.01};
  long opt_paths = 60000;
  int opt_omegas = 4;           // histories pooled per ladder point
  double opt_alpha_small = 0.1;
  double opt_alpha_large = 1.0;
  double opt_fraction = 6.0;    // constant-fraction perturbation size
  double opt_base_scale = 1.5;  // case (iv) leading-order mis-scaling

  std::string out_dir = "out";

  void validate() const;
  // applies the paper_scale preset (dt, n_paths, history policy)
  ExperimentConfig effective() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& path);
uint64_t config_hash(const ExperimentConfig& cfg);

// Owns the market model referenced by ExpansionInputs.
struct Setup {
  std::unique_ptr<market::MarketModel> model;
  market::Averages averages;
  fou::FouParams base_params;
  double T = 1.0;
  double gamma = 0.4;

  asym::ExpansionInputs inputs(double eps) const;
};
Setup make_setup(const ExperimentConfig& cfg);

fou::SimGrid table_grid(const ExperimentConfig& cfg, double eps);

struct Table1Row {
  uint32_t omega_id = 0;
  double eps = 0.0;
  mclab::ValueTriple triple;
  double q_phi0 = 0.0;  // deterministic Q prediction at phi = 0 (raw units)
};

struct Table1Result {
  std::vector<Table1Row> rows;
  double norm = 1.0;  // multiply raw values by this for the (1-gamma) view
  std::string csv_path;
  std::string summary_path;
  bool ordering_ok = true;  // V >= V_pi0 >= V_practical by > 2 paired SE everywhere
};
Table1Result run_table1(const ExperimentConfig& cfg);

struct ScalingPoint {
  double eps = 0.0;
  double dt = 0.0;
  double l2_eta = 0.0;
  double l2_kappa = 0.0;
  double l2_I = 0.0;
  double var_phi = 0.0;     // inner-noise corrected variance over histories
  double var_phi_se = 0.0;
  long n_paths = 0;
};

struct ScalingResult {
  std::vector<ScalingPoint> points;
  num::LineFit eta_fit, kappa_fit, I_fit, phi_fit;  // log-log versus eps
  double sigma_phi_sq = 0.0;
  double phi_level_ratio = 0.0;  // Var(phi) / (eps^{2-2H} sigma_phi^2 T^{2H}) at smallest eps
  std::string csv_path;
  std::string summary_path;
};
ScalingResult run_scaling_suite(const ExperimentConfig& cfg);

struct OptimalityCase {
  std::string name;
  double alpha = 0.0;
  double base_scale = 1.0;
  std::vector<mclab::ProbePoint> points;
  bool has_fit = false;
  num::LineFit fit;  // log(-gap) versus log(eps), cases with signed gaps
};

struct OptimalityResult {
  std::vector<OptimalityCase> cases;  // control, i, iii, iii-y, iv
  std::string csv_path;
  std::string summary_path;
};
OptimalityResult run_optimality_suite(const ExperimentConfig& cfg);

// Quick invariant checks (kernel normalization, eps-invariance, model
// smoothness, average inequalities); returns the list of failures.
std::vector<std::string> run_property_checks(const ExperimentConfig& cfg);

}  // namespace fouport::lab
