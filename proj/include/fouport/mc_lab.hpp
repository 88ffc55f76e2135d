#pragma once
// Monte Carlo value estimation for the optimal, leading-order and practical
// strategies (exponential-functional forms, conditional on a shared history),
// wealth-path simulation, and paired optimality probes.
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fouport/asymptotics.hpp"
#include "fouport/fou_engine.hpp"

namespace fouport::mclab {

struct EstimatorReport {
  double estimate = 0.0;   // value in raw units (includes the x0^{1-gamma}/(1-gamma) prefactor)
  double std_error = 0.0;  // delta-method SE where a power of a mean is taken
  long n_paths = 0;
  uint64_t seed = 0;
  uint32_t omega_id = 0;
  std::string estimator_id;
};

struct McOptions {
  // Integrate the Brownian component orthogonal to W^Y in closed form
  // instead of sampling it; same expectation, far tighter gap SEs.
  bool rao_blackwell = true;
  // Regression-adjust paired gaps with exact-mean exponential-martingale
  // controls (E = 1 holds exactly for the discretized scheme).
  bool control_variates = true;
  int threads = 0;
  double x0 = 1.0;
};

// V_0 = x0^{1-gamma}/(1-gamma) [E(exp{(1-g)/(2g) int lambda^2 ds
//        + rho (1-g)/g int lambda dW^Y} | G_0)]^q
EstimatorReport estimate_value_optimal(const fou::FactorEngine& omega,
                                       const asym::ExpansionInputs& in, long n_paths,
                                       const McOptions& opt = {});

// V_0^{pi0} with the exponential functional of (int lambda^2 ds, int lambda dW).
EstimatorReport estimate_value_pi0(const fou::FactorEngine& omega,
                                   const asym::ExpansionInputs& in, long n_paths,
                                   const McOptions& opt = {});

// V_0^{practical} for the constant-proportion strategy c* = mu_bar/(gamma sigma_bar^2).
EstimatorReport estimate_value_practical(const fou::FactorEngine& omega,
                                         const asym::ExpansionInputs& in, long n_paths,
                                         const McOptions& opt = {});

struct ValueTriple {
  EstimatorReport optimal, pi0, practical;
  double gap_pi0 = 0.0;       // V - V^{pi0}, raw units
  double gap_pi0_se = 0.0;    // paired (CRN) delta-method SE
  double gap_practical = 0.0;
  double gap_practical_se = 0.0;
  double gap_pi0_practical = 0.0;  // V^{pi0} - V^{practical}
  double gap_pi0_practical_se = 0.0;
};

// One pass over shared paths; identical streams to the three single-estimator
// calls above, so the gaps are common-random-number paired by construction.
ValueTriple estimate_all(const fou::FactorEngine& omega, const asym::ExpansionInputs& in,
                         long n_paths, const McOptions& opt = {});

// Proportional strategies are run with the exact log-wealth update; kinds map
// to the strategies studied by the expansion.
struct StrategySpec {
  enum class Kind { zero, pi0, pi0_plus_correction, practical, perturbed };
  Kind kind = Kind::pi0;
  double practical_c = 0.0;  // fraction of wealth for Kind::practical
  // Kind::perturbed: fraction = base_scale * pi0 + eps^alpha * perturbation(t, y)
  double base_scale = 1.0;
  double alpha = 1.0;
  std::function<double(double, double)> perturbation;  // may be empty (zero)

  static StrategySpec pi0() { return {Kind::pi0}; }
  static StrategySpec practical(double c) { return {Kind::practical, c}; }
};

struct WealthOutcome {
  double x_terminal = 0.0;
  std::vector<double> x_path;
  bool absorbed = false;  // hit zero (Euler mode only)
  bool flagged = false;   // overflow/NaN; excluded from averages by callers
};

// Exact-exponential update for proportional strategies (power utility).
WealthOutcome simulate_wealth(const StrategySpec& strategy, const fou::FactorPath& factor,
                              double x0, const asym::ExpansionInputs& in);

// Euler-Maruyama for amount-form strategies pi(t, x, y); zero is absorbing.
WealthOutcome simulate_wealth_amount(const std::function<double(double, double, double)>& amount,
                                     const fou::FactorPath& factor, double x0,
                                     const asym::ExpansionInputs& in);

struct ProbePoint {
  double eps = 0.0;
  double value_pi = 0.0;    // E[U(X^pi_T)]
  double value_pi0 = 0.0;   // E[U(X^{pi0}_T)]
  double gap = 0.0;         // value_pi - value_pi0 (paired)
  double gap_se = 0.0;      // SE of the per-path difference
  long n_paths = 0;
  long n_flagged = 0;
};

struct GridPolicy {
  double dt_max = 2e-3;
  double eps_per_dt = 0.0;      // when > 0, refine so that dt <= eps / eps_per_dt
  double tail_fraction = 1e-3;  // history sizing budget
};

// Uniform grid for horizon T at scale eps under the policy (dt divides T).
fou::SimGrid grid_for_eps(const fou::FouParams& params, double T, const GridPolicy& policy);

// Paired comparison of pi = base_scale*pi0 + eps^alpha*perturbation against
// pi0 itself on common noise, across the eps ladder.
std::vector<ProbePoint> optimality_probe(double base_scale,
                                         const std::function<double(double, double)>& perturbation,
                                         double alpha, std::span<const double> eps_list,
                                         const asym::ExpansionInputs& base_inputs,
                                         const GridPolicy& policy, long n_paths, uint64_t seed,
                                         uint32_t omega_id, int threads = 0);

}  // namespace fouport::mclab
