#pragma once
// First-order expansion objects: the conditional correction phi, the value
// expansion Q, leading/corrected strategies, the phi limit variance, and the
// general-utility three-term decomposition.
#include <cstdint>
#include <memory>

#include "fouport/fou_engine.hpp"
#include "fouport/market_model.hpp"
#include "fouport/merton_engine.hpp"

namespace fouport::asym {

struct ExpansionInputs {
  fou::FouParams params;
  const market::MarketModel* model = nullptr;
  market::Averages averages;
  double T = 1.0;
  double gamma = 0.0;

  double rho() const { return model->rho(); }
  void validate() const;
};

struct PhiEstimate {
  double t = 0.0;
  double value = 0.0;
  double std_error = 0.0;
  long n_inner_paths = 0;
};

// Nested Monte Carlo for phi_t = E[1/2 int_t^T (lambda^2(Y_s) - <lambda^2>) ds | G_t],
// conditioning on the realized increments of `history` up to time t.
PhiEstimate estimate_phi(double t, const fou::FactorPath& history, const ExpansionInputs& in,
                         int n_inner = 20000, uint64_t seed = 1, double max_tail_fraction = 0.01);

// sigma_ou^2 <lambda lambda'>^2 [1/(Gamma(2H+1) sin(pi H)) - 1/(2H Gamma^2(H+1/2))]
double sigma_phi_sq(const ExpansionInputs& in);
double sigma_phi_bracket(double H);

// Power-utility value expansion Q_t(x) with the given phi value.
double q_expansion_value(double t, double x, double phi_value, const ExpansionInputs& in);

// Leading strategy amounts. Power form lambda(y) x / (gamma sigma(y)); the
// general form sizes by the risk tolerance of the averaged Merton problem.
double strategy_pi0(double t, double x, double y, const ExpansionInputs& in);
double strategy_pi0_general(double t, double x, double y, const ExpansionInputs& in,
                            const merton::MertonSolution& v0);

// First-order strategy correction (amount). The eps^{1-H} factor is excluded
// unless include_eps_factor is set; callers compose pi0 + eps^{1-H} pi1.
double strategy_pi1(double t, double x, double y, const ExpansionInputs& in,
                    bool include_eps_factor = false);

struct PracticalStrategy {
  double c_star = 0.0;            // mu_bar / (gamma sigma_bar^2)
  double sharpe_sq = 0.0;         // mu_bar^2 / sigma_bar^2
  double gamma = 0.0;
  // leading-order value factor exp[(1-gamma)/(2 gamma) sharpe_sq (T-t)]
  double leading_value_factor(double t, double T) const;
};
PracticalStrategy practical_strategy(const ExpansionInputs& in);

struct GeneralCorrection {
  double c_tT = 0.0;  // <lambda lambda'> (T-t)^{H+1/2} / (a Gamma(H+3/2))
  double v1 = 0.0;    // D_1^2 v0 * C_{t,T}
  double q = 0.0;     // v0 + D_1 v0 phi + eps^{1-H} rho lambda_tilde v1
};
GeneralCorrection general_utility_correction(double t, double x, const ExpansionInputs& in,
                                             const merton::MertonSolution& v0, double phi_value);

// Formal H -> 1/2 limit of the corrected power value (comparison only; the
// true Markovian expansion needs a Poisson-equation corrector).
double markovian_limit_value(double t, double x, const ExpansionInputs& in);

}  // namespace fouport::asym
