#include "fouport/asymptotics.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "fouport/parallel.hpp"

namespace fouport::asym {

using num::numeric_error;

void ExpansionInputs::validate() const {
  params.validate();
  if (model == nullptr) throw std::invalid_argument("ExpansionInputs: model is required");
  if (!(T > 0.0)) throw std::invalid_argument("ExpansionInputs: T must be positive");
  if (!(gamma > 0.0) || gamma == 1.0)
    throw std::invalid_argument("ExpansionInputs: gamma must be positive and != 1");
  if (std::abs(params.sigma_ou() - averages.sigma_ou) > 1e-10)
    throw std::invalid_argument("ExpansionInputs: averages were taken under a different sigma_ou");
}

PhiEstimate estimate_phi(double t, const fou::FactorPath& history, const ExpansionInputs& in,
                         int n_inner, uint64_t seed, double max_tail_fraction) {
  in.validate();
  if (n_inner < 2) throw std::invalid_argument("estimate_phi: n_inner must be >= 2");
  const double dt = history.grid.dt;
  const double k_real = t / dt;
  const int k_t = int(std::llround(k_real));
  if (std::abs(k_real - double(k_t)) > 1e-9 || k_t < 0 || k_t > history.grid.n_steps)
    throw std::invalid_argument("estimate_phi: t must be a grid node of the history path");
  const int n_total = int(std::llround(in.T / dt));
  if (n_total < k_t) throw std::invalid_argument("estimate_phi: horizon shorter than t");

  PhiEstimate out;
  out.t = t;
  out.n_inner_paths = n_inner;
  const int n2 = n_total - k_t;  // steps on (t, T]
  if (n2 == 0) return out;       // phi_T = 0 exactly

  // conditioning increments: full history plus realized future up to t
  const std::size_t cond_len = std::size_t(history.grid.history_len + k_t);
  if (cond_len == 0 || history.wy_increments.size() < cond_len)
    throw std::invalid_argument("estimate_phi: history path does not cover (-M, t]");
  const double cond_span = double(cond_len) * dt;
  {
    fou::SimGrid probe{dt, std::max(1, n2), int(cond_len)};
    const double tail = fou::history_tail_variance(in.params, probe);
    if (tail > max_tail_fraction * in.params.sigma_ou_sq()) {
      const double bound = std::pow(cond_span / in.params.eps, 2.0 * in.params.H - 2.0);
      throw std::invalid_argument(
          "estimate_phi: insufficient history; truncation tail variance " + std::to_string(tail) +
          " exceeds budget (tail bound (M/eps)^{2H-2} = " + std::to_string(bound) + ")");
    }
  }

  const std::vector<double> h = fou::conditional_mean_from_increments(
      in.params, dt, std::span<const double>(history.wy_increments.data(), cond_len), n2);
  const std::vector<double> K = fou::kernel_table(in.params, dt, std::size_t(n2));
  const double lam_bar_sq = in.averages.lambda_bar_sq;
  const market::MarketModel& model = *in.model;
  const double sqrt_dt = std::sqrt(dt);

  std::vector<double> vals(std::size_t(n_inner), 0.0);
  parallel_for(std::size_t(n_inner), 0, [&](std::size_t begin, std::size_t end) {
    std::vector<double> wy(static_cast<std::size_t>(n2));
    std::vector<double> y(static_cast<std::size_t>(n2) + 1);
    for (std::size_t path = begin; path < end; ++path) {
      rng::NormalStream fut(seed, rng::StreamClass::future_wy, path, 0x9A1u);
      for (int i = 0; i < n2; ++i) wy[std::size_t(i)] = sqrt_dt * fut.next();
      y[0] = h[0];
      for (int k = 1; k <= n2; ++k) {
        double acc = 0.0;
        const double* kk = K.data();
        for (int i = 0; i < k; ++i) acc += kk[k - i] * wy[std::size_t(i)];
        y[std::size_t(k)] = h[std::size_t(k)] + acc;
      }
      // left-point rule over (t, T]
      double integral = 0.0;
      for (int k = 0; k < n2; ++k) integral += model.lambda_sq(y[std::size_t(k)]) - lam_bar_sq;
      vals[path] = 0.5 * integral * dt;
    }
  });
  const num::MeanVar mv = num::mean_var(vals);
  out.value = mv.mean;
  out.std_error = mv.std_error();
  return out;
}

double sigma_phi_bracket(double H) {
  if (!(H >= 0.5 && H < 1.0)) throw std::domain_error("sigma_phi_bracket: H must be in [1/2, 1)");
  const double g1 = num::gamma_fn(2.0 * H + 1.0);
  const double g2 = num::gamma_fn(H + 0.5);
  return 1.0 / (g1 * std::sin(num::pi * H)) - 1.0 / (2.0 * H * g2 * g2);
}

double sigma_phi_sq(const ExpansionInputs& in) {
  in.validate();
  const double llp = in.averages.avg_lambda_lambda_prime;
  return in.params.sigma_ou_sq() * llp * llp * sigma_phi_bracket(in.params.H);
}

namespace {

void check_time_wealth(double t, double T, double x) {
  if (!(x > 0.0)) throw std::domain_error("asymptotics: x must be positive");
  if (t < 0.0 || t > T) throw std::domain_error("asymptotics: t must lie in [0, T]");
}

// deterministic correction inside the Q bracket (without the leading
// (1-gamma)/gamma factor): eps^{1-H} rho lt (1-gamma)/gamma <ll'> tau^{H+1/2} / (a G(H+3/2))
double q_deterministic_correction(double tau, const ExpansionInputs& in) {
  const double H = in.params.H;
  return std::pow(in.params.eps, 1.0 - H) * in.rho() * in.averages.lambda_tilde *
         ((1.0 - in.gamma) / in.gamma) * in.averages.avg_lambda_lambda_prime *
         std::pow(tau, H + 0.5) / (in.params.a * num::gamma_fn(H + 1.5));
}

}  // namespace

double q_expansion_value(double t, double x, double phi_value, const ExpansionInputs& in) {
  in.validate();
  check_time_wealth(t, in.T, x);
  const double tau = in.T - t;
  const double g = in.gamma;
  const double lead = std::pow(x, 1.0 - g) / (1.0 - g) *
                      std::exp((1.0 - g) / (2.0 * g) * in.averages.lambda_bar_sq * tau);
  const double bracket = 1.0 + (1.0 - g) / g * (phi_value + q_deterministic_correction(tau, in));
  return lead * bracket;
}

double strategy_pi0(double t, double x, double y, const ExpansionInputs& in) {
  in.validate();
  check_time_wealth(t, in.T, x);
  const double sig = in.model->sigma(y);
  if (!(sig > 0.0)) throw std::domain_error("strategy_pi0: sigma(y) must be positive");
  return in.model->lambda(y) / (in.gamma * sig) * x;
}

double strategy_pi0_general(double t, double x, double y, const ExpansionInputs& in,
                            const merton::MertonSolution& v0) {
  in.validate();
  check_time_wealth(t, in.T, x);
  const double sig = in.model->sigma(y);
  if (!(sig > 0.0)) throw std::domain_error("strategy_pi0_general: sigma(y) must be positive");
  return in.model->lambda(y) / sig * v0.risk_tolerance(t, x);
}

double strategy_pi1(double t, double x, double y, const ExpansionInputs& in,
                    bool include_eps_factor) {
  in.validate();
  if (!(x > 0.0)) throw std::domain_error("strategy_pi1: x must be positive");
  if (t > in.T) throw std::domain_error("strategy_pi1: t must not exceed T");
  const double H = in.params.H;
  const double tau = in.T - t;
  if (tau == 0.0) return 0.0;  // (T-t)^{H-1/2} -> 0 for H > 1/2
  const double sig = in.model->sigma(y);
  const double g = in.gamma;
  double amount = in.rho() * (1.0 - g) / (g * g * sig) * in.averages.avg_lambda_lambda_prime /
                  (in.params.a * num::gamma_fn(H + 0.5)) * std::pow(tau, H - 0.5) * x;
  if (include_eps_factor) amount *= std::pow(in.params.eps, 1.0 - H);
  return amount;
}

double PracticalStrategy::leading_value_factor(double t, double T) const {
  return std::exp((1.0 - gamma) / (2.0 * gamma) * sharpe_sq * (T - t));
}

PracticalStrategy practical_strategy(const ExpansionInputs& in) {
  in.validate();
  if (!(in.averages.sigma_bar_sq > 0.0))
    throw std::invalid_argument("practical_strategy: sigma_bar_sq must be positive");
  PracticalStrategy out;
  out.gamma = in.gamma;
  out.c_star = in.averages.mu_bar / (in.gamma * in.averages.sigma_bar_sq);
  out.sharpe_sq = in.averages.mu_bar * in.averages.mu_bar / in.averages.sigma_bar_sq;
  return out;
}

GeneralCorrection general_utility_correction(double t, double x, const ExpansionInputs& in,
                                             const merton::MertonSolution& v0, double phi_value) {
  in.validate();
  check_time_wealth(t, in.T, x);
  const double H = in.params.H;
  const double tau = in.T - t;
  GeneralCorrection out;
  out.c_tT = in.averages.avg_lambda_lambda_prime * std::pow(tau, H + 0.5) /
             (in.params.a * num::gamma_fn(H + 1.5));
  const double d1sq =
      tau == 0.0 ? 0.0 : merton::apply_D1_squared_value(v0, t, x);  // v1(T, x) = 0
  out.v1 = d1sq * out.c_tT;
  const double d1v = v0.risk_tolerance(t, x) * v0.value_x(t, x);
  out.q = v0.value(t, x) + d1v * phi_value +
          std::pow(in.params.eps, 1.0 - H) * in.rho() * in.averages.lambda_tilde * out.v1;
  return out;
}

double markovian_limit_value(double t, double x, const ExpansionInputs& in) {
  in.validate();
  check_time_wealth(t, in.T, x);
  const double tau = in.T - t;
  const double g = in.gamma;
  const double ratio = (1.0 - g) / g;
  const double lead = std::pow(x, 1.0 - g) / (1.0 - g) *
                      std::exp((1.0 - g) / (2.0 * g) * in.averages.lambda_bar_sq * tau);
  const double corr = std::sqrt(in.params.eps) * in.rho() * ratio * ratio *
                      in.averages.lambda_tilde * in.averages.avg_lambda_lambda_prime * tau /
                      in.params.a;
  return lead * (1.0 + corr);
}

}  // namespace fouport::asym
