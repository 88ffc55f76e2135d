#include "fouport/merton_engine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fouport::merton {

using num::numeric_error;

Utility power_utility(double gamma) {
  if (!(gamma > 0.0) || gamma == 1.0)
    throw std::domain_error("power_utility: gamma must be positive and != 1");
  Utility u;
  u.u = [gamma](double x) { return std::pow(x, 1.0 - gamma) / (1.0 - gamma); };
  u.u_prime = [gamma](double x) { return std::pow(x, -gamma); };
  u.u_double_prime = [gamma](double x) { return -gamma * std::pow(x, -gamma - 1.0); };
  u.inverse_marginal = [gamma](double y) { return std::pow(y, -1.0 / gamma); };
  u.growth_alpha = std::max(1.0, 1.0 / gamma);
  u.growth_kappa = 2.0;
  return u;
}

Utility make_utility(std::function<double(double)> u, std::function<double(double)> u_prime,
                     std::function<double(double)> u_double_prime, double growth_alpha,
                     double growth_kappa) {
  Utility out;
  out.u = std::move(u);
  out.u_prime = std::move(u_prime);
  out.u_double_prime = std::move(u_double_prime);
  out.growth_alpha = growth_alpha;
  out.growth_kappa = growth_kappa;
  auto up = out.u_prime;
  auto upp = out.u_double_prime;
  out.inverse_marginal = [up, upp](double y) {
    if (!(y > 0.0)) throw std::domain_error("inverse_marginal: y must be positive");
    // bracket x with U'(x) = y; U' is decreasing
    double lo = 1.0, hi = 1.0;
    while (up(lo) < y) {
      lo *= 0.5;
      if (lo < 1e-300) throw numeric_error("inverse_marginal: bracketing failed (lo)");
    }
    while (up(hi) > y) {
      hi *= 2.0;
      if (hi > 1e300) throw numeric_error("inverse_marginal: bracketing failed (hi)");
    }
    double x = std::sqrt(lo * hi);
    for (int it = 0; it < 200; ++it) {
      const double g = up(x) - y;
      if (g > 0.0)
        lo = x;
      else
        hi = x;
      const double step = g / upp(x);
      double xn = x - step;
      if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
      if (std::abs(xn - x) <= 1e-14 * std::max(1.0, std::abs(xn))) return xn;
      x = xn;
    }
    throw numeric_error("inverse_marginal: Newton did not converge");
  };
  return out;
}

void validate_utility(const Utility& u) {
  if (!u.u || !u.u_prime || !u.u_double_prime || !u.inverse_marginal)
    throw std::invalid_argument("validate_utility: missing callables");
  double prev_u = -std::numeric_limits<double>::infinity();
  double prev_up = std::numeric_limits<double>::infinity();
  for (double x = 1e-6; x <= 1e6; x *= 10.0) {
    const double v = u.u(x), vp = u.u_prime(x), vpp = u.u_double_prime(x);
    if (!(vp > 0.0)) throw std::invalid_argument("validate_utility: U' must be positive");
    if (!(vpp < 0.0)) throw std::invalid_argument("validate_utility: U'' must be negative");
    if (!(v > prev_u)) throw std::invalid_argument("validate_utility: U must be increasing");
    if (!(vp < prev_up)) throw std::invalid_argument("validate_utility: U' must be decreasing");
    prev_u = v;
    prev_up = vp;
    const double xi = u.inverse_marginal(vp);
    if (std::abs(xi - x) > 1e-6 * std::max(1.0, x))
      throw std::invalid_argument("validate_utility: I is not the inverse of U'");
  }
  // Inada endpoints, numerically (relative to the unit-wealth marginal)
  const double up1 = u.u_prime(1.0);
  if (!(u.u_prime(1e-12) > 10.0 * up1))
    throw std::invalid_argument("validate_utility: U'(0+) grows too slowly");
  if (!(u.u_prime(1e12) < 0.1 * up1))
    throw std::invalid_argument("validate_utility: U'(inf) decays too slowly");
  // polynomial growth of I at sampled y
  for (double y = 1e-4; y <= 1e4; y *= 10.0) {
    const double bound = u.growth_alpha + u.growth_kappa * std::pow(y, -u.growth_alpha);
    if (u.inverse_marginal(y) > bound * (1.0 + 1e-9))
      throw std::invalid_argument("validate_utility: I violates its growth bound at y=" +
                                  std::to_string(y));
  }
}

MertonSolution MertonSolution::power(double gamma, double lambda_const, double T) {
  if (!(gamma > 0.0) || gamma == 1.0)
    throw std::domain_error("solve_merton_power: gamma must be positive and != 1");
  if (!(T >= 0.0)) throw std::invalid_argument("solve_merton_power: T must be nonnegative");
  MertonSolution sol;
  sol.power_ = true;
  sol.gamma_ = gamma;
  sol.lambda_ = lambda_const;
  sol.T_ = T;
  return sol;
}

MertonSolution MertonSolution::general(Utility utility, double lambda_const, double T,
                                       int gh_nodes, double budget_rel_tol) {
  validate_utility(utility);
  if (!(T >= 0.0)) throw std::invalid_argument("solve_merton_general: T must be nonnegative");
  MertonSolution sol;
  sol.power_ = false;
  sol.lambda_ = lambda_const;
  sol.T_ = T;
  sol.utility_ = std::move(utility);
  sol.rule_ = num::gauss_hermite(gh_nodes);
  sol.budget_rel_tol_ = budget_rel_tol;
  return sol;
}

double MertonSolution::power_gamma() const {
  if (!power_) throw std::logic_error("power_gamma: not a power solution");
  return gamma_;
}

namespace {

void check_txy(double t, double T, double x) {
  if (!(x > 0.0)) throw std::domain_error("MertonSolution: x must be positive");
  if (t < 0.0 || t > T) throw std::domain_error("MertonSolution: t must lie in [0, T]");
}

}  // namespace

MertonSolution::Dual MertonSolution::solve_dual(double tau, double x) const {
  // state-price density xi(z) = exp(-lambda sqrt(tau) z - lambda^2 tau / 2)
  const double s = lambda_ * std::sqrt(tau);
  const double drift = -0.5 * lambda_ * lambda_ * tau;
  const auto& nodes = rule_.nodes;
  const auto& weights = rule_.weights;
  const std::size_t n = nodes.size();
  std::vector<double> xi(n), w(n);
  const double inv_sqrt_pi = 0.5641895835477563;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = num::sqrt_two * nodes[i];
    xi[i] = std::exp(-s * z + drift);
    w[i] = weights[i] * inv_sqrt_pi;
  }
  const auto budget = [&](double y) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += w[i] * xi[i] * utility_.inverse_marginal(y * xi[i]);
    return acc;
  };
  const auto budget_slope = [&](double y) {  // d budget / dy = E[xi^2 I'(y xi)]
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double yi = y * xi[i];
      acc += w[i] * xi[i] * xi[i] / utility_.u_double_prime(utility_.inverse_marginal(yi));
    }
    return acc;
  };

  // bracket from the marginal-utility proxy, then safeguarded Newton in log y
  double y_lo = utility_.u_prime(x), y_hi = y_lo;
  int guard = 0;
  while (budget(y_lo) < x) {
    y_lo *= 0.25;
    if (++guard > 600 || y_lo < 1e-300)
      throw std::domain_error("solve_merton_general: x not reachable (lower bracket)");
  }
  guard = 0;
  while (budget(y_hi) > x) {
    y_hi *= 4.0;
    if (++guard > 600 || y_hi > 1e300)
      throw std::domain_error("solve_merton_general: x not reachable (upper bracket)");
  }
  double y = std::sqrt(y_lo * y_hi);
  double resid = budget(y) - x;
  for (int it = 0; it < 200; ++it) {
    if (std::abs(resid) <= budget_rel_tol_ * std::max(1.0, x)) break;
    if (resid > 0.0)
      y_lo = y;
    else
      y_hi = y;
    const double slope = budget_slope(y);  // negative
    double yn = y - resid / slope;
    if (!(yn > y_lo && yn < y_hi)) yn = std::sqrt(y_lo * y_hi);
    y = yn;
    resid = budget(y) - x;
    if (it == 199)
      throw numeric_error("solve_merton_general: budget root-finding did not converge");
  }

  Dual d;
  d.y_star = y;
  double val = 0.0;
  for (std::size_t i = 0; i < n; ++i) val += w[i] * utility_.u(utility_.inverse_marginal(y * xi[i]));
  d.value = val;
  d.value_xx = 1.0 / budget_slope(y);
  return d;
}

double MertonSolution::value(double t, double x) const {
  check_txy(t, T_, x);
  const double tau = T_ - t;
  if (power_) {
    return std::pow(x, 1.0 - gamma_) / (1.0 - gamma_) *
           std::exp((1.0 - gamma_) / (2.0 * gamma_) * lambda_ * lambda_ * tau);
  }
  if (tau == 0.0) return utility_.u(x);
  return solve_dual(tau, x).value;
}

double MertonSolution::value_x(double t, double x) const {
  check_txy(t, T_, x);
  const double tau = T_ - t;
  if (power_) {
    return std::pow(x, -gamma_) *
           std::exp((1.0 - gamma_) / (2.0 * gamma_) * lambda_ * lambda_ * tau);
  }
  if (tau == 0.0) return utility_.u_prime(x);
  return solve_dual(tau, x).y_star;  // envelope: M_x = y*
}

double MertonSolution::value_xx(double t, double x) const {
  check_txy(t, T_, x);
  const double tau = T_ - t;
  if (power_) {
    return -gamma_ * std::pow(x, -gamma_ - 1.0) *
           std::exp((1.0 - gamma_) / (2.0 * gamma_) * lambda_ * lambda_ * tau);
  }
  if (tau == 0.0) return utility_.u_double_prime(x);
  return solve_dual(tau, x).value_xx;
}

double MertonSolution::risk_tolerance(double t, double x) const {
  if (power_) {
    check_txy(t, T_, x);
    return x / gamma_;
  }
  const double mx = value_x(t, x);
  const double mxx = value_xx(t, x);
  if (!(mxx < 0.0)) throw numeric_error("risk_tolerance: M_xx must be negative");
  return -mx / mxx;
}

double apply_Dk(const MertonSolution& sol, int k, const ScalarField& f, double t, double x) {
  if (!(x > 0.0)) throw std::domain_error("apply_Dk: x must be positive");
  if (k != 1 && k != 2) throw std::invalid_argument("apply_Dk: k must be 1 or 2");
  const double R = sol.risk_tolerance(t, x);
  const double h = 1e-5 * x;
  if (k == 1) {
    const double fx = (f(t, x + h) - f(t, x - h)) / (2.0 * h);
    return R * fx;
  }
  const double fxx = (f(t, x + h) - 2.0 * f(t, x) + f(t, x - h)) / (h * h);
  return R * R * fxx;
}

double apply_D1_squared_value(const MertonSolution& sol, double t, double x) {
  // D_1^2 v = R d/dx (R v_x); v_x and v_xx are exact, so only one numerical
  // derivative level is needed. Richardson-extrapolated central difference.
  const auto g = [&](double xx) { return sol.risk_tolerance(t, xx) * sol.value_x(t, xx); };
  const double h = 1e-4 * x;
  const double d_h = (g(x + h) - g(x - h)) / (2.0 * h);
  const double d_h2 = (g(x + 0.5 * h) - g(x - 0.5 * h)) / h;
  const double dgdx = (4.0 * d_h2 - d_h) / 3.0;
  return sol.risk_tolerance(t, x) * dgdx;
}

double pde_residual(const MertonSolution& sol, std::span<const double> t_grid,
                    std::span<const double> x_grid, double lambda_override) {
  const double lam = lambda_override >= 0.0 ? lambda_override : sol.lambda_param();
  const double lam2 = lam * lam;
  const double T = sol.horizon();
  double worst = 0.0;
  for (double t : t_grid) {
    if (t < 0.0 || t >= T) throw std::domain_error("pde_residual: t must lie in [0, T)");
    double dt = std::min(1e-4 * std::max(1.0, T), 0.25 * (T - t));
    for (double x : x_grid) {
      double vt;
      if (t >= dt) {
        vt = (sol.value(t + dt, x) - sol.value(t - dt, x)) / (2.0 * dt);
      } else {
        vt = (-3.0 * sol.value(t, x) + 4.0 * sol.value(t + dt, x) - sol.value(t + 2.0 * dt, x)) /
             (2.0 * dt);
      }
      const double v = sol.value(t, x);
      const double R = sol.risk_tolerance(t, x);
      const double d1 = R * sol.value_x(t, x);
      const double d2 = R * R * sol.value_xx(t, x);
      const double resid = vt + 0.5 * lam2 * d2 + lam2 * d1;
      worst = std::max(worst, std::abs(resid) / std::max(std::abs(v), 1e-12));
    }
  }
  return worst;
}

}  // namespace fouport::merton
