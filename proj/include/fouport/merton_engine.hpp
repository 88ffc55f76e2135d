#pragma once
// Constant-coefficient Merton problem: closed form for power utility and a
// dual (terminal-wealth) construction for general utilities, plus the risk
// tolerance R = -M_x/M_xx and the D_k operators built from it.
#include <functional>
#include <span>
#include <string>
#include <utility>

#include "fouport/numerics.hpp"

namespace fouport::merton {

// Callable bundle describing a utility on (0, inf).
struct Utility {
  std::function<double(double)> u;
  std::function<double(double)> u_prime;
  std::function<double(double)> u_double_prime;
  std::function<double(double)> inverse_marginal;  // I = (U')^{-1}
  // parameters of the growth bound I(y) <= alpha + kappa y^{-alpha}
  double growth_alpha = 3.0;
  double growth_kappa = 100.0;
};

Utility power_utility(double gamma);
// Builds I by safeguarded Newton when no closed form is supplied.
Utility make_utility(std::function<double(double)> u, std::function<double(double)> u_prime,
                     std::function<double(double)> u_double_prime, double growth_alpha = 3.0,
                     double growth_kappa = 100.0);

// Monotonicity/concavity/Inada/growth checks on a log-spaced grid; throws
// std::invalid_argument on violation.
void validate_utility(const Utility& u);

class MertonSolution {
 public:
  // M(t,x) = x^{1-gamma}/(1-gamma) exp[(1-gamma)/(2 gamma) lambda^2 (T-t)]
  static MertonSolution power(double gamma, double lambda_const, double T);
  // Dual construction: y* solves E[xi I(y* xi)] = x with lognormal xi.
  static MertonSolution general(Utility utility, double lambda_const, double T,
                                int gh_nodes = 200, double budget_rel_tol = 1e-12);

  double value(double t, double x) const;
  double value_x(double t, double x) const;
  double value_xx(double t, double x) const;
  double risk_tolerance(double t, double x) const;

  double lambda_param() const { return lambda_; }
  double horizon() const { return T_; }
  bool is_power() const { return power_; }
  double power_gamma() const;

 private:
  MertonSolution() = default;
  struct Dual {
    double y_star;
    double value;
    double value_xx;
  };
  Dual solve_dual(double tau, double x) const;

  bool power_ = true;
  double gamma_ = 0.0;
  double lambda_ = 0.0;
  double T_ = 0.0;
  Utility utility_;
  num::QuadratureRule rule_;
  double budget_rel_tol_ = 1e-12;
};

// Free-function solver entry points.
inline MertonSolution solve_merton_power(double gamma, double lambda_const, double T) {
  return MertonSolution::power(gamma, lambda_const, T);
}
inline MertonSolution solve_merton_general(Utility utility, double lambda_const, double T,
                                           int gh_nodes = 200, double budget_rel_tol = 1e-12) {
  return MertonSolution::general(std::move(utility), lambda_const, T, gh_nodes, budget_rel_tol);
}

// D_k f = R^k d^k f / dx^k (k = 1 or 2), derivatives by central differences
// with step 1e-5 x unless the field supplies them analytically.
using ScalarField = std::function<double(double t, double x)>;
double apply_Dk(const MertonSolution& sol, int k, const ScalarField& f, double t, double x);

// D_1(D_1 value) with exact first derivatives of the solution and one
// Richardson-extrapolated finite difference.
double apply_D1_squared_value(const MertonSolution& sol, double t, double x);

// max over the grid of |d_t v + 1/2 lambda^2 D_2 v + lambda^2 D_1 v| / |v|.
// lambda_override lets callers probe a corrupted operator.
double pde_residual(const MertonSolution& sol, std::span<const double> t_grid,
                    std::span<const double> x_grid, double lambda_override = -1.0);

}  // namespace fouport::merton
