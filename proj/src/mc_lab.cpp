#include "fouport/mc_lab.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fouport/parallel.hpp"

namespace fouport::mclab {

using num::numeric_error;

namespace {

// Per-path integral functionals on the shared grid (left-point Ito sums):
// A = int lambda^2 ds, B = int lambda dW^Y, C = int mu ds, D = int sigma^2 ds,
// E = int sigma dW^Y; Bw/Ew use the correlated W instead of W^Y.
struct PathFun {
  double A = 0, B = 0, C = 0, D = 0, E = 0, Bw = 0, Ew = 0;
};

std::vector<PathFun> accumulate_functionals(const fou::FactorEngine& eng,
                                            const market::MarketModel& model, long n_paths,
                                            bool with_w, int threads) {
  const fou::SimGrid& grid = eng.grid();
  const int n = grid.n_steps;
  const double dt = grid.dt;
  const double rho = model.rho();
  std::vector<PathFun> out(static_cast<std::size_t>(n_paths));
  parallel_for(std::size_t(n_paths), threads, [&](std::size_t begin, std::size_t end) {
    std::vector<double> wy(static_cast<std::size_t>(n)), y(static_cast<std::size_t>(n) + 1), w;
    if (with_w) w.assign(std::size_t(n), 0.0);
    for (std::size_t path = begin; path < end; ++path) {
      eng.sample_future(path, wy, y);
      if (with_w) eng.sample_w(path, rho, wy, w);
      PathFun f;
      for (int k = 0; k < n; ++k) {
        const market::NodeEval e = model.eval(y[std::size_t(k)]);
        const double dwy = wy[std::size_t(k)];
        f.A += e.lam2 * dt;
        f.B += e.lam * dwy;
        f.C += e.mu * dt;
        f.D += e.sigma_sq * dt;
        f.E += e.sigma * dwy;
        if (with_w) {
          f.Bw += e.lam * w[std::size_t(k)];
          f.Ew += e.sigma * w[std::size_t(k)];
        }
      }
      out[path] = f;
    }
  });
  return out;
}

struct Coeffs {
  double q, pref, c_opt_A, c_opt_B, c_pi0_A, c_pi0_B, c_pr_C, c_pr_D, c_pr_E;
  bool rb;
};

Coeffs make_coeffs(const asym::ExpansionInputs& in, const McOptions& opt) {
  const double g = in.gamma;
  const double rho = in.rho();
  Coeffs c;
  c.rb = opt.rao_blackwell;
  c.q = market::distortion_q(g, rho);
  c.pref = std::pow(opt.x0, 1.0 - g) / (1.0 - g);
  c.c_opt_A = (1.0 - g) / (2.0 * g);
  c.c_opt_B = rho * (1.0 - g) / g;
  const double c3 = (-2.0 * g * g + 3.0 * g - 1.0) / (2.0 * g * g);
  const double c4 = (1.0 - g) / g;
  if (c.rb) {
    // E[exp(c4 sqrt(1-rho^2) int lambda dWperp) | G] folded into the drift
    c.c_pi0_A = c3 + 0.5 * c4 * c4 * (1.0 - rho * rho);
    c.c_pi0_B = c4 * rho;
  } else {
    c.c_pi0_A = c3;
    c.c_pi0_B = c4;  // applied to Bw
  }
  const double cbar = in.averages.mu_bar / (g * in.averages.sigma_bar_sq);
  c.c_pr_C = (1.0 - g) * cbar;
  c.c_pr_D = -0.5 * (1.0 - g) * cbar * cbar;
  if (c.rb) {
    c.c_pr_D += 0.5 * (1.0 - g) * (1.0 - g) * cbar * cbar * (1.0 - rho * rho);
    c.c_pr_E = (1.0 - g) * cbar * rho;
  } else {
    c.c_pr_E = (1.0 - g) * cbar;  // applied to Ew
  }
  return c;
}

struct GapAdjustment {
  double correction = 0.0;  // beta' * sample mean of the controls
  double std_error = 0.0;   // SE of the regression residual
};

// Least-squares projection of u onto zero-mean controls; the controls have
// exactly zero expectation, so subtracting beta' * mean(g) is unbiased.
GapAdjustment adjust_with_controls(const std::vector<double>& u,
                                   const std::vector<std::vector<double>>& controls) {
  const num::MeanVar mu = num::mean_var(u);
  GapAdjustment out;
  if (controls.empty() || u.size() < 16) {
    out.std_error = mu.std_error();
    return out;
  }
  const std::size_t k = controls.size();
  const std::size_t n = u.size();
  std::vector<double> gbar(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) gbar[j] = num::mean_var(controls[j]).mean;
  std::vector<double> S(k * k, 0.0), cu(k, 0.0);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t i = 0; i < n; ++i)
      cu[a] += (controls[a][i] - gbar[a]) * (u[i] - mu.mean);
    cu[a] /= double(n - 1);
    for (std::size_t b = 0; b <= a; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        s += (controls[a][i] - gbar[a]) * (controls[b][i] - gbar[b]);
      S[a * k + b] = S[b * k + a] = s / double(n - 1);
    }
  }
  // tiny ridge keeps near-collinear controls harmless
  for (std::size_t a = 0; a < k; ++a) S[a * k + a] *= 1.0 + 1e-10;
  // Gaussian elimination with partial pivoting
  std::vector<double> beta = cu;
  std::vector<double> M = S;
  std::vector<std::size_t> piv(k);
  for (std::size_t a = 0; a < k; ++a) piv[a] = a;
  bool singular = false;
  for (std::size_t col = 0; col < k && !singular; ++col) {
    std::size_t best = col;
    for (std::size_t r = col + 1; r < k; ++r)
      if (std::abs(M[r * k + col]) > std::abs(M[best * k + col])) best = r;
    if (std::abs(M[best * k + col]) < 1e-300) {
      singular = true;
      break;
    }
    if (best != col) {
      for (std::size_t cc = 0; cc < k; ++cc) std::swap(M[col * k + cc], M[best * k + cc]);
      std::swap(beta[col], beta[best]);
    }
    for (std::size_t r = col + 1; r < k; ++r) {
      const double fmul = M[r * k + col] / M[col * k + col];
      for (std::size_t cc = col; cc < k; ++cc) M[r * k + cc] -= fmul * M[col * k + cc];
      beta[r] -= fmul * beta[col];
    }
  }
  if (singular) {
    out.std_error = mu.std_error();
    return out;
  }
  for (std::size_t col = k; col-- > 0;) {
    for (std::size_t cc = col + 1; cc < k; ++cc) beta[col] -= M[col * k + cc] * beta[cc];
    beta[col] /= M[col * k + col];
  }
  double var_res = mu.var;
  for (std::size_t a = 0; a < k; ++a) {
    out.correction += beta[a] * gbar[a];
    var_res -= beta[a] * cu[a];
  }
  out.std_error = std::sqrt(std::max(var_res, 0.0) / double(n));
  return out;
}

inline double f_optimal(const Coeffs& c, const PathFun& f) {
  return std::exp(c.c_opt_A * f.A + c.c_opt_B * f.B);
}
inline double f_pi0(const Coeffs& c, const PathFun& f) {
  return std::exp(c.c_pi0_A * f.A + c.c_pi0_B * (c.rb ? f.B : f.Bw));
}
inline double f_practical(const Coeffs& c, const PathFun& f) {
  return std::exp(c.c_pr_C * f.C + c.c_pr_D * f.D + c.c_pr_E * (c.rb ? f.E : f.Ew));
}

EstimatorReport report_from(const fou::FactorEngine& eng, long n_paths, std::string id) {
  EstimatorReport r;
  r.n_paths = n_paths;
  r.seed = eng.seed();
  r.omega_id = eng.omega_id();
  r.estimator_id = std::move(id);
  return r;
}

void check_power_ok(const asym::ExpansionInputs& in) {
  in.validate();  // gamma > 0, != 1 implies the distortion formula applies
}

}  // namespace

EstimatorReport estimate_value_optimal(const fou::FactorEngine& omega,
                                       const asym::ExpansionInputs& in, long n_paths,
                                       const McOptions& opt) {
  check_power_ok(in);
  const Coeffs c = make_coeffs(in, opt);
  const auto funs = accumulate_functionals(omega, *in.model, n_paths, false, opt.threads);
  std::vector<double> vals(funs.size());
  for (std::size_t i = 0; i < funs.size(); ++i) vals[i] = f_optimal(c, funs[i]);
  const num::MeanVar mv = num::mean_var(vals);
  EstimatorReport r = report_from(omega, n_paths, "optimal-q");
  r.estimate = c.pref * std::pow(mv.mean, c.q);
  r.std_error = std::abs(c.pref) * c.q * std::pow(mv.mean, c.q - 1.0) * mv.std_error();
  return r;
}

EstimatorReport estimate_value_pi0(const fou::FactorEngine& omega, const asym::ExpansionInputs& in,
                                   long n_paths, const McOptions& opt) {
  check_power_ok(in);
  const Coeffs c = make_coeffs(in, opt);
  const auto funs = accumulate_functionals(omega, *in.model, n_paths, !c.rb, opt.threads);
  std::vector<double> vals(funs.size());
  for (std::size_t i = 0; i < funs.size(); ++i) vals[i] = f_pi0(c, funs[i]);
  const num::MeanVar mv = num::mean_var(vals);
  EstimatorReport r = report_from(omega, n_paths, c.rb ? "pi0" : "pi0-direct");
  r.estimate = c.pref * mv.mean;
  r.std_error = std::abs(c.pref) * mv.std_error();
  return r;
}

EstimatorReport estimate_value_practical(const fou::FactorEngine& omega,
                                         const asym::ExpansionInputs& in, long n_paths,
                                         const McOptions& opt) {
  check_power_ok(in);
  const Coeffs c = make_coeffs(in, opt);
  const auto funs = accumulate_functionals(omega, *in.model, n_paths, !c.rb, opt.threads);
  std::vector<double> vals(funs.size());
  for (std::size_t i = 0; i < funs.size(); ++i) vals[i] = f_practical(c, funs[i]);
  const num::MeanVar mv = num::mean_var(vals);
  EstimatorReport r = report_from(omega, n_paths, c.rb ? "practical" : "practical-direct");
  r.estimate = c.pref * mv.mean;
  r.std_error = std::abs(c.pref) * mv.std_error();
  return r;
}

ValueTriple estimate_all(const fou::FactorEngine& omega, const asym::ExpansionInputs& in,
                         long n_paths, const McOptions& opt) {
  check_power_ok(in);
  const Coeffs c = make_coeffs(in, opt);
  const auto funs = accumulate_functionals(omega, *in.model, n_paths, !c.rb, opt.threads);
  std::vector<double> v1(funs.size()), v2(funs.size()), v3(funs.size());
  for (std::size_t i = 0; i < funs.size(); ++i) {
    v1[i] = f_optimal(c, funs[i]);
    v2[i] = f_pi0(c, funs[i]);
    v3[i] = f_practical(c, funs[i]);
  }
  const num::MeanVar m1 = num::mean_var(v1);
  const num::MeanVar m2 = num::mean_var(v2);
  const num::MeanVar m3 = num::mean_var(v3);

  ValueTriple out;
  out.optimal = report_from(omega, n_paths, "optimal-q");
  out.optimal.estimate = c.pref * std::pow(m1.mean, c.q);
  out.optimal.std_error = std::abs(c.pref) * c.q * std::pow(m1.mean, c.q - 1.0) * m1.std_error();
  out.pi0 = report_from(omega, n_paths, c.rb ? "pi0" : "pi0-direct");
  out.pi0.estimate = c.pref * m2.mean;
  out.pi0.std_error = std::abs(c.pref) * m2.std_error();
  out.practical = report_from(omega, n_paths, c.rb ? "practical" : "practical-direct");
  out.practical.estimate = c.pref * m3.mean;
  out.practical.std_error = std::abs(c.pref) * m3.std_error();

  // Paired gaps, delta-method linearization of m1^q, regression-adjusted by
  // exponential-martingale controls with exact unit mean.
  const double lin = c.q * std::pow(m1.mean, c.q - 1.0);
  std::vector<std::vector<double>> controls;
  if (opt.control_variates) {
    const double b1 = c.c_opt_B;  // rho (1-g)/g, the shared W^Y loading
    const double cbar = in.averages.mu_bar / (in.gamma * in.averages.sigma_bar_sq);
    const double b2 = (1.0 - in.gamma) * cbar * in.rho();
    controls.emplace_back(funs.size());
    controls.emplace_back(funs.size());
    for (std::size_t i = 0; i < funs.size(); ++i) {
      controls[0][i] = std::exp(b1 * funs[i].B - 0.5 * b1 * b1 * funs[i].A) - 1.0;
      controls[1][i] = std::exp(b2 * funs[i].E - 0.5 * b2 * b2 * funs[i].D) - 1.0;
    }
    if (!c.rb) {
      const double c4 = (1.0 - in.gamma) / in.gamma;
      const double b3 = (1.0 - in.gamma) * cbar;
      controls.emplace_back(funs.size());
      controls.emplace_back(funs.size());
      for (std::size_t i = 0; i < funs.size(); ++i) {
        controls[2][i] = std::exp(c4 * funs[i].Bw - 0.5 * c4 * c4 * funs[i].A) - 1.0;
        controls[3][i] = std::exp(b3 * funs[i].Ew - 0.5 * b3 * b3 * funs[i].D) - 1.0;
      }
    }
  }
  std::vector<double> u(funs.size());
  const auto paired_gap = [&](auto&& fill, double plain_gap, double& gap, double& se) {
    for (std::size_t i = 0; i < funs.size(); ++i) u[i] = fill(i);
    const GapAdjustment adj = adjust_with_controls(u, controls);
    gap = plain_gap - c.pref * adj.correction;
    se = std::abs(c.pref) * adj.std_error;
  };
  paired_gap([&](std::size_t i) { return lin * v1[i] - v2[i]; },
             out.optimal.estimate - out.pi0.estimate, out.gap_pi0, out.gap_pi0_se);
  paired_gap([&](std::size_t i) { return lin * v1[i] - v3[i]; },
             out.optimal.estimate - out.practical.estimate, out.gap_practical,
             out.gap_practical_se);
  paired_gap([&](std::size_t i) { return v2[i] - v3[i]; },
             out.pi0.estimate - out.practical.estimate, out.gap_pi0_practical,
             out.gap_pi0_practical_se);
  return out;
}

namespace {

double pi0_fraction(const market::NodeEval& e, double gamma) { return e.lam / (gamma * e.sigma); }

double strategy_fraction(const StrategySpec& s, const asym::ExpansionInputs& in,
                         const market::NodeEval& e, double t, double y) {
  switch (s.kind) {
    case StrategySpec::Kind::zero:
      return 0.0;
    case StrategySpec::Kind::pi0:
      return pi0_fraction(e, in.gamma);
    case StrategySpec::Kind::pi0_plus_correction: {
      const double H = in.params.H;
      const double tau = in.T - t;
      const double corr =
          tau <= 0.0 ? 0.0
                     : std::pow(in.params.eps, 1.0 - H) * in.rho() * (1.0 - in.gamma) /
                           (in.gamma * in.gamma * e.sigma) * in.averages.avg_lambda_lambda_prime /
                           (in.params.a * num::gamma_fn(H + 0.5)) * std::pow(tau, H - 0.5);
      return pi0_fraction(e, in.gamma) + corr;
    }
    case StrategySpec::Kind::practical:
      return s.practical_c;
    case StrategySpec::Kind::perturbed: {
      double f = s.base_scale * pi0_fraction(e, in.gamma);
      if (s.perturbation) f += std::pow(in.params.eps, s.alpha) * s.perturbation(t, y);
      return f;
    }
  }
  throw std::logic_error("strategy_fraction: unknown kind");
}

}  // namespace

WealthOutcome simulate_wealth(const StrategySpec& strategy, const fou::FactorPath& factor,
                              double x0, const asym::ExpansionInputs& in) {
  in.validate();
  if (!(x0 > 0.0)) throw std::domain_error("simulate_wealth: x0 must be positive");
  const int n = factor.grid.n_steps;
  const double dt = factor.grid.dt;
  WealthOutcome out;
  out.x_path.assign(std::size_t(n) + 1, x0);
  double lx = std::log(x0);
  for (int k = 0; k < n; ++k) {
    const double t = double(k) * dt;
    const double yk = factor.y_values[std::size_t(k)];
    const market::NodeEval e = in.model->eval(yk);
    const double f = strategy_fraction(strategy, in, e, t, yk);
    lx += (f * e.mu - 0.5 * f * f * e.sigma_sq) * dt + f * e.sigma * factor.w_increments[std::size_t(k)];
    if (!std::isfinite(lx) || std::abs(lx) > 700.0) {
      out.flagged = true;
      lx = std::clamp(lx, -700.0, 700.0);
    }
    out.x_path[std::size_t(k) + 1] = std::exp(lx);
  }
  out.x_terminal = out.x_path.back();
  return out;
}

WealthOutcome simulate_wealth_amount(const std::function<double(double, double, double)>& amount,
                                     const fou::FactorPath& factor, double x0,
                                     const asym::ExpansionInputs& in) {
  in.validate();
  if (!(x0 > 0.0)) throw std::domain_error("simulate_wealth_amount: x0 must be positive");
  const int n = factor.grid.n_steps;
  const double dt = factor.grid.dt;
  WealthOutcome out;
  out.x_path.assign(std::size_t(n) + 1, x0);
  double x = x0;
  for (int k = 0; k < n; ++k) {
    if (x <= 0.0) {  // absorbed at zero
      out.absorbed = true;
      out.x_path[std::size_t(k) + 1] = 0.0;
      continue;
    }
    const double t = double(k) * dt;
    const double y = factor.y_values[std::size_t(k)];
    const market::NodeEval e = in.model->eval(y);
    const double pi = amount(t, x, y);
    x += pi * (e.mu * dt + e.sigma * factor.w_increments[std::size_t(k)]);
    if (!std::isfinite(x)) {
      out.flagged = true;
      x = 0.0;
    }
    if (x <= 0.0) {
      x = 0.0;
      out.absorbed = true;
    }
    out.x_path[std::size_t(k) + 1] = x;
  }
  out.x_terminal = out.x_path.back();
  return out;
}

fou::SimGrid grid_for_eps(const fou::FouParams& params, double T, const GridPolicy& policy) {
  double dt_target = policy.dt_max;
  if (policy.eps_per_dt > 0.0) dt_target = std::min(dt_target, params.eps / policy.eps_per_dt);
  fou::SimGrid grid;
  grid.n_steps = std::max(1, int(std::ceil(T / dt_target - 1e-9)));
  grid.dt = T / double(grid.n_steps);
  grid.history_len = fou::history_steps_for_tail(params, grid.dt, policy.tail_fraction);
  return grid;
}

std::vector<ProbePoint> optimality_probe(double base_scale,
                                         const std::function<double(double, double)>& perturbation,
                                         double alpha, std::span<const double> eps_list,
                                         const asym::ExpansionInputs& base_inputs,
                                         const GridPolicy& policy, long n_paths, uint64_t seed,
                                         uint32_t omega_id, int threads) {
  base_inputs.validate();
  if (!(alpha > 0.0)) throw std::invalid_argument("optimality_probe: alpha must be positive");
  const double g = base_inputs.gamma;
  const double rho = base_inputs.rho();
  std::vector<ProbePoint> out;
  for (double eps : eps_list) {
    asym::ExpansionInputs in = base_inputs;
    in.params.eps = eps;
    const fou::SimGrid grid = grid_for_eps(in.params, in.T, policy);
    const fou::FactorEngine eng(in.params, grid, seed, omega_id, true);
    const int n = grid.n_steps;
    const double dt = grid.dt;
    const double eps_alpha = std::pow(eps, alpha);
    std::vector<double> u_pi(static_cast<std::size_t>(n_paths)), u_pi0(static_cast<std::size_t>(n_paths));
    std::vector<uint8_t> bad(std::size_t(n_paths), 0);
    parallel_for(std::size_t(n_paths), threads, [&](std::size_t begin, std::size_t end) {
      std::vector<double> wy(static_cast<std::size_t>(n)), y(static_cast<std::size_t>(n) + 1), w(static_cast<std::size_t>(n));
      for (std::size_t path = begin; path < end; ++path) {
        eng.sample_future(path, wy, y);
        eng.sample_w(path, rho, wy, w);
        double lx_pi = 0.0, lx_pi0 = 0.0;
        for (int k = 0; k < n; ++k) {
          const double t = double(k) * dt;
          const market::NodeEval e = in.model->eval(y[std::size_t(k)]);
          const double p0 = pi0_fraction(e, g);
          double fp = base_scale * p0;
          if (perturbation) fp += eps_alpha * perturbation(t, y[std::size_t(k)]);
          const double dw = w[std::size_t(k)];
          lx_pi += (fp * e.mu - 0.5 * fp * fp * e.sigma_sq) * dt + fp * e.sigma * dw;
          lx_pi0 += (p0 * e.mu - 0.5 * p0 * p0 * e.sigma_sq) * dt + p0 * e.sigma * dw;
        }
        if (!std::isfinite(lx_pi) || !std::isfinite(lx_pi0) || std::abs(lx_pi) > 650.0 ||
            std::abs(lx_pi0) > 650.0) {
          bad[path] = 1;
          continue;
        }
        u_pi[path] = std::exp((1.0 - g) * lx_pi) / (1.0 - g);
        u_pi0[path] = std::exp((1.0 - g) * lx_pi0) / (1.0 - g);
      }
    });
    ProbePoint pt;
    pt.eps = eps;
    pt.n_paths = n_paths;
    std::vector<double> diff, vp, vp0;
    diff.reserve(u_pi.size());
    vp.reserve(u_pi.size());
    vp0.reserve(u_pi.size());
    for (std::size_t i = 0; i < u_pi.size(); ++i) {
      if (bad[i]) {
        ++pt.n_flagged;
        continue;
      }
      diff.push_back(u_pi[i] - u_pi0[i]);
      vp.push_back(u_pi[i]);
      vp0.push_back(u_pi0[i]);
    }
    if (diff.empty()) throw numeric_error("optimality_probe: all paths flagged");
    const num::MeanVar mv = num::mean_var(diff);
    pt.gap = mv.mean;
    pt.gap_se = mv.std_error();
    pt.value_pi = num::mean_var(vp).mean;
    pt.value_pi0 = num::mean_var(vp0).mean;
    out.push_back(pt);
  }
  return out;
}

}  // namespace fouport::mclab
