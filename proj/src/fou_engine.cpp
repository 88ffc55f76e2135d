#include "fouport/fou_engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "fouport/numerics.hpp"
#include "fouport/parallel.hpp"

namespace fouport::fou {

using num::integrate;
using num::numeric_error;
using num::pi;

void FouParams::validate() const {
  if (!(a > 0.0)) throw std::invalid_argument("FouParams: a must be positive");
  if (!(H > 0.5 && H < 1.0)) throw std::invalid_argument("FouParams: H must be in (1/2, 1)");
  if (!(eps > 0.0 && eps <= 1.0)) throw std::invalid_argument("FouParams: eps must be in (0, 1]");
}

double FouParams::sigma_ou_sq() const { return 1.0 / (2.0 * std::pow(a, 2.0 * H) * std::sin(pi * H)); }

double FouParams::sigma_ou() const { return std::sqrt(sigma_ou_sq()); }

void SimGrid::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("SimGrid: dt must be positive");
  if (n_steps < 1) throw std::invalid_argument("SimGrid: n_steps must be >= 1");
  if (history_len < 0) throw std::invalid_argument("SimGrid: history_len must be >= 0");
}

namespace {

// int_0^t u^p e^{-a(t-u)} du for p in [0, 1/2), a >= 0. Split into a power
// series near u = 0 (integrable endpoint) and smooth quadrature above.
double kernel_convolution_integral(double t, double a, double p) {
  if (t == 0.0) return 0.0;
  if (a == 0.0) return std::pow(t, p + 1.0) / (p + 1.0);
  const double delta = std::min(t, 1.0 / a);
  // series part: e^{-at} sum_k a^k delta^{p+1+k} / (k! (p+1+k))
  double series = 0.0;
  {
    double term = std::pow(delta, p + 1.0);  // a^k delta^{p+1+k} / k!
    for (int k = 0; k < 60; ++k) {
      series += term / (p + 1.0 + k);
      term *= a * delta / double(k + 1);
      if (term < 1e-18 * series) break;
    }
    series *= std::exp(-a * t);
  }
  double quad = 0.0;
  if (t > delta) {
    const double lo = std::max(delta, t - 60.0 / a);  // e^{-60} cutoff
    quad = integrate([&](double u) { return std::pow(u, p) * std::exp(-a * (t - u)); }, lo, t,
                     1e-15, 1e-12);
  }
  return series + quad;
}

// Asymptotic bracket D(t) with K(t) = t^{H-1/2} D(t) / Gamma(H+1/2),
// D = sum_{k>=1} d_k/(at)^k, valid once a t is large.
double kernel_asymptotic_bracket(double at, double p) {
  double coeff = p;  // prod_{j=0}^{k-1} (p - j) with alternating sign folded in
  double pow_at = at;
  double sum = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= 14; ++k) {
    const double term = coeff / pow_at;
    if (std::abs(term) >= prev) break;  // asymptotic series turned
    sum += term;
    prev = std::abs(term);
    if (prev < 1e-17 * std::abs(sum)) break;
    coeff *= -(p - k);
    pow_at *= at;
  }
  return sum;
}

}  // namespace

double kernel_K(double t, double a, double H) {
  if (t < 0.0) throw std::domain_error("kernel_K: t must be nonnegative");
  if (a < 0.0) throw std::invalid_argument("kernel_K: a must be nonnegative");
  if (!(H >= 0.5 && H < 1.0)) throw std::invalid_argument("kernel_K: H must be in [1/2, 1)");
  const double p = H - 0.5;
  const double inv_gamma = 1.0 / num::gamma_fn(H + 0.5);
  if (t == 0.0) return p == 0.0 ? inv_gamma : 0.0;
  if (a * t >= 60.0) {
    return std::pow(t, p) * kernel_asymptotic_bracket(a * t, p) * inv_gamma;
  }
  const double J = kernel_convolution_integral(t, a, p);
  return (std::pow(t, p) - a * J) * inv_gamma;
}

double scaled_kernel(double t, const FouParams& p) {
  p.validate();
  return kernel_K(t / p.eps, p.a, p.H) / std::sqrt(p.eps);
}

double stationary_variance(const FouParams& p) {
  p.validate();
  return p.sigma_ou_sq();
}

namespace {

// Euler-transformed sum of alternating half-period integrals of
// cos(om x) g(x) over [1, inf).
double oscillatory_tail(double om, const std::function<double(double)>& g, double tol) {
  auto f = [&](double x) { return std::cos(om * x) * g(x); };
  // boundaries at the zeros of cos(om x)
  const double half = pi / om;
  double first_zero = (std::floor((om * 1.0 - 0.5 * pi) / pi) + 1.0) * pi / om + 0.5 * pi / om;
  while (first_zero <= 1.0) first_zero += half;
  std::vector<double> avg;
  double partial = 0.0;
  double prev_est = std::numeric_limits<double>::quiet_NaN();
  double lo = 1.0;
  for (int seg = 0; seg < 600; ++seg) {
    const double hi = seg == 0 ? first_zero : lo + half;
    const double term = integrate(f, lo, hi, 1e-15, 1e-11);
    partial += term;
    avg.push_back(partial);
    for (int j = int(avg.size()) - 2; j >= 0; --j) avg[j] = 0.5 * (avg[j] + avg[j + 1]);
    const double est = avg[0];
    if (seg >= 6 && std::abs(est - prev_est) < tol * (1.0 + std::abs(est))) return est;
    prev_est = est;
    lo = hi;
  }
  throw numeric_error("covariance_CY: oscillatory tail did not converge (om=" +
                      std::to_string(om) + ")");
}

}  // namespace

double covariance_CY(double s, const FouParams& p) {
  p.validate();
  if (s < 0.0) throw std::domain_error("covariance_CY: lag must be nonnegative");
  const double H = p.H;
  const double om = p.a * s;
  const double prefactor = 2.0 * std::sin(pi * H) / pi;
  // head on [0,1]: substitution x = v^q removes the x^{1-2H} singularity
  const double q = 1.0 / (2.0 - 2.0 * H);
  const double head = q * integrate(
                              [&](double v) {
                                const double x = std::pow(v, q);
                                return std::cos(om * x) / (1.0 + x * x);
                              },
                              0.0, 1.0, 1e-14, 1e-12);
  auto g = [&](double x) { return std::pow(x, 1.0 - 2.0 * H) / (1.0 + x * x); };
  double tail;
  if (om < 1e-10) {
    const double X = 40.0;
    tail = integrate(g, 1.0, X, 1e-14, 1e-12);
    // remaining mass: sum_k (-1)^k X^{-2H-2k} / (2H + 2k)
    double xp = std::pow(X, -2.0 * H);
    for (int k = 0; k < 60; ++k) {
      const double term = xp / (2.0 * H + 2.0 * k);
      tail += (k % 2 == 0) ? term : -term;
      xp /= X * X;
      if (term < 1e-17) break;
    }
  } else {
    tail = oscillatory_tail(om, g, 1e-12);
  }
  return prefactor * (head + tail);
}

double kernel_sq_tail(double x, double a, double H) {
  if (!(H > 0.5 && H < 1.0)) throw std::invalid_argument("kernel_sq_tail: H must be in (1/2,1)");
  if (!(a > 0.0 && x > 0.0)) throw std::invalid_argument("kernel_sq_tail: need a > 0, x > 0");
  // K(v)^2 ~ v^{2H-3}/(a Gamma(H-1/2))^2 [1 + 2 b1/(a v) + (b1^2 + 2 b2)/(a v)^2],
  // b1 = 3/2 - H, b2 = (3/2 - H)(5/2 - H)
  const double c = a * num::gamma_fn(H - 0.5);
  const double b1 = 1.5 - H;
  const double b2 = (1.5 - H) * (2.5 - H);
  const double lead = std::pow(x, 2.0 * H - 2.0) / ((2.0 - 2.0 * H) * c * c);
  const double corr1 = 2.0 * b1 / a * std::pow(x, 2.0 * H - 3.0) / ((3.0 - 2.0 * H) * c * c);
  const double corr2 =
      (b1 * b1 + 2.0 * b2) / (a * a) * std::pow(x, 2.0 * H - 4.0) / ((4.0 - 2.0 * H) * c * c);
  return lead + corr1 + corr2;
}

double kernel_sq_head(double x, double a, double H) {
  if (x < 0.0) throw std::domain_error("kernel_sq_head: x must be nonnegative");
  if (x == 0.0) return 0.0;
  const num::QuadratureRule gl = num::gauss_legendre(32);
  const auto f = [&](double u) {
    const double k = kernel_K(u, a, H);
    return k * k;
  };
  const double xb = std::min(x, 0.05 / std::max(a, 1.0));
  // flatten K^2 ~ u^{2H-1} at zero with u = v^{1/(2H)}
  const double p = 2.0 * H;
  double total = num::paneled_integral(
      [&](double v) {
        const double u = std::pow(v, 1.0 / p);
        return f(u) * u / (p * v);
      },
      0.0, std::pow(xb, p), 8, gl);
  double lo = xb;
  while (lo < x) {
    const double hi = std::min(x, 2.0 * lo);
    total += num::paneled_integral(f, lo, hi, 4, gl);
    lo = hi;
  }
  return total;
}

double kernel_sq_integral(double a, double H) {
  if (a == 0.0) throw std::invalid_argument("kernel_sq_integral: diverges for a = 0");
  const double L = 240.0 / a;
  return kernel_sq_head(L, a, H) + kernel_sq_tail(L, a, H);
}

int history_steps_for_tail(const FouParams& p, double dt, double tail_fraction) {
  p.validate();
  if (!(dt > 0.0)) throw std::invalid_argument("history_steps_for_tail: dt must be positive");
  if (!(tail_fraction > 0.0 && tail_fraction < 1.0))
    throw std::invalid_argument("history_steps_for_tail: tail_fraction must be in (0,1)");
  const double target = tail_fraction * p.sigma_ou_sq();
  const double lo_valid = 10.0 / p.a;  // asymptotic tail trusted above here
  double x;
  if (kernel_sq_tail(lo_valid, p.a, p.H) <= target) {
    // short history suffices; locate by exact head integrals
    const double total = kernel_sq_integral(p.a, p.H);
    double lo = 0.0, hi = lo_valid;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double head = mid == 0.0 ? 0.0 : kernel_sq_head(mid, p.a, p.H);
      (total - head <= target ? hi : lo) = mid;
      if (hi - lo < 1e-3 * std::max(1.0, hi)) break;
    }
    x = hi;
  } else {
    double lo = lo_valid, hi = lo_valid;
    while (kernel_sq_tail(hi, p.a, p.H) > target) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (kernel_sq_tail(mid, p.a, p.H) <= target ? hi : lo) = mid;
      if (hi - lo < 1e-6 * hi) break;
    }
    x = hi;
  }
  const double span = p.eps * x;
  return std::max(1, int(std::ceil(span / dt)));
}

double history_tail_variance(const FouParams& p, const SimGrid& grid) {
  const double x = grid.history_span() / p.eps;
  if (x <= 0.0) return p.sigma_ou_sq();
  if (x >= 10.0 / p.a) return kernel_sq_tail(x, p.a, p.H);
  return std::max(0.0, kernel_sq_integral(p.a, p.H) - kernel_sq_head(x, p.a, p.H));
}

std::vector<double> kernel_table(const FouParams& p, double dt, std::size_t n) {
  p.validate();
  std::vector<double> table(n + 1, 0.0);
  const double inv_sqrt_eps = 1.0 / std::sqrt(p.eps);
  parallel_for(n, 0, [&](std::size_t begin, std::size_t end) {
    for (std::size_t l = begin; l < end; ++l)
      table[l + 1] = kernel_K((double(l + 1) * dt) / p.eps, p.a, p.H) * inv_sqrt_eps;
  });
  return table;
}

FactorEngine::SharedTable FactorEngine::build_table(const FouParams& params,
                                                    const SimGrid& grid) {
  return std::make_shared<const std::vector<double>>(
      kernel_table(params, grid.dt, std::size_t(grid.history_len) + grid.n_steps));
}

FactorEngine::FactorEngine(const FouParams& params, const SimGrid& grid, uint64_t seed,
                           uint32_t omega_id, bool shared_history, uint32_t future_salt,
                           SharedTable table)
    : params_(params), grid_(grid), seed_(seed), omega_id_(omega_id),
      future_salt_(future_salt == kSaltFromOmega ? omega_id : future_salt),
      shared_history_(shared_history), kernel_(std::move(table)) {
  params_.validate();
  grid_.validate();
  const std::size_t need = std::size_t(grid_.history_len) + grid_.n_steps + 1;
  if (!kernel_) {
    kernel_ = build_table(params_, grid_);
  } else if (kernel_->size() < need) {
    throw std::invalid_argument("FactorEngine: supplied kernel table too short");
  }
  if (shared_history_) {
    hist_mean_.assign(std::size_t(grid_.n_steps) + 1, 0.0);
    history_contribution(0, hist_mean_);
  }
}

void FactorEngine::history_contribution(uint64_t history_path, std::span<double> h) const {
  const int nh = grid_.history_len;
  const int nf = grid_.n_steps;
  std::fill(h.begin(), h.end(), 0.0);
  if (nh == 0) return;
  const double sqrt_dt = std::sqrt(grid_.dt);
  std::vector<double> dw(static_cast<std::size_t>(nh));
  rng::NormalStream hist(seed_, rng::StreamClass::history_wy, history_path, omega_id_);
  for (int j = 0; j < nh; ++j) dw[std::size_t(j)] = sqrt_dt * hist.next();
  // increment j covers [-(nh-j) dt, -(nh-j-1) dt); lag to node k is (k+nh-j) dt
  for (int k = 0; k <= nf; ++k) {
    const double* kk = kernel_->data() + k;
    double acc = 0.0;
    for (int j = 0; j < nh; ++j) acc += kk[nh - j] * dw[std::size_t(j)];
    h[std::size_t(k)] = acc;
  }
}

void FactorEngine::sample_future(uint64_t path_id, std::span<double> wy,
                                 std::span<double> y) const {
  const int nf = grid_.n_steps;
  if (int(wy.size()) != nf || int(y.size()) != nf + 1)
    throw std::invalid_argument("sample_future: bad span sizes");
  const double sqrt_dt = std::sqrt(grid_.dt);
  rng::NormalStream fut(seed_, rng::StreamClass::future_wy, path_id, future_salt_);
  for (int i = 0; i < nf; ++i) wy[std::size_t(i)] = sqrt_dt * fut.next();

  if (shared_history_) {
    std::copy(hist_mean_.begin(), hist_mean_.end(), y.begin());
  } else {
    history_contribution(path_id, y);
  }
  const double* K = kernel_->data();
  for (int k = 1; k <= nf; ++k) {
    double acc = 0.0;
    for (int i = 0; i < k; ++i) acc += K[k - i] * wy[std::size_t(i)];
    y[std::size_t(k)] += acc;
  }
}

void FactorEngine::sample_w(uint64_t path_id, double rho, std::span<const double> wy,
                            std::span<double> w) const {
  if (!(std::abs(rho) < 1.0)) throw std::invalid_argument("sample_w: |rho| must be < 1");
  if (w.size() != wy.size()) throw std::invalid_argument("sample_w: bad span sizes");
  const double comp = std::sqrt(1.0 - rho * rho);
  const double sqrt_dt = std::sqrt(grid_.dt);
  rng::NormalStream perp(seed_, rng::StreamClass::future_wperp, path_id, future_salt_);
  for (std::size_t i = 0; i < wy.size(); ++i) w[i] = rho * wy[i] + comp * sqrt_dt * perp.next();
}

std::vector<FactorPath> simulate_factor(const FouParams& p, const SimGrid& grid, double rho,
                                        uint64_t seed, int n_paths, bool shared_history,
                                        uint32_t omega_id) {
  if (n_paths < 1) throw std::invalid_argument("simulate_factor: n_paths must be >= 1");
  if (!(std::abs(rho) < 1.0)) throw std::invalid_argument("simulate_factor: |rho| must be < 1");
  {
    const double tail = history_tail_variance(p, grid);
    if (tail > 1e-2 * p.sigma_ou_sq()) {
      const double bound = std::pow(std::max(grid.history_span(), grid.dt) / p.eps,
                                    2.0 * p.H - 2.0);
      std::fprintf(stderr,
                   "simulate_factor: history span %.4g leaves tail variance %.3e "
                   "(> 1%% of sigma_ou^2; tail bound (M/eps)^(2H-2) = %.3e)\n",
                   grid.history_span(), tail, bound);
    }
  }
  FactorEngine engine(p, grid, seed, omega_id, shared_history);
  std::vector<FactorPath> out(static_cast<std::size_t>(n_paths));
  const int nh = grid.history_len;
  const int nf = grid.n_steps;
  const double sqrt_dt = std::sqrt(grid.dt);
  parallel_for(std::size_t(n_paths), 0, [&](std::size_t begin, std::size_t end) {
    for (std::size_t pth = begin; pth < end; ++pth) {
      FactorPath& fp = out[pth];
      fp.grid = grid;
      fp.wy_increments.assign(std::size_t(nh + nf), 0.0);
      fp.w_increments.assign(std::size_t(nf), 0.0);
      fp.y_values.assign(std::size_t(nf) + 1, 0.0);
      const uint64_t hist_path = shared_history ? 0 : pth;
      rng::NormalStream hist(seed, rng::StreamClass::history_wy, hist_path, omega_id);
      for (int j = 0; j < nh; ++j) fp.wy_increments[std::size_t(j)] = sqrt_dt * hist.next();
      std::span<double> fut(fp.wy_increments.data() + nh, std::size_t(nf));
      engine.sample_future(pth, fut, fp.y_values);
      engine.sample_w(pth, rho, fut, fp.w_increments);
    }
  });
  return out;
}

std::vector<double> conditional_mean_from_increments(const FouParams& p, double dt,
                                                     std::span<const double> increments,
                                                     int n_future) {
  if (n_future < 0) throw std::invalid_argument("conditional_mean_from_increments: n_future < 0");
  const std::size_t len = increments.size();
  const std::vector<double> K = kernel_table(p, dt, len + std::size_t(n_future));
  std::vector<double> h(std::size_t(n_future) + 1, 0.0);
  for (int k = 0; k <= n_future; ++k) {
    const double* kk = K.data() + k;
    double acc = 0.0;
    for (std::size_t j = 0; j < len; ++j) acc += kk[len - j] * increments[j];
    h[std::size_t(k)] = acc;
  }
  return h;
}

HermiteCoefficients hermite_coefficients(const std::function<double(double)>& f, int k_max,
                                         double sigma_ou, int n_nodes) {
  if (k_max < 0) throw std::invalid_argument("hermite_coefficients: k_max must be >= 0");
  constexpr int kMaxSupported = 140;  // sqrt(k!) overflows not far beyond
  HermiteCoefficients out;
  if (k_max > kMaxSupported) {
    out.capped = true;
    k_max = kMaxSupported;
  }
  const int n = std::max(n_nodes, 2 * k_max + 32);
  const num::QuadratureRule rule = num::gauss_hermite(n);
  std::vector<double> ctilde(std::size_t(k_max) + 1, 0.0);
  const double inv_sqrt_pi = 0.5641895835477563;
  for (int i = 0; i < n; ++i) {
    const double z = num::sqrt_two * rule.nodes[std::size_t(i)];  // N(0,1) coordinate
    const double wt = rule.weights[std::size_t(i)] * inv_sqrt_pi * f(sigma_ou * z);
    double h_prev = 0.0, h_cur = 1.0;  // orthonormal probabilists' Hermite
    for (int k = 0; k <= k_max; ++k) {
      ctilde[std::size_t(k)] += wt * h_cur;
      const double h_next = (z * h_cur - std::sqrt(double(k)) * h_prev) / std::sqrt(double(k + 1));
      h_prev = h_cur;
      h_cur = h_next;
    }
  }
  out.c.resize(std::size_t(k_max) + 1);
  for (int k = 0; k <= k_max; ++k)
    out.c[std::size_t(k)] = ctilde[std::size_t(k)] * std::exp(0.5 * num::lgamma_fn(double(k) + 1.0));
  return out;
}

std::vector<std::vector<double>> simulate_factor_cholesky(const FouParams& p, double dt,
                                                          int n_nodes, uint64_t seed,
                                                          int n_paths) {
  p.validate();
  if (n_nodes < 1 || n_nodes > 2048)
    throw std::invalid_argument("simulate_factor_cholesky: n_nodes must be in [1, 2048]");
  const double var = p.sigma_ou_sq();
  const std::size_t n = std::size_t(n_nodes);
  // stationary covariance via the autocorrelation integral
  std::vector<double> acf(n);
  for (std::size_t l = 0; l < n; ++l) acf[l] = covariance_CY(double(l) * dt / p.eps, p);
  std::vector<double> mat(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) mat[i * n + j] = var * acf[i - j];
  // in-place lower Cholesky with a tiny jitter retry
  for (int attempt = 0; attempt < 2; ++attempt) {
    bool ok = true;
    std::vector<double> chol = mat;
    for (std::size_t i = 0; i < n && ok; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        double s = chol[i * n + j];
        for (std::size_t k = 0; k < j; ++k) s -= chol[i * n + k] * chol[j * n + k];
        if (i == j) {
          if (s <= 0.0) {
            ok = false;
            break;
          }
          chol[i * n + i] = std::sqrt(s);
        } else {
          chol[i * n + j] = s / chol[j * n + j];
        }
      }
    }
    if (!ok) {
      for (std::size_t i = 0; i < n; ++i) mat[i * n + i] += 1e-10 * var;
      continue;
    }
    std::vector<std::vector<double>> out(static_cast<std::size_t>(n_paths));
    parallel_for(std::size_t(n_paths), 0, [&](std::size_t begin, std::size_t end) {
      for (std::size_t pth = begin; pth < end; ++pth) {
        rng::NormalStream zs(seed, rng::StreamClass::future_wy, pth, 0x5EEDu);
        std::vector<double> z(n);
        for (std::size_t i = 0; i < n; ++i) z[i] = zs.next();
        auto& path = out[pth];
        path.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          double s = 0.0;
          for (std::size_t k = 0; k <= i; ++k) s += chol[i * n + k] * z[k];
          path[i] = s;
        }
      }
    });
    return out;
  }
  throw numeric_error("simulate_factor_cholesky: covariance not positive definite");
}

void export_paths_csv(std::ostream& os, std::span<const FactorPath> paths) {
  os << "path_id,t,y,w_increment,wy_increment\n";
  char buf[160];
  for (std::size_t pth = 0; pth < paths.size(); ++pth) {
    const FactorPath& fp = paths[pth];
    const int nh = fp.grid.history_len;
    for (int k = 0; k <= fp.grid.n_steps; ++k) {
      // increment columns carry the step that led into node k (zero at k=0)
      const double w = k == 0 ? 0.0 : fp.w_increments[std::size_t(k - 1)];
      const double wy = k == 0 ? 0.0 : fp.wy_increments[std::size_t(nh + k - 1)];
      std::snprintf(buf, sizeof buf, "%zu,%.6f,%.17g,%.17g,%.17g\n", pth,
                    double(k) * fp.grid.dt, fp.y_values[std::size_t(k)], w, wy);
      os << buf;
    }
  }
}

}  // namespace fouport::fou
