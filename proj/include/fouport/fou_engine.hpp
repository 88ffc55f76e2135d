#pragma once
// Fractional Ornstein-Uhlenbeck factor: moving-average kernel, exact Gaussian
// statistics (variance, autocorrelation), and conditional path simulation on
// a uniform grid with a finite history segment.
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "fouport/rng.hpp"

namespace fouport::fou {

struct FouParams {
  double a = 1.0;    // mean-reversion rate, > 0
  double H = 0.6;    // Hurst index, in (1/2, 1)
  double eps = 1.0;  // time-scale parameter, in (0, 1]

  void validate() const;
  // E[(Y_t)^2] = 1 / (2 a^{2H} sin(pi H)); independent of eps.
  double sigma_ou_sq() const;
  double sigma_ou() const;
};

struct SimGrid {
  double dt = 1e-3;
  int n_steps = 0;      // nodes t_k = k dt, k = 0..n_steps cover [0, T]
  int history_len = 0;  // increments on [-history_len dt, 0)

  void validate() const;
  double horizon() const { return dt * n_steps; }
  double history_span() const { return dt * history_len; }
};

struct FactorPath {
  SimGrid grid;
  std::vector<double> wy_increments;  // history then future, length history_len + n_steps
  std::vector<double> w_increments;   // future only, length n_steps
  std::vector<double> y_values;       // nodes 0..n_steps
};

// K(t) = [t^{H-1/2} - a int_0^t (t-s)^{H-1/2} e^{-as} ds] / Gamma(H+1/2).
// Accepts H in [1/2, 1); H = 1/2 collapses to e^{-at}.
double kernel_K(double t, double a, double H);

// K^eps(t) = eps^{-1/2} K(t/eps).
double scaled_kernel(double t, const FouParams& p);

double stationary_variance(const FouParams& p);

// Normalized autocorrelation C_Y(s) of the unscaled factor:
// (2 sin(pi H)/pi) int_0^inf cos(a s x) x^{1-2H}/(1+x^2) dx.
double covariance_CY(double s, const FouParams& p);

// Two-term asymptotic tail int_x^inf K(v)^2 dv (valid for a x >> 1, H > 1/2).
double kernel_sq_tail(double x, double a, double H);

// int_0^x K(u)^2 du by fixed Gauss-Legendre panels (geometric spacing, with a
// power substitution flattening the u^{2H-1} behaviour at zero).
double kernel_sq_head(double x, double a, double H);

// int_0^inf K^2: head quadrature on [0, 120/a] plus the analytic tail.
double kernel_sq_integral(double a, double H);

// Smallest history length (in steps) with conditional tail variance
// int_{M}^inf (K^eps)^2 <= tail_fraction * sigma_ou^2, where M = steps * dt.
int history_steps_for_tail(const FouParams& p, double dt, double tail_fraction);

// Tail variance left out by the grid's history span.
double history_tail_variance(const FouParams& p, const SimGrid& grid);

// K^eps(l dt) for l = 1..n (entry [0] unused, kept for direct lag indexing).
std::vector<double> kernel_table(const FouParams& p, double dt, std::size_t n);

// Streaming simulator: conditional-on-history futures with counter-based
// substreams. Deterministic in (seed, omega_id, path_id) only.
class FactorEngine {
 public:
  using SharedTable = std::shared_ptr<const std::vector<double>>;

  // future_salt defaults to omega_id; giving estimators distinct salts turns
  // common random numbers off while keeping the same history. A prebuilt
  // kernel table (from build_table) may be shared across engines.
  FactorEngine(const FouParams& params, const SimGrid& grid, uint64_t seed, uint32_t omega_id,
               bool shared_history, uint32_t future_salt = kSaltFromOmega,
               SharedTable table = nullptr);
  static constexpr uint32_t kSaltFromOmega = 0xFFFFFFFFu;

  static SharedTable build_table(const FouParams& params, const SimGrid& grid);

  // Fills y (n_steps + 1 nodes) and the future W^Y increments (n_steps).
  void sample_future(uint64_t path_id, std::span<double> wy, std::span<double> y) const;
  // Correlated W increments from given W^Y increments and fresh W-perp draws.
  void sample_w(uint64_t path_id, double rho, std::span<const double> wy,
                std::span<double> w) const;

  // Conditional mean of Y at node k given the history (shared mode only).
  const std::vector<double>& history_mean() const { return hist_mean_; }
  const SimGrid& grid() const { return grid_; }
  const FouParams& params() const { return params_; }
  uint64_t seed() const { return seed_; }
  uint32_t omega_id() const { return omega_id_; }

 private:
  void history_contribution(uint64_t history_path, std::span<double> h) const;

  FouParams params_;
  SimGrid grid_;
  uint64_t seed_ = 0;
  uint32_t omega_id_ = 0;
  uint32_t future_salt_ = 0;
  bool shared_history_ = true;
  SharedTable kernel_;             // lags 1..history_len+n_steps
  std::vector<double> hist_mean_;  // shared mode: h_k for k = 0..n_steps
};

// Batch simulation of factor paths (materializing wrapper over FactorEngine).
std::vector<FactorPath> simulate_factor(const FouParams& p, const SimGrid& grid, double rho,
                                        uint64_t seed, int n_paths, bool shared_history,
                                        uint32_t omega_id = 0);

// Conditional mean of the factor at nodes t, t+dt, ..., t+n_future dt given
// realized W^Y increments on [t - increments.size() dt, t).
std::vector<double> conditional_mean_from_increments(const FouParams& p, double dt,
                                                     std::span<const double> increments,
                                                     int n_future);

struct HermiteCoefficients {
  std::vector<double> c;  // C_0..C_k
  bool capped = false;    // k_max was reduced to the supported maximum
};

// Probabilists' Hermite coefficients C_k of f under N(0, sigma_ou^2).
HermiteCoefficients hermite_coefficients(const std::function<double(double)>& f, int k_max,
                                         double sigma_ou, int n_nodes = 400);

// Exact-covariance (Cholesky) sampler of the stationary factor on n_nodes
// grid points; validation oracle for the Riemann scheme. n_nodes <= 2048.
std::vector<std::vector<double>> simulate_factor_cholesky(const FouParams& p, double dt,
                                                          int n_nodes, uint64_t seed,
                                                          int n_paths);

// CSV: path_id,t,y,w_increment,wy_increment (header included, fixed-decimal t).
void export_paths_csv(std::ostream& os, std::span<const FactorPath> paths);

}  // namespace fouport::fou
