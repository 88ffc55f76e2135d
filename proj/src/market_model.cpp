#include "fouport/market_model.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace fouport::market {

MarketModel::MarketModel(double rho, double gamma) : rho_(rho), gamma_(gamma) {
  if (!(std::abs(rho) < 1.0)) throw std::invalid_argument("MarketModel: |rho| must be < 1");
  if (!(gamma > 0.0) || gamma == 1.0)
    throw std::invalid_argument("MarketModel: gamma must be positive and != 1");
}

double MarketModel::lambda(double y) const {
  return std::sqrt(std::max(lambda_sq(y), kLambdaSqFloor));
}

double MarketModel::sigma(double y) const {
  const double l = lambda(y);
  const double s = mu(y) / l;
  if (!(s > 0.0)) throw std::domain_error("MarketModel: sigma(y) must be positive");
  return s;
}

NodeEval MarketModel::eval(double y) const {
  NodeEval e;
  e.lam2 = std::max(lambda_sq(y), kLambdaSqFloor);
  e.lam = std::sqrt(e.lam2);
  e.mu = mu(y);
  e.sigma = e.mu / e.lam;
  e.sigma_sq = e.sigma * e.sigma;
  return e;
}

double paper_lambda_sq(double y, double sigma_ou) {
  // (1/2) int_{-inf}^{y/sigma_ou} p(z/2) dz = Phi(y / (2 sigma_ou))
  return num::normal_cdf(y / (2.0 * sigma_ou));
}

double paper_mu_from_lambda(double lam) { return 0.1 * lam / (0.1 + lam); }

double paper_mu(double y, double sigma_ou) {
  return paper_mu_from_lambda(std::sqrt(paper_lambda_sq(y, sigma_ou)));
}

PaperModel::PaperModel(double sigma_ou, double rho, double gamma)
    : MarketModel(rho, gamma), sigma_ou_(sigma_ou) {
  if (!(sigma_ou > 0.0)) throw std::invalid_argument("PaperModel: sigma_ou must be positive");
}

double PaperModel::lambda_sq(double y) const { return paper_lambda_sq(y, sigma_ou_); }

double PaperModel::lambda_prime(double y) const {
  // lambda' = (lambda^2)' / (2 lambda)
  const double dlam2 = num::normal_pdf(y / (2.0 * sigma_ou_)) / (2.0 * sigma_ou_);
  return dlam2 / (2.0 * lambda(y));
}

double PaperModel::mu(double y) const { return paper_mu_from_lambda(lambda(y)); }

NodeEval PaperModel::eval(double y) const {
  NodeEval e;
  e.lam2 = std::max(num::normal_cdf(y / (2.0 * sigma_ou_)), kLambdaSqFloor);
  e.lam = std::sqrt(e.lam2);
  e.mu = 0.1 * e.lam / (0.1 + e.lam);
  e.sigma = 0.1 / (0.1 + e.lam);
  e.sigma_sq = e.sigma * e.sigma;
  return e;
}

ConstantLambdaModel::ConstantLambdaModel(double lambda0, double sigma0, double rho, double gamma)
    : MarketModel(rho, gamma), lambda0_(lambda0), sigma0_(sigma0) {
  if (!(lambda0 > 0.0 && sigma0 > 0.0))
    throw std::invalid_argument("ConstantLambdaModel: lambda0 and sigma0 must be positive");
}

double ConstantLambdaModel::lambda_sq(double) const { return lambda0_ * lambda0_; }
double ConstantLambdaModel::lambda_prime(double) const { return 0.0; }
double ConstantLambdaModel::mu(double) const { return lambda0_ * sigma0_; }

NodeEval ConstantLambdaModel::eval(double) const {
  return {lambda0_ * lambda0_, lambda0_, lambda0_ * sigma0_, sigma0_, sigma0_ * sigma0_};
}

CustomModel::CustomModel(std::function<double(double)> lambda_sq,
                         std::function<double(double)> lambda_sq_prime,
                         std::function<double(double)> mu, double rho, double gamma,
                         std::string id)
    : MarketModel(rho, gamma), lam2_(std::move(lambda_sq)), lam2_prime_(std::move(lambda_sq_prime)),
      mu_(std::move(mu)), id_(std::move(id)) {}

double CustomModel::lambda_sq(double y) const { return lam2_(y); }

double CustomModel::lambda_prime(double y) const { return lam2_prime_(y) / (2.0 * lambda(y)); }

double CustomModel::mu(double y) const { return mu_(y); }

double invariant_average(const std::function<double(double)>& g, double sigma_ou, int n_nodes) {
  if (!(sigma_ou > 0.0)) throw std::invalid_argument("invariant_average: sigma_ou must be positive");
  if (n_nodes < 8) throw std::invalid_argument("invariant_average: n_nodes must be >= 8");
  const double coarse = num::gaussian_expectation(g, sigma_ou, num::gauss_hermite(n_nodes));
  const double fine = num::gaussian_expectation(g, sigma_ou, num::gauss_hermite(2 * n_nodes));
  if (std::abs(fine - coarse) > 1e-8 * std::max(1.0, std::abs(fine)))
    throw num::numeric_error("invariant_average: node doubling moved the result by " +
                             std::to_string(std::abs(fine - coarse)));
  return fine;
}

double distortion_q(double gamma, double rho) {
  if (gamma == 1.0) throw std::domain_error("distortion_q: gamma = 1 (log utility) unsupported");
  if (!(gamma > 0.0)) throw std::domain_error("distortion_q: gamma must be positive");
  if (!(std::abs(rho) < 1.0)) throw std::domain_error("distortion_q: |rho| must be < 1");
  return gamma / (gamma + (1.0 - gamma) * rho * rho);
}

Averages compute_averages(const MarketModel& m, double sigma_ou, int n_nodes) {
  Averages out;
  out.sigma_ou = sigma_ou;
  out.lambda_bar_sq = invariant_average([&](double y) { return m.lambda_sq(y); }, sigma_ou, n_nodes);
  out.lambda_bar = std::sqrt(out.lambda_bar_sq);
  out.lambda_tilde = invariant_average([&](double y) { return m.lambda(y); }, sigma_ou, n_nodes);
  out.avg_lambda_lambda_prime =
      invariant_average([&](double y) { return m.lambda(y) * m.lambda_prime(y); }, sigma_ou, n_nodes);
  out.mu_bar = invariant_average([&](double y) { return m.mu(y); }, sigma_ou, n_nodes);
  out.sigma_bar_sq = invariant_average(
      [&](double y) {
        const double s = m.sigma(y);
        return s * s;
      },
      sigma_ou, n_nodes);
  out.q = distortion_q(m.gamma(), m.rho());
  // Jensen / Cauchy-Schwarz chain
  if (out.lambda_bar_sq + 1e-12 < out.lambda_tilde * out.lambda_tilde)
    throw num::numeric_error("compute_averages: Jensen inequality violated");
  if (out.lambda_bar_sq + 1e-12 < out.mu_bar * out.mu_bar / out.sigma_bar_sq)
    throw num::numeric_error("compute_averages: Cauchy-Schwarz chain violated");
  return out;
}

void validate_model(const MarketModel& m, double sigma_ou) {
  const int n = 481;
  const double span = 8.0 * sigma_ou;
  const double h = 1e-6 * sigma_ou;
  for (int i = 0; i < n; ++i) {
    const double y = -span + 2.0 * span * double(i) / double(n - 1);
    const double l = m.lambda(y);
    const double lp = m.lambda_prime(y);
    const double lpp = (m.lambda(y + h) - 2.0 * l + m.lambda(y - h)) / (h * h);
    if (!std::isfinite(l) || std::abs(l) > 1e6)
      throw std::invalid_argument("validate_model: lambda unbounded at y=" + std::to_string(y));
    if (!std::isfinite(lp) || std::abs(lp) > 1e6)
      throw std::invalid_argument("validate_model: lambda' unbounded at y=" + std::to_string(y));
    if (!std::isfinite(lpp) || std::abs(lpp) > 1e8)
      throw std::invalid_argument("validate_model: lambda'' unbounded at y=" + std::to_string(y));
    if (!(m.sigma(y) > 0.0))
      throw std::invalid_argument("validate_model: sigma must be positive at y=" + std::to_string(y));
  }
}

}  // namespace fouport::market
