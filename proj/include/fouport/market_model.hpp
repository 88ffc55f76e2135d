#pragma once
// Sharpe-ratio / return / volatility functions of the factor and their
// averages under the stationary N(0, sigma_ou^2) law.
#include <functional>
#include <memory>
#include <string>

#include "fouport/numerics.hpp"

namespace fouport::market {

struct NodeEval {
  double lam2, lam, mu, sigma, sigma_sq;
};

class MarketModel {
 public:
  MarketModel(double rho, double gamma);
  virtual ~MarketModel() = default;

  virtual double lambda_sq(double y) const = 0;
  virtual double lambda_prime(double y) const = 0;
  virtual double mu(double y) const = 0;
  virtual std::string id() const = 0;

  double lambda(double y) const;
  double sigma(double y) const;  // always mu / lambda
  virtual NodeEval eval(double y) const;

  double rho() const { return rho_; }
  double gamma() const { return gamma_; }

 protected:
  static constexpr double kLambdaSqFloor = 1e-300;

 private:
  double rho_;
  double gamma_;
};

// Bounded CDF-shaped Sharpe ratio with mu saturating at 0.1; the stock model
// used by the numerical illustration. id "paper-3.6".
class PaperModel final : public MarketModel {
 public:
  PaperModel(double sigma_ou, double rho, double gamma);
  double lambda_sq(double y) const override;
  double lambda_prime(double y) const override;
  double mu(double y) const override;
  NodeEval eval(double y) const override;
  std::string id() const override { return "paper-3.6"; }

 private:
  double sigma_ou_;
};

// Degenerate Sharpe ratio lambda(y) = lambda0 with constant volatility.
class ConstantLambdaModel final : public MarketModel {
 public:
  ConstantLambdaModel(double lambda0, double sigma0, double rho, double gamma);
  double lambda_sq(double y) const override;
  double lambda_prime(double y) const override;
  double mu(double y) const override;
  NodeEval eval(double y) const override;
  std::string id() const override { return "constant-lambda"; }

 private:
  double lambda0_, sigma0_;
};

// User-supplied (lambda^2, mu) pair; sigma derived as mu/lambda.
class CustomModel final : public MarketModel {
 public:
  CustomModel(std::function<double(double)> lambda_sq, std::function<double(double)> lambda_sq_prime,
              std::function<double(double)> mu, double rho, double gamma, std::string id);
  double lambda_sq(double y) const override;
  double lambda_prime(double y) const override;
  double mu(double y) const override;
  std::string id() const override { return id_; }

 private:
  std::function<double(double)> lam2_, lam2_prime_, mu_;
  std::string id_;
};

struct Averages {
  double lambda_bar_sq = 0.0;            // <lambda^2>
  double lambda_bar = 0.0;               // sqrt(<lambda^2>)
  double lambda_tilde = 0.0;             // <lambda>
  double avg_lambda_lambda_prime = 0.0;  // <lambda lambda'>
  double mu_bar = 0.0;                   // <mu>
  double sigma_bar_sq = 0.0;             // <sigma^2>
  double q = 0.0;                        // distortion exponent
  double sigma_ou = 0.0;                 // law the averages were taken under
};

// Stand-alone pieces of the numerical illustration's model.
double paper_lambda_sq(double y, double sigma_ou);
double paper_mu_from_lambda(double lam);
double paper_mu(double y, double sigma_ou);

// Gauss-Hermite <g> with a node-doubling consistency check (throws
// num::numeric_error when doubling moves the result by more than 1e-8).
double invariant_average(const std::function<double(double)>& g, double sigma_ou,
                         int n_nodes = 200);

double distortion_q(double gamma, double rho);

Averages compute_averages(const MarketModel& m, double sigma_ou, int n_nodes = 200);

// Numeric smoothness/positivity checks on y in [-8 sigma_ou, 8 sigma_ou].
void validate_model(const MarketModel& m, double sigma_ou);

}  // namespace fouport::market
