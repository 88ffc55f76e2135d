#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "fouport/numerics.hpp"

using namespace fouport;

TEST_CASE("lanczos gamma tracks the library implementation to 1e-13") {
  for (double x = 0.05; x < 30.0; x += 0.0917) {
    const double ref = std::tgamma(x);
    CHECK(std::abs(num::gamma_fn(x) - ref) <= 1e-13 * std::abs(ref));
    CHECK(std::abs(num::lgamma_fn(x) - std::lgamma(x)) <= 1e-12 * std::max(1.0, std::abs(std::lgamma(x))));
  }
  CHECK(num::gamma_fn(0.5) == doctest::Approx(std::sqrt(num::pi)).epsilon(1e-14));
  CHECK(num::gamma_fn(1.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(num::gamma_fn(5.0) == doctest::Approx(24.0).epsilon(1e-14));
  // reflection branch
  CHECK(num::gamma_fn(-0.5) == doctest::Approx(-2.0 * std::sqrt(num::pi)).epsilon(1e-13));
}

TEST_CASE("normal distribution helpers") {
  CHECK(num::normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(num::normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
  CHECK(num::inv_normal_cdf(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  for (double p : {1e-12, 1e-6, 0.01, 0.3, 0.5, 0.7, 0.99, 1.0 - 1e-6}) {
    CHECK(num::normal_cdf(num::inv_normal_cdf(p)) == doctest::Approx(p).epsilon(1e-12));
  }
  CHECK_THROWS_AS(num::inv_normal_cdf(0.0), std::domain_error);
  CHECK_THROWS_AS(num::inv_normal_cdf(1.0), std::domain_error);
}

TEST_CASE("adaptive quadrature") {
  CHECK(num::integrate([](double x) { return x * x; }, 0.0, 1.0) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-13));
  CHECK(num::integrate([](double x) { return std::sin(x); }, 0.0, num::pi) ==
        doctest::Approx(2.0).epsilon(1e-12));
  // endpoint with unbounded derivative
  CHECK(num::integrate([](double x) { return std::sqrt(x); }, 0.0, 1.0, 1e-13, 1e-13) ==
        doctest::Approx(2.0 / 3.0).epsilon(1e-10));
  // oscillatory but resolvable
  CHECK(num::integrate([](double x) { return std::cos(10.0 * x); }, 0.0, 2.0) ==
        doctest::Approx(std::sin(20.0) / 10.0).epsilon(1e-11));
}

TEST_CASE("gauss-hermite rules") {
  for (int n : {21, 64, 200, 400}) {
    const num::QuadratureRule rule = num::gauss_hermite(n);
    double total = 0.0;
    for (double w : rule.weights) total += w;
    CHECK(total == doctest::Approx(std::sqrt(num::pi)).epsilon(1e-13));
  }
  const num::QuadratureRule rule = num::gauss_hermite(200);
  CHECK(num::gaussian_expectation([](double z) { return z * z; }, 1.0, rule) ==
        doctest::Approx(1.0).epsilon(1e-13));
  CHECK(num::gaussian_expectation([](double z) { return z * z * z * z; }, 1.0, rule) ==
        doctest::Approx(3.0).epsilon(1e-13));
  const double c = 1.3;
  CHECK(num::gaussian_expectation([&](double z) { return std::exp(c * z); }, 1.0, rule) ==
        doctest::Approx(std::exp(0.5 * c * c)).epsilon(1e-13));
  // scaled variance
  CHECK(num::gaussian_expectation([](double z) { return z * z; }, 0.725, rule) ==
        doctest::Approx(0.725 * 0.725).epsilon(1e-13));
}

TEST_CASE("pairwise sum and moments") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> xs(10001);
  long double exact = 0.0;
  for (double& x : xs) {
    x = u(gen);
    exact += x;
  }
  CHECK(num::pairwise_sum(xs) == doctest::Approx(double(exact)).epsilon(1e-13));
  const num::MeanVar mv = num::mean_var(xs);
  CHECK(mv.n == xs.size());
  CHECK(mv.mean == doctest::Approx(double(exact) / double(xs.size())).epsilon(1e-12));
  CHECK(mv.var > 0.0);
  CHECK(mv.std_error() == doctest::Approx(std::sqrt(mv.var / double(mv.n))));
}

TEST_CASE("line fit recovers exact linear data") {
  std::vector<double> xs, ys;
  for (int i = 0; i < 9; ++i) {
    xs.push_back(0.3 * i - 1.0);
    ys.push_back(2.5 * xs.back() - 0.75);
  }
  const num::LineFit fit = num::fit_line(xs, ys);
  CHECK(fit.slope == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(fit.intercept == doctest::Approx(-0.75).epsilon(1e-12));
  CHECK(fit.slope_se == doctest::Approx(0.0).epsilon(1e-10));
  CHECK_THROWS_AS(num::fit_line(std::vector<double>{1.0}, std::vector<double>{1.0}),
                  std::invalid_argument);
}
