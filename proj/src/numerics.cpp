#include "fouport/numerics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace fouport::num {

namespace {

// Lanczos g = 7 coefficients (Godfrey's tabulation).
constexpr std::array<double, 9> kLanczos = {
    0.99999999999980993,    676.5203681218851,     -1259.1392167224028,
    771.32342877765313,     -176.61502916214059,   12.507343278686905,
    -0.13857109526572012,   9.9843695780195716e-6, 1.5056327351493116e-7};

double lanczos_sum(double x) {
  double s = kLanczos[0];
  for (std::size_t k = 1; k < kLanczos.size(); ++k) s += kLanczos[k] / (x + double(k) - 1.0);
  return s;
}

}  // namespace

double gamma_fn(double x) {
  if (std::isnan(x)) return x;
  if (x < 0.5) {
    // reflection; poles at non-positive integers surface as inf
    return pi / (std::sin(pi * x) * gamma_fn(1.0 - x));
  }
  const double g = 7.0;
  const double t = x + g - 0.5;
  return std::sqrt(2.0 * pi) * std::pow(t, x - 0.5) * std::exp(-t) * lanczos_sum(x);
}

double lgamma_fn(double x) {
  if (x < 0.5) return std::log(pi / std::abs(std::sin(pi * x))) - lgamma_fn(1.0 - x);
  const double g = 7.0;
  const double t = x + g - 0.5;
  return 0.5 * std::log(2.0 * pi) + (x - 0.5) * std::log(t) - t + std::log(lanczos_sum(x));
}

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * pi); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / sqrt_two); }

double inv_normal_cdf(double p) {
  // AS 241, PPND16.
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("inv_normal_cdf: p must be in (0,1)");
  const double q = p - 0.5;
  double r;
  if (std::abs(q) <= 0.425) {
    r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
               1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
             1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
           (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
               5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
             4.2313330701600911252e1) * r + 1.0);
  }
  r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
              3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
            4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
              6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
            2.05319162663775882187e0) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
              2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
            5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
              1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
            5.99832206555887937690e-1) * r + 1.0);
  }
  return q < 0.0 ? -val : val;
}

namespace {

// Gauss-Kronrod 7-15 nodes/weights on [-1, 1].
constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct PanelResult {
  double value;
  double error;
};

PanelResult gk15(const std::function<double(double)>& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double result_g = fc * kWg[3];
  double result_k = fc * kWgk[7];
  for (int j = 0; j < 7; ++j) {
    const double x = h * kXgk[j];
    const double fsum = f(c - x) + f(c + x);
    result_k += kWgk[j] * fsum;
    if (j % 2 == 1) result_g += kWg[j / 2] * fsum;
  }
  result_k *= h;
  result_g *= h;
  return {result_k, std::abs(result_k - result_g)};
}

double integrate_rec(const std::function<double(double)>& f, double a, double b, double tol,
                     int depth, int max_depth) {
  const PanelResult r = gk15(f, a, b);
  // rounding floor: once the estimate is at relative machine noise, further
  // splitting cannot help (large-dynamic-range integrands hit this early)
  const double noise = 4e-15 * std::abs(r.value);
  const double width_floor = 8.0 * std::numeric_limits<double>::epsilon() *
                             std::max(std::abs(a), std::abs(b));
  if (r.error <= tol || r.error <= noise || b - a <= width_floor || depth >= max_depth) {
    if (depth >= max_depth && r.error > 64.0 * tol && r.error > noise)
      throw numeric_error("integrate: max refinement depth reached without convergence");
    return r.value;
  }
  const double c = 0.5 * (a + b);
  return integrate_rec(f, a, c, 0.5 * tol, depth + 1, max_depth) +
         integrate_rec(f, c, b, 0.5 * tol, depth + 1, max_depth);
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b, double abs_tol,
                 double rel_tol, int max_depth) {
  if (a == b) return 0.0;
  const PanelResult coarse = gk15(f, a, b);
  const double tol = std::max(abs_tol, rel_tol * std::abs(coarse.value));
  if (coarse.error <= tol) return coarse.value;
  return integrate_rec(f, a, b, tol, 0, max_depth);
}

namespace {

// Implicit-QL sweep on a symmetric tridiagonal Jacobi matrix, rotating only
// the first eigenvector row (Golub-Welsch). d: diagonal, e: subdiagonal
// (e[n-1] spare), z: starts as (1, 0, ..., 0).
void jacobi_eigen_first_row(std::vector<double>& d, std::vector<double>& e,
                            std::vector<double>& z) {
  const int n = int(d.size());
  const double eps = std::numeric_limits<double>::epsilon();
  e[std::size_t(n) - 1] = 0.0;
  for (int l = 0; l < n; ++l) {
    int iter = 0;
    for (;;) {
      int m = l;
      while (m < n - 1 &&
             std::abs(e[std::size_t(m)]) > eps * (std::abs(d[std::size_t(m)]) +
                                                  std::abs(d[std::size_t(m) + 1])))
        ++m;
      if (m == l) break;
      if (++iter > 60) throw numeric_error("gauss_hermite: eigenvalue sweep did not converge");
      double g = (d[std::size_t(l) + 1] - d[std::size_t(l)]) / (2.0 * e[std::size_t(l)]);
      double r = std::hypot(g, 1.0);
      g = d[std::size_t(m)] - d[std::size_t(l)] +
          e[std::size_t(l)] / (g + std::copysign(r, g));
      double s = 1.0, c = 1.0, p = 0.0;
      bool underflow = false;
      for (int i = m - 1; i >= l; --i) {
        double f = s * e[std::size_t(i)];
        const double b = c * e[std::size_t(i)];
        r = std::hypot(f, g);
        e[std::size_t(i) + 1] = r;
        if (r == 0.0) {
          d[std::size_t(i) + 1] -= p;
          e[std::size_t(m)] = 0.0;
          underflow = true;
          break;
        }
        s = f / r;
        c = g / r;
        g = d[std::size_t(i) + 1] - p;
        r = (d[std::size_t(i)] - g) * s + 2.0 * c * b;
        p = s * r;
        d[std::size_t(i) + 1] = g + p;
        g = c * r - b;
        f = z[std::size_t(i) + 1];
        z[std::size_t(i) + 1] = s * z[std::size_t(i)] + c * f;
        z[std::size_t(i)] = c * z[std::size_t(i)] - s * f;
      }
      if (underflow) continue;
      d[std::size_t(l)] -= p;
      e[std::size_t(l)] = g;
      e[std::size_t(m)] = 0.0;
    }
  }
}

}  // namespace

QuadratureRule gauss_hermite(int n) {
  if (n < 2) throw std::invalid_argument("gauss_hermite: n must be >= 2");
  std::vector<double> d(std::size_t(n), 0.0);
  std::vector<double> e(std::size_t(n), 0.0);
  std::vector<double> z(std::size_t(n), 0.0);
  for (int i = 0; i + 1 < n; ++i) e[std::size_t(i)] = std::sqrt(0.5 * (i + 1.0));
  z[0] = 1.0;
  jacobi_eigen_first_row(d, e, z);
  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });
  QuadratureRule rule;
  rule.nodes.resize(std::size_t(n));
  rule.weights.resize(std::size_t(n));
  const double mu0 = std::sqrt(pi);  // total mass of e^{-x^2}
  for (std::size_t i = 0; i < order.size(); ++i) {
    rule.nodes[i] = d[order[i]];
    rule.weights[i] = mu0 * z[order[i]] * z[order[i]];
  }
  return rule;
}

QuadratureRule gauss_legendre(int n) {
  if (n < 2) throw std::invalid_argument("gauss_legendre: n must be >= 2");
  std::vector<double> d(std::size_t(n), 0.0);
  std::vector<double> e(std::size_t(n), 0.0);
  std::vector<double> z(std::size_t(n), 0.0);
  for (int i = 0; i + 1 < n; ++i) {
    const double k = i + 1.0;
    e[std::size_t(i)] = k / std::sqrt(4.0 * k * k - 1.0);
  }
  z[0] = 1.0;
  jacobi_eigen_first_row(d, e, z);
  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });
  QuadratureRule rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < order.size(); ++i) {
    rule.nodes[i] = d[order[i]];
    rule.weights[i] = 2.0 * z[order[i]] * z[order[i]];
  }
  return rule;
}

double paneled_integral(const std::function<double(double)>& f, double a, double b, int panels,
                        const QuadratureRule& gl) {
  if (panels < 1) throw std::invalid_argument("paneled_integral: panels must be >= 1");
  const double w = (b - a) / panels;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * w;
    const double c = lo + 0.5 * w;
    double acc = 0.0;
    for (std::size_t i = 0; i < gl.nodes.size(); ++i)
      acc += gl.weights[i] * f(c + 0.5 * w * gl.nodes[i]);
    total += 0.5 * w * acc;
  }
  return total;
}

double gaussian_expectation(const std::function<double(double)>& g, double sigma,
                            const QuadratureRule& rule) {
  const double inv_sqrt_pi = 0.5641895835477563;
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i)
    acc += rule.weights[i] * g(sqrt_two * sigma * rule.nodes[i]);
  return acc * inv_sqrt_pi;
}

double pairwise_sum(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n == 0) return 0.0;
  if (n <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

double MeanVar::std_error() const { return n > 1 ? std::sqrt(var / double(n)) : 0.0; }

MeanVar mean_var(std::span<const double> xs) {
  MeanVar out;
  out.n = xs.size();
  if (out.n == 0) return out;
  out.mean = pairwise_sum(xs) / double(out.n);
  if (out.n == 1) return out;
  std::vector<double> sq(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double d = xs[i] - out.mean;
    sq[i] = d * d;
  }
  out.var = pairwise_sum(sq) / double(out.n - 1);
  return out;
}

LineFit fit_line(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw std::invalid_argument("fit_line: need matching samples, at least 2");
  const std::size_t n = xs.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= double(n);
  my /= double(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_line: degenerate abscissae");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (n > 2) {
    double ss_res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
      ss_res += r * r;
    }
    fit.slope_se = std::sqrt(ss_res / double(n - 2) / sxx);
  }
  return fit;
}

}  // namespace fouport::num
