#include "lspm/special.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "lspm/errors.hpp"

namespace lspm {

namespace {

// Continued fraction for Gamma(a, x) * exp(x) * x^-a (modified Lentz),
// convergent for x > a + 1.
double upper_gamma_scaled_cf(double a, double x) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) {
      d = tiny;
    }
    c = b + an / c;
    if (std::abs(c) < tiny) {
      c = tiny;
    }
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) {
      return h;
    }
  }
  throw NumericalError("upper incomplete gamma continued fraction did not converge");
}

}  // namespace

double log_upper_gamma(double a, double x) {
  if (!(a > 0.0) || !(x >= 0.0)) {
    throw ValidationError("log_upper_gamma requires a > 0 and x >= 0");
  }
  if (x == 0.0) {
    return std::lgamma(a);
  }
  if (x > a + 1.0) {
    return std::log(upper_gamma_scaled_cf(a, x)) + a * std::log(x) - x;
  }
  return std::lgamma(a) + std::log(boost::math::gamma_q(a, x));
}

double integrate(const std::function<double(double)>& f, const std::vector<double>& breakpoints,
                 double rel_tol, double* error) {
  double total = 0.0;
  double total_err = 0.0;
  for (std::size_t k = 0; k + 1 < breakpoints.size(); ++k) {
    const double lo = breakpoints[k];
    const double hi = breakpoints[k + 1];
    if (!(hi > lo)) {
      continue;
    }
    double err = 0.0;
    if (lo == 0.0) {
      // Gamma densities with shape < 1 are singular at the origin.
      boost::math::quadrature::tanh_sinh<double> ts;
      total += ts.integrate(f, lo, hi, rel_tol, &err);
    } else {
      total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, lo, hi, 15,
                                                                            rel_tol, &err);
    }
    total_err += err;
  }
  if (error) {
    *error = total_err;
  }
  return total;
}

double truncated_gamma_log_pdf(double x, double a, double b, double t) {
  if (x < t) {
    return -std::numeric_limits<double>::infinity();
  }
  return a * std::log(b) + (a - 1.0) * std::log(x) - b * x - log_upper_gamma(a, b * t);
}

std::vector<double> truncated_gamma_breakpoints(double a, double b, double t) {
  const double mode = std::max(a - 1.0, 0.0) / b;
  const double sd = std::sqrt(a) / b;
  const double lo = std::max({t, 0.0, mode - 12.0 * sd});
  const double hi = std::max(lo, mode) + 40.0 * sd + 40.0 / b;
  std::vector<double> pts{lo};
  for (double k : {-6.0, -3.0, -1.5, 0.0, 1.5, 3.0, 6.0, 12.0, 24.0}) {
    const double x = mode + k * sd;
    if (x - pts.back() > 0.25 * sd && hi - x > 0.25 * sd) {
      pts.push_back(x);
    }
  }
  pts.push_back(hi);
  return pts;
}

double truncated_gamma_log_mean(double a, double b, double t, double* error) {
  if (!(a > 0.0) || !(b > 0.0) || !(t >= 0.0)) {
    throw ValidationError("truncated gamma requires a > 0, b > 0, t >= 0");
  }
  if (error) *error = 0.0;
  if (t == 0.0) {
    return boost::math::digamma(a) - std::log(b);
  }
  const double log_norm = a * std::log(b) - log_upper_gamma(a, b * t);
  if ((a - 1.0) / b <= t) {
    // density falls from t onwards; work in u = b (x - t) so a thin layer
    // above t is resolved
    auto integrand = [&](double u) {
      const double x = t + u / b;
      const double w = std::exp(log_norm + (a - 1.0) * std::log(x) - b * t - u) / b;
      return w == 0.0 ? 0.0 : std::log1p(u / (b * t)) * w;
    };
    boost::math::quadrature::exp_sinh<double> es;
    double err = 0.0;
    const double v = es.integrate(integrand, 0.0, std::numeric_limits<double>::infinity(), 1e-12,
                                  &err);
    if (error) *error = err;
    return std::log(t) + v;
  }
  auto integrand = [&](double x) {
    return std::log(x / t) * std::exp(log_norm + (a - 1.0) * std::log(x) - b * x);
  };
  return std::log(t) + integrate(integrand, truncated_gamma_breakpoints(a, b, t), 1e-12, error);
}

}  // namespace lspm
