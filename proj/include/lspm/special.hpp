#pragma once

#include <functional>
#include <vector>

namespace lspm {

// log of the upper incomplete gamma function, log Gamma(a, x), for a > 0,
// x >= 0. Stays finite when Gamma(a, x) itself underflows.
double log_upper_gamma(double a, double x);

// Integral of f over [lo, hi] by adaptive Gauss-Kronrod (G15/K31) on each
// piece between consecutive breakpoints. Returns the integral; the summed
// error estimate is written to *error when given.
double integrate(const std::function<double(double)>& f, const std::vector<double>& breakpoints,
                 double rel_tol, double* error = nullptr);

// Log density of Gamma(shape a, rate b) conditioned on X >= t.
double truncated_gamma_log_pdf(double x, double a, double b, double t);

// E[log X | X >= t] for X ~ Gamma(a, b), by quadrature. error, if given,
// receives the quadrature error estimate.
double truncated_gamma_log_mean(double a, double b, double t, double* error = nullptr);

// Quadrature breakpoints for Gamma(a, b) restricted to [t, inf): the mode,
// a ladder of standard deviations around it, and an upper end far enough into
// the right tail that the remaining mass is negligible.
std::vector<double> truncated_gamma_breakpoints(double a, double b, double t);

}  // namespace lspm
