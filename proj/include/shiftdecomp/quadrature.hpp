#pragma once

#include <cmath>
#include <functional>

namespace shiftdecomp {

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Composite 16-point Gauss-Legendre on [a, b].
double integrate(const std::function<double(double)>& f, double a, double b, int panels = 24);

// E[f(X)] for X ~ N(mean, sd^2), integrating mean +/- 9 sd with an optional
// interior split point (for integrands with a kink).
double gauss_expect(const std::function<double(double)>& f, double mean, double sd,
                    double split = std::numeric_limits<double>::quiet_NaN());

// E[f(X) | a <= X < b] for X ~ N(mean, sd^2); returns 0 when the slab has
// negligible mass. `mass_out`, when non-null, receives P(a <= X < b).
double truncated_normal_expect(const std::function<double(double)>& f, double mean, double sd,
                               double a, double b, double* mass_out = nullptr);

}  // namespace shiftdecomp
