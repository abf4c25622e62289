#include "shiftdecomp/quadrature.hpp"

#include <algorithm>
#include <limits>

namespace shiftdecomp {

namespace {

// 16-point Gauss-Legendre nodes/weights on [-1, 1].
constexpr double kNodes[8] = {0.0950125098376374, 0.2816035507792589, 0.4580167776572274,
                              0.6178762444026438, 0.7554044083550030, 0.8656312023878318,
                              0.9445750230732326, 0.9894009349916499};
constexpr double kWeights[8] = {0.1894506104550685, 0.1826034150449236, 0.1691565193950025,
                                0.1495959888165767, 0.1246289712555339, 0.0951585116824928,
                                0.0622535239386479, 0.0271524594117541};

double gl16(const std::function<double(double)>& f, double a, double b) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double s = 0.0;
    for (int i = 0; i < 8; ++i)
        s += kWeights[i] * (f(c + h * kNodes[i]) + f(c - h * kNodes[i]));
    return s * h;
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b, int panels) {
    if (!(b > a)) return 0.0;
    double s = 0.0;
    const double h = (b - a) / panels;
    for (int k = 0; k < panels; ++k) s += gl16(f, a + k * h, a + (k + 1) * h);
    return s;
}

double gauss_expect(const std::function<double(double)>& f, double mean, double sd, double split) {
    auto g = [&](double x) { return f(x) * normal_pdf((x - mean) / sd) / sd; };
    const double lo = mean - 9.0 * sd, hi = mean + 9.0 * sd;
    if (std::isfinite(split) && split > lo && split < hi)
        return integrate(g, lo, split) + integrate(g, split, hi);
    return integrate(g, lo, hi);
}

double truncated_normal_expect(const std::function<double(double)>& f, double mean, double sd,
                               double a, double b, double* mass_out) {
    const double lo = std::max(a, mean - 9.0 * sd);
    const double hi = std::min(b, mean + 9.0 * sd);
    const double mass = normal_cdf((b - mean) / sd) - normal_cdf((a - mean) / sd);
    if (mass_out) *mass_out = std::max(0.0, mass);
    if (!(hi > lo) || mass < 1e-14) return 0.0;
    auto g = [&](double x) { return f(x) * normal_pdf((x - mean) / sd) / sd; };
    return integrate(g, lo, hi) / mass;
}

}  // namespace shiftdecomp
