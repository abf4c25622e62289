#pragma once

#include "shiftdecomp/common.hpp"

namespace shiftdecomp {

// Point estimate with an influence-function-based two-sided confidence interval.
struct EstimateWithCI {
    double point = 0.0;
    double se = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    double alpha = 0.10;
    long n_eval = 0;
    bool degenerate = false;  // zero-variance influence function
};

double normal_quantile(double p);

inline double sample_sd(const Vec& v) {
    const Index n = v.size();
    if (n < 2) return 0.0;
    const double m = v.mean();
    return std::sqrt((v.array() - m).square().sum() / static_cast<double>(n - 1));
}

// CI from a per-observation influence vector: point +/- z * sd(psi)/sqrt(n).
inline EstimateWithCI make_estimate(double point, const Vec& influence, double alpha) {
    EstimateWithCI e;
    e.point = point;
    e.alpha = alpha;
    e.n_eval = static_cast<long>(influence.size());
    const double sd = sample_sd(influence);
    e.se = (e.n_eval > 0) ? sd / std::sqrt(static_cast<double>(e.n_eval)) : 0.0;
    e.degenerate = (e.se <= 0.0);
    const double z = normal_quantile(1.0 - alpha / 2.0);
    e.ci_lo = point - z * e.se;
    e.ci_hi = point + z * e.se;
    return e;
}

inline EstimateWithCI make_estimate_var(double point, double variance, long n_eval, double alpha) {
    EstimateWithCI e;
    e.point = point;
    e.alpha = alpha;
    e.n_eval = n_eval;
    e.se = variance > 0.0 ? std::sqrt(variance) : 0.0;
    e.degenerate = (e.se <= 0.0);
    const double z = normal_quantile(1.0 - alpha / 2.0);
    e.ci_lo = point - z * e.se;
    e.ci_hi = point + z * e.se;
    return e;
}

}  // namespace shiftdecomp
