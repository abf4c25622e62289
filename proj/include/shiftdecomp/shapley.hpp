#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shiftdecomp/covariate_value.hpp"
#include "shiftdecomp/stats.hpp"

namespace shiftdecomp {

// One unique sampled subset and how often it was drawn.
struct SubsetDraw {
    std::vector<int> subset;  // sorted, 0-based
    double count = 0.0;
};

// Sampled (or fully enumerated) collection of variable subsets for the
// Shapley regression. The empty and full sets are always evaluated and enter
// the solve through the two equality constraints, not the draw list.
struct SubsetSamplePlan {
    int m2 = 0;
    double gamma = 1.0;
    long n_draws = 0;
    std::vector<SubsetDraw> draws;  // unique non-anchor subsets
    bool enumerated = false;        // exact kernel weights instead of counts

    // All subsets whose values must be estimated (anchors first).
    std::vector<std::vector<int>> unique_subsets() const;
};

// Shapley kernel weight of one subset, (m-1) / (C(m,k) * k * (m-k)).
double shapley_kernel(int m2, int subset_size);

// Draws floor(gamma * n_ev) subsets: sizes are sampled proportionally to the
// per-subset kernel weight and membership uniformly within a size, which
// keeps the number of unique subsets small for large m2.
SubsetSamplePlan sample_subsets(int m2, double gamma, long n_ev, std::uint64_t seed);

// All 2^m2 - 2 non-anchor subsets with exact kernel weights (small m2 only).
SubsetSamplePlan enumerate_subsets(int m2);

struct ShapleyAttribution {
    // phi[0] anchors at v(empty); phi[1..m2] are per-variable attributions.
    std::vector<EstimateWithCI> phi;
    int n_unique_subsets = 0;
    double efficiency_residual = 0.0;  // |phi0 + sum(phi) - v(full)|
    std::vector<std::string> warnings;
};

// Constrained weighted least squares of subset values on membership
// indicators: intercept pinned to v(empty), prediction at the full set pinned
// to v(full). CI variances combine the propagated per-observation influence
// of every subset value with the subset-sampling variance (order 1/n_draws).
ShapleyAttribution solve_shapley(const std::vector<SubsetValue>& values,
                                 const SubsetSamplePlan& plan, double alpha);

// Exact Shapley values from a complete table of 2^m2 values (test oracle and
// small-m2 reference); values indexed by subset bitmask.
std::vector<double> exact_shapley(const std::vector<double>& value_by_mask, int m2);

}  // namespace shiftdecomp
