#pragma once

#include <cstdint>
#include <string_view>

#include "shiftdecomp/learners.hpp"

namespace shiftdecomp {

// Learner/nuisance configuration shared by the estimation modules.
struct LearnerOptions {
    std::vector<LearnerConfig> classifier_grid = default_classifier_grid();
    std::vector<LearnerConfig> regressor_grid = default_regressor_grid();
    int folds = 3;
    double clip_lo = 0.01;
    double clip_hi = 0.99;
    int risk_bins = 20;
    std::uint64_t seed = 1;
};

// Fits E[target|X]: binary targets go through probabilistic classification,
// real-valued targets through regression.
FitResult fit_conditional_mean(const Mat& X, const Vec& target, const LearnerOptions& opt,
                               std::string_view label);

}  // namespace shiftdecomp
