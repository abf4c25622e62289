#pragma once

#include <string>
#include <vector>

#include "shiftdecomp/dataset.hpp"
#include "shiftdecomp/options.hpp"
#include "shiftdecomp/stats.hpp"

namespace shiftdecomp {

// Nuisances for the aggregate decomposition, fitted on the training partition:
// conditional mean losses in the source domain given W and given (W,Z), and
// target/source density ratios on W and on (W,Z).
struct AggregateNuisances {
    ModelPtr loss_mean_w_source;   // E_src[loss | W]
    ModelPtr loss_mean_wz_source;  // E_src[loss | W, Z]
    DensityRatioModel ratio_w;     // p_tgt(W) / p_src(W)
    DensityRatioModel ratio_wz;    // p_tgt(W,Z) / p_src(W,Z)
    std::vector<std::string> selected;  // learner chosen per nuisance, for reporting
};

struct AggregateDecomposition {
    EstimateWithCI baseline;   // shift in p(W)
    EstimateWithCI covariate;  // shift in p(Z|W)
    EstimateWithCI outcome;    // shift in p(Y|W,Z)
    EstimateWithCI total;      // target mean loss - source mean loss
    std::vector<std::string> warnings;
};

AggregateNuisances fit_aggregate_nuisances(const Dataset& dataset, const SplitPlan& plan,
                                           const LearnerOptions& opt);

// Debiased (AIPW, one-step corrected) estimates evaluated on the eval
// partition. The three terms telescope to `total` exactly for any nuisances.
AggregateDecomposition estimate_aggregate(const Dataset& dataset, const SplitPlan& plan,
                                          const AggregateNuisances& nuisances, double alpha);

// Plug-in comparison arm: no correction terms; the CIs treat the fitted
// nuisances as known and are not asymptotically valid.
AggregateDecomposition estimate_aggregate_plugin(const Dataset& dataset, const SplitPlan& plan,
                                                 const AggregateNuisances& nuisances,
                                                 double alpha = 0.10);

// K-fold cross-fitted variant: every row is evaluated with nuisances trained
// on the other folds; influence values are pooled for the variance.
AggregateDecomposition estimate_aggregate_crossfit(const Dataset& dataset, int k_folds,
                                                   const LearnerOptions& opt, double alpha);

}  // namespace shiftdecomp
