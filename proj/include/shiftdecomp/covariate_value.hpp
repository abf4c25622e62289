#pragma once

#include <string>
#include <vector>

#include "shiftdecomp/dataset.hpp"
#include "shiftdecomp/options.hpp"
#include "shiftdecomp/stats.hpp"

namespace shiftdecomp {

// Estimated value of an s-partial shift: value = 1 - num/den, where num is the
// one-step estimate of the unexplained variation under the hypothesized shift
// and den the total variation. Carries its per-eval-row influence values so
// Shapley attribution can propagate estimation uncertainty.
struct SubsetValue {
    std::vector<int> subset;  // 0-based Z column indices, sorted
    EstimateWithCI value;
    Vec influence;            // aligned with the pooled eval rows, mean ~ 0
    double num = 0.0;
    double num_se = 0.0;      // standard error of the numerator alone
    double den = 0.0;
    bool undefined = false;   // den below tolerance: nothing to explain
    std::vector<std::string> warnings;
};

// Nuisances shared by every subset of the conditional covariate decomposition.
struct CovariateSharedNuisances {
    ModelPtr mu_w_source;    // E_src[loss | W]
    ModelPtr mu_wz_source;   // E_src[loss | W, Z]
    DensityRatioModel ratio_w;
    DensityRatioModel ratio_wz;
    ModelPtr proj_full;      // regression of mu_wz_source on W over target rows
};

// Per-subset nuisances (fitted on the training partition, or supplied
// analytically by tests).
struct CovariateSubsetNuisances {
    ModelPtr mu_ws_source;   // E_src[loss | W, Z_s]
    DensityRatioModel ratio_ws;
    ModelPtr proj_subset;    // regression of mu_ws_source on W over target rows
};

struct OneStepNum {
    double num = 0.0;
    Vec psi;  // pooled-eval influence of num (empirical mean 0)
};

// The five-term one-step estimate of the numerator on the eval partition.
OneStepNum covariate_num(const Dataset& ds, const SplitPlan& plan,
                         const CovariateSharedNuisances& shared,
                         const CovariateSubsetNuisances& sub, const std::vector<int>& subset);

class CovariateValueEngine {
public:
    CovariateValueEngine(const Dataset& ds, const SplitPlan& plan, const LearnerOptions& opt,
                         double alpha);
    // Injected shared nuisances (analytic oracles in tests); skips fitting.
    CovariateValueEngine(const Dataset& ds, const SplitPlan& plan, const LearnerOptions& opt,
                         double alpha, CovariateSharedNuisances shared);

    // Value of the s-partial conditional covariate shift. The empty set and
    // the full set use the analytic nuisance-reuse conventions and come out
    // exactly 0 and 1.
    SubsetValue value(const std::vector<int>& subset) const;

    double denominator() const { return den_; }
    bool denominator_defined() const { return !den_undefined_; }
    const CovariateSharedNuisances& shared() const { return shared_; }

    // Fits the per-subset nuisance models (exposed for tests).
    CovariateSubsetNuisances fit_subset_nuisances(const std::vector<int>& subset) const;

    SubsetValue value_from_nuisances(const std::vector<int>& subset,
                                     const CovariateSubsetNuisances& sub) const;

private:
    void init_denominator();

    const Dataset& ds_;
    SplitPlan plan_;
    LearnerOptions opt_;
    double alpha_;
    CovariateSharedNuisances shared_;
    double den_ = 0.0;
    Vec psi_den_;
    bool den_undefined_ = false;
    double den_tolerance_ = 0.0;
};

}  // namespace shiftdecomp
