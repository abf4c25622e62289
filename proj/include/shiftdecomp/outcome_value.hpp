#pragma once

#include <string>
#include <vector>

#include "shiftdecomp/covariate_value.hpp"
#include "shiftdecomp/dataset.hpp"
#include "shiftdecomp/options.hpp"

namespace shiftdecomp {

// Evaluates the loss function at counterfactual outcomes and at feature points
// that are not dataset rows (mixed phantom points in the V-statistic).
//
// For {0,1} losses with binary outcomes the analyzed model's predicted label
// is recoverable per row (label = y XOR loss), so row-level counterfactual
// losses are exact and phantom points go through a fitted surrogate of the
// prediction rule. Real-valued losses fall back to per-outcome regressions.
class LossOracle {
public:
    static LossOracle fit(const Dataset& ds, const SplitPlan& plan, const LearnerOptions& opt);

    // loss(x_row, 1) and loss(x_row, 0) at a dataset row; the observed outcome
    // side is always the recorded loss.
    void row_losses(const Dataset& ds, int dataset_row, double& loss_y1, double& loss_y0) const;
    // loss(x, 1) and loss(x, 0) at arbitrary feature points.
    void phantom_losses(const Mat& X, Vec& loss_y1, Vec& loss_y0) const;
    bool exact01() const { return exact01_; }

private:
    bool exact01_ = true;
    ModelPtr label_prob_;           // P(predicted label = 1 | x), exact01 path
    ModelPtr loss_given_y1_, loss_given_y0_;  // fallback regressions
};

// Classifier-based estimate of p_tgt(z_-s | w, z_s) / p_tgt(z_-s): original
// target rows against a copy whose z_-s block is permuted, with the binned
// source risk recomputed on the permuted rows and appended as a feature.
DensityRatioModel fit_phantom_ratio(const Mat& w_rows, const Mat& z_rows,
                                    const std::vector<int>& subset, const RiskModel& risk,
                                    const std::vector<LearnerConfig>& candidates, int folds,
                                    std::uint64_t seed, double clip_lo = 0.01, double clip_hi = 0.99);

struct OutcomeSharedNuisances {
    RiskModel risk;              // q(w,z) = p_src(Y=1|w,z), binned into B bins
    ModelPtr mu_target;          // E_tgt[loss | w,z]
    ModelPtr mu_source;          // E_src[loss | w,z]
    DensityRatioModel ratio_wz;  // p_tgt(w,z)/p_src(w,z)
    LossOracle loss_oracle;
};

// Per-subset nuisances for the s-partial outcome shift.
struct OutcomeSubsetNuisances {
    ModelPtr recalibrated_prob;   // p(Y=1 | w, z_s, q_bin) fitted on target rows
    DensityRatioModel phantom_ratio;
};

class OutcomeValueEngine {
public:
    OutcomeValueEngine(const Dataset& ds, const SplitPlan& plan, const LearnerOptions& opt,
                       double alpha, int inner_subsample = 2000);
    // Injected shared nuisances (analytic oracles in tests); skips fitting.
    OutcomeValueEngine(const Dataset& ds, const SplitPlan& plan, const LearnerOptions& opt,
                       double alpha, int inner_subsample, OutcomeSharedNuisances shared);

    SubsetValue value(const std::vector<int>& subset) const;

    double denominator() const { return den_; }
    double denominator_se() const;
    bool denominator_defined() const { return !den_undefined_; }
    const OutcomeSharedNuisances& shared() const { return shared_; }
    const std::vector<std::string>& diagnostics() const { return diagnostics_; }

    OutcomeSubsetNuisances fit_subset_nuisances(const std::vector<int>& subset) const;
    SubsetValue value_from_nuisances(const std::vector<int>& subset,
                                     const OutcomeSubsetNuisances& sub) const;

private:
    void init_eval_caches();

    const Dataset& ds_;
    SplitPlan plan_;
    LearnerOptions opt_;
    double alpha_;
    int inner_subsample_;
    OutcomeSharedNuisances shared_;

    std::vector<int> eval_rows_, ev_src_, ev_tgt_;  // positions within eval order
    double p_src_ = 0.0, p_tgt_ = 0.0;
    Vec loss_ev_, mu1_ev_, mu0_ev_, qbin_ev_;
    double den_ = 0.0;
    Vec psi_den_;
    bool den_undefined_ = false;
    double den_tolerance_ = 0.0;
    std::vector<std::string> diagnostics_;
};

}  // namespace shiftdecomp
