#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "shiftdecomp/dataset.hpp"
#include "shiftdecomp/options.hpp"

namespace shiftdecomp {

enum class DgpKind { gaussian_logistic, uniform_logistic, covariate_mixture };

// Synthetic two-domain generator. Outcomes follow logistic models; the
// analyzed prediction rule defaults to the Bayes classifier of the source
// model (threshold 1/2), and the loss column is its 0-1 loss.
struct DgpSpec {
    DgpKind kind = DgpKind::gaussian_logistic;
    long n_source = 1000;
    long n_target = 1000;
    std::uint64_t seed = 1;

    // gaussian_logistic: independent unit-variance features, first entry W.
    Vec source_means, target_means;
    // Logistic coefficients over (w, z...) with no intercept.
    Vec source_coef, target_coef;

    // uniform_logistic: iid U[-1,1) features, first entry W; coefficient
    // vectors as above.
    int uniform_dims = 6;

    // covariate_mixture: W, Z1 standard normal; Z2 | Z1 is a two-component
    // Gaussian mixture centered at z1_couple*Z1 -/+ mix_gap. Only p(Z1)
    // shifts between domains (by target_z1_mean).
    double target_z1_mean = 1.0;
    double mix_gap = 2.0;
    double z1_couple = 1.0;
};

DgpSpec coverage_dgp(long n_per_domain, std::uint64_t seed);           // Gaussian setting
DgpSpec outcome_ranking_dgp(long n_per_domain, std::uint64_t seed);    // uniform setting
DgpSpec covariate_ranking_dgp(long n_per_domain, std::uint64_t seed);  // mixture setting

Dataset generate(const DgpSpec& spec);

struct AggregateTruth {
    double baseline = 0.0, covariate = 0.0, outcome = 0.0, total = 0.0;
};

// Deterministic quadrature oracle for the Gaussian setting.
AggregateTruth aggregate_truth(const DgpSpec& spec);
// Generic Monte Carlo oracle (any kind), for cross-checks.
AggregateTruth aggregate_truth_mc(const DgpSpec& spec, long draws, std::uint64_t seed);

// Value of the s-partial conditional covariate shift (Gaussian setting),
// by nested quadrature over the strata functions.
double covariate_value_truth(const DgpSpec& spec, const std::vector<int>& subset);

// Value of the s-partial (binned) outcome shift (Gaussian setting): Monte
// Carlo over target draws with the risk-bin-matched phantom conditional
// integrated by quadrature.
double outcome_value_truth(const DgpSpec& spec, const std::vector<int>& subset, int bins,
                           long outer_draws, std::uint64_t seed);

// Same estimand by the direct simulation route: phantom draws accepted by
// risk-bin match against a large pool (inner-noise bias corrected).
double outcome_value_truth_rejection(const DgpSpec& spec, const std::vector<int>& subset, int bins,
                                     long outer_draws, long pool_size, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Coverage experiment harness
// ---------------------------------------------------------------------------

enum class EstimatorKind { debiased, plugin };

struct CoverageRequest {
    DgpSpec spec;
    EstimatorKind estimator = EstimatorKind::debiased;
    bool aggregate = true;
    std::vector<std::vector<int>> covariate_subsets;
    std::vector<std::vector<int>> outcome_subsets;
    int reps = 200;
    double alpha = 0.10;
    double train_fraction = 0.8;
    int inner_subsample = 2000;
    int threads = 0;  // 0 = hardware concurrency
    std::uint64_t seed = 1;
    LearnerOptions learners;
};

struct CoverageRow {
    std::string target;
    double truth = 0.0;
    double coverage = 0.0;
    double mean_width = 0.0;
    double mean_point = 0.0;
    int reps = 0;
};

// `truths` maps target names (baseline/covariate/outcome, v_z:1, v_y:1, ...)
// to oracle values; missing entries are computed with the built-in oracles.
std::vector<CoverageRow> coverage_experiment(const CoverageRequest& request,
                                             std::map<std::string, double> truths = {});

std::string target_name_aggregate(int which);                       // 0,1,2 -> baseline,...
std::string target_name_covariate(const std::vector<int>& subset);  // "v_z:1,2"
std::string target_name_outcome(const std::vector<int>& subset);    // "v_y:1,2"

}  // namespace shiftdecomp
