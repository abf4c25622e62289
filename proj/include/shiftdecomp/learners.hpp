#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "shiftdecomp/common.hpp"

namespace shiftdecomp {

// Fitted prediction model. Classifiers return probabilities, regressors means.
// Fitted models are immutable and safe to share across threads.
class Model {
public:
    virtual ~Model() = default;
    virtual Vec predict(const Mat& X) const = 0;
    double predict_one(const Eigen::RowVectorXd& x) const {
        Mat m(1, x.size());
        m.row(0) = x;
        return predict(m)[0];
    }
};
using ModelPtr = std::shared_ptr<const Model>;

enum class LearnerKind { logistic_poly, gbt, ridge_linear };
enum class Task { classification, regression };

struct LearnerConfig {
    LearnerKind kind = LearnerKind::logistic_poly;
    int degree = 1;               // polynomial degree (logistic_poly / ridge_linear)
    double lambda = 0.01;         // ridge penalty on coefficients (not intercept)
    int trees = 200;              // gbt
    int depth = 2;                // gbt
    double learning_rate = 0.1;   // gbt
    std::string name() const;
    bool supports(Task task) const;
};

std::vector<LearnerConfig> default_classifier_grid();
std::vector<LearnerConfig> default_regressor_grid();

struct FitResult {
    ModelPtr model;
    LearnerConfig selected;
    double cv_score = 0.0;          // mean held-out log-loss or MSE
    bool constant_target = false;   // degenerate target; model is a constant
};

// Cross-validated selection over the candidate list (ties broken by list
// order), refit on all rows. Deterministic given (data, seed, candidates).
FitResult fit_cv(const std::vector<LearnerConfig>& candidates, const Mat& X, const Vec& y,
                 int folds, std::uint64_t seed, Task task);

ModelPtr fit_one(const LearnerConfig& config, const Mat& X, const Vec& y, Task task);

// Density ratio p_num(x)/p_den(x) by classification reduction: probabilities
// are clamped to [clip_lo, clip_hi] before odds, so emitted ratios stay in
// [prior * lo/hi, prior * hi/lo].
class DensityRatioModel {
public:
    DensityRatioModel() = default;
    DensityRatioModel(ModelPtr classifier, double prior_correction, double clip_lo, double clip_hi)
        : classifier_(std::move(classifier)), prior_(prior_correction), lo_(clip_lo), hi_(clip_hi) {}

    Vec ratio(const Mat& X) const;
    double prior_correction() const { return prior_; }
    const ModelPtr& classifier() const { return classifier_; }
    // Fraction of rows whose classifier probability hit a clamp bound.
    mutable long clamped_count = 0;
    mutable long eval_count = 0;

private:
    ModelPtr classifier_;
    double prior_ = 1.0;
    double lo_ = 0.01, hi_ = 0.99;
};

DensityRatioModel fit_density_ratio(const Mat& numerator_X, const Mat& denominator_X,
                                    const std::vector<LearnerConfig>& candidates, int folds,
                                    std::uint64_t seed, double clip_lo = 0.01, double clip_hi = 0.99);

// q_bin(x) = floor(q(x) * B + 1/2) / B.
Vec bin_risk(const Vec& q_values, int bins);

// Source-domain risk model q(w,z) = p_src(Y=1|w,z) with a bin count.
struct RiskModel {
    ModelPtr q;
    int bins = 20;
    Vec risk(const Mat& X) const { return q->predict(X); }
    Vec binned(const Mat& X) const { return bin_risk(q->predict(X), bins); }
};

// A constant prediction (degenerate targets, oracle plumbing in tests).
class ConstantModel : public Model {
public:
    explicit ConstantModel(double value) : value_(value) {}
    Vec predict(const Mat& X) const override { return Vec::Constant(X.rows(), value_); }

private:
    double value_;
};

// Exposes degree-1 logistic coefficients on the original feature scale.
class LinearCoefModel : public Model {
public:
    virtual Vec raw_coefficients() const = 0;  // [intercept, beta_1..beta_p]
};

}  // namespace shiftdecomp
