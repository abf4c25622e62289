#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "shiftdecomp/dataset.hpp"
#include "shiftdecomp/learners.hpp"
#include "shiftdecomp/options.hpp"
#include "shiftdecomp/rng.hpp"

namespace sdtest {

using namespace shiftdecomp;

// Wraps an arbitrary row function as a Model, for oracle nuisances.
class FnModel : public Model {
public:
    using RowFn = std::function<double(const Eigen::RowVectorXd&)>;
    explicit FnModel(RowFn fn) : fn_(std::move(fn)) {}
    Vec predict(const Mat& X) const override {
        Vec out(X.rows());
        for (Index i = 0; i < X.rows(); ++i) out[i] = fn_(X.row(i));
        return out;
    }

private:
    RowFn fn_;
};

inline ModelPtr fn_model(FnModel::RowFn fn) { return std::make_shared<FnModel>(std::move(fn)); }

// Density ratio backed by an arbitrary function (no clamping, prior 1).
inline DensityRatioModel fn_ratio(FnModel::RowFn fn) {
    // Encode the ratio r through a pseudo-probability p = r/(1+r) so the
    // standard odds transform returns exactly r.
    auto prob = [fn = std::move(fn)](const Eigen::RowVectorXd& x) {
        const double r = fn(x);
        return r / (1.0 + r);
    };
    return DensityRatioModel(fn_model(prob), 1.0, 1e-12, 1.0 - 1e-12);
}

// Small random two-domain dataset with mild structure, for property tests.
inline Dataset random_dataset(long n_per_domain, int m1, int m2, std::uint64_t seed) {
    Rng rng(seed);
    const long n = 2 * n_per_domain;
    Mat w(n, m1), z(n, m2);
    Vec y(n), domain(n), loss(n);
    for (long i = 0; i < n; ++i) {
        const bool target = i >= n_per_domain;
        domain[i] = target ? 1.0 : 0.0;
        for (int j = 0; j < m1; ++j) w(i, j) = rng.normal() + (target ? 0.3 : 0.0);
        for (int j = 0; j < m2; ++j) z(i, j) = rng.normal() + (target ? 0.4 * (j + 1) : 0.0);
        double score = 0.4 * (m1 > 0 ? w(i, 0) : 0.0);
        for (int j = 0; j < m2; ++j) score += (target ? 0.5 : 0.8) * z(i, j) / (j + 1);
        y[i] = rng.bernoulli(1.0 / (1.0 + std::exp(-score))) ? 1.0 : 0.0;
        const double pred = score >= 0.0 ? 1.0 : 0.0;
        loss[i] = pred != y[i] ? 1.0 : 0.0;
    }
    return Dataset(std::move(w), std::move(z), std::move(y), std::move(domain), std::move(loss));
}

// Cheap learner grids to keep unit tests quick.
inline std::vector<LearnerConfig> tiny_classifier_grid() {
    return {{LearnerKind::logistic_poly, 1, 0.01}, {LearnerKind::logistic_poly, 2, 0.1}};
}
inline std::vector<LearnerConfig> tiny_regressor_grid() {
    return {{LearnerKind::ridge_linear, 1, 0.01}, {LearnerKind::ridge_linear, 2, 0.1}};
}

inline LearnerOptions tiny_options(std::uint64_t seed = 7) {
    LearnerOptions opt;
    opt.classifier_grid = tiny_classifier_grid();
    opt.regressor_grid = tiny_regressor_grid();
    opt.folds = 3;
    opt.seed = seed;
    return opt;
}

}  // namespace sdtest
