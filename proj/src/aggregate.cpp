#include "shiftdecomp/aggregate.hpp"

#include <algorithm>
#include <cmath>

#include "shiftdecomp/rng.hpp"

namespace shiftdecomp {

FitResult fit_conditional_mean(const Mat& X, const Vec& target, const LearnerOptions& opt,
                               std::string_view label) {
    const bool binary = std::all_of(target.data(), target.data() + target.size(),
                                    [](double v) { return v == 0.0 || v == 1.0; });
    const auto& grid = binary ? opt.classifier_grid : opt.regressor_grid;
    const Task task = binary ? Task::classification : Task::regression;
    return fit_cv(grid, X, target, opt.folds, derive_seed(opt.seed, label), task);
}

namespace {

struct EvalFrame {
    std::vector<int> src, tgt;   // positions within the eval row list
    std::vector<int> rows;       // dataset row ids, eval order
    Vec loss;
    double p_src = 0.0, p_tgt = 0.0;
    long n = 0;
};

EvalFrame make_frame(const Dataset& ds, const SplitPlan& plan) {
    EvalFrame f;
    f.rows = plan.eval_indices;
    f.n = static_cast<long>(f.rows.size());
    f.loss.resize(f.n);
    for (long i = 0; i < f.n; ++i) {
        f.loss[i] = ds.loss()[f.rows[static_cast<std::size_t>(i)]];
        if (ds.is_source(f.rows[static_cast<std::size_t>(i)]))
            f.src.push_back(static_cast<int>(i));
        else
            f.tgt.push_back(static_cast<int>(i));
    }
    if (f.src.empty() || f.tgt.empty())
        throw EstimationError("aggregate: evaluation partition is missing a domain");
    f.p_src = static_cast<double>(f.src.size()) / static_cast<double>(f.n);
    f.p_tgt = static_cast<double>(f.tgt.size()) / static_cast<double>(f.n);
    return f;
}

double mean_over(const Vec& v, const std::vector<int>& pos) {
    double s = 0.0;
    for (int i : pos) s += v[i];
    return s / static_cast<double>(pos.size());
}

void check_finite(const Vec& v, const char* what) {
    if (!v.allFinite()) throw EstimationError(std::string("aggregate: non-finite ") + what);
}

}  // namespace

AggregateNuisances fit_aggregate_nuisances(const Dataset& ds, const SplitPlan& plan,
                                           const LearnerOptions& opt) {
    std::vector<int> tr_src, tr_tgt;
    for (int r : plan.train_indices) (ds.is_source(r) ? tr_src : tr_tgt).push_back(r);
    if (tr_src.empty() || tr_tgt.empty())
        throw EstimationError("aggregate: training partition is missing a domain");

    AggregateNuisances nu;
    const Mat w_src = take_rows(ds.w(), tr_src), wz_src = take_rows(ds.wz(), tr_src);
    const Mat w_tgt = take_rows(ds.w(), tr_tgt), wz_tgt = take_rows(ds.wz(), tr_tgt);
    const Vec loss_src = take(ds.loss(), tr_src);

    auto mu_w = fit_conditional_mean(w_src, loss_src, opt, "mu_w_source");
    auto mu_wz = fit_conditional_mean(wz_src, loss_src, opt, "mu_wz_source");
    nu.loss_mean_w_source = mu_w.model;
    nu.loss_mean_wz_source = mu_wz.model;
    nu.ratio_w = fit_density_ratio(w_tgt, w_src, opt.classifier_grid, opt.folds,
                                   derive_seed(opt.seed, "ratio_w"), opt.clip_lo, opt.clip_hi);
    nu.ratio_wz = fit_density_ratio(wz_tgt, wz_src, opt.classifier_grid, opt.folds,
                                    derive_seed(opt.seed, "ratio_wz"), opt.clip_lo, opt.clip_hi);
    nu.selected = {"loss_mean_w_source=" + mu_w.selected.name(),
                   "loss_mean_wz_source=" + mu_wz.selected.name()};
    return nu;
}

AggregateDecomposition estimate_aggregate(const Dataset& ds, const SplitPlan& plan,
                                          const AggregateNuisances& nu, double alpha) {
    EvalFrame f = make_frame(ds, plan);
    const Mat w_ev = take_rows(ds.w(), f.rows), wz_ev = take_rows(ds.wz(), f.rows);

    const Vec mu_w = nu.loss_mean_w_source->predict(w_ev);
    const Vec mu_wz = nu.loss_mean_wz_source->predict(wz_ev);
    const Vec r_w = nu.ratio_w.ratio(w_ev);
    const Vec r_wz = nu.ratio_wz.ratio(wz_ev);
    check_finite(mu_w, "conditional mean (W)");
    check_finite(mu_wz, "conditional mean (W,Z)");
    check_finite(r_w, "density ratio (W)");
    check_finite(r_wz, "density ratio (W,Z)");

    // Weighted residuals on source rows: a = (loss - mu_w) * ratio_w,
    // b = (loss - mu_wz) * ratio_wz.
    Vec a = (f.loss - mu_w).cwiseProduct(r_w);
    Vec b = (f.loss - mu_wz).cwiseProduct(r_wz);

    const double p0a = mean_over(a, f.src), p0b = mean_over(b, f.src);
    const double p0l = mean_over(f.loss, f.src), p1l = mean_over(f.loss, f.tgt);
    const double p1mw = mean_over(mu_w, f.tgt), p1mwz = mean_over(mu_wz, f.tgt);

    const double lam_w = p0a + p1mw - p0l;
    const double lam_z = p0b + p1mwz - p0a - p1mw;
    const double lam_y = p1l - p0b - p1mwz;

    Vec psi_w = Vec::Zero(f.n), psi_z = Vec::Zero(f.n), psi_y = Vec::Zero(f.n);
    for (int i : f.src) {
        psi_w[i] = (a[i] - f.loss[i]) / f.p_src;
        psi_z[i] = (b[i] - a[i]) / f.p_src;
        psi_y[i] = -b[i] / f.p_src;
    }
    for (int i : f.tgt) {
        psi_w[i] = mu_w[i] / f.p_tgt;
        psi_z[i] = (mu_wz[i] - mu_w[i]) / f.p_tgt;
        psi_y[i] = (f.loss[i] - mu_wz[i]) / f.p_tgt;
    }
    psi_w.array() -= lam_w;
    psi_z.array() -= lam_z;
    psi_y.array() -= lam_y;

    Vec psi_total(f.n);
    for (long i = 0; i < f.n; ++i)
        psi_total[i] = ds.is_source(f.rows[static_cast<std::size_t>(i)])
                           ? -(f.loss[i] - p0l) / f.p_src
                           : (f.loss[i] - p1l) / f.p_tgt;

    AggregateDecomposition out;
    out.baseline = make_estimate(lam_w, psi_w, alpha);
    out.covariate = make_estimate(lam_z, psi_z, alpha);
    out.outcome = make_estimate(lam_y, psi_y, alpha);
    out.total = make_estimate(p1l - p0l, psi_total, alpha);
    if (out.baseline.degenerate || out.covariate.degenerate || out.outcome.degenerate)
        out.warnings.push_back("zero-variance influence function; CI width is zero");
    return out;
}

AggregateDecomposition estimate_aggregate_plugin(const Dataset& ds, const SplitPlan& plan,
                                                 const AggregateNuisances& nu, double alpha) {
    EvalFrame f = make_frame(ds, plan);
    const Mat w_ev = take_rows(ds.w(), f.rows), wz_ev = take_rows(ds.wz(), f.rows);
    const Vec mu_w = nu.loss_mean_w_source->predict(w_ev);
    const Vec mu_wz = nu.loss_mean_wz_source->predict(wz_ev);

    const double p0l = mean_over(f.loss, f.src), p1l = mean_over(f.loss, f.tgt);
    const double p1mw = mean_over(mu_w, f.tgt), p1mwz = mean_over(mu_wz, f.tgt);

    const double lam_w = p1mw - p0l;
    const double lam_z = p1mwz - p1mw;
    const double lam_y = p1l - p1mwz;

    Vec psi_w = Vec::Zero(f.n), psi_z = Vec::Zero(f.n), psi_y = Vec::Zero(f.n);
    for (int i : f.src) psi_w[i] = -f.loss[i] / f.p_src;
    for (int i : f.tgt) {
        psi_w[i] = mu_w[i] / f.p_tgt;
        psi_z[i] = (mu_wz[i] - mu_w[i]) / f.p_tgt;
        psi_y[i] = (f.loss[i] - mu_wz[i]) / f.p_tgt;
    }
    psi_w.array() -= lam_w;
    psi_z.array() -= lam_z;
    psi_y.array() -= lam_y;

    Vec psi_total(f.n);
    for (long i = 0; i < f.n; ++i)
        psi_total[i] = ds.is_source(f.rows[static_cast<std::size_t>(i)])
                           ? -(f.loss[i] - p0l) / f.p_src
                           : (f.loss[i] - p1l) / f.p_tgt;

    AggregateDecomposition out;
    out.baseline = make_estimate(lam_w, psi_w, alpha);
    out.covariate = make_estimate(lam_z, psi_z, alpha);
    out.outcome = make_estimate(lam_y, psi_y, alpha);
    out.total = make_estimate(p1l - p0l, psi_total, alpha);
    return out;
}

AggregateDecomposition estimate_aggregate_crossfit(const Dataset& ds, int k_folds,
                                                   const LearnerOptions& opt, double alpha) {
    if (k_folds < 2) throw ConfigError("crossfit: need at least 2 folds");

    // Stratified fold assignment by domain.
    std::vector<int> fold_of(static_cast<std::size_t>(ds.n()), 0);
    Rng rng(derive_seed(opt.seed, "crossfit"));
    for (int d : {0, 1}) {
        std::vector<int> rows = ds.rows_in_domain(d);
        rng.shuffle(rows);
        for (std::size_t i = 0; i < rows.size(); ++i)
            fold_of[static_cast<std::size_t>(rows[i])] = static_cast<int>(i % static_cast<std::size_t>(k_folds));
    }

    // Per-row nuisance predictions from the fold-complement models.
    Vec mu_w(ds.n()), mu_wz(ds.n()), r_w(ds.n()), r_wz(ds.n());
    for (int k = 0; k < k_folds; ++k) {
        SplitPlan fold_plan;
        for (Index i = 0; i < ds.n(); ++i)
            (fold_of[static_cast<std::size_t>(i)] == k ? fold_plan.eval_indices : fold_plan.train_indices)
                .push_back(static_cast<int>(i));
        LearnerOptions fold_opt = opt;
        fold_opt.seed = derive_seed(opt.seed, "crossfit_fold", static_cast<std::uint64_t>(k));
        AggregateNuisances nu = fit_aggregate_nuisances(ds, fold_plan, fold_opt);
        const Mat w_ev = take_rows(ds.w(), fold_plan.eval_indices);
        const Mat wz_ev = take_rows(ds.wz(), fold_plan.eval_indices);
        const Vec mw = nu.loss_mean_w_source->predict(w_ev);
        const Vec mwz = nu.loss_mean_wz_source->predict(wz_ev);
        const Vec rw = nu.ratio_w.ratio(w_ev);
        const Vec rwz = nu.ratio_wz.ratio(wz_ev);
        for (std::size_t i = 0; i < fold_plan.eval_indices.size(); ++i) {
            const int r = fold_plan.eval_indices[i];
            mu_w[r] = mw[static_cast<Index>(i)];
            mu_wz[r] = mwz[static_cast<Index>(i)];
            r_w[r] = rw[static_cast<Index>(i)];
            r_wz[r] = rwz[static_cast<Index>(i)];
        }
    }

    // Same estimator algebra as the split-sample path, over all rows.
    SplitPlan all;
    for (Index i = 0; i < ds.n(); ++i) all.eval_indices.push_back(static_cast<int>(i));
    EvalFrame f = make_frame(ds, all);

    Vec a = (f.loss - mu_w).cwiseProduct(r_w);
    Vec b = (f.loss - mu_wz).cwiseProduct(r_wz);
    const double p0a = mean_over(a, f.src), p0b = mean_over(b, f.src);
    const double p0l = mean_over(f.loss, f.src), p1l = mean_over(f.loss, f.tgt);
    const double p1mw = mean_over(mu_w, f.tgt), p1mwz = mean_over(mu_wz, f.tgt);

    const double lam_w = p0a + p1mw - p0l;
    const double lam_z = p0b + p1mwz - p0a - p1mw;
    const double lam_y = p1l - p0b - p1mwz;

    Vec psi_w = Vec::Zero(f.n), psi_z = Vec::Zero(f.n), psi_y = Vec::Zero(f.n);
    for (int i : f.src) {
        psi_w[i] = (a[i] - f.loss[i]) / f.p_src;
        psi_z[i] = (b[i] - a[i]) / f.p_src;
        psi_y[i] = -b[i] / f.p_src;
    }
    for (int i : f.tgt) {
        psi_w[i] = mu_w[i] / f.p_tgt;
        psi_z[i] = (mu_wz[i] - mu_w[i]) / f.p_tgt;
        psi_y[i] = (f.loss[i] - mu_wz[i]) / f.p_tgt;
    }
    psi_w.array() -= lam_w;
    psi_z.array() -= lam_z;
    psi_y.array() -= lam_y;
    Vec psi_total(f.n);
    for (long i = 0; i < f.n; ++i)
        psi_total[i] = ds.is_source(f.rows[static_cast<std::size_t>(i)])
                           ? -(f.loss[i] - p0l) / f.p_src
                           : (f.loss[i] - p1l) / f.p_tgt;

    AggregateDecomposition out;
    out.baseline = make_estimate(lam_w, psi_w, alpha);
    out.covariate = make_estimate(lam_z, psi_z, alpha);
    out.outcome = make_estimate(lam_y, psi_y, alpha);
    out.total = make_estimate(p1l - p0l, psi_total, alpha);
    return out;
}

}  // namespace shiftdecomp
