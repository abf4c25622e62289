#include "shiftdecomp/covariate_value.hpp"

#include <algorithm>
#include <cmath>

#include "shiftdecomp/rng.hpp"

namespace shiftdecomp {

namespace {

Mat subset_features(const Dataset& ds, const std::vector<int>& rows, const std::vector<int>& subset) {
    Mat w = take_rows(ds.w(), rows);
    Mat zs(static_cast<Index>(rows.size()), static_cast<Index>(subset.size()));
    for (std::size_t j = 0; j < subset.size(); ++j)
        for (std::size_t i = 0; i < rows.size(); ++i)
            zs(static_cast<Index>(i), static_cast<Index>(j)) = ds.z()(rows[i], subset[j]);
    return hcat(w, zs);
}

struct Frame {
    std::vector<int> src, tgt;
    Vec loss;
    double p_src = 0.0, p_tgt = 0.0;
    long n = 0;
};

Frame make_frame(const Dataset& ds, const std::vector<int>& rows) {
    Frame f;
    f.n = static_cast<long>(rows.size());
    f.loss.resize(f.n);
    for (long i = 0; i < f.n; ++i) {
        f.loss[i] = ds.loss()[rows[static_cast<std::size_t>(i)]];
        (ds.is_source(rows[static_cast<std::size_t>(i)]) ? f.src : f.tgt).push_back(static_cast<int>(i));
    }
    if (f.src.empty() || f.tgt.empty())
        throw EstimationError("covariate value: evaluation partition is missing a domain");
    f.p_src = static_cast<double>(f.src.size()) / static_cast<double>(f.n);
    f.p_tgt = static_cast<double>(f.tgt.size()) / static_cast<double>(f.n);
    return f;
}

}  // namespace

OneStepNum covariate_num(const Dataset& ds, const SplitPlan& plan,
                         const CovariateSharedNuisances& shared,
                         const CovariateSubsetNuisances& sub, const std::vector<int>& subset) {
    const std::vector<int>& rows = plan.eval_indices;
    Frame f = make_frame(ds, rows);

    const Mat w_ev = take_rows(ds.w(), rows);
    const Mat wz_ev = take_rows(ds.wz(), rows);
    const Mat ws_ev = subset_features(ds, rows, subset);

    const Vec proj_sub = sub.proj_subset->predict(w_ev);
    const Vec proj_full = shared.proj_full->predict(w_ev);
    const Vec g = proj_sub - proj_full;
    const Vec mu_ws = sub.mu_ws_source->predict(ws_ev);
    const Vec r_ws = sub.ratio_ws.ratio(ws_ev);
    const Vec mu_wz = shared.mu_wz_source->predict(wz_ev);
    const Vec r_wz = shared.ratio_wz.ratio(wz_ev);
    if (!r_ws.allFinite() || !r_wz.allFinite())
        throw EstimationError("covariate value: density ratio emitted a non-finite value");

    // Source rows carry the weighted-residual corrections; target rows the
    // plug-in square plus the nested-regression corrections.
    Vec src_part = Vec::Zero(f.n), tgt_part = Vec::Zero(f.n);
    for (int i : f.src)
        src_part[i] = 2.0 * g[i] * (f.loss[i] - mu_ws[i]) * r_ws[i] -
                      2.0 * g[i] * (f.loss[i] - mu_wz[i]) * r_wz[i];
    for (int i : f.tgt)
        tgt_part[i] = g[i] * g[i] + 2.0 * g[i] * (mu_ws[i] - proj_sub[i]) -
                      2.0 * g[i] * (mu_wz[i] - proj_full[i]);

    double src_sum = 0.0, tgt_sum = 0.0;
    for (int i : f.src) src_sum += src_part[i];
    for (int i : f.tgt) tgt_sum += tgt_part[i];

    OneStepNum out;
    out.num = src_sum / static_cast<double>(f.src.size()) + tgt_sum / static_cast<double>(f.tgt.size());
    out.psi = Vec::Zero(f.n);
    for (int i : f.src) out.psi[i] = src_part[i] / f.p_src;
    for (int i : f.tgt) out.psi[i] = tgt_part[i] / f.p_tgt;
    out.psi.array() -= out.num;
    return out;
}

CovariateValueEngine::CovariateValueEngine(const Dataset& ds, const SplitPlan& plan,
                                           const LearnerOptions& opt, double alpha)
    : ds_(ds), plan_(plan), opt_(opt), alpha_(alpha) {
    std::vector<int> tr_src, tr_tgt;
    for (int r : plan.train_indices) (ds.is_source(r) ? tr_src : tr_tgt).push_back(r);
    if (tr_src.empty() || tr_tgt.empty())
        throw EstimationError("covariate value: training partition is missing a domain");

    const Mat w_src = take_rows(ds.w(), tr_src), wz_src = take_rows(ds.wz(), tr_src);
    const Mat w_tgt = take_rows(ds.w(), tr_tgt), wz_tgt = take_rows(ds.wz(), tr_tgt);
    const Vec loss_src = take(ds.loss(), tr_src);

    shared_.mu_w_source = fit_conditional_mean(w_src, loss_src, opt_, "cov_mu_w").model;
    shared_.mu_wz_source = fit_conditional_mean(wz_src, loss_src, opt_, "cov_mu_wz").model;
    shared_.ratio_w = fit_density_ratio(w_tgt, w_src, opt_.classifier_grid, opt_.folds,
                                        derive_seed(opt_.seed, "cov_ratio_w"), opt_.clip_lo, opt_.clip_hi);
    shared_.ratio_wz = fit_density_ratio(wz_tgt, wz_src, opt_.classifier_grid, opt_.folds,
                                         derive_seed(opt_.seed, "cov_ratio_wz"), opt_.clip_lo, opt_.clip_hi);

    // Nested regression: project the fitted (W,Z) mean onto W in the target.
    shared_.proj_full =
        fit_cv(opt_.regressor_grid, w_tgt, shared_.mu_wz_source->predict(wz_tgt), opt_.folds,
               derive_seed(opt_.seed, "cov_proj_full"), Task::regression)
            .model;
    init_denominator();
}

CovariateValueEngine::CovariateValueEngine(const Dataset& ds, const SplitPlan& plan,
                                           const LearnerOptions& opt, double alpha,
                                           CovariateSharedNuisances shared)
    : ds_(ds), plan_(plan), opt_(opt), alpha_(alpha), shared_(std::move(shared)) {
    init_denominator();
}

void CovariateValueEngine::init_denominator() {
    // Denominator: the empty-subset numerator under the conventions
    // mu_ws := mu_w_source, ratio_ws := ratio_w, proj_subset := mu_w_source.
    CovariateSubsetNuisances empty;
    empty.mu_ws_source = shared_.mu_w_source;
    empty.ratio_ws = shared_.ratio_w;
    empty.proj_subset = shared_.mu_w_source;
    OneStepNum dn = covariate_num(ds_, plan_, shared_, empty, {});
    den_ = dn.num;
    psi_den_ = dn.psi;

    Vec loss_ev = take(ds_.loss(), plan_.eval_indices);
    den_tolerance_ = 1e-8 * std::max(1e-300, loss_ev.array().square().mean());
    den_undefined_ = !(den_ > den_tolerance_);
}

CovariateSubsetNuisances CovariateValueEngine::fit_subset_nuisances(
    const std::vector<int>& subset) const {
    std::vector<int> s = subset;
    std::sort(s.begin(), s.end());

    CovariateSubsetNuisances sub;
    if (s.empty()) {
        sub.mu_ws_source = shared_.mu_w_source;
        sub.ratio_ws = shared_.ratio_w;
        sub.proj_subset = shared_.mu_w_source;
        return sub;
    }
    if (static_cast<Index>(s.size()) == ds_.m2()) {
        sub.mu_ws_source = shared_.mu_wz_source;
        sub.ratio_ws = shared_.ratio_wz;
        sub.proj_subset = shared_.proj_full;
        return sub;
    }

    std::vector<int> tr_src, tr_tgt;
    for (int r : plan_.train_indices) (ds_.is_source(r) ? tr_src : tr_tgt).push_back(r);
    const Mat ws_src = subset_features(ds_, tr_src, s);
    const Mat ws_tgt = subset_features(ds_, tr_tgt, s);
    const Vec loss_src = take(ds_.loss(), tr_src);

    // Seeds keyed by subset size so relabeling Z columns maps values onto each
    // other exactly.
    LearnerOptions opt = opt_;
    opt.seed = derive_seed(opt_.seed, "cov_subset", s.size());
    sub.mu_ws_source = fit_conditional_mean(ws_src, loss_src, opt, "cov_mu_ws").model;
    sub.ratio_ws = fit_density_ratio(ws_tgt, ws_src, opt.classifier_grid, opt.folds,
                                     derive_seed(opt.seed, "cov_ratio_ws"), opt.clip_lo, opt.clip_hi);
    const Mat w_tgt = take_rows(ds_.w(), tr_tgt);
    sub.proj_subset = fit_cv(opt.regressor_grid, w_tgt, sub.mu_ws_source->predict(ws_tgt), opt.folds,
                             derive_seed(opt.seed, "cov_proj_sub"), Task::regression)
                          .model;
    return sub;
}

SubsetValue CovariateValueEngine::value_from_nuisances(const std::vector<int>& subset,
                                                       const CovariateSubsetNuisances& sub) const {
    std::vector<int> s = subset;
    std::sort(s.begin(), s.end());

    SubsetValue out;
    out.subset = s;
    out.den = den_;
    if (den_undefined_) {
        out.undefined = true;
        out.warnings.push_back("no covariate-shift variation to explain (denominator below tolerance)");
        out.influence = Vec::Zero(static_cast<Index>(plan_.eval_indices.size()));
        return out;
    }

    OneStepNum nm = covariate_num(ds_, plan_, shared_, sub, s);
    out.num = nm.num;

    // value = 1 - num/den; delta-method influence combines numerator and
    // denominator influences.
    Vec psi = -(nm.psi / den_) + (nm.num / (den_ * den_)) * psi_den_;
    out.influence = psi;
    out.value = make_estimate(1.0 - nm.num / den_, psi, alpha_);

    out.num_se = sample_sd(nm.psi) / std::sqrt(static_cast<double>(nm.psi.size()));
    if (nm.num < -3.0 * out.num_se)
        out.warnings.push_back("numerator significantly negative; nuisance models look unreliable");
    return out;
}

SubsetValue CovariateValueEngine::value(const std::vector<int>& subset) const {
    for (int j : subset)
        if (j < 0 || j >= static_cast<int>(ds_.m2()))
            throw ConfigError("covariate value: subset index out of range");
    return value_from_nuisances(subset, fit_subset_nuisances(subset));
}

}  // namespace shiftdecomp
