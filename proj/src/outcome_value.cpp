#include "shiftdecomp/outcome_value.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "shiftdecomp/rng.hpp"

namespace shiftdecomp {

namespace {

bool all_01(const Vec& v) {
    return std::all_of(v.data(), v.data() + v.size(), [](double x) { return x == 0.0 || x == 1.0; });
}

std::string subset_key(const std::vector<int>& s) {
    std::ostringstream os;
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    return os.str();
}

std::vector<int> complement_of(const std::vector<int>& subset, int m2) {
    std::vector<int> out;
    for (int j = 0; j < m2; ++j)
        if (!std::binary_search(subset.begin(), subset.end(), j)) out.push_back(j);
    return out;
}

// Binned risks take values k/B; compare with half-bin slack.
bool same_bin(double a, double b, int bins) { return std::fabs(a - b) < 0.5 / static_cast<double>(bins); }

}  // namespace

LossOracle LossOracle::fit(const Dataset& ds, const SplitPlan& plan, const LearnerOptions& opt) {
    LossOracle lo;
    lo.exact01_ = all_01(ds.loss());

    const std::vector<int>& tr = plan.train_indices;
    const Mat X = take_rows(ds.wz(), tr);
    if (lo.exact01_) {
        // Recover the analyzed model's per-row label and fit a surrogate of
        // the prediction rule on the pooled training rows.
        Vec label(static_cast<Index>(tr.size()));
        for (std::size_t i = 0; i < tr.size(); ++i) {
            const int r = tr[i];
            label[static_cast<Index>(i)] = ds.y()[r] == 1.0 ? 1.0 - ds.loss()[r] : ds.loss()[r];
        }
        if (label.minCoeff() == label.maxCoeff()) {
            lo.label_prob_ = std::make_shared<ConstantModel>(label[0]);
        } else {
            lo.label_prob_ = fit_cv(opt.classifier_grid, X, label, opt.folds,
                                    derive_seed(opt.seed, "loss_surrogate"), Task::classification)
                                 .model;
        }
        return lo;
    }

    std::vector<int> r1, r0;
    for (int r : tr) (ds.y()[r] == 1.0 ? r1 : r0).push_back(r);
    const double overall = take(ds.loss(), tr).mean();
    auto fit_stratum = [&](const std::vector<int>& rows, const char* tag) -> ModelPtr {
        if (rows.size() < static_cast<std::size_t>(opt.folds))
            return std::make_shared<ConstantModel>(overall);
        return fit_cv(opt.regressor_grid, take_rows(ds.wz(), rows), take(ds.loss(), rows), opt.folds,
                      derive_seed(opt.seed, tag), Task::regression)
            .model;
    };
    lo.loss_given_y1_ = fit_stratum(r1, "loss_surrogate_y1");
    lo.loss_given_y0_ = fit_stratum(r0, "loss_surrogate_y0");
    return lo;
}

void LossOracle::row_losses(const Dataset& ds, int dataset_row, double& loss_y1,
                            double& loss_y0) const {
    const double y = ds.y()[dataset_row];
    const double observed = ds.loss()[dataset_row];
    if (exact01_) {
        loss_y1 = (y == 1.0) ? observed : 1.0 - observed;
        loss_y0 = (y == 0.0) ? observed : 1.0 - observed;
        return;
    }
    Mat x(1, ds.wz().cols());
    x.row(0) = ds.wz().row(dataset_row);
    loss_y1 = (y == 1.0) ? observed : loss_given_y1_->predict(x)[0];
    loss_y0 = (y == 0.0) ? observed : loss_given_y0_->predict(x)[0];
}

void LossOracle::phantom_losses(const Mat& X, Vec& loss_y1, Vec& loss_y0) const {
    if (exact01_) {
        const Vec p = label_prob_->predict(X);  // P(label = 1)
        loss_y1 = Vec::Ones(p.size()) - p;      // loss(x,1) = 1{label != 1}
        loss_y0 = p;
        return;
    }
    loss_y1 = loss_given_y1_->predict(X);
    loss_y0 = loss_given_y0_->predict(X);
}

DensityRatioModel fit_phantom_ratio(const Mat& w_rows, const Mat& z_rows,
                                    const std::vector<int>& subset, const RiskModel& risk,
                                    const std::vector<LearnerConfig>& candidates, int folds,
                                    std::uint64_t seed, double clip_lo, double clip_hi) {
    const int m2 = static_cast<int>(z_rows.cols());
    std::vector<int> s = subset;
    std::sort(s.begin(), s.end());
    const std::vector<int> comp = complement_of(s, m2);
    if (comp.empty()) throw ConfigError("fit_phantom_ratio: subset must be a strict subset");
    const Index n = z_rows.rows();
    if (n < 2) throw DataError("fit_phantom_ratio: need at least 2 rows");

    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(derive_seed(seed, "phantom_perm"));
    rng.shuffle(perm);

    Mat z_perm = z_rows;
    for (Index i = 0; i < n; ++i)
        for (int j : comp) z_perm(i, j) = z_rows(perm[static_cast<std::size_t>(i)], j);

    const Mat orig_wz = hcat(w_rows, z_rows);
    const Mat perm_wz = hcat(w_rows, z_perm);
    Mat orig_feat = hcat(orig_wz, risk.binned(orig_wz));
    Mat perm_feat = hcat(perm_wz, risk.binned(perm_wz));

    // Equal class sizes, so no prior correction.
    return fit_density_ratio(orig_feat, perm_feat, candidates, folds,
                             derive_seed(seed, "phantom_fit"), clip_lo, clip_hi);
}

OutcomeValueEngine::OutcomeValueEngine(const Dataset& ds, const SplitPlan& plan,
                                       const LearnerOptions& opt, double alpha, int inner_subsample)
    : ds_(ds), plan_(plan), opt_(opt), alpha_(alpha), inner_subsample_(inner_subsample) {
    if (inner_subsample_ < 1) throw ConfigError("outcome value: inner_subsample must be >= 1");

    std::vector<int> tr_src, tr_tgt;
    for (int r : plan.train_indices) (ds.is_source(r) ? tr_src : tr_tgt).push_back(r);
    if (tr_src.empty() || tr_tgt.empty())
        throw EstimationError("outcome value: training partition is missing a domain");

    const Mat wz_src = take_rows(ds.wz(), tr_src);
    const Mat wz_tgt = take_rows(ds.wz(), tr_tgt);

    shared_.risk.bins = opt.risk_bins;
    shared_.risk.q = fit_conditional_mean(wz_src, take(ds.y(), tr_src), opt, "risk_q").model;
    shared_.mu_target = fit_conditional_mean(wz_tgt, take(ds.loss(), tr_tgt), opt, "mu_wz_target").model;
    shared_.mu_source = fit_conditional_mean(wz_src, take(ds.loss(), tr_src), opt, "mu_wz_source").model;
    shared_.ratio_wz = fit_density_ratio(wz_tgt, wz_src, opt.classifier_grid, opt.folds,
                                         derive_seed(opt.seed, "out_ratio_wz"), opt.clip_lo, opt.clip_hi);
    shared_.loss_oracle = LossOracle::fit(ds, plan, opt);
    init_eval_caches();
}

OutcomeValueEngine::OutcomeValueEngine(const Dataset& ds, const SplitPlan& plan,
                                       const LearnerOptions& opt, double alpha, int inner_subsample,
                                       OutcomeSharedNuisances shared)
    : ds_(ds),
      plan_(plan),
      opt_(opt),
      alpha_(alpha),
      inner_subsample_(inner_subsample),
      shared_(std::move(shared)) {
    if (inner_subsample_ < 1) throw ConfigError("outcome value: inner_subsample must be >= 1");
    init_eval_caches();
}

void OutcomeValueEngine::init_eval_caches() {
    eval_rows_ = plan_.eval_indices;
    const long n = static_cast<long>(eval_rows_.size());
    loss_ev_.resize(n);
    for (long i = 0; i < n; ++i) {
        loss_ev_[i] = ds_.loss()[eval_rows_[static_cast<std::size_t>(i)]];
        (ds_.is_source(eval_rows_[static_cast<std::size_t>(i)]) ? ev_src_ : ev_tgt_)
            .push_back(static_cast<int>(i));
    }
    if (ev_src_.empty() || ev_tgt_.empty())
        throw EstimationError("outcome value: evaluation partition is missing a domain");
    p_src_ = static_cast<double>(ev_src_.size()) / static_cast<double>(n);
    p_tgt_ = static_cast<double>(ev_tgt_.size()) / static_cast<double>(n);

    const Mat wz_ev = take_rows(ds_.wz(), eval_rows_);
    mu1_ev_ = shared_.mu_target->predict(wz_ev);
    mu0_ev_ = shared_.mu_source->predict(wz_ev);
    const Vec q_ev = shared_.risk.risk(wz_ev);
    qbin_ev_ = bin_risk(q_ev, shared_.risk.bins);
    const Vec r_wz_ev = shared_.ratio_wz.ratio(wz_ev);

    // Bin-edge diagnostic (measure-zero regularity condition): fraction of
    // eval risks sitting numerically on a bin edge.
    {
        long on_edge = 0;
        const double B = static_cast<double>(shared_.risk.bins);
        for (Index i = 0; i < q_ev.size(); ++i) {
            const double u = q_ev[i] * B + 0.5;
            if (std::fabs(u - std::round(u)) < 1e-12 && q_ev[i] > 0.0 && q_ev[i] < 1.0) ++on_edge;
        }
        const double frac = static_cast<double>(on_edge) / static_cast<double>(q_ev.size());
        std::ostringstream os;
        os << "bin_edge_fraction=" << frac;
        diagnostics_.push_back(os.str());
        if (frac > 0.01)
            diagnostics_.push_back("warning: >1% of eval risks lie on a bin edge; binned estimand unstable");
    }

    // Denominator: one-step estimate of the total outcome-shift variation.
    Vec delta = mu1_ev_ - mu0_ev_;
    Vec contrib = Vec::Zero(n);
    double tgt_sum = 0.0, src_sum = 0.0;
    for (int i : ev_tgt_) {
        contrib[i] = delta[i] * delta[i] + 2.0 * delta[i] * (loss_ev_[i] - mu1_ev_[i]);
        tgt_sum += contrib[i];
    }
    for (int i : ev_src_) {
        contrib[i] = -2.0 * delta[i] * (loss_ev_[i] - mu0_ev_[i]) * r_wz_ev[i];
        src_sum += contrib[i];
    }
    den_ = tgt_sum / static_cast<double>(ev_tgt_.size()) + src_sum / static_cast<double>(ev_src_.size());
    psi_den_ = Vec::Zero(n);
    for (int i : ev_tgt_) psi_den_[i] = contrib[i] / p_tgt_;
    for (int i : ev_src_) psi_den_[i] = contrib[i] / p_src_;
    psi_den_.array() -= den_;

    Vec loss_ev_sq = loss_ev_.array().square();
    den_tolerance_ = 1e-8 * std::max(1e-300, loss_ev_sq.mean());
    den_undefined_ = !(den_ > den_tolerance_);
}

double OutcomeValueEngine::denominator_se() const {
    return sample_sd(psi_den_) / std::sqrt(static_cast<double>(psi_den_.size()));
}

OutcomeSubsetNuisances OutcomeValueEngine::fit_subset_nuisances(const std::vector<int>& subset) const {
    std::vector<int> s = subset;
    std::sort(s.begin(), s.end());
    if (static_cast<Index>(s.size()) >= ds_.m2())
        throw ConfigError("outcome value: full-set nuisances are never fitted (value is exactly 1)");

    std::vector<int> tr_tgt;
    for (int r : plan_.train_indices)
        if (!ds_.is_source(r)) tr_tgt.push_back(r);

    const std::uint64_t sub_seed = derive_seed(opt_.seed, "out_subset", hash_label(subset_key(s)));

    // Recalibration classifier: y on (w, z_s, q_bin) over target training rows.
    const Mat wz_tgt = take_rows(ds_.wz(), tr_tgt);
    const Vec qbin_tgt = shared_.risk.binned(wz_tgt);
    Mat feat(wz_tgt.rows(), ds_.m1() + static_cast<Index>(s.size()) + 1);
    feat.leftCols(ds_.m1()) = wz_tgt.leftCols(ds_.m1());
    for (std::size_t j = 0; j < s.size(); ++j)
        feat.col(ds_.m1() + static_cast<Index>(j)) = wz_tgt.col(ds_.m1() + s[j]);
    feat.col(feat.cols() - 1) = qbin_tgt;

    OutcomeSubsetNuisances sub;
    LearnerOptions opt = opt_;
    opt.seed = sub_seed;
    sub.recalibrated_prob =
        fit_cv(opt.classifier_grid, feat, take(ds_.y(), tr_tgt), opt.folds,
               derive_seed(sub_seed, "recal_prob"), Task::classification)
            .model;
    sub.phantom_ratio =
        fit_phantom_ratio(take_rows(ds_.w(), tr_tgt), take_rows(ds_.z(), tr_tgt), s, shared_.risk,
                          opt.classifier_grid, opt.folds, derive_seed(sub_seed, "phantom"),
                          opt.clip_lo, opt.clip_hi);
    return sub;
}

SubsetValue OutcomeValueEngine::value_from_nuisances(const std::vector<int>& subset,
                                                     const OutcomeSubsetNuisances& sub) const {
    std::vector<int> s = subset;
    std::sort(s.begin(), s.end());
    const int m2 = static_cast<int>(ds_.m2());
    for (int j : s)
        if (j < 0 || j >= m2) throw ConfigError("outcome value: subset index out of range");

    SubsetValue out;
    out.subset = s;
    out.den = den_;
    out.warnings = diagnostics_;
    const long n = static_cast<long>(eval_rows_.size());
    if (den_undefined_) {
        out.undefined = true;
        out.warnings.push_back("undefined: no outcome-shift variation to explain");
        out.influence = Vec::Zero(n);
        return out;
    }

    // Full set: the hypothesized shift is the target outcome model itself.
    if (static_cast<int>(s.size()) == m2) {
        out.num = 0.0;
        out.influence = Vec::Zero(n);
        out.value = make_estimate(1.0, out.influence, alpha_);
        out.value.se = 0.0;
        out.value.ci_lo = out.value.ci_hi = 1.0;
        return out;
    }

    const std::vector<int> comp = complement_of(s, m2);
    const Index m1 = ds_.m1();
    const auto n1 = static_cast<long>(ev_tgt_.size());

    // mu_s at eval target rows: recalibrated outcome probability times the
    // exact row-level counterfactual losses.
    Vec p_s(n1), mu_s(n1), xi(n1);
    {
        Mat feat(n1, m1 + static_cast<Index>(s.size()) + 1);
        for (long k = 0; k < n1; ++k) {
            const int pos = ev_tgt_[static_cast<std::size_t>(k)];
            const int row = eval_rows_[static_cast<std::size_t>(pos)];
            feat.block(k, 0, 1, m1) = ds_.w().row(row);
            for (std::size_t j = 0; j < s.size(); ++j)
                feat(k, m1 + static_cast<Index>(j)) = ds_.z()(row, s[j]);
            feat(k, feat.cols() - 1) = qbin_ev_[pos];
        }
        p_s = sub.recalibrated_prob->predict(feat);
        for (long k = 0; k < n1; ++k) {
            const int pos = ev_tgt_[static_cast<std::size_t>(k)];
            const int row = eval_rows_[static_cast<std::size_t>(pos)];
            double l1, l0;
            shared_.loss_oracle.row_losses(ds_, row, l1, l0);
            mu_s[k] = p_s[k] * l1 + (1.0 - p_s[k]) * l0;
            xi[k] = mu1_ev_[pos] - mu_s[k];
        }
    }

    // Inner (partner) V-statistic average with the phantom permutation ratio,
    // restricted to partners whose recomputed binned risk matches the outer
    // row's bin, self-normalized within the partner pool.
    const long k_partners = std::min<long>(inner_subsample_, n1);
    const bool exact_sum = (k_partners == n1);
    Rng partner_rng(derive_seed(opt_.seed, "out_inner", hash_label(subset_key(s))));

    Vec correction(n1);
    long rows_without_match = 0;

    Mat phantom(k_partners, m1 + static_cast<Index>(m2));
    std::vector<int> partner_pool(static_cast<std::size_t>(n1));
    std::iota(partner_pool.begin(), partner_pool.end(), 0);

    for (long k = 0; k < n1; ++k) {
        const int pos = ev_tgt_[static_cast<std::size_t>(k)];
        const int row = eval_rows_[static_cast<std::size_t>(pos)];

        // Partner positions (within the target eval list).
        std::vector<int> partners;
        if (exact_sum) {
            partners = partner_pool;
        } else {
            partners.resize(static_cast<std::size_t>(k_partners));
            // partial Fisher-Yates over a scratch copy
            std::vector<int> scratch = partner_pool;
            for (long t = 0; t < k_partners; ++t) {
                const auto j = static_cast<long>(partner_rng.below(static_cast<std::uint64_t>(n1 - t))) + t;
                std::swap(scratch[static_cast<std::size_t>(t)], scratch[static_cast<std::size_t>(j)]);
                partners[static_cast<std::size_t>(t)] = scratch[static_cast<std::size_t>(t)];
            }
        }

        for (long t = 0; t < k_partners; ++t) {
            const int ppos = ev_tgt_[static_cast<std::size_t>(partners[static_cast<std::size_t>(t)])];
            const int prow = eval_rows_[static_cast<std::size_t>(ppos)];
            phantom.block(t, 0, 1, m1) = ds_.w().row(row);
            for (int j : s) phantom(t, m1 + j) = ds_.z()(row, j);
            for (int j : comp) phantom(t, m1 + j) = ds_.z()(prow, j);
        }

        const Vec qbin_ph = shared_.risk.binned(phantom);
        Mat ratio_feat = hcat(phantom, qbin_ph);
        const Vec r = sub.phantom_ratio.ratio(ratio_feat);

        const double outer_bin = qbin_ev_[pos];
        double pmatch = 0.0;
        for (long t = 0; t < k_partners; ++t)
            if (same_bin(qbin_ph[t], outer_bin, shared_.risk.bins)) pmatch += r[t];
        pmatch /= static_cast<double>(k_partners);

        if (pmatch <= 0.0) {
            correction[k] = 0.0;
            ++rows_without_match;
            continue;
        }

        Vec l1, l0;
        shared_.loss_oracle.phantom_losses(phantom, l1, l0);
        const Vec mu1_ph = shared_.mu_target->predict(phantom);
        const double y_outer = ds_.y()[row];

        double acc = 0.0;
        for (long t = 0; t < k_partners; ++t) {
            if (!same_bin(qbin_ph[t], outer_bin, shared_.risk.bins)) continue;
            const double mus_ph = p_s[k] * l1[t] + (1.0 - p_s[k]) * l0[t];
            const double xi_ph = mu1_ph[t] - mus_ph;
            const double loss_ph = (y_outer == 1.0) ? l1[t] : l0[t];
            acc += xi_ph * (loss_ph - mus_ph) * r[t];
        }
        correction[k] = acc / (static_cast<double>(k_partners) * pmatch);
    }

    if (rows_without_match > 0) {
        std::ostringstream os;
        os << "phantom pool had no risk-bin match for " << rows_without_match << "/" << n1
           << " target rows";
        out.warnings.push_back(os.str());
    }

    Vec t_row(n1);
    for (long k = 0; k < n1; ++k) {
        const int pos = ev_tgt_[static_cast<std::size_t>(k)];
        t_row[k] = xi[k] * xi[k] + 2.0 * xi[k] * (loss_ev_[pos] - mu1_ev_[pos]) - 2.0 * correction[k];
    }
    const double num = t_row.mean();
    out.num = num;

    Vec psi_num = Vec::Zero(n);
    for (long k = 0; k < n1; ++k)
        psi_num[ev_tgt_[static_cast<std::size_t>(k)]] = (t_row[k] - num) / p_tgt_;

    Vec psi = -(psi_num / den_) + (num / (den_ * den_)) * psi_den_;
    out.influence = psi;
    out.value = make_estimate(1.0 - num / den_, psi, alpha_);

    out.num_se = sample_sd(psi_num) / std::sqrt(static_cast<double>(n));
    if (num < -3.0 * out.num_se)
        out.warnings.push_back("numerator significantly negative; nuisance models look unreliable");
    return out;
}

SubsetValue OutcomeValueEngine::value(const std::vector<int>& subset) const {
    std::vector<int> s = subset;
    std::sort(s.begin(), s.end());
    if (static_cast<Index>(s.size()) == ds_.m2()) {
        OutcomeSubsetNuisances none;
        return value_from_nuisances(s, none);
    }
    return value_from_nuisances(s, fit_subset_nuisances(s));
}

}  // namespace shiftdecomp
