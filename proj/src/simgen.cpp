#include "shiftdecomp/simgen.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

#include "shiftdecomp/aggregate.hpp"
#include "shiftdecomp/covariate_value.hpp"
#include "shiftdecomp/outcome_value.hpp"
#include "shiftdecomp/quadrature.hpp"
#include "shiftdecomp/rng.hpp"

namespace shiftdecomp {

namespace {

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

Vec make_vec(std::initializer_list<double> v) {
    Vec out(static_cast<Index>(v.size()));
    Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

int bin_index(double q, int bins) {
    return static_cast<int>(std::floor(q * static_cast<double>(bins) + 0.5));
}

}  // namespace

DgpSpec coverage_dgp(long n_per_domain, std::uint64_t seed) {
    DgpSpec s;
    s.kind = DgpKind::gaussian_logistic;
    s.n_source = s.n_target = n_per_domain;
    s.seed = seed;
    s.source_means = make_vec({0.0, 2.0, 0.7, 3.0});
    s.target_means = make_vec({0.0, 0.0, 0.0, 0.0});
    s.source_coef = make_vec({0.3, 1.0, 0.5, 1.0});
    s.target_coef = make_vec({0.3, 0.1, 0.5, 1.4});
    return s;
}

DgpSpec outcome_ranking_dgp(long n_per_domain, std::uint64_t seed) {
    DgpSpec s;
    s.kind = DgpKind::uniform_logistic;
    s.n_source = s.n_target = n_per_domain;
    s.seed = seed;
    s.uniform_dims = 6;
    s.source_coef = make_vec({0.2, 0.4, 2.0, 0.25, 0.1, 0.1});
    s.target_coef = make_vec({0.2, -0.4, 0.8, 0.1, 0.1, 0.1});
    return s;
}

DgpSpec covariate_ranking_dgp(long n_per_domain, std::uint64_t seed) {
    DgpSpec s;
    s.kind = DgpKind::covariate_mixture;
    s.n_source = s.n_target = n_per_domain;
    s.seed = seed;
    s.source_coef = make_vec({0.5, 1.0, 1.0});
    s.target_coef = s.source_coef;  // no outcome shift in this setting
    s.target_z1_mean = 1.0;
    s.mix_gap = 2.0;
    s.z1_couple = 1.0;
    return s;
}

Dataset generate(const DgpSpec& spec) {
    Rng rng(derive_seed(spec.seed, "dgp"));
    long n0 = spec.n_source, n1 = spec.n_target;
    if (n0 < 1 || n1 < 1) throw ConfigError("generate: need n >= 1 per domain");

    int dims;
    switch (spec.kind) {
        case DgpKind::gaussian_logistic:
            dims = static_cast<int>(spec.source_means.size());
            if (dims < 2 || spec.target_means.size() != dims || spec.source_coef.size() != dims ||
                spec.target_coef.size() != dims)
                throw ConfigError("generate: gaussian spec needs equal-length means and coefficients");
            break;
        case DgpKind::uniform_logistic:
            dims = spec.uniform_dims;
            if (dims < 2 || spec.source_coef.size() != dims || spec.target_coef.size() != dims)
                throw ConfigError("generate: uniform spec needs coefficient length = dims");
            break;
        case DgpKind::covariate_mixture:
            dims = 3;
            if (spec.source_coef.size() != 3 || spec.target_coef.size() != 3)
                throw ConfigError("generate: mixture spec needs 3 coefficients (w, z1, z2)");
            break;
        default:
            throw ConfigError("generate: unknown dgp kind");
    }

    const long n = n0 + n1;
    Mat x(n, dims);
    Vec y(n), domain(n);
    for (long i = 0; i < n; ++i) {
        const bool target = i >= n0;
        domain[i] = target ? 1.0 : 0.0;
        switch (spec.kind) {
            case DgpKind::gaussian_logistic: {
                const Vec& mu = target ? spec.target_means : spec.source_means;
                for (int j = 0; j < dims; ++j) x(i, j) = mu[j] + rng.normal();
                break;
            }
            case DgpKind::uniform_logistic: {
                for (int j = 0; j < dims; ++j) x(i, j) = rng.uniform(-1.0, 1.0);
                break;
            }
            case DgpKind::covariate_mixture: {
                const double w = rng.normal();
                const double z1 = (target ? spec.target_z1_mean : 0.0) + rng.normal();
                const double center = spec.z1_couple * z1 + (rng.bernoulli(0.5) ? spec.mix_gap : -spec.mix_gap);
                const double z2 = center + rng.normal();
                x(i, 0) = w;
                x(i, 1) = z1;
                x(i, 2) = z2;
                break;
            }
        }
        const Vec& coef = target ? spec.target_coef : spec.source_coef;
        y[i] = rng.bernoulli(sigmoid(coef.dot(x.row(i)))) ? 1.0 : 0.0;
    }

    // Fixed prediction rule: Bayes classifier of the source model.
    Vec pred(n);
    for (long i = 0; i < n; ++i) pred[i] = spec.source_coef.dot(x.row(i)) >= 0.0 ? 1.0 : 0.0;
    Vec loss = compute_loss(pred, y, LossMode::zero_one_from_label);

    Mat w = x.leftCols(1);
    Mat z = x.rightCols(dims - 1);
    return Dataset(std::move(w), std::move(z), std::move(y), std::move(domain), std::move(loss));
}

// ---------------------------------------------------------------------------
// Oracles (Gaussian setting: features independent unit-variance normals)
// ---------------------------------------------------------------------------

namespace {

struct GaussianOracle {
    Vec mu0, mu1, c0, c1;  // feature means and logistic coefficients per domain

    explicit GaussianOracle(const DgpSpec& spec) {
        if (spec.kind != DgpKind::gaussian_logistic)
            throw ConfigError("oracle: quadrature oracle requires the gaussian setting");
        mu0 = spec.source_means;
        mu1 = spec.target_means;
        c0 = spec.source_coef;
        c1 = spec.target_coef;
    }

    // E[loss] when the outcome follows the source model and the linear score
    // c0.x ~ N(m, s^2): loss mean is sigmoid(-|t|).
    static double loss_source_outcome(double m, double s) {
        return gauss_expect([](double t) { return sigmoid(-std::fabs(t)); }, m, s, 0.0);
    }

    // E[loss] when x ~ N(mu, I) and the outcome follows the target model:
    // loss mean at scores (t0, t1) is 1{t0>=0}(1-sig(t1)) + 1{t0<0}sig(t1).
    double loss_target_outcome(const Vec& mu) const {
        const double m0 = c0.dot(mu), m1 = c1.dot(mu);
        const double s0 = c0.norm(), s1 = c1.norm();
        const double cov = c0.dot(c1);
        const double rho_term = cov / (s0 * s0);
        const double cond_sd = std::sqrt(std::max(0.0, s1 * s1 - cov * cov / (s0 * s0)));
        auto inner = [&](double t0) {
            const double cm = m1 + rho_term * (t0 - m0);
            const double ps =
                cond_sd > 1e-12
                    ? gauss_expect([](double a) { return sigmoid(a); }, cm, cond_sd)
                    : sigmoid(cm);
            return t0 >= 0.0 ? 1.0 - ps : ps;
        };
        return gauss_expect(inner, m0, s0, 0.0);
    }

    Vec mixed_means(const Vec& w_from, const Vec& z_from) const {
        Vec mu = z_from;
        mu[0] = w_from[0];
        return mu;
    }
};

}  // namespace

AggregateTruth aggregate_truth(const DgpSpec& spec) {
    GaussianOracle g(spec);
    const double s0 = g.c0.norm();
    const double e000 = GaussianOracle::loss_source_outcome(g.c0.dot(g.mu0), s0);
    const double e100 = GaussianOracle::loss_source_outcome(g.c0.dot(g.mixed_means(g.mu1, g.mu0)), s0);
    const double e110 = GaussianOracle::loss_source_outcome(g.c0.dot(g.mu1), s0);
    const double e111 = g.loss_target_outcome(g.mu1);
    AggregateTruth t;
    t.baseline = e100 - e000;
    t.covariate = e110 - e100;
    t.outcome = e111 - e110;
    t.total = e111 - e000;
    return t;
}

AggregateTruth aggregate_truth_mc(const DgpSpec& spec, long draws, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "mc_oracle"));
    const int dims = spec.kind == DgpKind::gaussian_logistic ? static_cast<int>(spec.source_means.size())
                     : spec.kind == DgpKind::uniform_logistic ? spec.uniform_dims
                                                              : 3;
    Vec x(dims);
    // Draw x with W from domain a and Z|W from domain b.
    auto draw_x = [&](int a, int b) {
        switch (spec.kind) {
            case DgpKind::gaussian_logistic:
                for (int j = 0; j < dims; ++j) {
                    const Vec& mu = (j == 0 ? (a == 1 ? spec.target_means : spec.source_means)
                                            : (b == 1 ? spec.target_means : spec.source_means));
                    x[j] = mu[j] + rng.normal();
                }
                break;
            case DgpKind::uniform_logistic:
                for (int j = 0; j < dims; ++j) x[j] = rng.uniform(-1.0, 1.0);
                break;
            case DgpKind::covariate_mixture: {
                x[0] = rng.normal();
                x[1] = (b == 1 ? spec.target_z1_mean : 0.0) + rng.normal();
                const double center =
                    spec.z1_couple * x[1] + (rng.bernoulli(0.5) ? spec.mix_gap : -spec.mix_gap);
                x[2] = center + rng.normal();
                break;
            }
        }
    };
    auto mean_loss = [&](int a, int b, int c) {
        double acc = 0.0;
        for (long d = 0; d < draws; ++d) {
            draw_x(a, b);
            const Vec& coef = c == 1 ? spec.target_coef : spec.source_coef;
            const double y = rng.bernoulli(sigmoid(coef.dot(x))) ? 1.0 : 0.0;
            const double pred = spec.source_coef.dot(x) >= 0.0 ? 1.0 : 0.0;
            acc += (pred != y) ? 1.0 : 0.0;
        }
        return acc / static_cast<double>(draws);
    };
    AggregateTruth t;
    const double e000 = mean_loss(0, 0, 0), e100 = mean_loss(1, 0, 0);
    const double e110 = mean_loss(1, 1, 0), e111 = mean_loss(1, 1, 1);
    t.baseline = e100 - e000;
    t.covariate = e110 - e100;
    t.outcome = e111 - e110;
    t.total = e111 - e000;
    return t;
}

double covariate_value_truth(const DgpSpec& spec, const std::vector<int>& subset) {
    GaussianOracle g(spec);
    const int m2 = static_cast<int>(g.c0.size()) - 1;
    for (int j : subset)
        if (j < 0 || j >= m2) throw ConfigError("covariate_value_truth: bad subset index");

    // Conditional mean loss given W = w when Z_s is drawn from the domain mix
    // encoded by z-means `zmu` (all under the source outcome model).
    const double cw = g.c0[0];
    Vec cz = g.c0.tail(m2);
    auto cond_loss = [&](double w, const Vec& zmu) {
        const double m = cz.dot(zmu);
        const double s = cz.norm();
        const double base = cw * w;
        return gauss_expect([&](double u) { return sigmoid(-std::fabs(base + u)); }, m, s, -base);
    };

    Vec zmu0 = g.mu0.tail(m2), zmu1 = g.mu1.tail(m2);
    Vec zmus = zmu0;
    for (int j : subset) zmus[j] = zmu1[j];

    auto delta_s = [&](double w) { return cond_loss(w, zmus) - cond_loss(w, zmu0); };
    auto delta_1 = [&](double w) { return cond_loss(w, zmu1) - cond_loss(w, zmu0); };

    const double w_mean = g.mu1[0];
    const double num = gauss_expect(
        [&](double w) {
            const double d = delta_s(w) - delta_1(w);
            return d * d;
        },
        w_mean, 1.0);
    const double den = gauss_expect(
        [&](double w) {
            const double d = delta_1(w);
            return d * d;
        },
        w_mean, 1.0);
    if (!(den > 1e-14)) throw EstimationError("covariate_value_truth: no covariate-shift variation");
    return 1.0 - num / den;
}

namespace {

// Shared machinery for the outcome-shift oracle at one target draw.
struct OutcomeOracle {
    GaussianOracle g;
    std::vector<int> s, comp;
    int bins;
    double cw0, cw1;
    Vec cz0, cz1;
    double vbar = 0.0, sv = 0.0;      // V = c0_comp . Z_comp
    double abar = 0.0, sa = 0.0;      // A = c1_comp . Z_comp
    double cov_av = 0.0;

    OutcomeOracle(const DgpSpec& spec, const std::vector<int>& subset, int B)
        : g(spec), s(subset), bins(B) {
        std::sort(s.begin(), s.end());
        const int m2 = static_cast<int>(g.c0.size()) - 1;
        for (int j = 0; j < m2; ++j)
            if (!std::binary_search(s.begin(), s.end(), j)) comp.push_back(j);
        cw0 = g.c0[0];
        cw1 = g.c1[0];
        cz0 = g.c0.tail(m2);
        cz1 = g.c1.tail(m2);
        for (int j : comp) {
            vbar += cz0[j] * g.mu1[j + 1];
            abar += cz1[j] * g.mu1[j + 1];
            sv += cz0[j] * cz0[j];
            sa += cz1[j] * cz1[j];
            cov_av += cz0[j] * cz1[j];
        }
        sv = std::sqrt(sv);
        sa = std::sqrt(sa);
    }

    // p_s(Y=1 | w, z) under the hypothesized shift: the target conditional of
    // Y given (w, z_s) and the source-risk bin of (w, z).
    double recalibrated_prob(double w, const Vec& z) const {
        double base0 = cw0 * w, base1 = cw1 * w;
        for (int j : s) {
            base0 += cz0[j] * z[j];
            base1 += cz1[j] * z[j];
        }
        const double q = sigmoid(g.c0[0] * w + cz0.dot(z));
        const int k = bin_index(q, bins);
        double lo = k == 0 ? -40.0 : logit((k - 0.5) / static_cast<double>(bins)) - base0;
        double hi = k == bins ? 40.0 : logit((k + 0.5) / static_cast<double>(bins)) - base0;

        if (sv < 1e-12) {
            // The risk ignores Z_comp; the phantom conditional is unrestricted.
            return sa > 1e-12 ? gauss_expect([](double a) { return sigmoid(a); }, base1 + abar, sa)
                              : sigmoid(base1 + abar);
        }
        const double slope = cov_av / (sv * sv);
        const double cond_sd = std::sqrt(std::max(0.0, sa * sa - cov_av * cov_av / (sv * sv)));
        auto gfun = [&](double v) {
            const double cm = base1 + abar + slope * (v - vbar);
            return cond_sd > 1e-12
                       ? gauss_expect([](double a) { return sigmoid(a); }, cm, cond_sd)
                       : sigmoid(cm);
        };
        return truncated_normal_expect(gfun, vbar, sv, lo, hi);
    }
};

}  // namespace

double outcome_value_truth(const DgpSpec& spec, const std::vector<int>& subset, int bins,
                           long outer_draws, std::uint64_t seed) {
    OutcomeOracle oc(spec, subset, bins);
    const int dims = static_cast<int>(spec.source_means.size());
    Rng rng(derive_seed(seed, "outcome_truth"));

    double num = 0.0, den = 0.0;
    Vec x(dims);
    for (long d = 0; d < outer_draws; ++d) {
        for (int j = 0; j < dims; ++j) x[j] = spec.target_means[j] + rng.normal();
        const double t0 = spec.source_coef.dot(x), t1 = spec.target_coef.dot(x);
        const double mu0 = sigmoid(-std::fabs(t0));
        const bool f1 = t0 >= 0.0;
        const double p1 = sigmoid(t1);
        const double mu1 = f1 ? 1.0 - p1 : p1;
        const double ps = oc.recalibrated_prob(x[0], x.tail(dims - 1));
        const double mus = f1 ? 1.0 - ps : ps;
        num += (mus - mu1) * (mus - mu1);
        den += (mu1 - mu0) * (mu1 - mu0);
    }
    if (!(den > 1e-12)) throw EstimationError("outcome_value_truth: no outcome-shift variation");
    return 1.0 - num / den;
}

double outcome_value_truth_rejection(const DgpSpec& spec, const std::vector<int>& subset, int bins,
                                     long outer_draws, long pool_size, std::uint64_t seed) {
    if (spec.kind != DgpKind::gaussian_logistic)
        throw ConfigError("oracle: rejection oracle requires the gaussian setting");
    std::vector<int> s = subset;
    std::sort(s.begin(), s.end());
    const int dims = static_cast<int>(spec.source_means.size());
    const int m2 = dims - 1;
    std::vector<int> comp;
    for (int j = 0; j < m2; ++j)
        if (!std::binary_search(s.begin(), s.end(), j)) comp.push_back(j);

    Rng rng(derive_seed(seed, "rejection_oracle"));
    // Phantom pool of Z_comp draws from the target marginal, reduced to the
    // two linear scores they contribute.
    Vec pool_v(pool_size), pool_a(pool_size);
    for (long t = 0; t < pool_size; ++t) {
        double v = 0.0, a = 0.0;
        for (int j : comp) {
            const double z = spec.target_means[j + 1] + rng.normal();
            v += spec.source_coef[j + 1] * z;
            a += spec.target_coef[j + 1] * z;
        }
        pool_v[t] = v;
        pool_a[t] = a;
    }

    double num = 0.0, den = 0.0;
    long used = 0;
    Vec x(dims);
    for (long d = 0; d < outer_draws; ++d) {
        for (int j = 0; j < dims; ++j) x[j] = spec.target_means[j] + rng.normal();
        const double t0 = spec.source_coef.dot(x), t1 = spec.target_coef.dot(x);
        const double mu0 = sigmoid(-std::fabs(t0));
        const bool f1 = t0 >= 0.0;
        const double mu1 = f1 ? 1.0 - sigmoid(t1) : sigmoid(t1);

        double base0 = spec.source_coef[0] * x[0], base1 = spec.target_coef[0] * x[0];
        for (int j : s) {
            base0 += spec.source_coef[j + 1] * x[j + 1];
            base1 += spec.target_coef[j + 1] * x[j + 1];
        }
        const int k = bin_index(sigmoid(t0), bins);

        double acc = 0.0, acc2 = 0.0;
        long n_acc = 0;
        for (long t = 0; t < pool_size; ++t) {
            if (bin_index(sigmoid(base0 + pool_v[t]), bins) != k) continue;
            const double val = sigmoid(base1 + pool_a[t]);
            acc += val;
            acc2 += val * val;
            ++n_acc;
        }
        if (n_acc < 2) continue;
        const double ps = acc / static_cast<double>(n_acc);
        const double inner_var =
            (acc2 / n_acc - ps * ps) / static_cast<double>(n_acc - 1);  // var of the inner mean
        const double mus = f1 ? 1.0 - ps : ps;
        num += (mus - mu1) * (mus - mu1) - inner_var;
        den += (mu1 - mu0) * (mu1 - mu0);
        ++used;
    }
    if (used == 0 || !(den > 1e-12))
        throw EstimationError("outcome_value_truth_rejection: degenerate oracle run");
    return 1.0 - num / den;
}

// ---------------------------------------------------------------------------
// Coverage experiment
// ---------------------------------------------------------------------------

std::string target_name_aggregate(int which) {
    switch (which) {
        case 0: return "baseline";
        case 1: return "covariate";
        case 2: return "outcome";
    }
    throw std::logic_error("target_name_aggregate");
}

namespace {

std::string subset_suffix(const std::vector<int>& subset) {
    std::ostringstream os;
    for (std::size_t i = 0; i < subset.size(); ++i) os << (i ? "," : "") << subset[i] + 1;
    return os.str();
}

}  // namespace

std::string target_name_covariate(const std::vector<int>& subset) {
    return "v_z:" + subset_suffix(subset);
}
std::string target_name_outcome(const std::vector<int>& subset) {
    return "v_y:" + subset_suffix(subset);
}

std::vector<CoverageRow> coverage_experiment(const CoverageRequest& req,
                                             std::map<std::string, double> truths) {
    if (req.reps < 10) throw ConfigError("coverage: fewer than 10 replications is meaningless");
    if (req.estimator == EstimatorKind::plugin &&
        (!req.covariate_subsets.empty() || !req.outcome_subsets.empty()))
        throw ConfigError("coverage: the plug-in arm supports aggregate targets only");

    // Assemble target list and fill in missing truths with the built-in oracles.
    std::vector<std::string> names;
    if (req.aggregate)
        for (int t = 0; t < 3; ++t) names.push_back(target_name_aggregate(t));
    for (const auto& s : req.covariate_subsets) names.push_back(target_name_covariate(s));
    for (const auto& s : req.outcome_subsets) names.push_back(target_name_outcome(s));

    if (req.aggregate && !truths.count("baseline")) {
        const AggregateTruth t = req.spec.kind == DgpKind::gaussian_logistic
                                     ? aggregate_truth(req.spec)
                                     : aggregate_truth_mc(req.spec, 2000000, req.seed ^ 0xabcdef);
        truths["baseline"] = t.baseline;
        truths["covariate"] = t.covariate;
        truths["outcome"] = t.outcome;
    }
    for (const auto& s : req.covariate_subsets)
        if (!truths.count(target_name_covariate(s)))
            truths[target_name_covariate(s)] = covariate_value_truth(req.spec, s);
    for (const auto& s : req.outcome_subsets)
        if (!truths.count(target_name_outcome(s)))
            truths[target_name_outcome(s)] = outcome_value_truth(
                req.spec, s, req.learners.risk_bins, 200000, derive_seed(req.seed, "truth"));

    const std::size_t n_targets = names.size();
    std::vector<std::vector<double>> covered(n_targets, std::vector<double>(req.reps, 0.0));
    std::vector<std::vector<double>> widths(n_targets, std::vector<double>(req.reps, 0.0));
    std::vector<std::vector<double>> points(n_targets, std::vector<double>(req.reps, 0.0));

    std::atomic<int> next_rep{0};
    auto worker = [&]() {
        for (;;) {
            const int r = next_rep.fetch_add(1);
            if (r >= req.reps) return;

            DgpSpec spec = req.spec;
            spec.seed = derive_seed(req.seed, "rep", static_cast<std::uint64_t>(r));
            Dataset ds = generate(spec);
            SplitPlan plan = split(ds, req.train_fraction, derive_seed(req.seed, "rep_split", r));
            LearnerOptions opt = req.learners;
            opt.seed = derive_seed(req.seed, "rep_learners", static_cast<std::uint64_t>(r));

            std::size_t t = 0;
            if (req.aggregate) {
                AggregateNuisances nu = fit_aggregate_nuisances(ds, plan, opt);
                AggregateDecomposition agg = req.estimator == EstimatorKind::debiased
                                                 ? estimate_aggregate(ds, plan, nu, req.alpha)
                                                 : estimate_aggregate_plugin(ds, plan, nu, req.alpha);
                const EstimateWithCI* terms[3] = {&agg.baseline, &agg.covariate, &agg.outcome};
                for (int j = 0; j < 3; ++j, ++t) {
                    const double truth = truths.at(names[t]);
                    covered[t][static_cast<std::size_t>(r)] =
                        (truth >= terms[j]->ci_lo && truth <= terms[j]->ci_hi) ? 1.0 : 0.0;
                    widths[t][static_cast<std::size_t>(r)] = terms[j]->ci_hi - terms[j]->ci_lo;
                    points[t][static_cast<std::size_t>(r)] = terms[j]->point;
                }
            }
            if (!req.covariate_subsets.empty()) {
                CovariateValueEngine engine(ds, plan, opt, req.alpha);
                for (const auto& s : req.covariate_subsets) {
                    SubsetValue v = engine.value(s);
                    const double truth = truths.at(names[t]);
                    covered[t][static_cast<std::size_t>(r)] =
                        (!v.undefined && truth >= v.value.ci_lo && truth <= v.value.ci_hi) ? 1.0 : 0.0;
                    widths[t][static_cast<std::size_t>(r)] = v.value.ci_hi - v.value.ci_lo;
                    points[t][static_cast<std::size_t>(r)] = v.value.point;
                    ++t;
                }
            }
            if (!req.outcome_subsets.empty()) {
                OutcomeValueEngine engine(ds, plan, opt, req.alpha, req.inner_subsample);
                for (const auto& s : req.outcome_subsets) {
                    SubsetValue v = engine.value(s);
                    const double truth = truths.at(names[t]);
                    covered[t][static_cast<std::size_t>(r)] =
                        (!v.undefined && truth >= v.value.ci_lo && truth <= v.value.ci_hi) ? 1.0 : 0.0;
                    widths[t][static_cast<std::size_t>(r)] = v.value.ci_hi - v.value.ci_lo;
                    points[t][static_cast<std::size_t>(r)] = v.value.point;
                    ++t;
                }
            }
        }
    };

    int n_threads = req.threads > 0 ? req.threads
                                    : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    n_threads = std::min<int>(n_threads, req.reps);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    std::vector<CoverageRow> rows;
    for (std::size_t t = 0; t < n_targets; ++t) {
        CoverageRow row;
        row.target = names[t];
        row.truth = truths.at(names[t]);
        row.reps = req.reps;
        row.coverage = std::accumulate(covered[t].begin(), covered[t].end(), 0.0) / req.reps;
        row.mean_width = std::accumulate(widths[t].begin(), widths[t].end(), 0.0) / req.reps;
        row.mean_point = std::accumulate(points[t].begin(), points[t].end(), 0.0) / req.reps;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace shiftdecomp
