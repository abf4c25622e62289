#include "shiftdecomp/shapley.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "shiftdecomp/rng.hpp"

namespace shiftdecomp {

namespace {

double log_binom(int n, int k) { return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0); }

double binom(int n, int k) { return std::round(std::exp(log_binom(n, k))); }

}  // namespace

double shapley_kernel(int m2, int k) {
    if (k <= 0 || k >= m2) throw ConfigError("shapley_kernel: size must satisfy 0 < k < m2");
    return static_cast<double>(m2 - 1) / (binom(m2, k) * static_cast<double>(k) * static_cast<double>(m2 - k));
}

std::vector<std::vector<int>> SubsetSamplePlan::unique_subsets() const {
    std::vector<std::vector<int>> out;
    out.push_back({});
    std::vector<int> full(static_cast<std::size_t>(m2));
    std::iota(full.begin(), full.end(), 0);
    out.push_back(full);
    for (const auto& d : draws) out.push_back(d.subset);
    return out;
}

SubsetSamplePlan sample_subsets(int m2, double gamma, long n_ev, std::uint64_t seed) {
    if (m2 < 1) throw ConfigError("sample_subsets: m2 must be >= 1");
    if (!(gamma > 0.0)) throw ConfigError("sample_subsets: gamma must be > 0");

    SubsetSamplePlan plan;
    plan.m2 = m2;
    plan.gamma = gamma;
    plan.n_draws = static_cast<long>(std::floor(gamma * static_cast<double>(n_ev)));
    if (plan.n_draws < 2) throw ConfigError("sample_subsets: gamma * n_ev must be >= 2");
    if (m2 == 1) return plan;  // only the anchors exist

    // Size distribution proportional to the per-subset kernel weight.
    std::vector<double> cum(static_cast<std::size_t>(m2 - 1));
    double total = 0.0;
    for (int k = 1; k < m2; ++k) {
        total += shapley_kernel(m2, k);
        cum[static_cast<std::size_t>(k - 1)] = total;
    }

    Rng rng(derive_seed(seed, "subset_plan"));
    std::map<std::vector<int>, double> counts;
    std::vector<int> pool(static_cast<std::size_t>(m2));
    std::iota(pool.begin(), pool.end(), 0);
    for (long d = 0; d < plan.n_draws; ++d) {
        const double u = rng.uniform() * total;
        int k = 1;
        while (k < m2 - 1 && u > cum[static_cast<std::size_t>(k - 1)]) ++k;
        // partial Fisher-Yates: first k entries become the subset
        for (int t = 0; t < k; ++t) {
            const auto j = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(m2 - t))) +
                           static_cast<std::size_t>(t);
            std::swap(pool[static_cast<std::size_t>(t)], pool[j]);
        }
        std::vector<int> s(pool.begin(), pool.begin() + k);
        std::sort(s.begin(), s.end());
        counts[s] += 1.0;
    }
    plan.draws.reserve(counts.size());
    for (auto& [s, c] : counts) plan.draws.push_back({s, c});
    return plan;
}

SubsetSamplePlan enumerate_subsets(int m2) {
    if (m2 < 1 || m2 > 20) throw ConfigError("enumerate_subsets: m2 must be in [1, 20]");
    SubsetSamplePlan plan;
    plan.m2 = m2;
    plan.enumerated = true;
    for (unsigned long mask = 1; mask + 1 < (1UL << m2); ++mask) {
        std::vector<int> s;
        for (int j = 0; j < m2; ++j)
            if (mask & (1UL << j)) s.push_back(j);
        plan.draws.push_back({s, shapley_kernel(m2, static_cast<int>(s.size()))});
    }
    plan.n_draws = static_cast<long>(plan.draws.size());
    return plan;
}

std::vector<double> exact_shapley(const std::vector<double>& value_by_mask, int m2) {
    if (value_by_mask.size() != (1UL << m2)) throw ConfigError("exact_shapley: need 2^m2 values");
    std::vector<double> phi(static_cast<std::size_t>(m2), 0.0);
    for (int j = 0; j < m2; ++j) {
        double acc = 0.0;
        for (unsigned long mask = 0; mask < (1UL << m2); ++mask) {
            if (mask & (1UL << j)) continue;
            const int k = __builtin_popcountl(mask);
            const double weight = 1.0 / (static_cast<double>(m2) * binom(m2 - 1, k));
            acc += weight * (value_by_mask[mask | (1UL << j)] - value_by_mask[mask]);
        }
        phi[static_cast<std::size_t>(j)] = acc;
    }
    return phi;
}

ShapleyAttribution solve_shapley(const std::vector<SubsetValue>& values,
                                 const SubsetSamplePlan& plan, double alpha) {
    const int m2 = plan.m2;
    std::map<std::vector<int>, const SubsetValue*> by_subset;
    for (const auto& v : values) {
        if (v.undefined) throw EstimationError("solve_shapley: a subset value is undefined");
        by_subset.emplace(v.subset, &v);
    }
    std::vector<int> full(static_cast<std::size_t>(m2));
    std::iota(full.begin(), full.end(), 0);
    auto it_empty = by_subset.find({});
    auto it_full = by_subset.find(full);
    if (it_empty == by_subset.end() || it_full == by_subset.end())
        throw ConfigError("solve_shapley: values must include the empty and full subsets");
    const SubsetValue& v_empty = *it_empty->second;
    const SubsetValue& v_full = *it_full->second;
    const Index n_ev = v_empty.influence.size();

    ShapleyAttribution out;
    out.phi.resize(static_cast<std::size_t>(m2) + 1);

    if (m2 == 1) {
        out.phi[0] = make_estimate(v_empty.value.point, v_empty.influence, alpha);
        Vec psi = v_full.influence - v_empty.influence;
        out.phi[1] = make_estimate(v_full.value.point - v_empty.value.point, psi, alpha);
        out.n_unique_subsets = 2;
        out.efficiency_residual = 0.0;
        return out;
    }

    const std::size_t n_unique = plan.draws.size();
    if (n_unique < static_cast<std::size_t>(m2 - 1))
        throw EstimationError(
            "solve_shapley: fewer unique subsets than coefficients; increase gamma");

    const int p = m2 - 1;  // reduced parameters after eliminating the constraints
    const int last = m2 - 1;

    Mat H = Mat::Zero(p, p);
    Vec rhs = Vec::Zero(p);
    std::vector<Vec> a_rows(n_unique);
    Vec lam(static_cast<Index>(n_unique)), vt(static_cast<Index>(n_unique));
    Vec chooses(static_cast<Index>(n_unique));
    std::vector<char> has_last(n_unique, 0);

    for (std::size_t u = 0; u < n_unique; ++u) {
        const auto& d = plan.draws[u];
        auto it = by_subset.find(d.subset);
        if (it == by_subset.end())
            throw ConfigError("solve_shapley: missing a value for a planned subset");
        const bool in_last = std::binary_search(d.subset.begin(), d.subset.end(), last);
        has_last[u] = in_last ? 1 : 0;
        Vec a = Vec::Zero(p);
        for (int j : d.subset)
            if (j != last) a[j] = 1.0;
        if (in_last) a.array() -= 1.0;
        a_rows[u] = a;
        chooses[static_cast<Index>(u)] = binom(m2, static_cast<int>(d.subset.size()));
        // Importance correction: counts times C(m2,|s|) converges to the
        // per-subset kernel weighting; enumerated plans carry it exactly.
        lam[static_cast<Index>(u)] =
            plan.enumerated ? d.count : d.count * chooses[static_cast<Index>(u)];
        vt[static_cast<Index>(u)] =
            it->second->value.point - (in_last ? v_full.value.point : v_empty.value.point);
        H += lam[static_cast<Index>(u)] * (a * a.transpose());
        rhs += lam[static_cast<Index>(u)] * vt[static_cast<Index>(u)] * a;
    }

    Eigen::LDLT<Mat> ldlt(H);
    Vec theta;
    bool pinv_used = false;
    if (ldlt.info() == Eigen::Success && ldlt.isPositive() &&
        ldlt.vectorD().minCoeff() > 1e-10 * std::max(1.0, ldlt.vectorD().maxCoeff())) {
        theta = ldlt.solve(rhs);
    } else {
        Eigen::JacobiSVD<Mat> svd(H, Eigen::ComputeThinU | Eigen::ComputeThinV);
        svd.setThreshold(1e-10);
        theta = svd.solve(rhs);
        pinv_used = true;
        out.warnings.push_back("near-singular Shapley design; pseudo-inverse solution");
    }

    // Linear map from subset values to theta, for influence propagation:
    // theta = H^{-1} sum_u lam_u a_u (v_u - anchor_u).
    auto h_solve = [&](const Vec& b) -> Vec {
        if (!pinv_used) return ldlt.solve(b);
        Eigen::JacobiSVD<Mat> svd(H, Eigen::ComputeThinU | Eigen::ComputeThinV);
        svd.setThreshold(1e-10);
        return svd.solve(b);
    };

    // Per-row influence of theta: sum over subsets of the map coefficients
    // times each subset value's influence vector.
    Mat psi_theta = Mat::Zero(n_ev, p);
    for (std::size_t u = 0; u < n_unique; ++u) {
        const Vec coef = h_solve(lam[static_cast<Index>(u)] * a_rows[u]);  // d theta / d v_u
        const SubsetValue& sv = *by_subset.find(plan.draws[u].subset)->second;
        const Vec& anchor_psi = has_last[u] ? v_full.influence : v_empty.influence;
        psi_theta += (sv.influence - anchor_psi) * coef.transpose();
    }

    // Sampling-variance term (subset draws are the randomness; zero for
    // enumerated plans). Per-draw moment g = C(m2,|s|) * a * residual.
    Mat samp_cov = Mat::Zero(p, p);
    if (!plan.enumerated && plan.n_draws > 0) {
        Mat gg = Mat::Zero(p, p);
        for (std::size_t u = 0; u < n_unique; ++u) {
            const double resid = vt[static_cast<Index>(u)] - a_rows[u].dot(theta);
            const Vec g = chooses[static_cast<Index>(u)] * resid * a_rows[u];
            gg += plan.draws[u].count * (g * g.transpose());
        }
        Mat hinv_gg(p, p);
        for (int c = 0; c < p; ++c) hinv_gg.col(c) = h_solve(gg.col(c));
        Mat tmp = hinv_gg.transpose();
        for (int c = 0; c < p; ++c) samp_cov.col(c) = h_solve(tmp.col(c));
        samp_cov = 0.5 * (samp_cov + samp_cov.transpose());
    }

    // Assemble phi: phi_0 = v(empty); phi_last closes the efficiency constraint.
    const double total_gain = v_full.value.point - v_empty.value.point;
    out.phi[0] = make_estimate(v_empty.value.point, v_empty.influence, alpha);

    double sum_theta = 0.0;
    for (int j = 0; j < p; ++j) {
        const double est_var =
            sample_sd(psi_theta.col(j)) * sample_sd(psi_theta.col(j)) / static_cast<double>(n_ev);
        out.phi[static_cast<std::size_t>(j) + 1] =
            make_estimate_var(theta[j], est_var + samp_cov(j, j), static_cast<long>(n_ev), alpha);
        sum_theta += theta[j];
    }
    {
        Vec psi_last = v_full.influence - v_empty.influence - psi_theta.rowwise().sum();
        const double est_var =
            sample_sd(psi_last) * sample_sd(psi_last) / static_cast<double>(n_ev);
        const double samp_var = Vec::Ones(p).dot(samp_cov * Vec::Ones(p));
        out.phi[static_cast<std::size_t>(m2)] = make_estimate_var(
            total_gain - sum_theta, est_var + std::max(0.0, samp_var), static_cast<long>(n_ev), alpha);
    }

    out.n_unique_subsets = static_cast<int>(n_unique) + 2;
    double phi_sum = 0.0;
    for (int j = 1; j <= m2; ++j) phi_sum += out.phi[static_cast<std::size_t>(j)].point;
    out.efficiency_residual = std::fabs(phi_sum - total_gain);
    return out;
}

}  // namespace shiftdecomp
