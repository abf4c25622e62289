#pragma once

// Fully enumerable binary DGP: W, Z1, Z2 in {0,1} with explicit probability
// tables per domain, a logistic outcome, and the source-Bayes prediction
// rule. Everything the estimators target is computable by summing 8 cells.

#include <algorithm>
#include <cmath>
#include <vector>

#include "test_helpers.hpp"

namespace sdtest {

struct AggregateNuisancesOracle;

struct DiscreteDgp {
    // P(W=1), P(Z1=1|W), P(Z2=1|W,Z1), logistic outcome coefficients
    // (intercept, w, z1, z2) per domain.
    double pw[2] = {0.4, 0.6};
    double pz1[2][2] = {{0.3, 0.7}, {0.5, 0.7}};          // [domain][w]
    double pz2[2][2][2] = {{{0.2, 0.5}, {0.5, 0.8}},      // source: [w][z1]
                           {{0.5, 0.8}, {0.3, 0.6}}};     // target
    double coef[2][4] = {{-0.5, 0.8, 1.0, -0.7}, {0.2, -0.5, 0.3, 0.6}};

    static double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

    double outcome_prob(int d, int w, int z1, int z2) const {
        return sigmoid(coef[d][0] + coef[d][1] * w + coef[d][2] * z1 + coef[d][3] * z2);
    }
    int predict(int w, int z1, int z2) const {
        return coef[0][0] + coef[0][1] * w + coef[0][2] * z1 + coef[0][3] * z2 >= 0.0 ? 1 : 0;
    }
    // E[loss | w,z] when Y follows domain d's outcome model.
    double mean_loss(int d, int w, int z1, int z2) const {
        const double p = outcome_prob(d, w, z1, z2);
        return predict(w, z1, z2) == 1 ? 1.0 - p : p;
    }
    double p_w(int d, int w) const { return w ? pw[d] : 1.0 - pw[d]; }
    double p_z1(int d, int w, int z1) const { return z1 ? pz1[d][w] : 1.0 - pz1[d][w]; }
    double p_z2(int d, int w, int z1, int z2) const {
        return z2 ? pz2[d][w][z1] : 1.0 - pz2[d][w][z1];
    }
    double p_z(int d, int w, int z1, int z2) const {
        return p_z1(d, w, z1) * p_z2(d, w, z1, z2);
    }

    // E_{D_w D_z D_y}[loss] by enumeration.
    double expected_loss(int dw, int dz, int dy) const {
        double acc = 0.0;
        for (int w = 0; w < 2; ++w)
            for (int z1 = 0; z1 < 2; ++z1)
                for (int z2 = 0; z2 < 2; ++z2)
                    acc += p_w(dw, w) * p_z(dz, w, z1, z2) * mean_loss(dy, w, z1, z2);
        return acc;
    }

    // E_src[loss | w] under the source everything.
    double mu_w_source(int w) const {
        double acc = 0.0;
        for (int z1 = 0; z1 < 2; ++z1)
            for (int z2 = 0; z2 < 2; ++z2) acc += p_z(0, w, z1, z2) * mean_loss(0, w, z1, z2);
        return acc;
    }

    // E_tgt-over-z[ mean_loss_src | w ].
    double mu_w_target_mix(int w) const {
        double acc = 0.0;
        for (int z1 = 0; z1 < 2; ++z1)
            for (int z2 = 0; z2 < 2; ++z2) acc += p_z(1, w, z1, z2) * mean_loss(0, w, z1, z2);
        return acc;
    }

    // Strata mean loss under the s-partial conditional covariate shift. The
    // subset uses 0-based Z indices: {0} shifts Z1, {1} shifts Z2.
    double mu_w_subset_mix(const std::vector<int>& s, int w) const {
        const bool s1 = std::find(s.begin(), s.end(), 0) != s.end();
        const bool s2 = std::find(s.begin(), s.end(), 1) != s.end();
        double acc = 0.0;
        for (int z1 = 0; z1 < 2; ++z1)
            for (int z2 = 0; z2 < 2; ++z2) {
                double pz;
                if (s1 && s2)
                    pz = p_z(1, w, z1, z2);
                else if (!s1 && !s2)
                    pz = p_z(0, w, z1, z2);
                else if (s1)
                    pz = p_z1(1, w, z1) * p_z2(0, w, z1, z2);
                else {
                    // shift Z2's marginal given w; keep source Z1 | Z2.
                    double p1z2 = 0.0, p0z2 = 0.0;
                    for (int t = 0; t < 2; ++t) {
                        p1z2 += p_z1(1, w, t) * p_z2(1, w, t, z2);
                        p0z2 += p_z1(0, w, t) * p_z2(0, w, t, z2);
                    }
                    const double p0_z1_given_z2 = p_z1(0, w, z1) * p_z2(0, w, z1, z2) / p0z2;
                    pz = p1z2 * p0_z1_given_z2;
                }
                acc += pz * mean_loss(0, w, z1, z2);
            }
        return acc;
    }

    // Population numerator of the covariate-shift value for subset s.
    double covariate_num_truth(const std::vector<int>& s) const {
        double acc = 0.0;
        for (int w = 0; w < 2; ++w) {
            const double d_s = mu_w_subset_mix(s, w) - mu_w_source(w);
            const double d_1 = mu_w_target_mix(w) - mu_w_source(w);
            acc += p_w(1, w) * (d_s - d_1) * (d_s - d_1);
        }
        return acc;
    }

    // Population value of the outcome-shift denominator E_tgt[(mu1 - mu0)^2].
    double outcome_den_truth() const {
        double acc = 0.0;
        for (int w = 0; w < 2; ++w)
            for (int z1 = 0; z1 < 2; ++z1)
                for (int z2 = 0; z2 < 2; ++z2) {
                    const double d = mean_loss(1, w, z1, z2) - mean_loss(0, w, z1, z2);
                    acc += p_w(1, w) * p_z(1, w, z1, z2) * d * d;
                }
        return acc;
    }

    Dataset sample(long n_per_domain, std::uint64_t seed) const {
        Rng rng(seed);
        const long n = 2 * n_per_domain;
        Mat w(n, 1), z(n, 2);
        Vec y(n), domain(n), loss(n);
        for (long i = 0; i < n; ++i) {
            const int d = i >= n_per_domain ? 1 : 0;
            const int wv = rng.bernoulli(pw[d]) ? 1 : 0;
            const int z1 = rng.bernoulli(pz1[d][wv]) ? 1 : 0;
            const int z2 = rng.bernoulli(pz2[d][wv][z1]) ? 1 : 0;
            const int yv = rng.bernoulli(outcome_prob(d, wv, z1, z2)) ? 1 : 0;
            domain[i] = d;
            w(i, 0) = wv;
            z(i, 0) = z1;
            z(i, 1) = z2;
            y[i] = yv;
            loss[i] = predict(wv, z1, z2) != yv ? 1.0 : 0.0;
        }
        return Dataset(std::move(w), std::move(z), std::move(y), std::move(domain), std::move(loss));
    }

    // Oracle nuisances for the aggregate estimators.
    AggregateNuisancesOracle aggregate_oracle() const;
};

struct AggregateNuisancesOracle {
    ModelPtr mu_w, mu_wz;
    DensityRatioModel ratio_w, ratio_wz;
};

inline AggregateNuisancesOracle DiscreteDgp::aggregate_oracle() const {
    AggregateNuisancesOracle o;
    o.mu_w = fn_model([this](const Eigen::RowVectorXd& x) {
        return mu_w_source(static_cast<int>(x[0]));
    });
    o.mu_wz = fn_model([this](const Eigen::RowVectorXd& x) {
        return mean_loss(0, static_cast<int>(x[0]), static_cast<int>(x[1]), static_cast<int>(x[2]));
    });
    o.ratio_w = fn_ratio([this](const Eigen::RowVectorXd& x) {
        const int w = static_cast<int>(x[0]);
        return p_w(1, w) / p_w(0, w);
    });
    o.ratio_wz = fn_ratio([this](const Eigen::RowVectorXd& x) {
        const int w = static_cast<int>(x[0]), z1 = static_cast<int>(x[1]), z2 = static_cast<int>(x[2]);
        return p_w(1, w) * p_z(1, w, z1, z2) / (p_w(0, w) * p_z(0, w, z1, z2));
    });
    return o;
}

}  // namespace sdtest
