#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "shiftdecomp/shapley.hpp"
#include "shiftdecomp/rng.hpp"

using namespace shiftdecomp;

namespace {

SubsetValue fixed_value(std::vector<int> subset, double value, Index n_rows,
                        double influence_scale = 0.0, std::uint64_t seed = 1) {
    SubsetValue v;
    v.subset = std::move(subset);
    v.value.point = value;
    v.influence = Vec::Zero(n_rows);
    if (influence_scale > 0.0) {
        Rng rng(seed);
        for (Index i = 0; i < n_rows; ++i) v.influence[i] = influence_scale * rng.normal();
        v.influence.array() -= v.influence.mean();
    }
    return v;
}

double table_value(unsigned long mask, int m2) {
    // A deliberately non-additive but monotone set function normalized to
    // v(empty)=0, v(full)=1.
    static const double u[8] = {0.40, 0.30, 0.15, 0.10, 0.03, 0.02, 0.05, 0.07};
    double s = 0.0, total = 0.0;
    for (int j = 0; j < m2; ++j) {
        total += u[j];
        if (mask & (1UL << j)) s += u[j];
    }
    return std::pow(s / total, 0.7);
}

}  // namespace

TEST_CASE("kernel symmetry at m2=2 and draw bookkeeping") {
    SubsetSamplePlan plan = sample_subsets(2, 1.0, 10000, 3);
    CHECK(plan.n_draws == 10000);
    REQUIRE(plan.draws.size() == 2);
    double c0 = 0, c1 = 0;
    for (const auto& d : plan.draws) {
        REQUIRE(d.subset.size() == 1);
        (d.subset[0] == 0 ? c0 : c1) = d.count;
    }
    CHECK(c0 + c1 == 10000.0);
    CHECK(std::fabs(c0 / 10000.0 - 0.5) < 0.02);  // equal kernel weight 1/2 each
    CHECK(shapley_kernel(2, 1) == doctest::Approx(0.25));

    const auto uniq = plan.unique_subsets();
    CHECK(uniq[0].empty());
    CHECK(uniq[1] == std::vector<int>{0, 1});
}

TEST_CASE("m2=34 with 3000 draws keeps the unique count in the low hundreds") {
    SubsetSamplePlan plan = sample_subsets(34, 1.0, 3000, 7);
    CHECK(plan.n_draws == 3000);
    CHECK(plan.draws.size() <= 400);
    CHECK(plan.draws.size() >= 60);
}

TEST_CASE("enough draws reach every subset for small m2") {
    const int m2 = 4;
    SubsetSamplePlan plan = sample_subsets(m2, 1.0, 600, 11);  // >= 10 * 2^m2 draws
    std::set<std::vector<int>> seen;
    for (const auto& d : plan.draws) seen.insert(d.subset);
    CHECK(seen.size() == (1u << m2) - 2);  // all non-anchor subsets
}

TEST_CASE("closed-form Shapley at m2=2") {
    SubsetSamplePlan plan;
    plan.m2 = 2;
    plan.n_draws = 6;
    plan.draws = {{{0}, 3.0}, {{1}, 3.0}};
    std::vector<SubsetValue> values = {fixed_value({}, 0.0, 40), fixed_value({0}, 0.6, 40),
                                       fixed_value({1}, 0.2, 40), fixed_value({0, 1}, 1.0, 40)};
    ShapleyAttribution phi = solve_shapley(values, plan, 0.10);
    CHECK(phi.phi[0].point == doctest::Approx(0.0));
    CHECK(phi.phi[1].point == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(phi.phi[2].point == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(phi.efficiency_residual < 1e-12);
}

TEST_CASE("dummy players get zero attribution") {
    const double c = 0.4;
    SubsetSamplePlan plan = sample_subsets(3, 1.0, 200, 5);
    std::vector<SubsetValue> values = {fixed_value({}, c, 30), fixed_value({0, 1, 2}, c, 30)};
    for (const auto& d : plan.draws) values.push_back(fixed_value(d.subset, c, 30));
    ShapleyAttribution phi = solve_shapley(values, plan, 0.10);
    CHECK(phi.phi[0].point == doctest::Approx(c));
    for (int j = 1; j <= 3; ++j) CHECK(std::fabs(phi.phi[static_cast<std::size_t>(j)].point) < 1e-12);
}

TEST_CASE("sampled Shapley matches exact enumeration within inflated CIs at m2=6") {
    const int m2 = 6;
    std::vector<double> table(1u << m2);
    for (unsigned long mask = 0; mask < table.size(); ++mask) table[mask] = table_value(mask, m2);
    const std::vector<double> exact = exact_shapley(table, m2);

    int ok_trials = 0;
    const int trials = 20;
    for (int t = 0; t < trials; ++t) {
        SubsetSamplePlan plan = sample_subsets(m2, 1.0, 3000, 100 + static_cast<std::uint64_t>(t));
        std::vector<SubsetValue> values = {fixed_value({}, table[0], 50),
                                           fixed_value({0, 1, 2, 3, 4, 5}, table.back(), 50)};
        for (const auto& d : plan.draws) {
            unsigned long mask = 0;
            for (int j : d.subset) mask |= 1UL << j;
            values.push_back(fixed_value(d.subset, table[mask], 50));
        }
        ShapleyAttribution phi = solve_shapley(values, plan, 0.10);
        bool all_ok = phi.efficiency_residual < 1e-8;
        for (int j = 1; j <= m2; ++j) {
            const auto& e = phi.phi[static_cast<std::size_t>(j)];
            const double half = (e.ci_hi - e.ci_lo) / 2.0;
            all_ok = all_ok && std::fabs(e.point - exact[static_cast<std::size_t>(j - 1)]) <=
                                   2.0 * std::max(half, 1e-12);
        }
        ok_trials += all_ok ? 1 : 0;
    }
    CHECK(ok_trials >= 19);
}

TEST_CASE("exact enumeration plan reproduces exact Shapley with zero sampling noise") {
    const int m2 = 5;
    std::vector<double> table(1u << m2);
    for (unsigned long mask = 0; mask < table.size(); ++mask) table[mask] = table_value(mask, m2);
    const std::vector<double> exact = exact_shapley(table, m2);
    SubsetSamplePlan plan = enumerate_subsets(m2);
    std::vector<SubsetValue> values = {fixed_value({}, table[0], 30),
                                       fixed_value({0, 1, 2, 3, 4}, table.back(), 30)};
    for (const auto& d : plan.draws) {
        unsigned long mask = 0;
        for (int j : d.subset) mask |= 1UL << j;
        values.push_back(fixed_value(d.subset, table[mask], 30));
    }
    ShapleyAttribution phi = solve_shapley(values, plan, 0.10);
    for (int j = 1; j <= m2; ++j)
        CHECK(phi.phi[static_cast<std::size_t>(j)].point ==
              doctest::Approx(exact[static_cast<std::size_t>(j - 1)]).epsilon(1e-9));
}

TEST_CASE("relabeling variables permutes the attribution") {
    const int m2 = 4;
    SubsetSamplePlan plan = sample_subsets(m2, 1.0, 800, 3);
    auto value_of = [&](const std::vector<int>& s) {
        unsigned long mask = 0;
        for (int j : s) mask |= 1UL << j;
        return table_value(mask, m2);
    };
    std::vector<SubsetValue> values = {fixed_value({}, value_of({}), 30),
                                       fixed_value({0, 1, 2, 3}, value_of({0, 1, 2, 3}), 30)};
    for (const auto& d : plan.draws) values.push_back(fixed_value(d.subset, value_of(d.subset), 30));
    ShapleyAttribution phi = solve_shapley(values, plan, 0.10);

    // Relabel via the cycle 0 -> 1 -> 2 -> 3 -> 0.
    auto relabel = [&](const std::vector<int>& s) {
        std::vector<int> out;
        for (int j : s) out.push_back((j + 1) % m2);
        std::sort(out.begin(), out.end());
        return out;
    };
    SubsetSamplePlan plan2 = plan;
    for (auto& d : plan2.draws) d.subset = relabel(d.subset);
    std::vector<SubsetValue> values2;
    for (const auto& v : values) {
        SubsetValue w = v;
        w.subset = relabel(v.subset);
        values2.push_back(w);
    }
    ShapleyAttribution phi2 = solve_shapley(values2, plan2, 0.10);
    for (int j = 0; j < m2; ++j)
        CHECK(phi.phi[static_cast<std::size_t>(j) + 1].point ==
              doctest::Approx(phi2.phi[static_cast<std::size_t>((j + 1) % m2) + 1].point)
                  .epsilon(1e-9));
}

TEST_CASE("subset sampling inflates CI width when values carry residual noise") {
    const int m2 = 5;
    SubsetSamplePlan plan = sample_subsets(m2, 1.0, 400, 9);
    Rng rng(31);
    std::vector<SubsetValue> values = {fixed_value({}, 0.0, 60),
                                       fixed_value({0, 1, 2, 3, 4}, 1.0, 60)};
    for (const auto& d : plan.draws) {
        unsigned long mask = 0;
        for (int j : d.subset) mask |= 1UL << j;
        values.push_back(fixed_value(d.subset, table_value(mask, m2) + 0.05 * rng.normal(), 60));
    }
    // Values are exogenously fixed (zero influence), so any CI width comes
    // from the subset-sampling inflation alone; it must be strictly positive.
    ShapleyAttribution phi = solve_shapley(values, plan, 0.10);
    for (int j = 1; j <= m2; ++j) CHECK(phi.phi[static_cast<std::size_t>(j)].se > 0.0);
}

TEST_CASE("singular designs are refused with a gamma hint") {
    SubsetSamplePlan plan;
    plan.m2 = 4;
    plan.n_draws = 2;
    plan.draws = {{{0}, 2.0}};  // far fewer unique subsets than coefficients
    std::vector<SubsetValue> values = {fixed_value({}, 0.0, 10), fixed_value({0, 1, 2, 3}, 1.0, 10),
                                       fixed_value({0}, 0.3, 10)};
    CHECK_THROWS_WITH_AS(solve_shapley(values, plan, 0.10),
                         doctest::Contains("increase gamma"), EstimationError);
}

TEST_CASE("m2=1 reduces to the direct difference") {
    SubsetSamplePlan plan = sample_subsets(1, 1.0, 50, 2);
    std::vector<SubsetValue> values = {fixed_value({}, 0.1, 40, 0.2, 5),
                                       fixed_value({0}, 0.9, 40, 0.2, 6)};
    ShapleyAttribution phi = solve_shapley(values, plan, 0.10);
    CHECK(phi.phi[1].point == doctest::Approx(0.8));
    CHECK(phi.phi[1].se > 0.0);
}
