#include <doctest.h>

#include <cmath>

#include "shiftdecomp/simgen.hpp"
#include "test_helpers.hpp"

using namespace shiftdecomp;

TEST_CASE("gaussian generator hits the documented means") {
    DgpSpec spec = coverage_dgp(500000, 3);
    Dataset ds = generate(spec);
    auto src = ds.rows_in_domain(0), tgt = ds.rows_in_domain(1);
    const Mat xs = take_rows(ds.wz(), src), xt = take_rows(ds.wz(), tgt);
    const double want_src[4] = {0.0, 2.0, 0.7, 3.0};
    for (int j = 0; j < 4; ++j) {
        CHECK(std::fabs(xs.col(j).mean() - want_src[j]) < 0.01);
        CHECK(std::fabs(xt.col(j).mean() - 0.0) < 0.01);
    }
}

TEST_CASE("zero coefficients give a balanced outcome") {
    DgpSpec spec = coverage_dgp(100000, 4);
    spec.source_coef.setZero();
    spec.target_coef.setZero();
    Dataset ds = generate(spec);
    CHECK(std::fabs(ds.y().mean() - 0.5) < 0.01);
}

TEST_CASE("mixture with zero gap collapses to a single gaussian") {
    DgpSpec spec = covariate_ranking_dgp(200000, 5);
    spec.mix_gap = 0.0;
    Dataset ds = generate(spec);
    auto src = ds.rows_in_domain(0);
    Vec z2 = take(ds.z().col(1), src);
    const double m = z2.mean();
    const double var = (z2.array() - m).square().mean();
    const double kurt = (z2.array() - m).pow(4).mean() / (var * var);
    CHECK(std::fabs(var - 2.0) < 0.05);   // z1_couple^2 + 1
    CHECK(std::fabs(kurt - 3.0) < 0.08);  // normal kurtosis

    DgpSpec bimodal = covariate_ranking_dgp(200000, 5);
    Dataset ds2 = generate(bimodal);
    Vec z2b = take(ds2.z().col(1), ds2.rows_in_domain(0));
    const double mb = z2b.mean();
    const double varb = (z2b.array() - mb).square().mean();
    const double kurtb = (z2b.array() - mb).pow(4).mean() / (varb * varb);
    CHECK(kurtb < 2.7);  // visibly flatter than a gaussian
}

TEST_CASE("generation is deterministic per seed") {
    DgpSpec spec = coverage_dgp(200, 9);
    Dataset a = generate(spec), b = generate(spec);
    CHECK((a.wz() - b.wz()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.y() - b.y()).cwiseAbs().maxCoeff() == 0.0);
    spec.seed = 10;
    Dataset c = generate(spec);
    CHECK((a.wz() - c.wz()).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("quadrature aggregate truth agrees with the Monte Carlo oracle") {
    DgpSpec spec = coverage_dgp(1000, 1);
    const AggregateTruth q = aggregate_truth(spec);
    const AggregateTruth mc = aggregate_truth_mc(spec, 2000000, 77);
    CHECK(std::fabs(q.baseline - mc.baseline) < 0.004);
    CHECK(std::fabs(q.covariate - mc.covariate) < 0.004);
    CHECK(std::fabs(q.outcome - mc.outcome) < 0.004);
    CHECK(std::fabs(q.total - (q.baseline + q.covariate + q.outcome)) < 1e-12);
}

TEST_CASE("covariate value truth anchors at the degenerate subsets") {
    DgpSpec spec = coverage_dgp(1000, 1);
    // Shifting every coordinate is the full shift: value 1 by construction.
    CHECK(covariate_value_truth(spec, {0, 1, 2}) == doctest::Approx(1.0).epsilon(1e-9));
    // A spec that only shifts z1 makes the {z1}-partial shift fully explanatory.
    DgpSpec only_z1 = spec;
    only_z1.target_means = only_z1.source_means;
    only_z1.target_means[1] = 0.0;
    CHECK(covariate_value_truth(only_z1, {0}) == doctest::Approx(1.0).epsilon(1e-9));
    const double v2 = covariate_value_truth(only_z1, {1});
    CHECK(v2 < 0.9);
}

TEST_CASE("outcome value truth: quadrature and rejection oracles agree") {
    DgpSpec spec = coverage_dgp(1000, 1);
    for (const std::vector<int>& s : {std::vector<int>{0}, std::vector<int>{2}}) {
        const double a = outcome_value_truth(spec, s, 20, 60000, 11);
        const double b = outcome_value_truth_rejection(spec, s, 20, 20000, 40000, 12);
        CHECK(std::fabs(a - b) < 0.02);
    }
}

TEST_CASE("outcome value truth is reproducible across oracle seeds") {
    DgpSpec spec = coverage_dgp(1000, 1);
    const double a = outcome_value_truth(spec, {1}, 20, 200000, 21);
    const double b = outcome_value_truth(spec, {1}, 20, 200000, 22);
    CHECK(std::fabs(a - b) < 2e-3);
}

TEST_CASE("coverage harness refuses tiny replication counts") {
    CoverageRequest req;
    req.spec = coverage_dgp(200, 1);
    req.reps = 5;
    CHECK_THROWS_AS(coverage_experiment(req), ConfigError);
}

TEST_CASE("coverage harness runs a small aggregate experiment") {
    CoverageRequest req;
    req.spec = coverage_dgp(400, 2);
    req.reps = 12;
    req.threads = 2;
    req.seed = 5;
    req.learners = sdtest::tiny_options();
    const auto rows = coverage_experiment(req);
    REQUIRE(rows.size() == 3);
    for (const auto& r : rows) {
        CHECK(r.reps == 12);
        CHECK(r.coverage >= 0.0);
        CHECK(r.coverage <= 1.0);
        CHECK(r.mean_width > 0.0);
    }
}
