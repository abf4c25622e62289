#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "shiftdecomp/report.hpp"
#include "shiftdecomp/simgen.hpp"
#include "shiftdecomp/svg.hpp"
#include "shiftdecomp/csv.hpp"
#include "test_helpers.hpp"

using namespace shiftdecomp;

namespace {

std::string small_learners_json() {
    return R"("learners": {
        "classifiers": [{"kind": "logistic_poly", "degree": 1, "lambda": 0.01},
                         {"kind": "logistic_poly", "degree": 2, "lambda": 0.1}],
        "regressors": [{"kind": "ridge_linear", "degree": 1, "lambda": 0.01},
                        {"kind": "ridge_linear", "degree": 2, "lambda": 0.1}]
    })";
}

std::string write_sim_csv(const char* path, long n_per_domain, std::uint64_t seed) {
    DgpSpec spec = covariate_ranking_dgp(n_per_domain, seed);
    Dataset ds = generate(spec);
    std::vector<std::string> cols = {"w1", "z1", "z2", "y", "domain", "loss"};
    Mat data(ds.n(), 6);
    data.col(0) = ds.w().col(0);
    data.col(1) = ds.z().col(0);
    data.col(2) = ds.z().col(1);
    data.col(3) = ds.y();
    data.col(4) = ds.domain();
    data.col(5) = ds.loss();
    write_csv(path, cols, data);
    return path;
}

std::string base_config(const std::string& csv, const std::string& targets) {
    return std::string(R"({
        "data": ")") + csv + R"(",
        "w_cols": ["w1"], "z_cols": ["z1", "z2"], "y_col": "y", "loss_col": "loss",
        "targets": [)" + targets + R"(],
        "seed": 11, "inner_subsample": 200,
    )" + small_learners_json() + "}";
}

}  // namespace

TEST_CASE("config validation catches bad settings") {
    CHECK_THROWS_AS(parse_config_json("{not json"), ConfigError);
    CHECK_THROWS_AS(parse_config_json(R"({"targets": []})"), ConfigError);
    CHECK_THROWS_AS(parse_config_json(R"({"targets": ["aggregate"], "alpha": 2.0})"), ConfigError);
    CHECK_THROWS_AS(parse_config_json(R"({"targets": ["nope"]})"), ConfigError);
}

TEST_CASE("missing columns are reported by name") {
    const std::string csv = write_sim_csv("/tmp/sd_test_cols.csv", 60, 5);
    RunConfig cfg = parse_config_json(base_config(csv, "\"aggregate\""));
    cfg.z_cols = {"z1", "zmissing"};
    try {
        load_dataset(cfg);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("zmissing") != std::string::npos);
    }
}

TEST_CASE("pipeline aggregate matches direct library calls bit for bit") {
    const std::string csv = write_sim_csv("/tmp/sd_test_pipe.csv", 300, 6);
    RunConfig cfg = parse_config_json(base_config(csv, "\"aggregate\""));
    DecompositionReport report = run(cfg);

    Dataset ds = load_dataset(cfg);
    SplitPlan plan = split(ds, cfg.train_fraction, cfg.seed);
    AggregateNuisances nu = fit_aggregate_nuisances(ds, plan, cfg.learner_options());
    AggregateDecomposition agg = estimate_aggregate(ds, plan, nu, cfg.alpha);
    CHECK(report.aggregate.baseline.point == agg.baseline.point);
    CHECK(report.aggregate.covariate.point == agg.covariate.point);
    CHECK(report.aggregate.outcome.point == agg.outcome.point);
    CHECK(report.aggregate.total.point == agg.total.point);
    CHECK(std::fabs(report.aggregate.baseline.point + report.aggregate.covariate.point +
                    report.aggregate.outcome.point - report.aggregate.total.point) < 1e-10);
}

TEST_CASE("end-to-end determinism across runs and thread counts") {
    const std::string csv = write_sim_csv("/tmp/sd_test_det.csv", 250, 7);
    const std::string cfg_text =
        base_config(csv, "\"aggregate\", \"detailed_covariate\", \"detailed_outcome\"");
    RunConfig cfg = parse_config_json(cfg_text);
    cfg.threads = 1;
    const std::string a = report_to_json(run(cfg));
    const std::string b = report_to_json(run(cfg));
    CHECK(a == b);
    cfg.threads = 2;
    const std::string c = report_to_json(run(cfg));
    CHECK(a == c);
}

TEST_CASE("report JSON round-trips losslessly") {
    const std::string csv = write_sim_csv("/tmp/sd_test_rt.csv", 250, 8);
    RunConfig cfg = parse_config_json(base_config(csv, "\"aggregate\", \"detailed_covariate\""));
    DecompositionReport report = run(cfg);
    const std::string text = report_to_json(report);
    DecompositionReport back = report_from_json(text);
    CHECK(report_to_json(back) == text);
}

TEST_CASE("svg renders bars, whiskers, and sorted attributions deterministically") {
    DecompositionReport report;
    report.has_aggregate = true;
    report.aggregate.baseline = make_estimate_var(0.02, 1e-4, 100, 0.1);
    report.aggregate.covariate = make_estimate_var(0.10, 1e-4, 100, 0.1);
    report.aggregate.outcome = make_estimate_var(-0.03, 1e-4, 100, 0.1);
    report.aggregate.total = make_estimate_var(0.09, 1e-4, 100, 0.1);
    const std::string svg = render_svg(report, SvgPanel::aggregate);
    CHECK(std::count(svg.begin(), svg.end(), '\n') > 5);
    std::size_t rects = 0, pos = 0;
    while ((pos = svg.find("<rect", pos)) != std::string::npos) {
        ++rects;
        pos += 5;
    }
    CHECK(rects == 3);
    CHECK(svg.find("total") != std::string::npos);

    report.detailed_covariate.present = true;
    report.detailed_covariate.variable_names = {"alpha", "beta", "gamma"};
    report.detailed_covariate.attribution.phi = {
        make_estimate_var(0.0, 1e-6, 100, 0.1), make_estimate_var(0.2, 1e-4, 100, 0.1),
        make_estimate_var(0.7, 1e-4, 100, 0.1), make_estimate_var(0.1, 1e-4, 100, 0.1)};
    const std::string svg2 = render_svg(report, SvgPanel::detailed_covariate);
    CHECK(svg2.find("beta") < svg2.find("alpha"));   // 0.7 before 0.2
    CHECK(svg2.find("alpha") < svg2.find("gamma"));  // 0.2 before 0.1

    // Round-tripping the report must not change a byte of the rendering.
    DecompositionReport back = report_from_json(report_to_json(report));
    CHECK(render_svg(back, SvgPanel::aggregate) == svg);
    CHECK(render_svg(back, SvgPanel::detailed_covariate) == svg2);
}

TEST_CASE("identical source and target files give a near-zero total") {
    DgpSpec spec = covariate_ranking_dgp(400, 9);
    spec.target_z1_mean = 0.0;  // no shift at all
    Dataset ds = generate(spec);
    std::vector<std::string> cols = {"w1", "z1", "z2", "y", "domain", "loss"};
    Mat data(ds.n(), 6);
    data.col(0) = ds.w().col(0);
    data.col(1) = ds.z().col(0);
    data.col(2) = ds.z().col(1);
    data.col(3) = ds.y();
    data.col(4) = ds.domain();
    data.col(5) = ds.loss();
    write_csv("/tmp/sd_test_same.csv", cols, data);

    RunConfig cfg = parse_config_json(base_config("/tmp/sd_test_same.csv", "\"aggregate\""));
    DecompositionReport report = run(cfg);
    CHECK(std::fabs(report.aggregate.total.point) < 0.06);
    for (const auto* e :
         {&report.aggregate.baseline, &report.aggregate.covariate, &report.aggregate.outcome}) {
        CHECK(e->ci_lo <= 0.0);
        CHECK(e->ci_hi >= 0.0);
    }
}
