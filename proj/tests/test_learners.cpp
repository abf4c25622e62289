#include <doctest.h>

#include <cmath>

#include "shiftdecomp/learners.hpp"
#include "shiftdecomp/rng.hpp"
#include "test_helpers.hpp"

using namespace shiftdecomp;

TEST_CASE("bin_risk formula") {
    Vec q(3);
    q << 0.5, 0.024, 1.0;
    const Vec b = bin_risk(q, 20);
    CHECK(b[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(b[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(b[2] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(bin_risk(Vec::Constant(1, 1.2), 20), DataError);
    CHECK_THROWS_AS(bin_risk(q, 1), ConfigError);
}

TEST_CASE("bin_risk is monotone and idempotent") {
    Rng rng(19);
    Vec q(500);
    for (Index i = 0; i < q.size(); ++i) q[i] = rng.uniform();
    std::sort(q.data(), q.data() + q.size());
    const Vec b = bin_risk(q, 20);
    for (Index i = 1; i < b.size(); ++i) CHECK(b[i] >= b[i - 1]);
    const Vec bb = bin_risk(b, 20);
    CHECK((bb - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("fit_cv handles a constant target") {
    Mat X(8, 1);
    X.col(0).setLinSpaced(8, -1.0, 1.0);
    FitResult fit = fit_cv(sdtest::tiny_classifier_grid(), X, Vec::Ones(8), 3, 1, Task::classification);
    CHECK(fit.constant_target);
    CHECK(fit.model->predict(X)[0] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("fit_cv picks a candidate no worse than each alone") {
    Rng rng(5);
    const long n = 600;
    Mat X(n, 2);
    Vec y(n);
    for (long i = 0; i < n; ++i) {
        X(i, 0) = rng.normal();
        X(i, 1) = rng.normal();
        const double p = 1.0 / (1.0 + std::exp(-(1.5 * X(i, 0) - X(i, 1))));
        y[i] = rng.bernoulli(p) ? 1.0 : 0.0;
    }
    std::vector<LearnerConfig> grid = sdtest::tiny_classifier_grid();
    LearnerConfig g;
    g.kind = LearnerKind::gbt;
    g.trees = 50;
    g.depth = 2;
    grid.push_back(g);

    FitResult fit = fit_cv(grid, X, y, 3, 9, Task::classification);

    // Fresh sample comparison against each candidate refit on all rows.
    Mat Xt(2000, 2);
    Vec yt(2000);
    for (long i = 0; i < 2000; ++i) {
        Xt(i, 0) = rng.normal();
        Xt(i, 1) = rng.normal();
        const double p = 1.0 / (1.0 + std::exp(-(1.5 * Xt(i, 0) - Xt(i, 1))));
        yt[i] = rng.bernoulli(p) ? 1.0 : 0.0;
    }
    auto logloss = [&](const ModelPtr& m) {
        const Vec p = m->predict(Xt);
        double s = 0.0;
        for (long i = 0; i < 2000; ++i)
            s -= yt[i] * std::log(p[i]) + (1.0 - yt[i]) * std::log(1.0 - p[i]);
        return s / 2000.0;
    };
    const double selected = logloss(fit.model);
    double best_single = 1e300;
    for (const auto& c : grid) best_single = std::min(best_single, logloss(fit_one(c, X, y, Task::classification)));
    CHECK(selected <= best_single + 0.02);  // selection is near the best candidate
}

TEST_CASE("fit_cv is deterministic") {
    auto ds = sdtest::random_dataset(150, 1, 2, 21);
    FitResult a = fit_cv(sdtest::tiny_classifier_grid(), ds.wz(), ds.y(), 3, 5, Task::classification);
    FitResult b = fit_cv(sdtest::tiny_classifier_grid(), ds.wz(), ds.y(), 3, 5, Task::classification);
    CHECK(a.selected.name() == b.selected.name());
    CHECK((a.model->predict(ds.wz()) - b.model->predict(ds.wz())).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("logistic coefficient recovery on simulated data") {
    // y ~ Bernoulli(sigmoid(0.3 w + 1 z1 + 0.5 z2 + 1 z3)) at n = 5000.
    Rng rng(33);
    const long n = 5000;
    Mat X(n, 4);
    Vec y(n);
    const double coef[4] = {0.3, 1.0, 0.5, 1.0};
    for (long i = 0; i < n; ++i) {
        double t = 0.0;
        for (int j = 0; j < 4; ++j) {
            X(i, j) = rng.normal();
            t += coef[j] * X(i, j);
        }
        y[i] = rng.bernoulli(1.0 / (1.0 + std::exp(-t))) ? 1.0 : 0.0;
    }
    ModelPtr m = fit_one({LearnerKind::logistic_poly, 1, 0.01}, X, y, Task::classification);
    const auto* linear = dynamic_cast<const LinearCoefModel*>(m.get());
    REQUIRE(linear != nullptr);
    const Vec beta = linear->raw_coefficients();
    CHECK(std::fabs(beta[0]) < 0.1);  // intercept ~ 0
    for (int j = 0; j < 4; ++j) CHECK(std::fabs(beta[j + 1] - coef[j]) < 0.1);
}

TEST_CASE("density ratio on identical samples is about one") {
    Rng rng(71);
    Mat a(2000, 1), b(2000, 1);
    for (Index i = 0; i < 2000; ++i) {
        a(i, 0) = rng.normal();
        b(i, 0) = rng.normal();
    }
    DensityRatioModel dr = fit_density_ratio(a, b, sdtest::tiny_classifier_grid(), 3, 4);
    CHECK(std::fabs(dr.ratio(b).mean() - 1.0) < 0.1);
}

TEST_CASE("density ratio recovers the Gaussian mean-shift log-ratio") {
    // N(1,1) numerator vs N(0,1) denominator: log ratio is x - 1/2.
    Rng rng(70);
    Mat num(10000, 1), den(10000, 1);
    for (Index i = 0; i < 10000; ++i) {
        num(i, 0) = 1.0 + rng.normal();
        den(i, 0) = rng.normal();
    }
    DensityRatioModel dr = fit_density_ratio(num, den, sdtest::tiny_classifier_grid(), 3, 4);
    double mae = 0.0;
    int count = 0;
    for (double x = -2.0; x <= 3.0 + 1e-9; x += 0.25) {
        Mat g(1, 1);
        g(0, 0) = x;
        mae += std::fabs(std::log(dr.ratio(g)[0]) - (x - 0.5));
        ++count;
    }
    CHECK(mae / count < 0.3);
}

TEST_CASE("density ratio prior correction arithmetic") {
    // A classifier emitting p = 0.75 with n_num = 300, n_den = 100 yields
    // (0.75/0.25) * (100/300) = 1.
    DensityRatioModel dr(std::make_shared<ConstantModel>(0.75), 100.0 / 300.0, 0.01, 0.99);
    Mat x(1, 1);
    x(0, 0) = 0.0;
    CHECK(dr.ratio(x)[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ratios respect the clamp bounds") {
    Rng rng(13);
    Mat num(400, 1), den(400, 1);
    for (Index i = 0; i < 400; ++i) {
        num(i, 0) = 4.0 + 0.3 * rng.normal();  // near-separable
        den(i, 0) = -4.0 + 0.3 * rng.normal();
    }
    DensityRatioModel dr = fit_density_ratio(num, den, sdtest::tiny_classifier_grid(), 3, 4, 0.01, 0.99);
    Mat grid(9, 1);
    grid.col(0).setLinSpaced(9, -8.0, 8.0);
    const Vec r = dr.ratio(grid);
    for (Index i = 0; i < r.size(); ++i) {
        CHECK(r[i] <= 99.0 + 1e-9);
        CHECK(r[i] >= 1.0 / 99.0 - 1e-12);
    }
}

TEST_CASE("gbt fits a nonlinear regression surface") {
    Rng rng(27);
    const long n = 1500;
    Mat X(n, 1);
    Vec y(n);
    for (long i = 0; i < n; ++i) {
        X(i, 0) = rng.uniform(-2.0, 2.0);
        y[i] = std::sin(2.0 * X(i, 0)) + 0.05 * rng.normal();
    }
    LearnerConfig g;
    g.kind = LearnerKind::gbt;
    g.trees = 300;
    g.depth = 2;
    ModelPtr m = fit_one(g, X, y, Task::regression);
    Mat grid(41, 1);
    grid.col(0).setLinSpaced(41, -1.8, 1.8);
    const Vec pred = m->predict(grid);
    double mae = 0.0;
    for (Index i = 0; i < grid.rows(); ++i) mae += std::fabs(pred[i] - std::sin(2.0 * grid(i, 0)));
    CHECK(mae / grid.rows() < 0.12);
}
