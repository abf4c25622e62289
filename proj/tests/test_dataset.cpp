#include <doctest.h>

#include <algorithm>
#include <set>

#include "shiftdecomp/dataset.hpp"
#include "test_helpers.hpp"

using namespace shiftdecomp;

namespace {
Vec vec(std::initializer_list<double> v) {
    Vec out(static_cast<Index>(v.size()));
    Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}
}  // namespace

TEST_CASE("compute_loss from labels") {
    const Vec loss = compute_loss(vec({1, 0, 1}), vec({1, 1, 1}), LossMode::zero_one_from_label);
    CHECK(loss[0] == 0.0);
    CHECK(loss[1] == 1.0);
    CHECK(loss[2] == 0.0);
}

TEST_CASE("compute_loss from scores with threshold") {
    const Vec loss = compute_loss(vec({0.7, 0.2}), vec({1, 0}), LossMode::zero_one_from_score, 0.5);
    CHECK(loss[0] == 0.0);
    CHECK(loss[1] == 0.0);
}

TEST_CASE("compute_loss of perfect predictions is zero") {
    const Vec y = vec({0, 1, 1, 0, 1});
    const Vec loss = compute_loss(y, y, LossMode::zero_one_from_label);
    CHECK(loss.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("compute_loss rejects bad input") {
    CHECK_THROWS_AS(compute_loss(vec({1, 0}), vec({1}), LossMode::zero_one_from_label), DataError);
    CHECK_THROWS_AS(compute_loss(vec({1, 0}), vec({1, 2}), LossMode::zero_one_from_label), DataError);
    CHECK_THROWS_AS(compute_loss(vec({0.5, 0.5}), vec({1, 0}), LossMode::zero_one_from_score, 1.5),
                    DataError);
}

TEST_CASE("dataset invariants enforced") {
    Mat w(2, 1), z(2, 1);
    w << 0, 1;
    z << 0, 1;
    CHECK_THROWS_AS(Dataset(w, z, vec({0, 2}), vec({0, 1}), vec({0, 0})), DataError);  // y not binary
    CHECK_THROWS_AS(Dataset(w, z, vec({0, 1}), vec({0, 0}), vec({0, 0})), DataError);  // one domain
    Vec bad = vec({0, 1});
    bad[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(Dataset(w, z, vec({0, 1}), vec({0, 1}), bad), DataError);  // non-finite loss
}

TEST_CASE("split produces stratified floor counts") {
    auto ds = sdtest::random_dataset(100, 1, 2, 11);
    SplitPlan plan = split(ds, 0.8, 5);
    long train0 = 0, train1 = 0;
    for (int r : plan.train_indices) (ds.is_source(r) ? train0 : train1) += 1;
    CHECK(train0 == 80);
    CHECK(train1 == 80);
    CHECK(plan.train_indices.size() + plan.eval_indices.size() == 200);

    std::set<int> all(plan.train_indices.begin(), plan.train_indices.end());
    all.insert(plan.eval_indices.begin(), plan.eval_indices.end());
    CHECK(all.size() == 200);  // exact partition, no overlap
}

TEST_CASE("split is deterministic per seed and varies across seeds") {
    auto ds = sdtest::random_dataset(50, 1, 2, 3);
    SplitPlan a = split(ds, 0.8, 42), b = split(ds, 0.8, 42), c = split(ds, 0.8, 43);
    CHECK(a.train_indices == b.train_indices);
    CHECK(a.eval_indices == b.eval_indices);
    CHECK(a.train_indices != c.train_indices);
    CHECK(a.train_indices.size() == c.train_indices.size());
}

TEST_CASE("split stratification bound") {
    auto ds = sdtest::random_dataset(73, 1, 2, 9);  // odd sizes exercise rounding
    SplitPlan plan = split(ds, 0.7, 1);
    double target_in_train = 0;
    for (int r : plan.train_indices)
        if (!ds.is_source(r)) target_in_train += 1;
    const double frac_train = target_in_train / static_cast<double>(plan.train_indices.size());
    const double frac_all = static_cast<double>(ds.n_target()) / static_cast<double>(ds.n());
    CHECK(std::fabs(frac_train - frac_all) <= 1.0 / static_cast<double>(plan.train_indices.size()));
}

TEST_CASE("split rejects degenerate requests") {
    auto ds = sdtest::random_dataset(10, 1, 1, 2);
    CHECK_THROWS_AS(split(ds, 0.0, 1), DataError);
    CHECK_THROWS_AS(split(ds, 1.0, 1), DataError);
}
