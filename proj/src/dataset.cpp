#include "shiftdecomp/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "shiftdecomp/rng.hpp"

namespace shiftdecomp {

namespace {

bool is_binary(const Vec& v) {
    return std::all_of(v.data(), v.data() + v.size(), [](double x) { return x == 0.0 || x == 1.0; });
}

}  // namespace

Dataset::Dataset(Mat w, Mat z, Vec y, Vec domain, Vec loss,
                 std::vector<std::string> w_names, std::vector<std::string> z_names)
    : w_(std::move(w)),
      z_(std::move(z)),
      y_(std::move(y)),
      domain_(std::move(domain)),
      loss_(std::move(loss)),
      w_names_(std::move(w_names)),
      z_names_(std::move(z_names)) {
    const Index n = y_.size();
    if (n == 0) throw DataError("dataset: empty");
    if (w_.rows() != n && !(w_.rows() == 0 && w_.cols() == 0)) throw DataError("dataset: w row count mismatch");
    if (w_.rows() == 0) w_.resize(n, 0);
    if (z_.rows() != n) throw DataError("dataset: z row count mismatch");
    if (domain_.size() != n || loss_.size() != n) throw DataError("dataset: column length mismatch");
    if (z_.cols() < 1) throw DataError("dataset: at least one Z column required");
    if (!is_binary(y_)) throw DataError("dataset: y must be binary {0,1}");
    if (!is_binary(domain_)) throw DataError("dataset: domain must be {0,1}");
    if (!w_.allFinite() || !z_.allFinite() || !loss_.allFinite())
        throw DataError("dataset: non-finite values present (impute or drop before loading)");

    n_target_ = static_cast<long>(domain_.sum());
    n_source_ = static_cast<long>(n) - n_target_;
    if (n_source_ == 0 || n_target_ == 0) throw DataError("dataset: both domains must be non-empty");

    if (w_names_.empty())
        for (Index j = 0; j < w_.cols(); ++j) w_names_.push_back("w" + std::to_string(j + 1));
    if (z_names_.empty())
        for (Index j = 0; j < z_.cols(); ++j) z_names_.push_back("z" + std::to_string(j + 1));
    if (static_cast<Index>(w_names_.size()) != w_.cols() || static_cast<Index>(z_names_.size()) != z_.cols())
        throw DataError("dataset: column name count mismatch");

    wz_ = hcat(w_, z_);
}

std::vector<int> Dataset::rows_in_domain(int d) const {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(n()));
    for (Index i = 0; i < n(); ++i)
        if (domain_[i] == static_cast<double>(d)) out.push_back(static_cast<int>(i));
    return out;
}

Vec compute_loss(const Vec& predictions, const Vec& y, LossMode mode, double threshold) {
    if (predictions.size() != y.size()) throw DataError("compute_loss: length mismatch");
    if (!is_binary(y)) throw DataError("compute_loss: y must be binary {0,1}");
    if (mode == LossMode::zero_one_from_score && !(threshold > 0.0 && threshold < 1.0))
        throw DataError("compute_loss: threshold must be in (0,1)");

    Vec loss(y.size());
    for (Index i = 0; i < y.size(); ++i) {
        double label;
        if (mode == LossMode::zero_one_from_label) {
            if (predictions[i] != 0.0 && predictions[i] != 1.0)
                throw DataError("compute_loss: label-mode predictions must be {0,1}");
            label = predictions[i];
        } else {
            label = predictions[i] >= threshold ? 1.0 : 0.0;
        }
        loss[i] = (label != y[i]) ? 1.0 : 0.0;
    }
    return loss;
}

SplitPlan split(const Dataset& dataset, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw DataError("split: train_fraction must be in (0,1)");

    SplitPlan plan;
    plan.train_fraction = train_fraction;
    plan.seed = seed;
    Rng rng(derive_seed(seed, "split"));
    for (int d : {0, 1}) {
        std::vector<int> rows = dataset.rows_in_domain(d);
        if (rows.size() < 2) throw DataError("split: each domain needs at least 2 rows");
        rng.shuffle(rows);
        const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(rows.size())));
        // floor keeps at least one row on each side since 0 < fraction < 1
        const std::size_t k = std::max<std::size_t>(1, std::min(n_train, rows.size() - 1));
        plan.train_indices.insert(plan.train_indices.end(), rows.begin(), rows.begin() + static_cast<long>(k));
        plan.eval_indices.insert(plan.eval_indices.end(), rows.begin() + static_cast<long>(k), rows.end());
    }
    std::sort(plan.train_indices.begin(), plan.train_indices.end());
    std::sort(plan.eval_indices.begin(), plan.eval_indices.end());
    return plan;
}

}  // namespace shiftdecomp
