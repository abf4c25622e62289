#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "shiftdecomp/common.hpp"

namespace shiftdecomp {

// Two-domain sample with a baseline block W, conditional-covariate block Z,
// binary outcome, domain flag (0 = source, 1 = target), and a per-row loss of
// the fixed prediction model under analysis. Immutable after construction.
class Dataset {
public:
    Dataset(Mat w, Mat z, Vec y, Vec domain, Vec loss,
            std::vector<std::string> w_names = {}, std::vector<std::string> z_names = {});

    const Mat& w() const { return w_; }
    const Mat& z() const { return z_; }
    const Mat& wz() const { return wz_; }
    const Vec& y() const { return y_; }
    const Vec& domain() const { return domain_; }
    const Vec& loss() const { return loss_; }
    const std::vector<std::string>& w_names() const { return w_names_; }
    const std::vector<std::string>& z_names() const { return z_names_; }

    Index n() const { return y_.size(); }
    Index m1() const { return w_.cols(); }
    Index m2() const { return z_.cols(); }
    long n_source() const { return n_source_; }
    long n_target() const { return n_target_; }

    bool is_source(Index i) const { return domain_[i] == 0.0; }

    std::vector<int> rows_in_domain(int d) const;

private:
    Mat w_, z_, wz_;
    Vec y_, domain_, loss_;
    std::vector<std::string> w_names_, z_names_;
    long n_source_ = 0, n_target_ = 0;
};

// Disjoint train/evaluation split, stratified by domain.
struct SplitPlan {
    std::vector<int> train_indices;
    std::vector<int> eval_indices;
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
};

enum class LossMode { zero_one_from_label, zero_one_from_score };

// 0-1 loss from predicted labels, or from scores thresholded at t.
Vec compute_loss(const Vec& predictions, const Vec& y, LossMode mode, double threshold = 0.5);

// Per-domain shuffled split taking floor(train_fraction * n_d) training rows.
SplitPlan split(const Dataset& dataset, double train_fraction, std::uint64_t seed);

}  // namespace shiftdecomp
