#include "shiftdecomp/learners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "shiftdecomp/rng.hpp"

namespace shiftdecomp {

namespace {

constexpr double kProbFloor = 1e-9;

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

Vec clamp_probs(Vec p, double lo, double hi) {
    for (Index i = 0; i < p.size(); ++i) p[i] = std::min(hi, std::max(lo, p[i]));
    return p;
}

bool target_is_binary(const Vec& y) {
    return std::all_of(y.data(), y.data() + y.size(), [](double v) { return v == 0.0 || v == 1.0; });
}

// ---------------------------------------------------------------------------
// Feature pipeline: standardize then expand to all monomials of total degree
// <= d (no constant term; the models carry their own intercept).
// ---------------------------------------------------------------------------

struct Standardizer {
    Vec mean, scale;

    static Standardizer fit(const Mat& X) {
        Standardizer s;
        s.mean = X.colwise().mean();
        s.scale.resize(X.cols());
        const double n = static_cast<double>(X.rows());
        for (Index j = 0; j < X.cols(); ++j) {
            const double var = (X.col(j).array() - s.mean[j]).square().sum() / std::max(1.0, n - 1.0);
            s.scale[j] = var > 1e-24 ? std::sqrt(var) : 1.0;
        }
        return s;
    }

    Mat apply(const Mat& X) const {
        Mat out = X;
        for (Index j = 0; j < X.cols(); ++j) out.col(j) = (X.col(j).array() - mean[j]) / scale[j];
        return out;
    }
};

std::vector<std::vector<int>> monomial_exponents(int p, int degree) {
    std::vector<std::vector<int>> out;
    std::vector<int> current(static_cast<std::size_t>(p), 0);
    // Enumerate exponent vectors with 1 <= total degree <= degree.
    auto rec = [&](auto&& self, int pos, int remaining) -> void {
        if (pos == p) {
            if (remaining < degree) out.push_back(current);
            return;
        }
        for (int e = 0; e <= degree - remaining; ++e) {
            current[static_cast<std::size_t>(pos)] = e;
            self(self, pos + 1, remaining + e);
        }
        current[static_cast<std::size_t>(pos)] = 0;
    };
    rec(rec, 0, 0);
    // Drop the all-zero vector.
    out.erase(std::remove_if(out.begin(), out.end(),
                             [](const std::vector<int>& e) {
                                 return std::all_of(e.begin(), e.end(), [](int v) { return v == 0; });
                             }),
              out.end());
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        int da = std::accumulate(a.begin(), a.end(), 0), db = std::accumulate(b.begin(), b.end(), 0);
        if (da != db) return da < db;
        return a > b;  // lexicographic within a degree, first feature first
    });
    return out;
}

Mat expand_monomials(const Mat& X, const std::vector<std::vector<int>>& exps) {
    Mat out(X.rows(), static_cast<Index>(exps.size()));
    for (std::size_t t = 0; t < exps.size(); ++t) {
        Vec col = Vec::Ones(X.rows());
        for (std::size_t j = 0; j < exps[t].size(); ++j)
            for (int e = 0; e < exps[t][j]; ++e) col.array() *= X.col(static_cast<Index>(j)).array();
        out.col(static_cast<Index>(t)) = col;
    }
    return out;
}

struct PolyPipeline {
    Standardizer std;
    std::vector<std::vector<int>> exps;

    static PolyPipeline fit(const Mat& X, int degree) {
        PolyPipeline p;
        p.std = Standardizer::fit(X);
        p.exps = monomial_exponents(static_cast<int>(X.cols()), degree);
        return p;
    }
    Mat transform(const Mat& X) const { return expand_monomials(std.apply(X), exps); }
};

// ---------------------------------------------------------------------------
// Ridge-penalized logistic regression (IRLS) on polynomial features.
// ---------------------------------------------------------------------------

class LogisticPolyModel : public LinearCoefModel {
public:
    LogisticPolyModel(PolyPipeline pipe, Vec beta, double intercept, int degree)
        : pipe_(std::move(pipe)), beta_(std::move(beta)), intercept_(intercept), degree_(degree) {}

    Vec predict(const Mat& X) const override {
        Vec t = (pipe_.transform(X) * beta_).array() + intercept_;
        Vec p(t.size());
        for (Index i = 0; i < t.size(); ++i) p[i] = sigmoid(t[i]);
        return clamp_probs(std::move(p), kProbFloor, 1.0 - kProbFloor);
    }

    // Coefficients on the original (unstandardized) scale; degree-1 only.
    Vec raw_coefficients() const override {
        if (degree_ != 1) throw std::logic_error("raw_coefficients: degree-1 models only");
        Vec out(beta_.size() + 1);
        double b0 = intercept_;
        for (Index j = 0; j < beta_.size(); ++j) {
            out[j + 1] = beta_[j] / pipe_.std.scale[j];
            b0 -= beta_[j] * pipe_.std.mean[j] / pipe_.std.scale[j];
        }
        out[0] = b0;
        return out;
    }

private:
    PolyPipeline pipe_;
    Vec beta_;
    double intercept_;
    int degree_;
};

ModelPtr fit_logistic_poly(const Mat& X, const Vec& y, int degree, double lambda) {
    PolyPipeline pipe = PolyPipeline::fit(X, degree);
    Mat Phi = pipe.transform(X);
    const Index n = Phi.rows(), p = Phi.cols();

    Vec beta = Vec::Zero(p);
    double intercept = 0.0;
    {
        const double ybar = std::min(1.0 - 1e-6, std::max(1e-6, y.mean()));
        intercept = std::log(ybar / (1.0 - ybar));
    }
    // Newton iterations on the penalized log-likelihood; the penalty
    // 0.5*lambda*|beta|^2 excludes the intercept.
    Vec eta(n), mu(n), w(n);
    for (int iter = 0; iter < 60; ++iter) {
        eta = (Phi * beta).array() + intercept;
        for (Index i = 0; i < n; ++i) {
            mu[i] = sigmoid(eta[i]);
            w[i] = std::max(1e-10, mu[i] * (1.0 - mu[i]));
        }
        Vec resid = y - mu;
        Mat H(p + 1, p + 1);
        Vec g(p + 1);
        Mat PhiW = Phi.array().colwise() * w.array();
        H.topLeftCorner(p, p) = Phi.transpose() * PhiW;
        H.topLeftCorner(p, p).diagonal().array() += lambda;
        H.block(0, p, p, 1) = Phi.transpose() * w;
        H.block(p, 0, 1, p) = H.block(0, p, p, 1).transpose();
        H(p, p) = w.sum();
        g.head(p) = Phi.transpose() * resid - lambda * beta;
        g[p] = resid.sum();

        Vec step = H.ldlt().solve(g);
        if (!step.allFinite()) break;
        // Damp huge steps to keep IRLS stable on separable data.
        const double norm = step.norm();
        if (norm > 25.0) step *= 25.0 / norm;
        beta += step.head(p);
        intercept += step[p];
        if (step.lpNorm<Eigen::Infinity>() < 1e-9) break;
    }
    return std::make_shared<LogisticPolyModel>(std::move(pipe), std::move(beta), intercept, degree);
}

// ---------------------------------------------------------------------------
// Ridge regression on polynomial features.
// ---------------------------------------------------------------------------

class RidgePolyModel : public Model {
public:
    RidgePolyModel(PolyPipeline pipe, Vec beta, double intercept)
        : pipe_(std::move(pipe)), beta_(std::move(beta)), intercept_(intercept) {}

    Vec predict(const Mat& X) const override {
        return (pipe_.transform(X) * beta_).array() + intercept_;
    }

private:
    PolyPipeline pipe_;
    Vec beta_;
    double intercept_;
};

ModelPtr fit_ridge_poly(const Mat& X, const Vec& y, int degree, double lambda) {
    PolyPipeline pipe = PolyPipeline::fit(X, degree);
    Mat Phi = pipe.transform(X);
    const double ybar = y.mean();
    Vec yc = y.array() - ybar;
    Vec phibar = Phi.colwise().mean();
    Mat Phic = Phi.rowwise() - phibar.transpose();

    Mat A = Phic.transpose() * Phic;
    A.diagonal().array() += lambda;
    Vec beta = A.ldlt().solve(Phic.transpose() * yc);
    const double intercept = ybar - beta.dot(phibar);
    return std::make_shared<RidgePolyModel>(std::move(pipe), std::move(beta), intercept);
}

// ---------------------------------------------------------------------------
// Gradient-boosted shallow regression trees (exact greedy splits, presorted
// feature order, deterministic tie-breaking by feature index then threshold).
// ---------------------------------------------------------------------------

struct TreeNode {
    int feature = -1;          // -1 marks a leaf
    double threshold = 0.0;    // go left if x <= threshold
    int left = -1, right = -1;
    double value = 0.0;
};

struct Tree {
    std::vector<TreeNode> nodes;

    double eval(const double* row) const {
        int k = 0;
        while (nodes[static_cast<std::size_t>(k)].feature >= 0) {
            const TreeNode& nd = nodes[static_cast<std::size_t>(k)];
            k = (row[nd.feature] <= nd.threshold) ? nd.left : nd.right;
        }
        return nodes[static_cast<std::size_t>(k)].value;
    }
};

constexpr int kMinLeaf = 10;

class TreeBuilder {
public:
    TreeBuilder(const Mat& X, const std::vector<std::vector<int>>& sorted_idx)
        : X_(X), sorted_idx_(sorted_idx), in_node_(static_cast<std::size_t>(X.rows()), 0) {}

    // Fits a depth-limited regression tree to (gradient, hessian) pairs with
    // leaf value = sum(g)/sum(h); plain squared loss uses h = 1.
    Tree fit(const Vec& grad, const Vec& hess, int max_depth) {
        Tree tree;
        std::vector<int> all(static_cast<std::size_t>(X_.rows()));
        std::iota(all.begin(), all.end(), 0);
        build(tree, all, grad, hess, max_depth);
        return tree;
    }

private:
    int build(Tree& tree, const std::vector<int>& rows, const Vec& grad, const Vec& hess, int depth) {
        double gsum = 0.0, hsum = 0.0;
        for (int r : rows) {
            gsum += grad[r];
            hsum += hess[r];
        }
        const int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes.back().value = gsum / std::max(1e-12, hsum);

        if (depth == 0 || static_cast<int>(rows.size()) < 2 * kMinLeaf) return node_id;

        int best_feature = -1;
        double best_gain = 1e-12, best_threshold = 0.0;
        ++epoch_;
        for (int r : rows) in_node_[static_cast<std::size_t>(r)] = epoch_;

        const double parent_score = gsum * gsum / std::max(1e-12, hsum);
        for (Index f = 0; f < X_.cols(); ++f) {
            double gl = 0.0, hl = 0.0;
            int count_left = 0;
            double prev_value = 0.0;
            bool have_prev = false;
            for (int r : sorted_idx_[static_cast<std::size_t>(f)]) {
                if (in_node_[static_cast<std::size_t>(r)] != epoch_) continue;
                const double xv = X_(r, f);
                if (have_prev && xv > prev_value && count_left >= kMinLeaf &&
                    static_cast<int>(rows.size()) - count_left >= kMinLeaf) {
                    const double gr = gsum - gl, hr = hsum - hl;
                    const double gain =
                        gl * gl / std::max(1e-12, hl) + gr * gr / std::max(1e-12, hr) - parent_score;
                    if (gain > best_gain + 1e-15) {
                        best_gain = gain;
                        best_feature = static_cast<int>(f);
                        best_threshold = 0.5 * (prev_value + xv);
                    }
                }
                gl += grad[r];
                hl += hess[r];
                ++count_left;
                prev_value = xv;
                have_prev = true;
            }
        }
        if (best_feature < 0) return node_id;

        std::vector<int> left, right;
        left.reserve(rows.size());
        right.reserve(rows.size());
        for (int r : rows)
            (X_(r, best_feature) <= best_threshold ? left : right).push_back(r);
        tree.nodes[static_cast<std::size_t>(node_id)].feature = best_feature;
        tree.nodes[static_cast<std::size_t>(node_id)].threshold = best_threshold;
        const int l = build(tree, left, grad, hess, depth - 1);
        const int r = build(tree, right, grad, hess, depth - 1);
        tree.nodes[static_cast<std::size_t>(node_id)].left = l;
        tree.nodes[static_cast<std::size_t>(node_id)].right = r;
        return node_id;
    }

    const Mat& X_;
    const std::vector<std::vector<int>>& sorted_idx_;
    std::vector<std::uint32_t> in_node_;
    std::uint32_t epoch_ = 0;
};

class GbtModel : public Model {
public:
    GbtModel(std::vector<Tree> trees, double base, double lr, bool logistic)
        : trees_(std::move(trees)), base_(base), lr_(lr), logistic_(logistic) {}

    Vec predict(const Mat& X) const override {
        Vec out(X.rows());
        // Row-major copy so tree traversal touches contiguous memory.
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> R = X;
        for (Index i = 0; i < X.rows(); ++i) {
            double score = base_;
            const double* row = R.data() + i * R.cols();
            for (const Tree& t : trees_) score += lr_ * t.eval(row);
            out[i] = logistic_ ? std::min(1.0 - kProbFloor, std::max(kProbFloor, sigmoid(score))) : score;
        }
        return out;
    }

private:
    std::vector<Tree> trees_;
    double base_;
    double lr_;
    bool logistic_;
};

ModelPtr fit_gbt(const Mat& X, const Vec& y, const LearnerConfig& cfg, Task task) {
    const Index n = X.rows();
    std::vector<std::vector<int>> sorted_idx(static_cast<std::size_t>(X.cols()));
    for (Index f = 0; f < X.cols(); ++f) {
        auto& idx = sorted_idx[static_cast<std::size_t>(f)];
        idx.resize(static_cast<std::size_t>(n));
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return X(a, f) < X(b, f); });
    }
    TreeBuilder builder(X, sorted_idx);

    std::vector<Tree> trees;
    trees.reserve(static_cast<std::size_t>(cfg.trees));
    if (task == Task::classification) {
        const double ybar = std::min(1.0 - 1e-6, std::max(1e-6, y.mean()));
        const double base = std::log(ybar / (1.0 - ybar));
        Vec score = Vec::Constant(n, base);
        Vec grad(n), hess(n);
        for (int t = 0; t < cfg.trees; ++t) {
            for (Index i = 0; i < n; ++i) {
                const double p = sigmoid(score[i]);
                grad[i] = y[i] - p;
                hess[i] = std::max(1e-6, p * (1.0 - p));
            }
            Tree tree = builder.fit(grad, hess, cfg.depth);
            trees.push_back(tree);
            Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> R = X;
            for (Index i = 0; i < n; ++i)
                score[i] += cfg.learning_rate * tree.eval(R.data() + i * R.cols());
        }
        return std::make_shared<GbtModel>(std::move(trees), base, cfg.learning_rate, true);
    }

    const double base = y.mean();
    Vec score = Vec::Constant(n, base);
    Vec hess = Vec::Ones(n);
    Vec grad(n);
    for (int t = 0; t < cfg.trees; ++t) {
        grad = y - score;
        Tree tree = builder.fit(grad, hess, cfg.depth);
        trees.push_back(tree);
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> R = X;
        for (Index i = 0; i < n; ++i)
            score[i] += cfg.learning_rate * tree.eval(R.data() + i * R.cols());
    }
    return std::make_shared<GbtModel>(std::move(trees), base, cfg.learning_rate, false);
}

double heldout_score(const ModelPtr& model, const Mat& X, const Vec& y, Task task) {
    Vec pred = model->predict(X);
    if (task == Task::classification) {
        double s = 0.0;
        for (Index i = 0; i < y.size(); ++i) {
            const double p = std::min(1.0 - 1e-12, std::max(1e-12, pred[i]));
            s -= y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p);
        }
        return s / static_cast<double>(y.size());
    }
    return (pred - y).squaredNorm() / static_cast<double>(y.size());
}

}  // namespace

std::string LearnerConfig::name() const {
    std::ostringstream os;
    switch (kind) {
        case LearnerKind::logistic_poly:
            os << "logistic_poly(d=" << degree << ",lambda=" << lambda << ")";
            break;
        case LearnerKind::ridge_linear:
            os << "ridge_linear(d=" << degree << ",lambda=" << lambda << ")";
            break;
        case LearnerKind::gbt:
            os << "gbt(trees=" << trees << ",depth=" << depth << ",lr=" << learning_rate << ")";
            break;
    }
    return os.str();
}

bool LearnerConfig::supports(Task task) const {
    if (kind == LearnerKind::logistic_poly) return task == Task::classification;
    if (kind == LearnerKind::ridge_linear) return task == Task::regression;
    return true;
}

std::vector<LearnerConfig> default_classifier_grid() {
    std::vector<LearnerConfig> out;
    for (int d : {1, 2, 3})
        for (double lam : {0.01, 0.1, 1.0})
            out.push_back({LearnerKind::logistic_poly, d, lam});
    for (int trees : {50, 200})
        for (int depth : {1, 2, 3}) {
            LearnerConfig c;
            c.kind = LearnerKind::gbt;
            c.trees = trees;
            c.depth = depth;
            out.push_back(c);
        }
    return out;
}

std::vector<LearnerConfig> default_regressor_grid() {
    std::vector<LearnerConfig> out;
    for (int d : {1, 2, 3})
        for (double lam : {0.01, 0.1, 1.0})
            out.push_back({LearnerKind::ridge_linear, d, lam});
    for (int trees : {50, 200})
        for (int depth : {1, 2, 3}) {
            LearnerConfig c;
            c.kind = LearnerKind::gbt;
            c.trees = trees;
            c.depth = depth;
            out.push_back(c);
        }
    return out;
}

ModelPtr fit_one(const LearnerConfig& config, const Mat& X, const Vec& y, Task task) {
    if (task == Task::classification && !target_is_binary(y))
        throw DataError("fit_one: classification targets must be binary");
    switch (config.kind) {
        case LearnerKind::logistic_poly:
            return fit_logistic_poly(X, y, config.degree, config.lambda);
        case LearnerKind::ridge_linear:
            return fit_ridge_poly(X, y, config.degree, config.lambda);
        case LearnerKind::gbt:
            return fit_gbt(X, y, config, task);
    }
    throw std::logic_error("fit_one: unknown learner kind");
}

FitResult fit_cv(const std::vector<LearnerConfig>& candidates, const Mat& X, const Vec& y,
                 int folds, std::uint64_t seed, Task task) {
    if (X.rows() != y.size()) throw DataError("fit_cv: feature/target length mismatch");
    if (folds < 2) throw ConfigError("fit_cv: folds must be >= 2");
    if (y.size() < folds) throw DataError("fit_cv: need at least `folds` rows");

    FitResult result;
    const double ymin = y.minCoeff(), ymax = y.maxCoeff();
    if (ymin == ymax) {
        double value = ymin;
        if (task == Task::classification) value = std::min(1.0 - kProbFloor, std::max(kProbFloor, value));
        result.model = std::make_shared<ConstantModel>(value);
        result.constant_target = true;
        result.selected = LearnerConfig{};
        return result;
    }

    std::vector<LearnerConfig> usable;
    for (const auto& c : candidates)
        if (c.supports(task)) usable.push_back(c);
    if (usable.empty()) throw ConfigError("fit_cv: no candidate supports this task");

    if (usable.size() == 1) {
        result.model = fit_one(usable[0], X, y, task);
        result.selected = usable[0];
        return result;
    }

    // Deterministic shuffled fold assignment.
    std::vector<int> order(static_cast<std::size_t>(y.size()));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, "cv_folds"));
    rng.shuffle(order);
    std::vector<int> fold_of(static_cast<std::size_t>(y.size()));
    for (std::size_t i = 0; i < order.size(); ++i)
        fold_of[static_cast<std::size_t>(order[i])] = static_cast<int>(i % static_cast<std::size_t>(folds));

    double best_score = std::numeric_limits<double>::infinity();
    std::size_t best_idx = 0;
    for (std::size_t c = 0; c < usable.size(); ++c) {
        double total = 0.0;
        long total_rows = 0;
        bool failed = false;
        for (int k = 0; k < folds; ++k) {
            std::vector<int> tr, ho;
            for (Index i = 0; i < y.size(); ++i)
                (fold_of[static_cast<std::size_t>(i)] == k ? ho : tr).push_back(static_cast<int>(i));
            if (tr.empty() || ho.empty()) continue;
            Vec ytr = take(y, tr);
            if (task == Task::classification && (ytr.minCoeff() == ytr.maxCoeff())) continue;
            ModelPtr m;
            try {
                m = fit_one(usable[c], take_rows(X, tr), ytr, task);
            } catch (const std::exception&) {
                failed = true;
                break;
            }
            total += heldout_score(m, take_rows(X, ho), take(y, ho), task) * static_cast<double>(ho.size());
            total_rows += static_cast<long>(ho.size());
        }
        if (failed || total_rows == 0) continue;
        const double score = total / static_cast<double>(total_rows);
        if (score < best_score) {
            best_score = score;
            best_idx = c;
        }
    }
    if (!std::isfinite(best_score)) throw EstimationError("fit_cv: every candidate failed to fit");

    result.model = fit_one(usable[best_idx], X, y, task);
    result.selected = usable[best_idx];
    result.cv_score = best_score;
    return result;
}

Vec DensityRatioModel::ratio(const Mat& X) const {
    if (!classifier_) throw EstimationError("density ratio: model not fitted");
    Vec p = classifier_->predict(X);
    Vec out(p.size());
    for (Index i = 0; i < p.size(); ++i) {
        const double pc = std::min(hi_, std::max(lo_, p[i]));
        if (pc != p[i]) ++clamped_count;
        out[i] = prior_ * pc / (1.0 - pc);
    }
    eval_count += p.size();
    return out;
}

DensityRatioModel fit_density_ratio(const Mat& numerator_X, const Mat& denominator_X,
                                    const std::vector<LearnerConfig>& candidates, int folds,
                                    std::uint64_t seed, double clip_lo, double clip_hi) {
    if (numerator_X.rows() == 0 || denominator_X.rows() == 0)
        throw DataError("fit_density_ratio: both samples must be non-empty");
    if (numerator_X.cols() != denominator_X.cols())
        throw DataError("fit_density_ratio: feature width mismatch");

    const Index n_num = numerator_X.rows(), n_den = denominator_X.rows();
    Mat X(n_num + n_den, numerator_X.cols());
    X.topRows(n_num) = numerator_X;
    X.bottomRows(n_den) = denominator_X;
    Vec label(n_num + n_den);
    label.head(n_num).setOnes();
    label.tail(n_den).setZero();

    FitResult fit = fit_cv(candidates, X, label, folds, seed, Task::classification);
    const double prior = static_cast<double>(n_den) / static_cast<double>(n_num);
    return DensityRatioModel(fit.model, prior, clip_lo, clip_hi);
}

Vec bin_risk(const Vec& q_values, int bins) {
    if (bins < 2) throw ConfigError("bin_risk: B must be >= 2");
    Vec out(q_values.size());
    const double B = static_cast<double>(bins);
    for (Index i = 0; i < q_values.size(); ++i) {
        const double q = q_values[i];
        if (q < 0.0 || q > 1.0) throw DataError("bin_risk: inputs must lie in [0,1]");
        out[i] = std::floor(q * B + 0.5) / B;
    }
    return out;
}

}  // namespace shiftdecomp
