#include "shiftdecomp/report.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "shiftdecomp/covariate_value.hpp"
#include "shiftdecomp/csv.hpp"
#include "shiftdecomp/outcome_value.hpp"
#include "shiftdecomp/rng.hpp"

namespace shiftdecomp {

using json = nlohmann::ordered_json;

namespace {

json estimate_to_json(const std::string& name, const EstimateWithCI& e) {
    json j;
    j["name"] = name;
    j["point"] = e.point;
    j["se"] = e.se;
    j["ci_lo"] = e.ci_lo;
    j["ci_hi"] = e.ci_hi;
    j["alpha"] = e.alpha;
    j["n_eval"] = e.n_eval;
    if (e.degenerate) j["degenerate"] = true;
    return j;
}

EstimateWithCI estimate_from_json(const json& j) {
    EstimateWithCI e;
    e.point = j.value("point", 0.0);
    e.se = j.value("se", 0.0);
    e.ci_lo = j.value("ci_lo", 0.0);
    e.ci_hi = j.value("ci_hi", 0.0);
    e.alpha = j.value("alpha", 0.10);
    e.n_eval = j.value("n_eval", 0L);
    e.degenerate = j.value("degenerate", false);
    return e;
}

json subset_to_json(const SubsetValue& v) {
    json j;
    std::vector<int> one_based;
    for (int s : v.subset) one_based.push_back(s + 1);
    j["subset"] = one_based;
    j["num"] = v.num;
    j["den"] = v.den;
    j["undefined"] = v.undefined;
    j["value"] = estimate_to_json("value", v.value);
    j["warnings"] = v.warnings;
    return j;
}

SubsetValue subset_from_json(const json& j) {
    SubsetValue v;
    for (int s : j.value("subset", std::vector<int>{})) v.subset.push_back(s - 1);
    v.num = j.value("num", 0.0);
    v.den = j.value("den", 0.0);
    v.undefined = j.value("undefined", false);
    if (j.contains("value")) v.value = estimate_from_json(j.at("value"));
    v.warnings = j.value("warnings", std::vector<std::string>{});
    return v;
}

json detailed_to_json(const DetailedSection& d) {
    if (!d.present && d.error.empty()) return nullptr;
    json j;
    if (!d.error.empty()) {
        j["error"] = d.error;
        return j;
    }
    json phi = json::array();
    for (std::size_t k = 0; k < d.attribution.phi.size(); ++k) {
        const std::string name =
            k == 0 ? "empty_set"
                   : (k - 1 < d.variable_names.size() ? d.variable_names[k - 1]
                                                      : "z" + std::to_string(k));
        phi.push_back(estimate_to_json(name, d.attribution.phi[k]));
    }
    j["phi"] = phi;
    j["n_unique_subsets"] = d.attribution.n_unique_subsets;
    j["efficiency_residual"] = d.attribution.efficiency_residual;
    j["warnings"] = d.attribution.warnings;
    json vals = json::array();
    for (const auto& v : d.subset_values) vals.push_back(subset_to_json(v));
    j["subset_values"] = vals;
    return j;
}

DetailedSection detailed_from_json(const json& j, std::vector<std::string> names) {
    DetailedSection d;
    if (j.is_null()) return d;
    if (j.contains("error")) {
        d.error = j.at("error").get<std::string>();
        return d;
    }
    d.present = true;
    d.variable_names = std::move(names);
    for (const auto& p : j.value("phi", json::array())) d.attribution.phi.push_back(estimate_from_json(p));
    d.attribution.n_unique_subsets = j.value("n_unique_subsets", 0);
    d.attribution.efficiency_residual = j.value("efficiency_residual", 0.0);
    d.attribution.warnings = j.value("warnings", std::vector<std::string>{});
    for (const auto& v : j.value("subset_values", json::array())) d.subset_values.push_back(subset_from_json(v));
    return d;
}

LearnerConfig learner_from_json(const json& j) {
    LearnerConfig c;
    const std::string kind = j.value("kind", "logistic_poly");
    if (kind == "logistic_poly")
        c.kind = LearnerKind::logistic_poly;
    else if (kind == "ridge_linear")
        c.kind = LearnerKind::ridge_linear;
    else if (kind == "gbt")
        c.kind = LearnerKind::gbt;
    else
        throw ConfigError("config: unknown learner kind '" + kind + "'");
    c.degree = j.value("degree", c.degree);
    c.lambda = j.value("lambda", c.lambda);
    c.trees = j.value("trees", c.trees);
    c.depth = j.value("depth", c.depth);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    return c;
}

json learner_to_json(const LearnerConfig& c) {
    json j;
    switch (c.kind) {
        case LearnerKind::logistic_poly:
            j["kind"] = "logistic_poly";
            j["degree"] = c.degree;
            j["lambda"] = c.lambda;
            break;
        case LearnerKind::ridge_linear:
            j["kind"] = "ridge_linear";
            j["degree"] = c.degree;
            j["lambda"] = c.lambda;
            break;
        case LearnerKind::gbt:
            j["kind"] = "gbt";
            j["trees"] = c.trees;
            j["depth"] = c.depth;
            j["learning_rate"] = c.learning_rate;
            break;
    }
    return j;
}

}  // namespace

LearnerOptions RunConfig::learner_options() const {
    LearnerOptions opt;
    if (!classifier_grid.empty()) opt.classifier_grid = classifier_grid;
    if (!regressor_grid.empty()) opt.regressor_grid = regressor_grid;
    opt.folds = folds;
    opt.clip_lo = clip_lo;
    opt.clip_hi = clip_hi;
    opt.risk_bins = bins;
    opt.seed = seed;
    return opt;
}

RunConfig parse_config_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    RunConfig c;
    c.data_path = j.value("data", "");
    c.domain_col = j.value("domain_col", c.domain_col);
    c.source_path = j.value("source", "");
    c.target_path = j.value("target", "");
    c.w_cols = j.value("w_cols", std::vector<std::string>{});
    c.z_cols = j.value("z_cols", std::vector<std::string>{});
    c.y_col = j.value("y_col", c.y_col);
    c.loss_col = j.value("loss_col", "");
    c.pred_col = j.value("pred_col", "");
    c.pred_threshold = j.value("threshold", c.pred_threshold);
    c.pred_is_label = j.value("pred_is_label", c.pred_is_label);

    if (j.contains("targets")) {
        c.run_aggregate = c.run_detailed_covariate = c.run_detailed_outcome = false;
        for (const auto& t : j.at("targets")) {
            const std::string name = t.get<std::string>();
            if (name == "aggregate")
                c.run_aggregate = true;
            else if (name == "detailed_covariate")
                c.run_detailed_covariate = true;
            else if (name == "detailed_outcome")
                c.run_detailed_outcome = true;
            else
                throw ConfigError("config: unknown target '" + name + "'");
        }
    }

    c.alpha = j.value("alpha", c.alpha);
    c.bins = j.value("bins", c.bins);
    c.gamma = j.value("gamma", c.gamma);
    c.train_fraction = j.value("train_fraction", c.train_fraction);
    c.folds = j.value("folds", c.folds);
    c.inner_subsample = j.value("inner_subsample", c.inner_subsample);
    if (j.contains("clamp")) {
        c.clip_lo = j.at("clamp").at(0).get<double>();
        c.clip_hi = j.at("clamp").at(1).get<double>();
    }
    c.seed = j.value("seed", c.seed);
    c.crossfit_folds = j.value("crossfit_folds", c.crossfit_folds);
    c.threads = j.value("threads", c.threads);
    if (j.contains("learners")) {
        for (const auto& l : j.at("learners").value("classifiers", json::array()))
            c.classifier_grid.push_back(learner_from_json(l));
        for (const auto& l : j.at("learners").value("regressors", json::array()))
            c.regressor_grid.push_back(learner_from_json(l));
    }
    c.report_path = j.value("report", "");
    c.svg_path = j.value("svg", "");

    if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ConfigError("config: alpha must be in (0,1)");
    if (c.bins < 2) throw ConfigError("config: bins must be >= 2");
    if (!(c.gamma > 0.0)) throw ConfigError("config: gamma must be > 0");
    if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0))
        throw ConfigError("config: train_fraction must be in (0,1)");
    if (c.folds < 2) throw ConfigError("config: folds must be >= 2");
    if (c.inner_subsample < 1) throw ConfigError("config: inner_subsample must be >= 1");
    if (!(c.clip_lo > 0.0 && c.clip_lo < c.clip_hi && c.clip_hi < 1.0))
        throw ConfigError("config: clamp must satisfy 0 < lo < hi < 1");
    if (!c.run_aggregate && !c.run_detailed_covariate && !c.run_detailed_outcome)
        throw ConfigError("config: at least one decomposition target is required");
    return c;
}

std::string config_to_json(const RunConfig& c) {
    json j;
    if (!c.data_path.empty()) j["data"] = c.data_path;
    if (!c.source_path.empty()) j["source"] = c.source_path;
    if (!c.target_path.empty()) j["target"] = c.target_path;
    j["domain_col"] = c.domain_col;
    j["w_cols"] = c.w_cols;
    j["z_cols"] = c.z_cols;
    j["y_col"] = c.y_col;
    if (!c.loss_col.empty()) j["loss_col"] = c.loss_col;
    if (!c.pred_col.empty()) {
        j["pred_col"] = c.pred_col;
        j["threshold"] = c.pred_threshold;
        j["pred_is_label"] = c.pred_is_label;
    }
    std::vector<std::string> targets;
    if (c.run_aggregate) targets.push_back("aggregate");
    if (c.run_detailed_covariate) targets.push_back("detailed_covariate");
    if (c.run_detailed_outcome) targets.push_back("detailed_outcome");
    j["targets"] = targets;
    j["alpha"] = c.alpha;
    j["bins"] = c.bins;
    j["gamma"] = c.gamma;
    j["train_fraction"] = c.train_fraction;
    j["folds"] = c.folds;
    j["inner_subsample"] = c.inner_subsample;
    j["clamp"] = {c.clip_lo, c.clip_hi};
    j["seed"] = c.seed;
    j["crossfit_folds"] = c.crossfit_folds;
    j["threads"] = c.threads;
    if (!c.classifier_grid.empty() || !c.regressor_grid.empty()) {
        json grids;
        json cls = json::array(), reg = json::array();
        for (const auto& l : c.classifier_grid) cls.push_back(learner_to_json(l));
        for (const auto& l : c.regressor_grid) reg.push_back(learner_to_json(l));
        grids["classifiers"] = cls;
        grids["regressors"] = reg;
        j["learners"] = grids;
    }
    if (!c.report_path.empty()) j["report"] = c.report_path;
    if (!c.svg_path.empty()) j["svg"] = c.svg_path;
    return j.dump(2);
}

Dataset load_dataset(const RunConfig& c) {
    if (c.w_cols.empty() && c.z_cols.empty()) throw ConfigError("config: w_cols/z_cols are required");
    if (c.z_cols.empty()) throw ConfigError("config: at least one z column is required");
    if (c.loss_col.empty() == c.pred_col.empty())
        throw ConfigError("config: exactly one of loss_col / pred_col is required");

    std::vector<std::string> cols;
    Mat data;
    Vec domain;
    if (!c.data_path.empty()) {
        CsvTable t = read_csv(c.data_path);
        cols = t.columns;
        data = t.data;
        const int dj = t.column_index(c.domain_col);
        if (dj < 0) throw DataError("data: missing domain column '" + c.domain_col + "'");
        domain = t.data.col(dj);
    } else if (!c.source_path.empty() && !c.target_path.empty()) {
        CsvTable src = read_csv(c.source_path);
        CsvTable tgt = read_csv(c.target_path);
        if (src.columns != tgt.columns)
            throw DataError("data: source and target files must share the same header");
        cols = src.columns;
        data.resize(src.data.rows() + tgt.data.rows(), src.data.cols());
        data.topRows(src.data.rows()) = src.data;
        data.bottomRows(tgt.data.rows()) = tgt.data;
        domain = Vec::Zero(data.rows());
        domain.tail(tgt.data.rows()).setOnes();
    } else {
        throw ConfigError("config: provide either 'data' or both 'source' and 'target'");
    }

    auto col_of = [&](const std::string& name) {
        for (std::size_t j = 0; j < cols.size(); ++j)
            if (cols[j] == name) return static_cast<int>(j);
        throw DataError("data: missing column '" + name + "'");
    };

    Mat w(data.rows(), static_cast<Index>(c.w_cols.size()));
    for (std::size_t j = 0; j < c.w_cols.size(); ++j) w.col(static_cast<Index>(j)) = data.col(col_of(c.w_cols[j]));
    Mat z(data.rows(), static_cast<Index>(c.z_cols.size()));
    for (std::size_t j = 0; j < c.z_cols.size(); ++j) z.col(static_cast<Index>(j)) = data.col(col_of(c.z_cols[j]));
    Vec y = data.col(col_of(c.y_col));

    Vec loss;
    if (!c.loss_col.empty()) {
        loss = data.col(col_of(c.loss_col));
    } else {
        const Vec pred = data.col(col_of(c.pred_col));
        loss = compute_loss(pred, y,
                            c.pred_is_label ? LossMode::zero_one_from_label : LossMode::zero_one_from_score,
                            c.pred_threshold);
    }
    return Dataset(std::move(w), std::move(z), std::move(y), std::move(domain), std::move(loss),
                   c.w_cols, c.z_cols);
}

namespace {

// Evaluates subset values in a fixed order (optionally across threads) and
// solves the Shapley regression. Results merge by subset order, never by
// completion order.
template <typename Engine>
DetailedSection run_detailed(const Engine& engine, const SubsetSamplePlan& plan,
                             const std::vector<std::string>& names, double alpha, int threads) {
    DetailedSection section;
    const auto subsets = plan.unique_subsets();
    std::vector<SubsetValue> values(subsets.size());

    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    auto worker = [&]() {
        for (;;) {
            const std::size_t u = next.fetch_add(1);
            if (u >= subsets.size()) return;
            try {
                values[u] = engine.value(subsets[u]);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    const int n_threads = std::max(1, std::min<int>(threads, static_cast<int>(subsets.size())));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (error) std::rethrow_exception(error);

    section.attribution = solve_shapley(values, plan, alpha);
    section.present = true;
    section.variable_names = names;
    section.subset_values = std::move(values);
    for (auto& v : section.subset_values) v.influence = Vec();  // not serialized
    return section;
}

}  // namespace

DecompositionReport run_on_dataset(const RunConfig& c, const Dataset& ds) {
    DecompositionReport report;
    report.seed = c.seed;
    report.alpha = c.alpha;
    report.n_source = ds.n_source();
    report.n_target = ds.n_target();

    SplitPlan plan = split(ds, c.train_fraction, c.seed);
    report.n_eval = static_cast<long>(plan.eval_indices.size());
    LearnerOptions opt = c.learner_options();

    if (c.run_aggregate) {
        if (c.crossfit_folds >= 2) {
            report.aggregate = estimate_aggregate_crossfit(ds, c.crossfit_folds, opt, c.alpha);
        } else {
            AggregateNuisances nu = fit_aggregate_nuisances(ds, plan, opt);
            report.selected_learners = nu.selected;
            report.aggregate = estimate_aggregate(ds, plan, nu, c.alpha);
        }
        report.has_aggregate = true;
        for (const auto& w : report.aggregate.warnings) report.warnings.push_back("aggregate: " + w);
    }

    if (c.run_detailed_covariate || c.run_detailed_outcome) {
        const SubsetSamplePlan subset_plan =
            sample_subsets(static_cast<int>(ds.m2()), c.gamma,
                           static_cast<long>(plan.eval_indices.size()), derive_seed(c.seed, "subsets"));
        if (c.run_detailed_covariate) {
            try {
                CovariateValueEngine engine(ds, plan, opt, c.alpha);
                report.detailed_covariate =
                    run_detailed(engine, subset_plan, ds.z_names(), c.alpha, c.threads);
            } catch (const std::exception& e) {
                report.detailed_covariate.error = std::string("detailed_covariate: ") + e.what();
                report.warnings.push_back(report.detailed_covariate.error +
                                          " (section omitted; rerun with more data or larger gamma)");
            }
        }
        if (c.run_detailed_outcome) {
            try {
                OutcomeValueEngine engine(ds, plan, opt, c.alpha, c.inner_subsample);
                report.detailed_outcome =
                    run_detailed(engine, subset_plan, ds.z_names(), c.alpha, c.threads);
            } catch (const std::exception& e) {
                report.detailed_outcome.error = std::string("detailed_outcome: ") + e.what();
                report.warnings.push_back(report.detailed_outcome.error +
                                          " (section omitted; rerun with more data or larger gamma)");
            }
        }
    }
    return report;
}

DecompositionReport run(const RunConfig& c) {
    Dataset ds = load_dataset(c);
    return run_on_dataset(c, ds);
}

std::string report_to_json(const DecompositionReport& r) {
    json j;
    j["schema_version"] = r.schema_version;
    json meta;
    meta["n_source"] = r.n_source;
    meta["n_target"] = r.n_target;
    meta["n_eval"] = r.n_eval;
    meta["seed"] = r.seed;
    meta["alpha"] = r.alpha;
    meta["selected_learners"] = r.selected_learners;
    meta["warnings"] = r.warnings;
    j["metadata"] = meta;
    if (r.has_aggregate) {
        json agg;
        agg["baseline"] = estimate_to_json("baseline", r.aggregate.baseline);
        agg["covariate"] = estimate_to_json("covariate", r.aggregate.covariate);
        agg["outcome"] = estimate_to_json("outcome", r.aggregate.outcome);
        agg["total"] = estimate_to_json("total", r.aggregate.total);
        j["aggregate"] = agg;
    } else {
        j["aggregate"] = nullptr;
    }
    j["detailed_covariate"] = detailed_to_json(r.detailed_covariate);
    j["detailed_outcome"] = detailed_to_json(r.detailed_outcome);
    return j.dump(2) + "\n";
}

DecompositionReport report_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        throw DataError(std::string("report: invalid JSON: ") + e.what());
    }
    DecompositionReport r;
    r.schema_version = j.value("schema_version", 1);
    const json meta = j.value("metadata", json::object());
    r.n_source = meta.value("n_source", 0L);
    r.n_target = meta.value("n_target", 0L);
    r.n_eval = meta.value("n_eval", 0L);
    r.seed = meta.value("seed", 0ULL);
    r.alpha = meta.value("alpha", 0.10);
    r.selected_learners = meta.value("selected_learners", std::vector<std::string>{});
    r.warnings = meta.value("warnings", std::vector<std::string>{});
    if (j.contains("aggregate") && !j.at("aggregate").is_null()) {
        r.has_aggregate = true;
        const json& agg = j.at("aggregate");
        r.aggregate.baseline = estimate_from_json(agg.at("baseline"));
        r.aggregate.covariate = estimate_from_json(agg.at("covariate"));
        r.aggregate.outcome = estimate_from_json(agg.at("outcome"));
        r.aggregate.total = estimate_from_json(agg.at("total"));
    }
    auto names_from = [&](const json& section) {
        std::vector<std::string> names;
        if (section.is_object())
            for (const auto& p : section.value("phi", json::array())) {
                const std::string n = p.value("name", "");
                if (n != "empty_set") names.push_back(n);
            }
        return names;
    };
    if (j.contains("detailed_covariate"))
        r.detailed_covariate =
            detailed_from_json(j.at("detailed_covariate"), names_from(j.at("detailed_covariate")));
    if (j.contains("detailed_outcome"))
        r.detailed_outcome =
            detailed_from_json(j.at("detailed_outcome"), names_from(j.at("detailed_outcome")));
    return r;
}

}  // namespace shiftdecomp
