#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "shiftdecomp/csv.hpp"
#include "shiftdecomp/report.hpp"
#include "shiftdecomp/simgen.hpp"
#include "shiftdecomp/svg.hpp"

namespace sd = shiftdecomp;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitEstimation = 4;
constexpr int kExitInternal = 5;

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw sd::ConfigError("cannot open '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw sd::DataError("cannot write '" + path + "'");
    out << text;
}

sd::DgpSpec spec_from_flags(const std::string& dgp, long n_source, long n_target,
                            std::uint64_t seed) {
    sd::DgpSpec spec;
    if (dgp == "gaussian_logistic")
        spec = sd::coverage_dgp(n_source, seed);
    else if (dgp == "uniform_logistic")
        spec = sd::outcome_ranking_dgp(n_source, seed);
    else if (dgp == "covariate_mixture")
        spec = sd::covariate_ranking_dgp(n_source, seed);
    else
        throw sd::ConfigError("unknown dgp '" + dgp + "'");
    spec.n_source = n_source;
    spec.n_target = n_target > 0 ? n_target : n_source;
    return spec;
}

int run_decompose(const std::string& config_path, const json& flag_overrides) {
    json merged;
    if (!config_path.empty()) {
        merged = json::parse(read_file(config_path));
        // The config file wins over command-line flags.
        json base = flag_overrides;
        base.update(merged);
        merged = base;
    } else {
        merged = flag_overrides;
    }
    sd::RunConfig config = sd::parse_config_json(merged.dump());
    sd::DecompositionReport report = sd::run(config);
    const std::string text = sd::report_to_json(report);
    if (config.report_path.empty())
        std::cout << text;
    else
        write_file(config.report_path, text);
    if (!config.svg_path.empty())
        write_file(config.svg_path, sd::render_svg(report, sd::SvgPanel::aggregate));

    // A failed detailed stage leaves a null section; surface it in the exit code.
    if (!report.detailed_covariate.error.empty() || !report.detailed_outcome.error.empty()) {
        std::cerr << "estimation incomplete:";
        if (!report.detailed_covariate.error.empty())
            std::cerr << " " << report.detailed_covariate.error;
        if (!report.detailed_outcome.error.empty()) std::cerr << " " << report.detailed_outcome.error;
        std::cerr << "\n";
        return kExitEstimation;
    }
    return 0;
}

int run_simulate(const std::string& dgp, long n_source, long n_target, std::uint64_t seed,
                 const std::string& out) {
    sd::DgpSpec spec = spec_from_flags(dgp, n_source, n_target, seed);
    sd::Dataset ds = sd::generate(spec);

    std::vector<std::string> cols;
    for (const auto& n : ds.w_names()) cols.push_back(n);
    for (const auto& n : ds.z_names()) cols.push_back(n);
    cols.push_back("y");
    cols.push_back("domain");
    cols.push_back("loss");
    sd::Mat data(ds.n(), static_cast<sd::Index>(cols.size()));
    data.leftCols(ds.m1()) = ds.w();
    data.block(0, ds.m1(), ds.n(), ds.m2()) = ds.z();
    data.col(ds.m1() + ds.m2()) = ds.y();
    data.col(ds.m1() + ds.m2() + 1) = ds.domain();
    data.col(ds.m1() + ds.m2() + 2) = ds.loss();
    sd::write_csv(out, cols, data);
    std::cerr << "wrote " << ds.n() << " rows to " << out << "\n";
    return 0;
}

int run_coverage(const std::string& dgp, long n, int reps, const std::string& estimator,
                 const std::vector<std::string>& targets, double alpha, std::uint64_t seed,
                 int threads, int inner_subsample, const std::string& out_csv,
                 const std::string& out_json, const std::string& grid) {
    sd::CoverageRequest req;
    req.spec = spec_from_flags(dgp, n, n, seed);
    req.estimator =
        estimator == "plugin" ? sd::EstimatorKind::plugin : sd::EstimatorKind::debiased;
    req.reps = reps;
    req.alpha = alpha;
    req.seed = seed;
    req.threads = threads;
    req.inner_subsample = inner_subsample;
    req.aggregate = false;
    for (const auto& t : targets) {
        if (t == "aggregate") {
            req.aggregate = true;
            continue;
        }
        const bool cov = t.rfind("v_z:", 0) == 0, outc = t.rfind("v_y:", 0) == 0;
        if (!cov && !outc) throw sd::ConfigError("unknown coverage target '" + t + "'");
        std::vector<int> subset;
        std::stringstream ss(t.substr(4));
        std::string tok;
        while (std::getline(ss, tok, ',')) subset.push_back(std::stoi(tok) - 1);
        (cov ? req.covariate_subsets : req.outcome_subsets).push_back(subset);
    }
    if (!req.aggregate && req.covariate_subsets.empty() && req.outcome_subsets.empty())
        req.aggregate = true;
    if (grid == "small") {
        req.learners.classifier_grid = {{sd::LearnerKind::logistic_poly, 1, 0.01},
                                        {sd::LearnerKind::logistic_poly, 3, 0.1}};
        sd::LearnerConfig g;
        g.kind = sd::LearnerKind::gbt;
        g.trees = 150;
        g.depth = 2;
        req.learners.classifier_grid.push_back(g);
        req.learners.regressor_grid = {{sd::LearnerKind::ridge_linear, 1, 0.01},
                                       {sd::LearnerKind::ridge_linear, 3, 0.1}, g};
    }

    const auto rows = sd::coverage_experiment(req);

    std::ostringstream csv;
    csv << "target,truth,coverage,mean_width,mean_point,reps\n";
    json jrows = json::array();
    for (const auto& r : rows) {
        char line[256];
        std::snprintf(line, sizeof(line), "%s,%.10g,%.10g,%.10g,%.10g,%d\n", r.target.c_str(),
                      r.truth, r.coverage, r.mean_width, r.mean_point, r.reps);
        csv << line;
        json jr;
        jr["target"] = r.target;
        jr["truth"] = r.truth;
        jr["coverage"] = r.coverage;
        jr["mean_width"] = r.mean_width;
        jr["mean_point"] = r.mean_point;
        jr["reps"] = r.reps;
        jrows.push_back(jr);
    }
    if (out_csv.empty())
        std::cout << csv.str();
    else
        write_file(out_csv, csv.str());
    if (!out_json.empty()) write_file(out_json, jrows.dump(2) + "\n");
    return 0;
}

int run_render(const std::string& report_path, const std::string& panel, const std::string& out) {
    sd::DecompositionReport report = sd::report_from_json(read_file(report_path));
    sd::SvgPanel p;
    if (panel == "aggregate")
        p = sd::SvgPanel::aggregate;
    else if (panel == "covariate")
        p = sd::SvgPanel::detailed_covariate;
    else if (panel == "outcome")
        p = sd::SvgPanel::detailed_outcome;
    else
        throw sd::ConfigError("unknown panel '" + panel + "'");
    const std::string svg = sd::render_svg(report, p);
    if (out.empty())
        std::cout << svg;
    else
        write_file(out, svg);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Performance-gap decomposition between a source and a target domain"};
    app.require_subcommand(1);

    // decompose
    auto* dec = app.add_subcommand("decompose", "Run the decomposition pipeline on CSV data");
    std::string config_path, data, source, target, domain_col = "domain", y_col = "y";
    std::string loss_col, pred_col, report_path, svg_path;
    std::vector<std::string> w_cols, z_cols, targets_flag;
    double alpha = 0.10, gamma = 1.0, train_fraction = 0.8, threshold = 0.5;
    int bins = 20, folds = 3, inner_subsample = 2000, threads = 1, crossfit = 0;
    std::uint64_t seed = 1;
    dec->add_option("--config", config_path, "JSON config file (overrides flags)");
    dec->add_option("--data", data, "single CSV with a domain column");
    dec->add_option("--source", source, "source-domain CSV");
    dec->add_option("--target", target, "target-domain CSV");
    dec->add_option("--domain-col", domain_col);
    dec->add_option("--w", w_cols, "baseline variable columns")->delimiter(',');
    dec->add_option("--z", z_cols, "conditional covariate columns")->delimiter(',');
    dec->add_option("--y", y_col, "outcome column");
    dec->add_option("--loss", loss_col, "per-row loss column");
    dec->add_option("--pred", pred_col, "per-row prediction column (0-1 loss computed)");
    dec->add_option("--threshold", threshold, "score threshold when --pred holds scores");
    dec->add_option("--targets", targets_flag,
                    "decomposition targets: aggregate, detailed_covariate, detailed_outcome")
        ->delimiter(',');
    dec->add_option("--alpha", alpha);
    dec->add_option("--bins", bins);
    dec->add_option("--gamma", gamma);
    dec->add_option("--train-fraction", train_fraction);
    dec->add_option("--folds", folds);
    dec->add_option("--inner-subsample", inner_subsample);
    dec->add_option("--seed", seed);
    dec->add_option("--crossfit-folds", crossfit);
    dec->add_option("--threads", threads);
    dec->add_option("--report", report_path, "report JSON path (default stdout)");
    dec->add_option("--svg", svg_path, "also render the aggregate panel");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Generate a synthetic two-domain CSV");
    std::string sim_dgp = "gaussian_logistic", sim_out = "simulated.csv";
    long sim_n = 5000, sim_n_target = 0;
    std::uint64_t sim_seed = 1;
    sim->add_option("--dgp", sim_dgp, "gaussian_logistic | uniform_logistic | covariate_mixture");
    sim->add_option("--n", sim_n, "rows per domain");
    sim->add_option("--n-target", sim_n_target, "target rows (default: same as --n)");
    sim->add_option("--seed", sim_seed);
    sim->add_option("--out", sim_out);

    // coverage
    auto* cov = app.add_subcommand("coverage", "Confidence-interval coverage experiment");
    std::string cov_dgp = "gaussian_logistic", cov_estimator = "debiased", cov_grid = "small";
    std::string cov_csv, cov_json;
    std::vector<std::string> cov_targets = {"aggregate"};
    long cov_n = 1000;
    int cov_reps = 200, cov_threads = 0, cov_inner = 2000;
    double cov_alpha = 0.10;
    std::uint64_t cov_seed = 1;
    cov->add_option("--dgp", cov_dgp);
    cov->add_option("--n", cov_n, "rows per domain");
    cov->add_option("--reps", cov_reps);
    cov->add_option("--estimator", cov_estimator, "debiased | plugin");
    cov->add_option("--targets", cov_targets, "aggregate and/or v_z:<i,...>, v_y:<i,...>")
        ->delimiter(';');
    cov->add_option("--alpha", cov_alpha);
    cov->add_option("--seed", cov_seed);
    cov->add_option("--threads", cov_threads, "0 = all cores");
    cov->add_option("--inner-subsample", cov_inner);
    cov->add_option("--grid", cov_grid, "small | default learner grid");
    cov->add_option("--out-csv", cov_csv);
    cov->add_option("--out-json", cov_json);

    // render
    auto* ren = app.add_subcommand("render", "Render an SVG panel from a report JSON");
    std::string ren_report, ren_panel = "aggregate", ren_out;
    ren->add_option("--report", ren_report)->required();
    ren->add_option("--panel", ren_panel, "aggregate | covariate | outcome");
    ren->add_option("--out", ren_out, "output SVG (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (dec->parsed()) {
            json flags;
            if (!data.empty()) flags["data"] = data;
            if (!source.empty()) flags["source"] = source;
            if (!target.empty()) flags["target"] = target;
            flags["domain_col"] = domain_col;
            flags["w_cols"] = w_cols;
            flags["z_cols"] = z_cols;
            flags["y_col"] = y_col;
            if (!loss_col.empty()) flags["loss_col"] = loss_col;
            if (!pred_col.empty()) {
                flags["pred_col"] = pred_col;
                flags["threshold"] = threshold;
                flags["pred_is_label"] = false;
            }
            if (!targets_flag.empty()) flags["targets"] = targets_flag;
            flags["alpha"] = alpha;
            flags["bins"] = bins;
            flags["gamma"] = gamma;
            flags["train_fraction"] = train_fraction;
            flags["folds"] = folds;
            flags["inner_subsample"] = inner_subsample;
            flags["seed"] = seed;
            flags["crossfit_folds"] = crossfit;
            flags["threads"] = threads;
            if (!report_path.empty()) flags["report"] = report_path;
            if (!svg_path.empty()) flags["svg"] = svg_path;
            return run_decompose(config_path, flags);
        }
        if (sim->parsed()) return run_simulate(sim_dgp, sim_n, sim_n_target, sim_seed, sim_out);
        if (cov->parsed())
            return run_coverage(cov_dgp, cov_n, cov_reps, cov_estimator, cov_targets, cov_alpha,
                                cov_seed, cov_threads, cov_inner, cov_csv, cov_json, cov_grid);
        if (ren->parsed()) return run_render(ren_report, ren_panel, ren_out);
    } catch (const sd::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const sd::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const sd::EstimationError& e) {
        std::cerr << "estimation error: " << e.what() << "\n";
        return kExitEstimation;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitInternal;
}
