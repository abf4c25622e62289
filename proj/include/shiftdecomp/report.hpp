#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "shiftdecomp/aggregate.hpp"
#include "shiftdecomp/dataset.hpp"
#include "shiftdecomp/shapley.hpp"

namespace shiftdecomp {

// Full pipeline configuration; mirrors the CLI flags and the JSON config file.
struct RunConfig {
    // Inputs: either one CSV with a domain column, or separate source/target CSVs.
    std::string data_path;
    std::string domain_col = "domain";
    std::string source_path, target_path;

    std::vector<std::string> w_cols, z_cols;
    std::string y_col = "y";
    std::string loss_col;  // exactly one of loss_col / pred_col
    std::string pred_col;
    double pred_threshold = 0.5;
    bool pred_is_label = true;  // pred_col holds labels; false = scores + threshold

    bool run_aggregate = true;
    bool run_detailed_covariate = false;
    bool run_detailed_outcome = false;

    double alpha = 0.10;
    int bins = 20;
    double gamma = 1.0;
    double train_fraction = 0.8;
    int folds = 3;
    int inner_subsample = 2000;
    double clip_lo = 0.01, clip_hi = 0.99;
    std::uint64_t seed = 1;
    int crossfit_folds = 0;  // 0 = split-sample estimation
    int threads = 1;

    std::vector<LearnerConfig> classifier_grid;  // empty = defaults
    std::vector<LearnerConfig> regressor_grid;

    std::string report_path;  // empty = stdout
    std::string svg_path;

    LearnerOptions learner_options() const;
};

RunConfig parse_config_json(const std::string& json_text);
std::string config_to_json(const RunConfig& config);

struct DetailedSection {
    bool present = false;
    std::string error;  // non-empty when the stage failed
    ShapleyAttribution attribution;
    std::vector<SubsetValue> subset_values;
    std::vector<std::string> variable_names;
};

struct DecompositionReport {
    int schema_version = 1;
    long n_source = 0, n_target = 0, n_eval = 0;
    std::uint64_t seed = 0;
    double alpha = 0.10;
    std::vector<std::string> selected_learners;
    std::vector<std::string> warnings;

    bool has_aggregate = false;
    AggregateDecomposition aggregate;

    DetailedSection detailed_covariate;
    DetailedSection detailed_outcome;
};

Dataset load_dataset(const RunConfig& config);

// End to end: split, nuisances, aggregate, subset sampling, per-subset
// values, Shapley solve. All randomness derives from config.seed; the same
// config yields a byte-identical report.
DecompositionReport run(const RunConfig& config);
DecompositionReport run_on_dataset(const RunConfig& config, const Dataset& ds);

std::string report_to_json(const DecompositionReport& report);
DecompositionReport report_from_json(const std::string& json_text);

}  // namespace shiftdecomp
