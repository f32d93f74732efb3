#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spmc/generator.hpp"
#include "spmc/queue_model.hpp"

namespace spmc {

// Canonical 3-state test instance: tridiagonal A(t) with birth rates
// (1 + 0.5 t, 1) and death rates (1, 2 - 0.5 t) on [0, 1], constant slow
// part; weakly irreducible on the whole horizon.
TwoScaleModel reference_model(double eps = 0.1);

enum class ExperimentKind {
    expansion_error,
    second_moment,
    clt,
    rate_proxy,
    queue_demo,
};

ExperimentKind experiment_kind_from_string(const std::string& name);
std::string to_string(ExperimentKind kind);

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::expansion_error;
    nlohmann::json model_source;  // "reference" | {fast[, slow], horizon} | {queue, horizon}
    Vector weights;
    std::vector<double> epsilons;
    int replications = 0;
    std::uint64_t base_seed = 0;
    int order = 0;        // expansion_error
    int state = 0;        // queue_demo occupation state, simulation start state
    int grid_points = 20;
    int threads = 0;
    std::string out_dir = ".";

    nlohmann::json raw;  // verbatim copy embedded into reports

    bool statistical() const;
    TwoScaleModel build_model(double eps) const;
    bool is_queue_model() const;
    QueueModel queue() const;
};

// Parses and validates a config: epsilon grid strictly decreasing within
// (0, 1], N >= 100 for statistical kinds.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

struct ExperimentReport {
    nlohmann::ordered_json body;
    bool passed = false;
};

ExperimentReport run_expansion_error(const ExperimentConfig& config);
ExperimentReport run_second_moment(const ExperimentConfig& config);
ExperimentReport run_clt(const ExperimentConfig& config);
ExperimentReport run_rate_proxy(const ExperimentConfig& config);
ExperimentReport run_queue_demo(const ExperimentConfig& config);
ExperimentReport run_experiment(const ExperimentConfig& config);

// Long-form table of the per-epsilon metrics: epsilon,metric,value,stderr.
std::string report_tables_csv(const ExperimentReport& report);

// Self-tests of the statistical machinery: KS p-value on true normal draws
// and the Wasserstein self-distance noise floor.
struct CalibrationResult {
    double ks_pvalue = 0.0;
    double wasserstein_floor = 0.0;
    int samples = 0;
    bool passed = false;
};

CalibrationResult calibration_selftest(std::uint64_t seed, int samples);

std::vector<double> linspace(double lo, double hi, int points);

}  // namespace spmc
