// Command-line driver: validate generator specs, analyze variance profiles,
// dump expansions, run Monte Carlo simulations, and execute experiments.
//
// Exit codes: 0 success, 1 runtime error, 2 threshold failure, 64 usage.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "spmc/diffusion.hpp"
#include "spmc/errors.hpp"
#include "spmc/expansion.hpp"
#include "spmc/experiments.hpp"
#include "spmc/propagator.hpp"
#include "spmc/queue_model.hpp"
#include "spmc/rng.hpp"
#include "spmc/simulate.hpp"
#include "spmc/stats.hpp"
#include "spmc/version.hpp"

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

struct CommonArgs {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    int threads = 0;
    std::string format = "json";
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "configuration JSON path")
        ->required();
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--seed", args.seed, "override base seed");
    cmd->add_option("--threads", args.threads, "worker threads (0 = all cores)");
    cmd->add_option("--format", args.format, "report format")
        ->check(CLI::IsMember({"json", "csv"}));
}

json load_config(const CommonArgs& args) {
    std::ifstream in(args.config_path);
    if (!in) throw spmc::ConfigError("cannot open config file " + args.config_path);
    json config = json::parse(in);
    if (args.seed) config["base_seed"] = *args.seed;
    return config;
}

int effective_threads(const CommonArgs& args, const json& config) {
    return args.threads > 0 ? args.threads : config.value("threads", 0);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw spmc::ConfigError("cannot write " + path.string());
    out << text;
}

spmc::TwoScaleModel model_from_config(const json& config, double eps) {
    json wrapper = {{"kind", "expansion_error"},
                    {"model", config.at("model")},
                    {"epsilons", {eps}}};
    return spmc::experiment_config_from_json(wrapper).build_model(eps);
}

spmc::Vector weights_from_config(const json& config, int dim) {
    if (!config.contains("F"))
        throw spmc::ConfigError("config needs a weight vector \"F\"");
    const auto f = config.at("F").get<std::vector<double>>();
    if (static_cast<int>(f.size()) != dim)
        throw spmc::ConfigError("weight vector length must equal the state count");
    return Eigen::Map<const spmc::Vector>(f.data(), static_cast<long>(f.size()));
}

int cmd_validate(const CommonArgs& args) {
    const json config = load_config(args);
    const double eps = config.contains("epsilons")
                           ? config.at("epsilons").front().get<double>()
                           : 0.1;
    const spmc::TwoScaleModel model = model_from_config(config, eps);
    const int probes = config.value("probe_points", 50);
    const auto grid = spmc::linspace(0.0, model.horizon, probes);

    ordered_json out;
    out["fast"] = spmc::validation_report_to_json(
        spmc::validate_generator(model.fast, grid));
    out["slow"] = spmc::validation_report_to_json(
        spmc::validate_generator(model.slow, grid));
    out["combined"] = spmc::validation_report_to_json(
        spmc::validate_generator(model.combined_generator(), grid));
    const bool ok = out["fast"]["valid"].get<bool>() &&
                    out["slow"]["valid"].get<bool>() &&
                    out["combined"]["valid"].get<bool>();
    out["valid"] = ok;
    write_text(std::filesystem::path(args.out_dir) / "validation_report.json",
               out.dump(2) + "\n");
    std::cout << (ok ? "valid" : "violations found") << "\n";
    return ok ? 0 : 2;
}

int cmd_analyze(const CommonArgs& args) {
    const json config = load_config(args);
    const double eps = config.contains("epsilons")
                           ? config.at("epsilons").front().get<double>()
                           : 0.1;
    const spmc::TwoScaleModel model = model_from_config(config, eps);
    const spmc::Vector weights = weights_from_config(config, model.fast.dimension());
    const int points = config.value("grid_points", 101);
    const auto grid = spmc::linspace(0.0, model.horizon, points);

    const auto profile = spmc::VarianceProfile::build(model.fast, weights, grid);

    // Spot check against the literal quadrature at a few interior points.
    double oracle_deviation = 0.0;
    for (int k = 0; k <= 4; ++k) {
        const double s = model.horizon * k / 4.0;
        const double closed = spmc::sigma_squared(model.fast, weights, s);
        const double literal = spmc::sigma_squared_quadrature(model.fast, weights, s);
        oracle_deviation = std::max(oracle_deviation, std::abs(closed - literal));
    }

    ordered_json out;
    out["s_grid"] = profile.grid();
    out["sigma2"] = profile.rate();
    out["cumulative"] = profile.cumulative();
    out["oracle_deviation"] = oracle_deviation;
    out["clamp_count"] = profile.clamp_count();
    write_text(std::filesystem::path(args.out_dir) / "variance_report.json",
               out.dump(2) + "\n");

    std::string csv = "t,sigma2,cumulative\n";
    for (std::size_t i = 0; i < profile.grid().size(); ++i)
        csv += std::to_string(profile.grid()[i]) + "," +
               std::to_string(profile.rate()[i]) + "," +
               std::to_string(profile.cumulative()[i]) + "\n";
    write_text(std::filesystem::path(args.out_dir) / "variance_profile.csv", csv);
    std::cout << "cumulative variance at horizon: " << profile.total() << "\n";
    return 0;
}

int cmd_expand(const CommonArgs& args) {
    const json config = load_config(args);
    const double eps = config.contains("epsilons")
                           ? config.at("epsilons").front().get<double>()
                           : 0.1;
    const spmc::TwoScaleModel model = model_from_config(config, eps);
    const int order = config.value("order", 1);
    const double t0 = config.value("t0", 0.0);
    const int points = config.value("grid_points", 21);

    const spmc::Expansion expansion(model.fast, model.slow, order, model.horizon);
    const spmc::LayerTerms layers = expansion.build_layers(t0);

    auto matrix_json = [](const spmc::Matrix& m) {
        ordered_json rows = ordered_json::array();
        for (int i = 0; i < m.rows(); ++i) {
            ordered_json row = ordered_json::array();
            for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
            rows.push_back(std::move(row));
        }
        return rows;
    };

    ordered_json out;
    ordered_json residuals;
    for (int k = 0; k <= order; ++k)
        residuals["psi_" + std::to_string(k) + "_ode"] = layers.ode_residual(k);
    out["meta"] = ordered_json{{"order", order},
                               {"t0", t0},
                               {"tau_max", layers.tau_max()},
                               {"grid_step", layers.grid_step()},
                               {"residuals", residuals},
                               {"version", spmc::kVersion}};
    out["phi"] = ordered_json::array();
    for (double t : spmc::linspace(t0, model.horizon, points)) {
        for (int k = 0; k <= order; ++k) {
            out["phi"].push_back(ordered_json{
                {"t", t}, {"k", k}, {"matrix", matrix_json(expansion.phi(k, t))}});
        }
    }
    out["psi"] = ordered_json::array();
    for (double tau : spmc::linspace(0.0, layers.tau_max(), points)) {
        for (int k = 0; k <= order; ++k) {
            out["psi"].push_back(ordered_json{
                {"tau", tau}, {"k", k}, {"matrix", matrix_json(layers.psi(k, tau))}});
        }
    }
    write_text(std::filesystem::path(args.out_dir) / "expansion_dump.json",
               out.dump(2) + "\n");
    std::cout << "expansion dumped (tau_max " << layers.tau_max() << ")\n";
    return 0;
}

int cmd_simulate(const CommonArgs& args) {
    const json config = load_config(args);
    if (!config.contains("epsilons"))
        throw spmc::ConfigError("simulate needs \"epsilons\"");
    const double eps = config.at("epsilons").front().get<double>();
    const spmc::TwoScaleModel model = model_from_config(config, eps);
    const spmc::Vector weights = weights_from_config(config, model.fast.dimension());
    const int replications = config.value("N", 1000);
    const std::uint64_t base_seed = config.value("base_seed", std::uint64_t{12345});

    spmc::OccupationSpec spec{weights, {model.horizon}};
    spmc::MonteCarloOptions options;
    options.threads = effective_threads(args, config);
    options.initial_state = config.value("state", 0);
    const auto summary =
        spmc::monte_carlo(model, spec, replications, base_seed, options);

    ordered_json out;
    out["N"] = summary.replications;
    out["epsilon"] = summary.epsilon;
    out["base_seed"] = summary.base_seed;
    out["rng"] = summary.rng_name;
    out["rate_bound"] = summary.rate_bound;
    out["mean"] = summary.mean;
    out["mean_stderr"] = summary.mean_stderr;
    out["second_moment"] = summary.second_moment;
    out["second_moment_stderr"] = summary.second_moment_stderr;
    out["quantile_levels"] = summary.quantile_levels;
    out["empirical_quantiles"] = summary.empirical_quantiles;
    out["timings"] = ordered_json{{"total_seconds", summary.elapsed_seconds}};
    write_text(std::filesystem::path(args.out_dir) / "mc_summary.json",
               out.dump(2) + "\n");

    const int dump_paths = config.value("dump_paths", 0);
    if (dump_paths > 0) {
        std::vector<spmc::PathRecord> paths;
        for (int r = 0; r < dump_paths && r < replications; ++r)
            paths.push_back(spmc::sample_path(model, options.initial_state, base_seed,
                                              static_cast<std::uint64_t>(r),
                                              summary.rate_bound));
        spmc::write_path_csv(
            paths, (std::filesystem::path(args.out_dir) / "paths.csv").string());
    }
    std::cout << "mean " << summary.mean << " +- " << summary.mean_stderr
              << ", second moment " << summary.second_moment << "\n";
    return 0;
}

int cmd_experiment(const CommonArgs& args) {
    const json config = load_config(args);
    auto parsed = spmc::experiment_config_from_json(config);
    parsed.out_dir = args.out_dir;
    if (args.threads > 0) parsed.threads = args.threads;
    const auto report = spmc::run_experiment(parsed);
    write_text(std::filesystem::path(args.out_dir) / "experiment_report.json",
               report.body.dump(2) + "\n");
    if (args.format == "csv")
        write_text(std::filesystem::path(args.out_dir) / "experiment_tables.csv",
                   spmc::report_tables_csv(report));
    std::cout << to_string(parsed.kind) << ": "
              << (report.passed ? "pass" : "threshold failure") << "\n";
    return report.passed ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-time-scale Markov chain toolkit"};
    app.set_version_flag("--version", spmc::kVersion);
    app.require_subcommand(1);

    CommonArgs validate_args, analyze_args, expand_args, simulate_args, experiment_args;
    add_common(app.add_subcommand("validate", "check generator invariants"),
               validate_args);
    add_common(app.add_subcommand("analyze", "variance profile of an occupation functional"),
               analyze_args);
    add_common(app.add_subcommand("expand", "dump expansion terms"), expand_args);
    add_common(app.add_subcommand("simulate", "Monte Carlo occupation summary"),
               simulate_args);
    add_common(app.add_subcommand("experiment", "run a configured experiment"),
               experiment_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // Usage problems print the schema help and exit 64; --help itself is 0.
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return 64;
    }

    try {
        if (app.got_subcommand("validate")) return cmd_validate(validate_args);
        if (app.got_subcommand("analyze")) return cmd_analyze(analyze_args);
        if (app.got_subcommand("expand")) return cmd_expand(expand_args);
        if (app.got_subcommand("simulate")) return cmd_simulate(simulate_args);
        if (app.got_subcommand("experiment")) return cmd_experiment(experiment_args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 64;
}
