#include "spmc/experiments.hpp"

#include <chrono>
#include <cmath>

#include "spmc/diffusion.hpp"
#include "spmc/errors.hpp"
#include "spmc/expansion.hpp"
#include "spmc/parallel.hpp"
#include "spmc/propagator.hpp"
#include "spmc/rng.hpp"
#include "spmc/simulate.hpp"
#include "spmc/stats.hpp"
#include "spmc/version.hpp"

namespace spmc {

namespace {

using OrderedJson = nlohmann::ordered_json;

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

OrderedJson environment_block(const ExperimentConfig& config) {
    // No scheduling metadata here: reports must be byte-identical across
    // degrees of parallelism, timing fields aside.
    OrderedJson env;
    env["base_seed"] = config.base_seed;
    env["rng"] = PhiloxRng::algorithm_name();
    env["version"] = kVersion;
    return env;
}

ExperimentReport finalize(OrderedJson body, bool passed, const Stopwatch& watch) {
    body["passed"] = passed;
    body["timings"] = OrderedJson{{"total_seconds", watch.seconds()}};
    ExperimentReport report;
    report.body = std::move(body);
    report.passed = passed;
    return report;
}

OrderedJson report_skeleton(const ExperimentConfig& config) {
    OrderedJson body;
    body["kind"] = to_string(config.kind);
    body["config"] = config.raw;
    body["environment"] = environment_block(config);
    return body;
}

double normal_sample(PhiloxRng& rng) { return normal_quantile(rng.next_open_double()); }

}  // namespace

std::vector<double> linspace(double lo, double hi, int points) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(points));
    if (points == 1) {
        out.push_back(lo);
        return out;
    }
    for (int i = 0; i < points; ++i)
        out.push_back(lo + (hi - lo) * i / (points - 1.0));
    return out;
}

TwoScaleModel reference_model(double eps) {
    Matrix a0(3, 3), a1(3, 3), b(3, 3);
    a0 << -1.0, 1.0, 0.0, 1.0, -2.0, 1.0, 0.0, 2.0, -2.0;
    a1 << -0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, -0.5, 0.5;
    b << -1.0, 1.0, 0.0, 0.5, -1.0, 0.5, 0.0, 1.0, -1.0;
    std::vector<PolyTerm> terms;
    terms.push_back({std::move(a0), {1.0}});
    terms.push_back({std::move(a1), {0.0, 1.0}});
    auto fast = TimeVaryingGenerator::from_polynomial_terms(3, std::move(terms));
    auto slow = TimeVaryingGenerator::constant(std::move(b));
    return TwoScaleModel(std::move(fast), std::move(slow), eps, 1.0);
}

ExperimentKind experiment_kind_from_string(const std::string& name) {
    if (name == "expansion_error") return ExperimentKind::expansion_error;
    if (name == "second_moment") return ExperimentKind::second_moment;
    if (name == "clt") return ExperimentKind::clt;
    if (name == "rate_proxy") return ExperimentKind::rate_proxy;
    if (name == "queue_demo") return ExperimentKind::queue_demo;
    throw ConfigError("unknown experiment kind \"" + name + "\"");
}

std::string to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::expansion_error: return "expansion_error";
        case ExperimentKind::second_moment: return "second_moment";
        case ExperimentKind::clt: return "clt";
        case ExperimentKind::rate_proxy: return "rate_proxy";
        case ExperimentKind::queue_demo: return "queue_demo";
    }
    throw ConfigError("unhandled experiment kind");
}

bool ExperimentConfig::statistical() const {
    return kind == ExperimentKind::second_moment || kind == ExperimentKind::clt ||
           kind == ExperimentKind::rate_proxy || kind == ExperimentKind::queue_demo;
}

bool ExperimentConfig::is_queue_model() const {
    return model_source.is_object() && model_source.contains("queue");
}

QueueModel ExperimentConfig::queue() const {
    if (!is_queue_model()) throw ConfigError("config has no queue model");
    return queue_from_json(model_source.at("queue"));
}

TwoScaleModel ExperimentConfig::build_model(double eps) const {
    if (model_source.is_string() && model_source.get<std::string>() == "reference")
        return reference_model(eps);
    if (!model_source.is_object())
        throw ConfigError("model must be \"reference\" or an object");
    const double horizon = model_source.value("horizon", 1.0);
    if (model_source.contains("queue")) {
        const QueueModel q = queue_from_json(model_source.at("queue"));
        q.validate(horizon);
        TimeVaryingGenerator fast = q.build_generator();
        TimeVaryingGenerator slow =
            model_source.contains("slow")
                ? generator_from_json(model_source.at("slow"))
                : TimeVaryingGenerator::zero(fast.dimension());
        return TwoScaleModel(std::move(fast), std::move(slow), eps, horizon);
    }
    if (!model_source.contains("fast"))
        throw ConfigError("model object needs \"fast\" or \"queue\"");
    TimeVaryingGenerator fast = generator_from_json(model_source.at("fast"));
    TimeVaryingGenerator slow = model_source.contains("slow")
                                    ? generator_from_json(model_source.at("slow"))
                                    : TimeVaryingGenerator::zero(fast.dimension());
    return TwoScaleModel(std::move(fast), std::move(slow), eps, horizon);
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
    ExperimentConfig config;
    config.raw = j;
    config.kind = experiment_kind_from_string(j.at("kind").get<std::string>());
    if (!j.contains("model")) throw ConfigError("config needs a \"model\"");
    config.model_source = j.at("model");
    if (j.contains("F")) {
        const auto f = j.at("F").get<std::vector<double>>();
        config.weights = Eigen::Map<const Vector>(f.data(), static_cast<long>(f.size()));
    }
    config.epsilons = j.value("epsilons", std::vector<double>{});
    if (config.epsilons.empty()) throw ConfigError("config needs \"epsilons\"");
    for (std::size_t i = 0; i < config.epsilons.size(); ++i) {
        const double eps = config.epsilons[i];
        if (!(eps > 0.0 && eps <= 1.0))
            throw ConfigError("epsilons must lie in (0, 1]");
        if (i > 0 && !(eps < config.epsilons[i - 1]))
            throw ConfigError("epsilons must be strictly decreasing");
    }
    config.replications = j.value("N", 0);
    config.base_seed = j.value("base_seed", std::uint64_t{12345});
    config.order = j.value("order", 0);
    config.state = j.value("state", 0);
    config.grid_points = j.value("grid_points", 20);
    config.threads = j.value("threads", 0);
    config.out_dir = j.value("out_dir", std::string("."));
    if (config.statistical() && config.replications < 100)
        throw ConfigError("statistical experiments need N >= 100");
    if (config.grid_points < 2) throw ConfigError("grid_points must be >= 2");
    return config;
}

ExperimentReport run_expansion_error(const ExperimentConfig& config) {
    if (config.kind != ExperimentKind::expansion_error)
        throw ConfigError("config kind mismatch");
    if (config.order < 0 || config.order > 1)
        throw ConfigError("expansion_error supports orders 0 and 1");
    const Stopwatch watch;
    OrderedJson body = report_skeleton(config);
    const double slope_lo = config.order == 0 ? 0.7 : 1.6;
    const double slope_hi = config.order == 0 ? 1.3 : 2.4;
    constexpr double kExactFloor = 1e-10;
    body["thresholds"] = OrderedJson{{"slope_min", slope_lo},
                                     {"slope_max", slope_hi},
                                     {"exactness_floor", kExactFloor}};

    const TwoScaleModel shape = config.build_model(config.epsilons.front());
    const Expansion expansion(shape.fast, shape.slow, config.order, shape.horizon);
    const std::vector<double> base_points = linspace(0.0, shape.horizon, config.grid_points);

    std::vector<LayerTerms> layers(base_points.size());
    parallel_for(base_points.size(), config.threads, [&](std::size_t i) {
        layers[i] = expansion.build_layers(base_points[i]);
    });

    body["per_epsilon"] = OrderedJson::array();
    std::vector<double> fit_eps, fit_err;
    bool any_underflow = false;
    for (double eps : config.epsilons) {
        const TwoScaleModel model = config.build_model(eps);
        std::vector<double> errs(base_points.size(), 0.0);
        std::vector<char> underflow(base_points.size(), 0);
        parallel_for(base_points.size(), config.threads, [&](std::size_t i) {
            const double t0 = base_points[i];
            const std::vector<double> times =
                linspace(t0, shape.horizon, config.grid_points);
            try {
                const auto transitions = transition_matrices(model, t0, times);
                double worst = 0.0;
                for (std::size_t k = 0; k < times.size(); ++k) {
                    const Matrix approx =
                        expansion_eval(expansion, layers[i], times[k], eps);
                    worst = std::max(
                        worst, (transitions[k] - approx).cwiseAbs().maxCoeff());
                }
                errs[i] = worst;
            } catch (const StepUnderflowError&) {
                underflow[i] = 1;
            }
        });
        double sup_err = 0.0;
        bool eps_underflow = false;
        for (std::size_t i = 0; i < errs.size(); ++i) {
            sup_err = std::max(sup_err, errs[i]);
            eps_underflow = eps_underflow || underflow[i] != 0;
        }
        any_underflow = any_underflow || eps_underflow;
        OrderedJson row;
        row["epsilon"] = eps;
        row["sup_error"] = sup_err;
        row["step_underflow"] = eps_underflow;
        body["per_epsilon"].push_back(std::move(row));
        if (!eps_underflow && sup_err > 1e-12) {
            fit_eps.push_back(eps);
            fit_err.push_back(sup_err);
        }
    }

    bool all_exact = true;
    for (const auto& row : body["per_epsilon"])
        if (row.at("sup_error").get<double>() >= kExactFloor) all_exact = false;

    bool passed = false;
    if (all_exact && !any_underflow) {
        body["slope"] = nullptr;
        body["exact"] = true;
        passed = true;
    } else if (fit_eps.size() >= 3) {
        const SlopeFit fit = fit_loglog(fit_eps, fit_err);
        body["slope"] = OrderedJson{{"value", fit.slope},
                                    {"stderr", fit.slope_stderr},
                                    {"points", fit.points}};
        body["exact"] = false;
        passed = fit.slope >= slope_lo && fit.slope <= slope_hi && !any_underflow;
    } else {
        body["slope"] = nullptr;
        body["exact"] = false;
        body["notes"] = OrderedJson::array({"fewer than 3 usable epsilon points"});
    }
    return finalize(std::move(body), passed, watch);
}

namespace {

MonteCarloSummary run_terminal_mc(const ExperimentConfig& config, double eps) {
    const TwoScaleModel model = config.build_model(eps);
    if (config.weights.size() != model.fast.dimension())
        throw ConfigError("weight vector does not match the model dimension");
    OccupationSpec spec{config.weights, {model.horizon}};
    MonteCarloOptions options;
    options.threads = config.threads;
    options.initial_state = config.state;
    return monte_carlo(model, spec, config.replications, config.base_seed, options);
}

double total_limit_variance(const ExperimentConfig& config) {
    const TwoScaleModel shape = config.build_model(config.epsilons.front());
    const VarianceProfile profile = VarianceProfile::build(
        shape.fast, config.weights, {0.0, shape.horizon});
    return profile.total();
}

}  // namespace

ExperimentReport run_second_moment(const ExperimentConfig& config) {
    if (config.kind != ExperimentKind::second_moment)
        throw ConfigError("config kind mismatch");
    const Stopwatch watch;
    OrderedJson body = report_skeleton(config);
    body["thresholds"] = OrderedJson{{"deviation_budget_fraction", 0.1},
                                     {"stderr_multiplier", 3.0},
                                     {"slope_min", 0.6},
                                     {"slope_max", 1.4}};

    const double limit_variance = total_limit_variance(config);
    body["limit_variance"] = limit_variance;

    body["per_epsilon"] = OrderedJson::array();
    std::vector<double> fit_eps, fit_dev;
    bool all_within_budget = true;
    for (double eps : config.epsilons) {
        const MonteCarloSummary mc = run_terminal_mc(config, eps);
        const double deviation = std::abs(mc.second_moment - limit_variance);
        const double budget = 0.1 * limit_variance + 3.0 * mc.second_moment_stderr;
        const bool resolved = deviation > 3.0 * mc.second_moment_stderr;
        OrderedJson row;
        row["epsilon"] = eps;
        row["second_moment"] = mc.second_moment;
        row["second_moment_stderr"] = mc.second_moment_stderr;
        row["deviation"] = deviation;
        row["budget"] = budget;
        row["resolved"] = resolved;
        row["within_budget"] = deviation <= budget;
        body["per_epsilon"].push_back(std::move(row));
        all_within_budget = all_within_budget && deviation <= budget;
        if (resolved) {
            fit_eps.push_back(eps);
            fit_dev.push_back(deviation);
        }
    }

    if (limit_variance < 1e-14) {
        // Degenerate functional (constant weights): deviations vanish.
        body["slope"] = nullptr;
        body["degenerate"] = true;
        return finalize(std::move(body), all_within_budget, watch);
    }
    if (fit_eps.size() < 3)
        throw InsufficientResolutionError(
            "only " + std::to_string(fit_eps.size()) +
            " epsilon points exceed the noise floor; increase N");
    const SlopeFit fit = fit_loglog(fit_eps, fit_dev);
    body["slope"] = OrderedJson{{"value", fit.slope},
                                {"stderr", fit.slope_stderr},
                                {"points", fit.points}};
    const bool passed =
        all_within_budget && fit.slope >= 0.6 && fit.slope <= 1.4;
    return finalize(std::move(body), passed, watch);
}

CalibrationResult calibration_selftest(std::uint64_t seed, int samples) {
    PhiloxRng rng(seed, 0x5e1fca1b);
    std::vector<double> draws(static_cast<std::size_t>(samples));
    for (auto& d : draws) d = normal_sample(rng);
    CalibrationResult result;
    result.samples = samples;
    const double d = ks_statistic(draws, [](double x) { return normal_cdf(x); });
    result.ks_pvalue = ks_pvalue(d, samples);
    result.wasserstein_floor = wasserstein1_vs_normal(draws, 0.0, 1.0);
    result.passed = result.ks_pvalue > 0.01 &&
                    result.wasserstein_floor < 3.0 / std::sqrt(double(samples));
    return result;
}

namespace {

OrderedJson calibration_block(const CalibrationResult& calibration) {
    return OrderedJson{{"ks_pvalue", calibration.ks_pvalue},
                       {"wasserstein_floor", calibration.wasserstein_floor},
                       {"samples", calibration.samples},
                       {"passed", calibration.passed}};
}

}  // namespace

ExperimentReport run_clt(const ExperimentConfig& config) {
    if (config.kind != ExperimentKind::clt) throw ConfigError("config kind mismatch");
    const Stopwatch watch;
    OrderedJson body = report_skeleton(config);
    constexpr double kPvalueFloor = 0.01;
    body["thresholds"] =
        OrderedJson{{"ks_pvalue_min", kPvalueFloor}, {"max_trend_inversions", 1}};
    body["notes"] = OrderedJson::array(
        {"Gaussianity is tested on the martingale part: the deterministic "
         "initial-layer bias of the fixed start state is removed before "
         "standardizing. The uncentered p-value is reported alongside."});

    const CalibrationResult calibration =
        calibration_selftest(config.base_seed ^ 0x9e3779b97f4a7c15ULL,
                             std::min(config.replications, 5000));
    body["calibration"] = calibration_block(calibration);

    const double limit_variance = total_limit_variance(config);
    const double limit_sd = std::sqrt(limit_variance);
    body["limit_variance"] = limit_variance;

    body["per_epsilon"] = OrderedJson::array();
    std::vector<double> ks_stats;
    double final_pvalue = 0.0;
    bool reseeded = false;
    const auto normal = [](double x) { return normal_cdf(x); };
    for (std::size_t i = 0; i < config.epsilons.size(); ++i) {
        const double eps = config.epsilons[i];
        const TwoScaleModel model = config.build_model(eps);
        const double bias =
            initial_layer_bias(model, config.state, config.weights, model.horizon) /
            std::sqrt(eps);
        MonteCarloSummary mc = run_terminal_mc(config, eps);
        auto raw = mc.terminal_xi;
        for (double& x : raw) x /= limit_sd;
        auto centered = mc.terminal_xi;
        for (double& x : centered) x = (x - bias) / limit_sd;
        double d = ks_statistic(centered, normal);
        double p = ks_pvalue(d, config.replications);
        const bool last = i + 1 == config.epsilons.size();
        OrderedJson row;
        row["epsilon"] = eps;
        row["initial_layer_bias"] = bias;
        row["ks_statistic"] = d;
        row["ks_pvalue"] = p;
        row["ks_pvalue_uncentered"] =
            ks_pvalue(ks_statistic(raw, normal), config.replications);
        if (last && p <= kPvalueFloor) {
            // Documented single reseed-and-rerun, budgeting the 1% false
            // failure rate of the KS criterion.
            reseeded = true;
            ExperimentConfig retry = config;
            retry.base_seed = config.base_seed + 1;
            const MonteCarloSummary mc2 = run_terminal_mc(retry, eps);
            auto centered2 = mc2.terminal_xi;
            for (double& x : centered2) x = (x - bias) / limit_sd;
            d = ks_statistic(centered2, normal);
            p = ks_pvalue(d, config.replications);
            row["ks_statistic_reseeded"] = d;
            row["ks_pvalue_reseeded"] = p;
        }
        if (last) final_pvalue = p;
        ks_stats.push_back(d);
        body["per_epsilon"].push_back(std::move(row));
    }
    body["reseeded"] = reseeded;

    int inversions = 0;
    for (std::size_t i = 1; i < ks_stats.size(); ++i)
        if (ks_stats[i] > ks_stats[i - 1]) ++inversions;
    body["trend_inversions"] = inversions;

    const bool passed = calibration.passed && final_pvalue > kPvalueFloor &&
                        (ks_stats.size() < 2 || inversions <= 1);
    return finalize(std::move(body), passed, watch);
}

ExperimentReport run_rate_proxy(const ExperimentConfig& config) {
    if (config.kind != ExperimentKind::rate_proxy)
        throw ConfigError("config kind mismatch");
    const Stopwatch watch;
    OrderedJson body = report_skeleton(config);
    body["thresholds"] =
        OrderedJson{{"strictly_decreasing", true}, {"slope_min", 0.0}};
    body["proxy"] = true;
    body["notes"] = OrderedJson::array(
        {"Wasserstein-1 distance to the limit Gaussian is a distributional proxy; "
         "it does not verify the almost-sure coupling rate."});

    const CalibrationResult calibration =
        calibration_selftest(config.base_seed ^ 0xc2b2ae3d27d4eb4fULL,
                             config.replications);
    body["calibration"] = calibration_block(calibration);

    const double limit_variance = total_limit_variance(config);
    const double limit_sd = std::sqrt(limit_variance);
    body["limit_variance"] = limit_variance;

    body["per_epsilon"] = OrderedJson::array();
    std::vector<double> distances;
    for (double eps : config.epsilons) {
        const MonteCarloSummary mc = run_terminal_mc(config, eps);
        const double w1 = wasserstein1_vs_normal(mc.terminal_xi, 0.0, limit_sd);
        OrderedJson row;
        row["epsilon"] = eps;
        row["wasserstein1"] = w1;
        body["per_epsilon"].push_back(std::move(row));
        distances.push_back(w1);
    }

    bool strictly_decreasing = true;
    for (std::size_t i = 1; i < distances.size(); ++i)
        if (!(distances[i] < distances[i - 1])) strictly_decreasing = false;
    body["strictly_decreasing"] = strictly_decreasing;

    const SlopeFit fit = fit_loglog(config.epsilons, distances);
    body["slope"] = OrderedJson{{"value", fit.slope},
                                {"stderr", fit.slope_stderr},
                                {"points", fit.points}};
    const bool passed = calibration.passed && strictly_decreasing && fit.slope > 0.0;
    return finalize(std::move(body), passed, watch);
}

ExperimentReport run_queue_demo(const ExperimentConfig& config) {
    if (config.kind != ExperimentKind::queue_demo)
        throw ConfigError("config kind mismatch");
    if (!config.is_queue_model())
        throw ConfigError("queue_demo needs a queue model source");
    const Stopwatch watch;
    OrderedJson body = report_skeleton(config);
    body["thresholds"] = OrderedJson{{"nu_agreement", 1e-12},
                                     {"coverage95_min", 0.93},
                                     {"coverage95_max", 0.97}};

    const double eps = config.epsilons.front();
    const TwoScaleModel model = config.build_model(eps);
    const QueueModel q = config.queue();
    q.validate(model.horizon);
    const int state = config.state;
    if (state < 0 || state > q.capacity) throw ConfigError("state out of range");

    // Closed-form quasi-stationary law against the generic solver.
    PhiloxRng rng(config.base_seed, 0x0ddba11);
    double worst_nu_gap = 0.0;
    const TimeVaryingGenerator gen = q.build_generator();
    for (int k = 0; k < 20; ++k) {
        const double t = model.horizon * rng.next_double();
        const RowVector closed = q.nu_closed_form(t).row();
        const RowVector solved = quasi_stationary(gen, t).row();
        worst_nu_gap = std::max(worst_nu_gap, (closed - solved).cwiseAbs().maxCoeff());
    }
    body["nu_agreement"] = worst_nu_gap;

    const OccupationBand band95 =
        queue_occupation_band(q, state, eps, model.horizon, 0.95);
    const OccupationBand band90 =
        queue_occupation_band(q, state, eps, model.horizon, 0.90);

    // Raw occupation time of the chosen state over [0, T] per replication.
    const double rate_bound = scan_rate_bound(model);
    std::vector<double> occupation_times(static_cast<std::size_t>(config.replications));
    parallel_for(occupation_times.size(), config.threads, [&](std::size_t r) {
        const PathRecord path =
            sample_path(model, state, config.base_seed, r, rate_bound);
        double occupied = 0.0;
        double mark = 0.0;
        int current = path.initial_state;
        for (std::size_t j = 0; j < path.jump_times.size(); ++j) {
            if (current == state) occupied += path.jump_times[j] - mark;
            mark = path.jump_times[j];
            current = path.states_after[j];
        }
        if (current == state) occupied += model.horizon - mark;
        occupation_times[r] = occupied;
    });

    long long in95 = 0, in90 = 0;
    for (double occ : occupation_times) {
        if (std::abs(occ - band95.center) <= band95.halfwidth) ++in95;
        if (std::abs(occ - band90.center) <= band90.halfwidth) ++in90;
    }
    const double n = static_cast<double>(config.replications);
    body["band95"] = OrderedJson{{"center", band95.center},
                                 {"halfwidth", band95.halfwidth},
                                 {"coverage", in95 / n}};
    body["band90"] = OrderedJson{{"center", band90.center},
                                 {"halfwidth", band90.halfwidth},
                                 {"coverage", in90 / n}};

    const bool passed = worst_nu_gap <= 1e-12 && in95 / n >= 0.93 && in95 / n <= 0.97;
    return finalize(std::move(body), passed, watch);
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
    switch (config.kind) {
        case ExperimentKind::expansion_error: return run_expansion_error(config);
        case ExperimentKind::second_moment: return run_second_moment(config);
        case ExperimentKind::clt: return run_clt(config);
        case ExperimentKind::rate_proxy: return run_rate_proxy(config);
        case ExperimentKind::queue_demo: return run_queue_demo(config);
    }
    throw ConfigError("unhandled experiment kind");
}

std::string report_tables_csv(const ExperimentReport& report) {
    std::string out = "epsilon,metric,value,stderr\n";
    if (!report.body.contains("per_epsilon")) return out;
    for (const auto& row : report.body.at("per_epsilon")) {
        const double eps = row.at("epsilon").get<double>();
        for (const auto& [key, value] : row.items()) {
            if (key == "epsilon" || !value.is_number()) continue;
            if (key.size() > 7 && key.substr(key.size() - 7) == "_stderr") continue;
            const std::string stderr_key = key + "_stderr";
            std::string se;
            if (row.contains(stderr_key))
                se = nlohmann::ordered_json(row.at(stderr_key)).dump();
            out += nlohmann::ordered_json(eps).dump() + "," + key + "," +
                   nlohmann::ordered_json(value).dump() + "," + se + "\n";
        }
    }
    return out;
}

}  // namespace spmc
