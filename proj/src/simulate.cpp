#include "spmc/simulate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>

#include "spmc/errors.hpp"
#include "spmc/parallel.hpp"
#include "spmc/rng.hpp"

namespace spmc {

namespace {

constexpr double kGlNode[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                               0.5384693101056831, 0.9061798459386640};
constexpr double kGlWeight[5] = {0.2369268850561891, 0.4786286704993665,
                                 0.5688888888888889, 0.4786286704993665,
                                 0.2369268850561891};

// Integral over [a, b] of sum_j nu^j(s) (f(state) - f(j)) ds.
double centered_piece(double a, double b, int state, const Vector& weights,
                      const NuEvaluator& nu) {
    const double len = b - a;
    if (len <= 0.0) return 0.0;
    auto integrand = [&](double s) {
        const RowVector nus = nu(s);
        double v = 0.0;
        for (int j = 0; j < weights.size(); ++j)
            v += nus[j] * (weights[state] - weights[j]);
        return v;
    };
    if (len < 1e-12) return integrand(0.5 * (a + b)) * len;
    const int panels = std::max(1, static_cast<int>(std::ceil(len / 0.1)));
    const double h = len / panels;
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double lo = a + p * h;
        double panel = 0.0;
        for (int g = 0; g < 5; ++g)
            panel += kGlWeight[g] * integrand(lo + (kGlNode[g] + 1.0) * h / 2.0);
        total += panel * h / 2.0;
    }
    return total;
}

}  // namespace

int PathRecord::state_at(double t) const {
    const auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
    if (it == jump_times.begin()) return initial_state;
    return states_after[static_cast<std::size_t>(it - jump_times.begin()) - 1];
}

double scan_rate_bound(const TwoScaleModel& model, int grid_points, double safety) {
    double worst = 0.0;
    for (int k = 0; k < grid_points; ++k) {
        const double t = model.horizon * k / (grid_points - 1.0);
        worst = std::max(worst, model.combined(t).diagonal().cwiseAbs().maxCoeff());
    }
    if (!(worst > 0.0)) return 1.0;  // all-zero generator still needs a finite bound
    return worst * safety;
}

PathRecord sample_path(const TwoScaleModel& model, int initial_state,
                       std::uint64_t base_seed, std::uint64_t replication,
                       double rate_bound) {
    const int dim = model.fast.dimension();
    if (initial_state < 0 || initial_state >= dim)
        throw ConfigError("initial state out of range");
    if (rate_bound <= 0.0) rate_bound = scan_rate_bound(model);

    PathRecord path;
    path.initial_state = initial_state;
    path.base_seed = base_seed;
    path.replication = replication;
    path.epsilon = model.epsilon;

    PhiloxRng rng(base_seed, replication);
    int state = initial_state;
    double t = 0.0;
    for (;;) {
        double gap = rng.next_exponential(rate_bound);
        if (gap <= 0.0) gap = std::numeric_limits<double>::min();
        t += gap;
        if (t > model.horizon) break;
        const Matrix q = model.combined(t);
        if (q.diagonal().cwiseAbs().maxCoeff() > rate_bound)
            throw RateBoundExceededError(
                "diagonal rate exceeds the scanned bound at t = " + std::to_string(t) +
                "; rescan with a finer grid");
        const double u = rng.next_double() * rate_bound;
        double cumulative = 0.0;
        int target = -1;
        for (int j = 0; j < dim; ++j) {
            if (j == state) continue;
            cumulative += q(state, j);
            if (u < cumulative) {
                target = j;
                break;
            }
        }
        if (target >= 0) {
            path.jump_times.push_back(t);
            path.states_after.push_back(target);
            state = target;
        }
    }
    return path;
}

std::vector<double> occupation(const PathRecord& path, const OccupationSpec& spec,
                               const NuEvaluator& nu) {
    const std::vector<double>& grid = spec.grid;
    std::vector<double> result(grid.size(), 0.0);
    if (grid.empty()) return result;

    double running = 0.0;
    std::size_t next_output = 0;
    double sojourn_start = 0.0;
    int state = path.initial_state;

    auto flush_outputs = [&](double sojourn_end) {
        while (next_output < grid.size() && grid[next_output] <= sojourn_end + 1e-15) {
            result[next_output] =
                running +
                centered_piece(sojourn_start, grid[next_output], state, spec.weights, nu);
            ++next_output;
        }
    };

    for (std::size_t j = 0; j < path.jump_times.size(); ++j) {
        const double jump = path.jump_times[j];
        flush_outputs(jump);
        running += centered_piece(sojourn_start, jump, state, spec.weights, nu);
        sojourn_start = jump;
        state = path.states_after[j];
    }
    // Remaining grid points fall in the final sojourn.
    while (next_output < grid.size()) {
        result[next_output] =
            running +
            centered_piece(sojourn_start, grid[next_output], state, spec.weights, nu);
        ++next_output;
    }
    return result;
}

std::vector<double> scaled_occupation(const std::vector<double>& z, double eps) {
    if (!(eps > 0.0)) throw ConfigError("epsilon must be positive");
    std::vector<double> xi(z.size());
    const double root = std::sqrt(eps);
    for (std::size_t i = 0; i < z.size(); ++i) xi[i] = z[i] / root;
    return xi;
}

MonteCarloSummary monte_carlo(const TwoScaleModel& model, const OccupationSpec& spec,
                              int replications, std::uint64_t base_seed,
                              const MonteCarloOptions& options) {
    if (replications < 1) throw ConfigError("need at least one replication");
    check_occupation_spec(spec, model.fast.dimension(), model.horizon);
    const auto t_start = std::chrono::steady_clock::now();

    const double rate_bound = scan_rate_bound(model);
    const NuInterpolant nu_cache(model.fast, model.horizon);
    const NuEvaluator nu = nu_cache.as_evaluator();

    std::vector<double> terminals(static_cast<std::size_t>(replications));
    parallel_for(static_cast<std::size_t>(replications), options.threads,
                 [&](std::size_t r) {
                     const PathRecord path = sample_path(model, options.initial_state,
                                                         base_seed, r, rate_bound);
                     const std::vector<double> z = occupation(path, spec, nu);
                     terminals[r] = z.back() / std::sqrt(model.epsilon);
                 });

    MonteCarloSummary summary;
    summary.replications = replications;
    summary.epsilon = model.epsilon;
    summary.base_seed = base_seed;
    summary.rng_name = PhiloxRng::algorithm_name();
    summary.rate_bound = rate_bound;

    // Replication-index-ordered reductions keep results schedule independent.
    double sum = 0.0, sum_sq = 0.0, sum_4 = 0.0;
    for (double x : terminals) {
        sum += x;
        sum_sq += x * x;
        sum_4 += x * x * x * x;
    }
    const double n = static_cast<double>(replications);
    summary.mean = sum / n;
    summary.second_moment = sum_sq / n;
    const double var = std::max(0.0, sum_sq / n - summary.mean * summary.mean);
    summary.mean_stderr = std::sqrt(var / n);
    const double var_sq =
        std::max(0.0, sum_4 / n - summary.second_moment * summary.second_moment);
    summary.second_moment_stderr = std::sqrt(var_sq / n);

    summary.quantile_levels = {0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99};
    std::vector<double> sorted = terminals;
    std::sort(sorted.begin(), sorted.end());
    for (double level : summary.quantile_levels) {
        const double pos = level * (n - 1.0);
        const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        summary.empirical_quantiles.push_back(sorted[lo] * (1.0 - frac) +
                                              sorted[hi] * frac);
    }

    if (options.keep_terminals) summary.terminal_xi = std::move(terminals);
    summary.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
            .count();
    return summary;
}

void write_path_csv(const std::vector<PathRecord>& paths, const std::string& file) {
    std::ofstream out(file);
    if (!out) throw ConfigError("cannot open " + file + " for writing");
    out << "rep,jump_index,time,state\n";
    for (std::size_t r = 0; r < paths.size(); ++r) {
        const auto& path = paths[r];
        out << r << ",0,0," << path.initial_state << "\n";
        for (std::size_t j = 0; j < path.jump_times.size(); ++j)
            out << r << ',' << (j + 1) << ',' << path.jump_times[j] << ','
                << path.states_after[j] << "\n";
    }
}

}  // namespace spmc
