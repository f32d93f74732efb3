#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spmc/diffusion.hpp"
#include "spmc/generator.hpp"
#include "spmc/stationary.hpp"

namespace spmc {

// One realized trajectory of the chain: jump times with post-jump states,
// plus the seed pair that reproduces it. States are 0-based indices.
struct PathRecord {
    int initial_state = 0;
    std::vector<double> jump_times;
    std::vector<int> states_after;
    std::uint64_t base_seed = 0;
    std::uint64_t replication = 0;
    double epsilon = 0.0;

    int state_at(double t) const;
};

// Uniform bound on the total jump rate, from a dense scan of the diagonal of
// G_eps over [0, horizon] inflated by the safety factor.
double scan_rate_bound(const TwoScaleModel& model, int grid_points = 10000,
                       double safety = 1.05);

// Statistically exact sampling by thinning: candidate events arrive at the
// constant rate bound; a candidate at time s in state i moves to j != i with
// probability g^{ij}(s)/bound and otherwise stays. Raises
// RateBoundExceededError if a sampled diagonal exceeds the bound.
PathRecord sample_path(const TwoScaleModel& model, int initial_state,
                       std::uint64_t base_seed, std::uint64_t replication,
                       double rate_bound = 0.0);

// Centered occupation functional z(t) on the spec grid. The quasi-stationary
// average is removed inside the integrand as sum_j nu^j(s) (f(i) - f(j)), so
// a constant weight vector yields exactly zero. Per-sojourn five-point
// Gauss-Legendre panels (panel length capped at 0.1); sojourns shorter than
// 1e-12 use midpoint times length.
std::vector<double> occupation(const PathRecord& path, const OccupationSpec& spec,
                               const NuEvaluator& nu);

std::vector<double> scaled_occupation(const std::vector<double>& z, double eps);

struct MonteCarloSummary {
    int replications = 0;
    double epsilon = 0.0;
    std::uint64_t base_seed = 0;
    std::string rng_name;
    double rate_bound = 0.0;
    // Terminal values xi_eps(T), one per replication, in replication order.
    std::vector<double> terminal_xi;
    double mean = 0.0;
    double mean_stderr = 0.0;
    double second_moment = 0.0;
    double second_moment_stderr = 0.0;
    std::vector<double> quantile_levels;
    std::vector<double> empirical_quantiles;
    double elapsed_seconds = 0.0;
};

struct MonteCarloOptions {
    int threads = 0;          // 0 = hardware concurrency
    int initial_state = 0;
    bool keep_terminals = true;
};

// N independent replications; replication r draws from the (base_seed, r)
// Philox stream, and every reduction runs in replication order so the
// summary is bit-identical for any thread count.
MonteCarloSummary monte_carlo(const TwoScaleModel& model, const OccupationSpec& spec,
                              int replications, std::uint64_t base_seed,
                              const MonteCarloOptions& options = {});

// Optional path dump, columns rep,jump_index,time,state.
void write_path_csv(const std::vector<PathRecord>& paths, const std::string& file);

}  // namespace spmc
