#pragma once

#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "spmc/generator.hpp"
#include "spmc/stationary.hpp"

namespace spmc {

// Finite-capacity birth-death queue with separable time modulation:
// birth rate lambda(t) * lambda_j out of state j < capacity, death rate
// mu(t) * mu_j out of state j >= 1. States 0..capacity map to indices
// 0..capacity, so the generator has dimension capacity + 1.
struct QueueModel {
    int capacity = 0;
    std::vector<double> lambda_base;   // lambda_0 .. lambda_{m0-1}
    std::vector<double> mu_base;       // mu_1 .. mu_{m0}
    std::vector<double> lambda_mod_poly = {1.0};
    std::vector<double> mu_mod_poly = {1.0};

    void validate(double horizon) const;

    double lambda_mod(double t) const;
    double mu_mod(double t) const;

    // Tridiagonal generator with analytic polynomial modulation.
    TimeVaryingGenerator build_generator() const;

    // Closed-form quasi-stationary distribution,
    //   nu^j(t) proportional to (lambda(t)/mu(t))^j prod_{k<j} lambda_k/mu_{k+1},
    // which satisfies detailed balance with the built generator.
    ProbabilityVector nu_closed_form(double t) const;
};

QueueModel queue_from_json(const nlohmann::json& spec);
nlohmann::json queue_to_json(const QueueModel& q);

// Gaussian band for the occupation time of one state on [0, t]:
// center int_0^t nu^i(s) ds, halfwidth z_level sqrt(eps int_0^t sigma^2(s) ds)
// with the single-state variance rate from the diffusion limit.
struct OccupationBand {
    double center;
    double halfwidth;
};

OccupationBand queue_occupation_band(const QueueModel& q, int state, double eps,
                                     double t, double level);

}  // namespace spmc
