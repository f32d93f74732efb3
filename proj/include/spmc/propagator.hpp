#pragma once

#include <vector>

#include "spmc/generator.hpp"
#include "spmc/stationary.hpp"

namespace spmc {

struct StepControl {
    // Accept once halving every internal step moves the output less than this.
    double consistency_tol = 1e-9;
    double min_step = 1e-14;
};

// Forward equation dp/dt = p G_eps(t) solved by exponential midpoint
// stepping: on each internal step [s, s+h] the state is multiplied by
// exp(h G_eps(s + h/2)). A-stable, exact for frozen generators; the nominal
// step min(eps/10, T/1000) is halved until two consecutive refinements agree.
std::vector<ProbabilityVector> forward_solve(const TwoScaleModel& model,
                                             const RowVector& p0,
                                             const std::vector<double>& grid,
                                             const StepControl& control = {});

// Transition matrix P(t0, t), rows indexed by the starting state.
Matrix transition_matrix(const TwoScaleModel& model, double t0, double t,
                         const StepControl& control = {});

// P(t0, t) for every requested t in one integration sweep.
std::vector<Matrix> transition_matrices(const TwoScaleModel& model, double t0,
                                        const std::vector<double>& times,
                                        const StepControl& control = {});

}  // namespace spmc
