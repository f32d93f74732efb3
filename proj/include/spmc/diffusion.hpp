#pragma once

#include <vector>

#include "spmc/generator.hpp"
#include "spmc/stationary.hpp"

namespace spmc {

struct PathRecord;

// Weight vector F over states plus the evaluation grid of the occupation
// functional z(t) = int_0^t [f(state(s)) - sum_i f(i) nu^i(s)] ds.
struct OccupationSpec {
    Vector weights;
    std::vector<double> grid;
};

void check_occupation_spec(const OccupationSpec& spec, int dimension, double horizon);

// Variance rate of the limit diffusion, in closed form:
//   sigma^2(s) = -2 (nu o F) A#(s) F,
// using int_0^inf Psi_0(s, tau) dtau = -A#(s). Values in [-1e-8, 0) are
// numerical zeros and are clamped; anything below -1e-8 means the group
// inverse is broken and raises an error.
double sigma_squared(const TimeVaryingGenerator& fast, const Vector& weights, double s);

// The same quantity evaluated literally: composite-Simpson quadrature of the
// psi_0 entry integrals plugged into the double sum
//   sum_ij f(i) f(j) [nu^i int psi0^{ij} + nu^j int psi0^{ji}].
// tau_max <= 0 selects the first point where ||Psi_0|| < 1e-12 (capped 200).
double sigma_squared_quadrature(const TimeVaryingGenerator& fast, const Vector& weights,
                                double s, double tau_max = 0.0, double step = 1e-3);

// sigma^2 sampled on a grid together with its running integral, the
// cumulative variance by adaptive Simpson to absolute tolerance 1e-9.
class VarianceProfile {
public:
    static VarianceProfile build(const TimeVaryingGenerator& fast, const Vector& weights,
                                 const std::vector<double>& grid,
                                 double abs_tol = 1e-9);

    const std::vector<double>& grid() const { return grid_; }
    const std::vector<double>& rate() const { return rate_; }
    const std::vector<double>& cumulative() const { return cumulative_; }
    double total() const { return cumulative_.back(); }
    int clamp_count() const { return clamp_count_; }

private:
    std::vector<double> grid_, rate_, cumulative_;
    int clamp_count_ = 0;
};

// Deterministic initial-layer bias
//   X_eps(t) = int_0^t row_{x0}(P_eps(0, s) - Phi_0(s)) F ds,
// computed from the exact propagator (never the expansion) with five-point
// Gauss-Legendre panels no longer than eps/10.
double initial_layer_bias(const TwoScaleModel& model, int initial_state,
                          const Vector& weights, double t);

// X_eps at every grid point in a single sweep.
std::vector<double> initial_layer_bias_profile(const TwoScaleModel& model,
                                               int initial_state, const Vector& weights,
                                               const std::vector<double>& grid);

// Martingale part of the occupation decomposition on the spec grid:
//   M(t) = z(t) - X_eps(t).
std::vector<double> martingale_component(const PathRecord& path,
                                         const OccupationSpec& spec,
                                         const NuEvaluator& nu,
                                         const TwoScaleModel& model);

}  // namespace spmc
