#pragma once

#include <vector>

#include "spmc/generator.hpp"
#include "spmc/stationary.hpp"

namespace spmc {

// Boundary-layer terms Psi_0..Psi_n anchored at one base point t0, stored on
// a uniform grid in the stretched time tau = (t - t0)/eps and evaluable at
// arbitrary tau. Beyond tau_max every term is numerically zero and the
// evaluator returns the zero matrix.
class LayerTerms {
public:
    double base_point() const { return t0_; }
    double tau_max() const { return tau_max_; }
    double grid_step() const { return step_; }
    int order() const { return static_cast<int>(grids_.size()) - 1; }

    Matrix psi(int k, double tau) const;
    const std::vector<Matrix>& grid(int k) const { return grids_[k]; }

    // Sup norm of the midpoint-rule residual of the layer ODE for term k,
    // measured across the grid.
    double ode_residual(int k) const;

private:
    friend class Expansion;
    // Values of every term at one off-grid tau (joint partial Runge-Kutta step).
    std::vector<Matrix> eval_all(double tau) const;

    double t0_ = 0.0;
    double tau_max_ = 0.0;
    double step_ = 0.0;
    Matrix frozen_fast_;                       // A(t0)
    std::vector<Matrix> fast_derivatives_;     // A^{(j)}(t0), j = 1..n
    std::vector<Matrix> slow_derivatives_;     // B^{(j)}(t0), j = 0..n-1
    std::vector<std::vector<Matrix>> grids_;   // [k][node]
};

struct LayerDecayFit {
    double rate;        // fitted kappa, +inf for an identically zero term
    double prefactor;
    bool degenerate;
};

// Fits log ||Psi_k(tau)||_inf against tau on [1, tau_max] by least squares.
// Throws NoDecayError when the fitted rate is not positive.
LayerDecayFit fit_layer_decay(const LayerTerms& layers, int k);

// Matched asymptotic expansion of the transition matrix: regular terms
// Phi_0(t) = 1 nu(t) and Phi_k = [Phi_{k-1}' - Phi_{k-1} B] A# for k >= 1,
// plus boundary-layer terms from the layer ODE hierarchy.
class Expansion {
public:
    Expansion(TimeVaryingGenerator fast, TimeVaryingGenerator slow, int order,
              double horizon);

    int order() const { return order_; }
    double horizon() const { return horizon_; }

    Matrix phi(int k, double t) const;
    // d(Phi_k)/dt: analytic for k = 0 via the nu derivative, fourth-order
    // central differences with step 1e-4 * horizon for k >= 1.
    Matrix phi_derivative(int k, double t) const;

    // Builds Psi_0..Psi_n at base point t0. Psi_0 nodes come from exact
    // matrix-exponential stepping; higher terms from classical Runge-Kutta
    // on the coupled layer system, step 0.01 refined until grid doubling
    // moves no node by more than 1e-8.
    LayerTerms build_layers(double t0) const;

    const TimeVaryingGenerator& fast() const { return fast_; }
    const TimeVaryingGenerator& slow() const { return slow_; }

private:
    TimeVaryingGenerator fast_;
    TimeVaryingGenerator slow_;
    int order_;
    double horizon_;
};

// Order-n approximation of P_eps(t0, t):
//   sum_k eps^k Phi_k(t) + sum_k eps^k Psi_k(t0, (t - t0)/eps).
Matrix expansion_eval(const Expansion& expansion, const LayerTerms& layers, double t,
                      double eps);

}  // namespace spmc
