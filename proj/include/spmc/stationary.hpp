#pragma once

#include <functional>
#include <vector>

#include "spmc/generator.hpp"

namespace spmc {

// Probability row vector: entries clamped into [0, 1] from round-off noise
// no larger than 1e-12 in magnitude, sum within 1e-10 of one.
class ProbabilityVector {
public:
    static ProbabilityVector checked(RowVector v, double negative_tol = 1e-12,
                                     double sum_tol = 1e-10);

    const RowVector& row() const { return row_; }
    double operator[](int i) const { return row_[i]; }
    int size() const { return static_cast<int>(row_.size()); }

private:
    explicit ProbabilityVector(RowVector row) : row_(std::move(row)) {}
    RowVector row_;
};

// Quasi-stationary distribution of the frozen matrix: the unique nu with
// nu Q = 0, nu 1 = 1, solved as least squares on the augmented system
// nu [1 | Q] = [1 | 0]. Entries in [-1e-8, 0) are clamped and the vector is
// renormalized; anything lower raises NegativeSolutionError.
ProbabilityVector quasi_stationary_of(const Matrix& q);
ProbabilityVector quasi_stationary(const TimeVaryingGenerator& g, double t);

struct GroupInverseBundle {
    Matrix group_inverse;        // A# with A A# = A# A = I - 1 nu
    RowVector nu;
    Matrix centering_projector;  // I - 1 nu
};

// Group inverse via the deviation-matrix identity
// A# = -[(1 nu - Q)^{-1} - 1 nu]; one dense LU solve. -A# equals the
// deviation matrix \int_0^inf (e^{Q tau} - 1 nu) dtau.
GroupInverseBundle group_inverse(const Matrix& q, const RowVector& nu);

// d(nu)/dt = -nu A'(t) A#(t), from differentiating nu(t) A(t) = 0.
RowVector nu_derivative(const TimeVaryingGenerator& g, double t);

// Composite-Simpson quadrature of the deviation matrix
// \int_0^{tau_max} (e^{Q tau} - 1 nu) dtau; the independent cross-check for
// group_inverse. step is halved until it divides tau_max evenly.
Matrix deviation_matrix_quadrature(const Matrix& q, const RowVector& nu,
                                   double tau_max, double step);

using NuEvaluator = std::function<RowVector(double)>;

// Cubic-Hermite interpolant of t -> nu(t) on [0, horizon], built from exact
// solves and exact derivatives at the nodes. Constant generators collapse to
// a single stored vector.
class NuInterpolant {
public:
    NuInterpolant(const TimeVaryingGenerator& g, double horizon, int intervals = 512);

    RowVector operator()(double t) const;
    NuEvaluator as_evaluator() const;

private:
    double horizon_;
    double step_;
    bool constant_;
    std::vector<RowVector> values_;
    std::vector<RowVector> slopes_;
};

}  // namespace spmc
