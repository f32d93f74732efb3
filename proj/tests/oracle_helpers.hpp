#pragma once

// Test-only reference implementations, independent of the library's own
// computation paths.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <complex>

#include "spmc/matrix_exp.hpp"
#include "spmc/rng.hpp"

namespace spmc::testing {

// Matrix exponential by scaled Taylor summation; slow but an independent
// route from the Pade implementation under test.
inline Matrix taylor_expm(const Matrix& a) {
    const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
    int scalings = 0;
    while (norm / std::ldexp(1.0, scalings) > 0.5) ++scalings;
    const Matrix scaled = a / std::ldexp(1.0, scalings);
    Matrix term = Matrix::Identity(a.rows(), a.cols());
    Matrix sum = term;
    for (int k = 1; k <= 40; ++k) {
        term = term * scaled / static_cast<double>(k);
        sum += term;
    }
    for (int k = 0; k < scalings; ++k) sum = sum * sum;
    return sum;
}

// Stationary row vector through the eigendecomposition of Q^T: the left
// null vector, normalized to sum one.
inline RowVector eigen_stationary(const Matrix& q) {
    Eigen::EigenSolver<Matrix> solver(q.transpose());
    int best = 0;
    double best_mag = std::abs(solver.eigenvalues()[0]);
    for (int i = 1; i < q.rows(); ++i) {
        const double mag = std::abs(solver.eigenvalues()[i]);
        if (mag < best_mag) {
            best = i;
            best_mag = mag;
        }
    }
    Eigen::VectorXcd v = solver.eigenvectors().col(best);
    RowVector nu(q.rows());
    for (int i = 0; i < q.rows(); ++i) nu[i] = v[i].real();
    if (nu.sum() < 0) nu = -nu;
    return nu / nu.sum();
}

// Real part of the subdominant eigenvalue (the spectral gap of a generator).
inline double spectral_gap(const Matrix& q) {
    Eigen::EigenSolver<Matrix> solver(q);
    double gap = 1e300;
    for (int i = 0; i < q.rows(); ++i) {
        const std::complex<double> lambda = solver.eigenvalues()[i];
        if (std::abs(lambda) < 1e-9) continue;
        gap = std::min(gap, -lambda.real());
    }
    return gap;
}

// Random irreducible generator with off-diagonal rates in [0.1, 2.1].
inline Matrix random_generator(int dim, PhiloxRng& rng) {
    Matrix q = Matrix::Zero(dim, dim);
    for (int i = 0; i < dim; ++i) {
        double row_sum = 0.0;
        for (int j = 0; j < dim; ++j) {
            if (i == j) continue;
            q(i, j) = 0.1 + 2.0 * rng.next_double();
            row_sum += q(i, j);
        }
        q(i, i) = -row_sum;
    }
    return q;
}

inline Vector random_weights(int dim, PhiloxRng& rng) {
    Vector f(dim);
    for (int i = 0; i < dim; ++i) f[i] = 2.0 * rng.next_double() - 1.0;
    return f;
}

}  // namespace spmc::testing
