#pragma once

#include <Eigen/Dense>

namespace spmc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

// Dense matrix exponential by scaling-and-squaring with diagonal Pade
// approximants, degree chosen from the 1-norm (Higham 2005). Accurate to
// ~1e-13 relative for the moderate-norm generators handled here.
Matrix matrix_exponential(const Matrix& a);

}  // namespace spmc
