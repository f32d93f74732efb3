#include "spmc/stationary.hpp"

#include <cmath>

#include "spmc/errors.hpp"

namespace spmc {

ProbabilityVector ProbabilityVector::checked(RowVector v, double negative_tol,
                                             double sum_tol) {
    for (int i = 0; i < v.size(); ++i) {
        if (v[i] < -negative_tol)
            throw NegativeSolutionError("probability entry " + std::to_string(i) +
                                        " is " + std::to_string(v[i]));
        if (v[i] < 0.0) v[i] = 0.0;
    }
    const double sum = v.sum();
    if (std::abs(sum - 1.0) > sum_tol)
        throw ConfigError("probability vector sums to " + std::to_string(sum));
    v /= sum;
    return ProbabilityVector(std::move(v));
}

ProbabilityVector quasi_stationary_of(const Matrix& q) {
    const int dim = static_cast<int>(q.rows());
    Eigen::ColPivHouseholderQR<Matrix> rank_probe(q);
    if (rank_probe.rank() < dim - 1)
        throw RankDeficientError("rank(Q) = " + std::to_string(rank_probe.rank()) +
                                 " < m0 - 1; not weakly irreducible");

    // Transposed augmented system [1 | Q]^T nu^T = e_1.
    Matrix lhs(dim + 1, dim);
    lhs.row(0).setOnes();
    lhs.bottomRows(dim) = q.transpose();
    Vector rhs = Vector::Zero(dim + 1);
    rhs[0] = 1.0;
    const Vector solution = lhs.colPivHouseholderQr().solve(rhs);

    RowVector nu = solution.transpose();
    const double residual = (nu * q).cwiseAbs().maxCoeff();
    if (residual > 1e-10)
        throw RankDeficientError("augmented solve residual " + std::to_string(residual));
    for (int i = 0; i < dim; ++i) {
        if (nu[i] < -1e-8)
            throw NegativeSolutionError("quasi-stationary entry " + std::to_string(i) +
                                        " is " + std::to_string(nu[i]));
        if (nu[i] < 0.0) nu[i] = 0.0;
    }
    nu /= nu.sum();
    return ProbabilityVector::checked(std::move(nu));
}

ProbabilityVector quasi_stationary(const TimeVaryingGenerator& g, double t) {
    return quasi_stationary_of(g.at(t));
}

GroupInverseBundle group_inverse(const Matrix& q, const RowVector& nu) {
    const int dim = static_cast<int>(q.rows());
    const Matrix one_nu = Matrix::Ones(dim, 1) * nu;
    const Matrix system = one_nu - q;
    Eigen::PartialPivLU<Matrix> lu(system);
    const double rcond = lu.rcond();
    if (!(rcond > 1e-12))
        throw SingularSystemError("cond(1 nu - Q) about " +
                                  std::to_string(rcond > 0 ? 1.0 / rcond : 0.0));
    const Matrix fundamental = lu.solve(Matrix::Identity(dim, dim));
    GroupInverseBundle bundle;
    bundle.nu = nu;
    bundle.centering_projector = Matrix::Identity(dim, dim) - one_nu;
    bundle.group_inverse = one_nu - fundamental;
    return bundle;
}

RowVector nu_derivative(const TimeVaryingGenerator& g, double t) {
    const Matrix q = g.at(t);
    const RowVector nu = quasi_stationary_of(q).row();
    const GroupInverseBundle bundle = group_inverse(q, nu);
    return -(nu * g.derivative(1, t)) * bundle.group_inverse;
}

Matrix deviation_matrix_quadrature(const Matrix& q, const RowVector& nu,
                                   double tau_max, double step) {
    const int dim = static_cast<int>(q.rows());
    const Matrix one_nu = Matrix::Ones(dim, 1) * nu;
    int panels = static_cast<int>(std::ceil(tau_max / step));
    if (panels % 2 == 1) ++panels;
    const double h = tau_max / panels;
    const Matrix hop = matrix_exponential(q * h);

    // Simpson weights 1,4,2,4,...,4,1 over nodes e^{Q k h} - 1 nu.
    Matrix current = Matrix::Identity(dim, dim);
    Matrix acc = current - one_nu;
    for (int k = 1; k < panels; ++k) {
        current = current * hop;
        acc += (k % 2 == 1 ? 4.0 : 2.0) * (current - one_nu);
    }
    current = current * hop;
    acc += current - one_nu;
    return acc * (h / 3.0);
}

NuInterpolant::NuInterpolant(const TimeVaryingGenerator& g, double horizon,
                             int intervals) {
    horizon_ = horizon;
    constant_ = g.is_constant();
    if (constant_) intervals = 1;
    step_ = horizon / intervals;
    values_.reserve(intervals + 1);
    slopes_.reserve(intervals + 1);
    for (int k = 0; k <= intervals; ++k) {
        const double t = k * step_;
        values_.push_back(quasi_stationary(g, t).row());
        slopes_.push_back(constant_ ? RowVector::Zero(g.dimension())
                                    : nu_derivative(g, t));
    }
}

RowVector NuInterpolant::operator()(double t) const {
    if (constant_) return values_.front();
    double x = t / step_;
    int cell = static_cast<int>(std::floor(x));
    if (cell < 0) cell = 0;
    if (cell >= static_cast<int>(values_.size()) - 1)
        cell = static_cast<int>(values_.size()) - 2;
    const double s = x - cell;
    const double h = step_;
    const double s2 = s * s;
    const double s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1;
    const double h10 = s3 - 2 * s2 + s;
    const double h01 = -2 * s3 + 3 * s2;
    const double h11 = s3 - s2;
    return h00 * values_[cell] + h10 * h * slopes_[cell] + h01 * values_[cell + 1] +
           h11 * h * slopes_[cell + 1];
}

NuEvaluator NuInterpolant::as_evaluator() const {
    return [copy = *this](double t) { return copy(t); };
}

}  // namespace spmc
