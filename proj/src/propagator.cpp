#include "spmc/propagator.hpp"

#include <cmath>

#include "spmc/errors.hpp"

namespace spmc {
namespace {

void check_grid(const TwoScaleModel& model, double t0, const std::vector<double>& grid) {
    double prev = t0;
    for (double t : grid) {
        if (t < prev) throw ConfigError("output grid must be nondecreasing");
        prev = t;
    }
    if (!grid.empty() && (grid.front() < 0.0 || grid.back() > model.horizon + 1e-12))
        throw ConfigError("output grid must lie within [0, horizon]");
}

// One full sweep with nominal step h; outputs are hit exactly by dividing
// each inter-output span into equal substeps no longer than h.
std::vector<Matrix> midpoint_pass(const TwoScaleModel& model, double t0,
                                  const std::vector<double>& outputs,
                                  const Matrix& initial, double h) {
    const bool frozen = model.fast.is_constant() && model.slow.is_constant();
    Matrix state = initial;
    std::vector<Matrix> result;
    result.reserve(outputs.size());
    Matrix cached_hop;
    double cached_dt = -1.0;
    double t = t0;
    for (double target : outputs) {
        const double span = target - t;
        if (span > 0.0) {
            const int substeps = std::max(1, static_cast<int>(std::ceil(span / h)));
            const double dt = span / substeps;
            for (int k = 0; k < substeps; ++k) {
                if (frozen) {
                    if (dt != cached_dt) {
                        cached_hop = matrix_exponential(model.combined(t0) * dt);
                        cached_dt = dt;
                    }
                    state = state * cached_hop;
                } else {
                    const double mid = t + (k + 0.5) * dt;
                    state = state * matrix_exponential(model.combined(mid) * dt);
                }
            }
            t = target;
        }
        result.push_back(state);
    }
    return result;
}

double sup_difference(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, (a[i] - b[i]).cwiseAbs().maxCoeff());
    return worst;
}

std::vector<Matrix> integrate_adaptive(const TwoScaleModel& model, double t0,
                                       const std::vector<double>& outputs,
                                       const Matrix& initial,
                                       const StepControl& control) {
    check_grid(model, t0, outputs);
    if (outputs.empty()) return {};
    double h = std::min(model.epsilon / 10.0, model.horizon / 1000.0);
    if (h < control.min_step)
        throw StepUnderflowError(
            "internal step underflow; use the asymptotic expansion instead");
    std::vector<Matrix> coarse = midpoint_pass(model, t0, outputs, initial, h);
    for (;;) {
        h /= 2.0;
        if (h < control.min_step)
            throw StepUnderflowError(
                "internal step underflow; use the asymptotic expansion instead");
        std::vector<Matrix> fine = midpoint_pass(model, t0, outputs, initial, h);
        if (sup_difference(coarse, fine) < control.consistency_tol) return fine;
        coarse = std::move(fine);
    }
}

}  // namespace

std::vector<ProbabilityVector> forward_solve(const TwoScaleModel& model,
                                             const RowVector& p0,
                                             const std::vector<double>& grid,
                                             const StepControl& control) {
    if (p0.size() != model.fast.dimension())
        throw ConfigError("initial distribution has wrong dimension");
    const auto raw = integrate_adaptive(model, 0.0, grid, p0, control);
    std::vector<ProbabilityVector> result;
    result.reserve(raw.size());
    for (const auto& m : raw) result.push_back(ProbabilityVector::checked(m.row(0)));
    return result;
}

Matrix transition_matrix(const TwoScaleModel& model, double t0, double t,
                         const StepControl& control) {
    return transition_matrices(model, t0, {t}, control).front();
}

std::vector<Matrix> transition_matrices(const TwoScaleModel& model, double t0,
                                        const std::vector<double>& times,
                                        const StepControl& control) {
    if (t0 < 0.0 || t0 > model.horizon + 1e-12)
        throw ConfigError("t0 must lie within [0, horizon]");
    const int dim = model.fast.dimension();
    return integrate_adaptive(model, t0, times, Matrix::Identity(dim, dim), control);
}

}  // namespace spmc
