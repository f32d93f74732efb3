#include "spmc/expansion.hpp"

#include <cmath>
#include <limits>

#include "spmc/errors.hpp"

namespace spmc {

namespace {

double factorial(int n) {
    double f = 1.0;
    for (int k = 2; k <= n; ++k) f *= k;
    return f;
}

// Forcing R_k(t0, tau) of the layer hierarchy, built from lower-order layer
// values at the same tau:
//   R_k = sum_{i=0}^{k-1} Psi_{k-1-i} (tau^{i+1}/(i+1)! A^{(i+1)}
//                                      + tau^i/i! B^{(i)}).
Matrix layer_forcing(int k, double tau, const std::vector<Matrix>& psi_values,
                     const std::vector<Matrix>& fast_derivs,
                     const std::vector<Matrix>& slow_derivs) {
    const int dim = static_cast<int>(psi_values[0].rows());
    Matrix r = Matrix::Zero(dim, dim);
    double tau_pow = 1.0;  // tau^i
    for (int i = 0; i <= k - 1; ++i) {
        const Matrix coeff = (tau_pow * tau / factorial(i + 1)) * fast_derivs[i] +
                             (tau_pow / factorial(i)) * slow_derivs[i];
        r += psi_values[k - 1 - i] * coeff;
        tau_pow *= tau;
    }
    return r;
}

struct LayerGrids {
    std::vector<std::vector<Matrix>> grids;
};

// Integrates the coupled layer system over [0, tau_max] with fixed step h.
// Psi_0 nodes are exact matrix-exponential products; Psi_k (k >= 1) advance
// by classical Runge-Kutta with Psi_0 evaluated exactly at the half nodes.
LayerGrids integrate_layers(const Matrix& frozen_fast,
                            const std::vector<Matrix>& fast_derivs,
                            const std::vector<Matrix>& slow_derivs,
                            const std::vector<Matrix>& initial_values, double tau_max,
                            double h) {
    const int order = static_cast<int>(initial_values.size()) - 1;
    const int nodes = static_cast<int>(std::llround(tau_max / h)) + 1;
    const Matrix hop_full = matrix_exponential(frozen_fast * h);
    const Matrix hop_half = matrix_exponential(frozen_fast * (h / 2.0));

    LayerGrids out;
    out.grids.assign(order + 1, {});
    for (int k = 0; k <= order; ++k) {
        out.grids[k].reserve(nodes);
        out.grids[k].push_back(initial_values[k]);
    }

    std::vector<Matrix> state = initial_values;
    for (int node = 1; node < nodes; ++node) {
        const double tau = (node - 1) * h;
        const Matrix psi0_half = state[0] * hop_half;
        const Matrix psi0_next = state[0] * hop_full;
        if (order >= 1) {
            // One RK4 step for the coupled terms k = 1..order.
            std::vector<Matrix> k1(order + 1), k2(order + 1), k3(order + 1),
                k4(order + 1);
            std::vector<Matrix> stage(order + 1);

            auto rhs = [&](const std::vector<Matrix>& values, double at_tau,
                           int k) -> Matrix {
                return values[k] * frozen_fast +
                       layer_forcing(k, at_tau, values, fast_derivs, slow_derivs);
            };

            stage = state;
            for (int k = 1; k <= order; ++k) k1[k] = rhs(stage, tau, k);

            stage[0] = psi0_half;
            for (int k = 1; k <= order; ++k) stage[k] = state[k] + (h / 2.0) * k1[k];
            for (int k = 1; k <= order; ++k) k2[k] = rhs(stage, tau + h / 2.0, k);

            for (int k = 1; k <= order; ++k) stage[k] = state[k] + (h / 2.0) * k2[k];
            for (int k = 1; k <= order; ++k) k3[k] = rhs(stage, tau + h / 2.0, k);

            stage[0] = psi0_next;
            for (int k = 1; k <= order; ++k) stage[k] = state[k] + h * k3[k];
            for (int k = 1; k <= order; ++k) k4[k] = rhs(stage, tau + h, k);

            for (int k = 1; k <= order; ++k)
                state[k] += (h / 6.0) * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
        }
        state[0] = psi0_next;
        for (int k = 0; k <= order; ++k) out.grids[k].push_back(state[k]);
    }
    return out;
}

double grids_difference(const LayerGrids& coarse, const LayerGrids& fine) {
    // Fine grid halves the step, so coarse node j sits at fine node 2j.
    double worst = 0.0;
    for (std::size_t k = 0; k < coarse.grids.size(); ++k)
        for (std::size_t j = 0; j < coarse.grids[k].size(); ++j)
            worst = std::max(worst, (coarse.grids[k][j] - fine.grids[k][2 * j])
                                        .cwiseAbs()
                                        .maxCoeff());
    return worst;
}

}  // namespace

Matrix LayerTerms::psi(int k, double tau) const {
    if (tau < 0.0) throw ConfigError("layer terms are defined for tau >= 0");
    const int dim = static_cast<int>(frozen_fast_.rows());
    if (tau >= tau_max_) return Matrix::Zero(dim, dim);
    const int node = static_cast<int>(std::floor(tau / step_));
    const double offset = tau - node * step_;
    if (offset < 1e-14) return grids_[k][node];
    return eval_all(tau)[k];
}

std::vector<Matrix> LayerTerms::eval_all(double tau) const {
    const int order = this->order();
    const int node = static_cast<int>(std::floor(tau / step_));
    const double tau0 = node * step_;
    const double h = tau - tau0;

    std::vector<Matrix> state(order + 1);
    for (int k = 0; k <= order; ++k) state[k] = grids_[k][node];
    const Matrix hop_half = matrix_exponential(frozen_fast_ * (h / 2.0));
    const Matrix psi0_half = state[0] * hop_half;
    const Matrix psi0_next = psi0_half * hop_half;

    if (order >= 1) {
        std::vector<Matrix> k1(order + 1), k2(order + 1), k3(order + 1), k4(order + 1);
        std::vector<Matrix> stage(order + 1);
        auto rhs = [&](const std::vector<Matrix>& values, double at_tau,
                       int k) -> Matrix {
            return values[k] * frozen_fast_ +
                   layer_forcing(k, at_tau, values, fast_derivatives_, slow_derivatives_);
        };
        stage = state;
        for (int k = 1; k <= order; ++k) k1[k] = rhs(stage, tau0, k);
        stage[0] = psi0_half;
        for (int k = 1; k <= order; ++k) stage[k] = state[k] + (h / 2.0) * k1[k];
        for (int k = 1; k <= order; ++k) k2[k] = rhs(stage, tau0 + h / 2.0, k);
        for (int k = 1; k <= order; ++k) stage[k] = state[k] + (h / 2.0) * k2[k];
        for (int k = 1; k <= order; ++k) k3[k] = rhs(stage, tau0 + h / 2.0, k);
        stage[0] = psi0_next;
        for (int k = 1; k <= order; ++k) stage[k] = state[k] + h * k3[k];
        for (int k = 1; k <= order; ++k) k4[k] = rhs(stage, tau0 + h, k);
        for (int k = 1; k <= order; ++k)
            state[k] += (h / 6.0) * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
    }
    state[0] = psi0_next;
    return state;
}

double LayerTerms::ode_residual(int k) const {
    // Midpoint check with a short probe step: both probe values start from
    // the same stored node, so their shared integration offset cancels in
    // the difference quotient.
    const double probe = 1e-4;
    double worst = 0.0;
    const std::size_t nodes = grids_[k].size();
    for (std::size_t j = 0; j + 1 < nodes; j += std::max<std::size_t>(1, nodes / 200)) {
        const double tau_lo = j * step_ + 0.25 * step_;
        const double tau_hi = tau_lo + probe;
        const auto lo = eval_all(tau_lo);
        const auto hi = eval_all(tau_hi);
        const auto mid = eval_all(tau_lo + probe / 2.0);
        Matrix rhs = mid[k] * frozen_fast_;
        if (k >= 1)
            rhs += layer_forcing(k, tau_lo + probe / 2.0, mid, fast_derivatives_,
                                 slow_derivatives_);
        const Matrix slope = (hi[k] - lo[k]) / probe;
        worst = std::max(worst, (slope - rhs).cwiseAbs().maxCoeff());
    }
    return worst;
}

LayerDecayFit fit_layer_decay(const LayerTerms& layers, int k) {
    std::vector<double> taus, lognorms;
    const auto& grid = layers.grid(k);
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const double tau = j * layers.grid_step();
        if (tau < 1.0) continue;
        const double norm = grid[j].cwiseAbs().rowwise().sum().maxCoeff();
        if (norm < 1e-250) continue;
        taus.push_back(tau);
        lognorms.push_back(std::log(norm));
    }
    if (taus.size() < 3) return {std::numeric_limits<double>::infinity(), 0.0, true};

    const double n = static_cast<double>(taus.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < taus.size(); ++i) {
        sx += taus[i];
        sy += lognorms[i];
        sxx += taus[i] * taus[i];
        sxy += taus[i] * lognorms[i];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double intercept = (sy - slope * sx) / n;
    if (!(slope < 0.0))
        throw NoDecayError("layer term " + std::to_string(k) + " shows no decay");
    return {-slope, std::exp(intercept), false};
}

Expansion::Expansion(TimeVaryingGenerator fast, TimeVaryingGenerator slow, int order,
                     double horizon)
    : fast_(std::move(fast)), slow_(std::move(slow)), order_(order), horizon_(horizon) {
    if (order_ < 0) throw ConfigError("expansion order must be >= 0");
    if (fast_.dimension() != slow_.dimension())
        throw ConfigError("fast and slow generators must share a dimension");
}

Matrix Expansion::phi(int k, double t) const {
    const int dim = fast_.dimension();
    if (k == 0) {
        const RowVector nu = quasi_stationary(fast_, t).row();
        return Matrix::Ones(dim, 1) * nu;
    }
    const Matrix forcing = phi_derivative(k - 1, t) - phi(k - 1, t) * slow_.at(t);
    const double worst_row_sum = forcing.rowwise().sum().cwiseAbs().maxCoeff();
    if (worst_row_sum > 1e-8)
        throw SolvabilityViolationError("Phi_" + std::to_string(k) +
                                        " forcing has row sums up to " +
                                        std::to_string(worst_row_sum));
    const Matrix q = fast_.at(t);
    const RowVector nu = quasi_stationary_of(q).row();
    return forcing * group_inverse(q, nu).group_inverse;
}

Matrix Expansion::phi_derivative(int k, double t) const {
    if (k == 0) {
        const int dim = fast_.dimension();
        return Matrix::Ones(dim, 1) * nu_derivative(fast_, t);
    }
    // Fourth-order central stencil, shifted to stay inside [0, horizon].
    const double h = 1e-4 * horizon_;
    double base = t;
    if (base < 2.0 * h) base = 2.0 * h;
    if (base > horizon_ - 2.0 * h) base = horizon_ - 2.0 * h;
    const Matrix fm2 = phi(k, base - 2.0 * h);
    const Matrix fm1 = phi(k, base - h);
    const Matrix fp1 = phi(k, base + h);
    const Matrix fp2 = phi(k, base + 2.0 * h);
    return (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * h);
}

LayerTerms Expansion::build_layers(double t0) const {
    LayerTerms layers;
    layers.t0_ = t0;
    layers.frozen_fast_ = fast_.at(t0);
    for (int j = 1; j <= order_; ++j)
        layers.fast_derivatives_.push_back(fast_.derivative(j, t0));
    if (order_ >= 1) layers.slow_derivatives_.push_back(slow_.at(t0));
    for (int j = 1; j <= order_ - 1; ++j)
        layers.slow_derivatives_.push_back(slow_.derivative(j, t0));

    const int dim = fast_.dimension();
    std::vector<Matrix> initial(order_ + 1);
    initial[0] = Matrix::Identity(dim, dim) - phi(0, t0);
    for (int k = 1; k <= order_; ++k) initial[k] = -phi(k, t0);

    // tau_max: first point where Psi_0 drops below 1e-12, capped at 200.
    const double probe_step = 0.5;
    const Matrix probe_hop = matrix_exponential(layers.frozen_fast_ * probe_step);
    Matrix probe = initial[0];
    double tau_max = 0.0;
    while (probe.cwiseAbs().rowwise().sum().maxCoeff() >= 1e-12 && tau_max < 200.0) {
        probe = probe * probe_hop;
        tau_max += probe_step;
    }
    layers.tau_max_ = std::max(tau_max, 2.0);

    double h = 0.01;
    LayerGrids coarse = integrate_layers(layers.frozen_fast_, layers.fast_derivatives_,
                                         layers.slow_derivatives_, initial,
                                         layers.tau_max_, h);
    for (;;) {
        const double h_fine = h / 2.0;
        LayerGrids fine = integrate_layers(layers.frozen_fast_, layers.fast_derivatives_,
                                           layers.slow_derivatives_, initial,
                                           layers.tau_max_, h_fine);
        const double diff = grids_difference(coarse, fine);
        coarse = std::move(fine);
        h = h_fine;
        if (diff < 1e-8) break;
        if (h < 1e-4)
            throw NoDecayError("layer grids failed to converge under refinement");
    }
    layers.step_ = h;
    layers.grids_ = std::move(coarse.grids);

    for (int k = 0; k <= order_; ++k) {
        const Matrix& tail = layers.grids_[k].back();
        const double tail_norm = tail.cwiseAbs().rowwise().sum().maxCoeff();
        if (tail_norm > 1e-6)
            throw NoDecayError("Psi_" + std::to_string(k) + " tail norm " +
                               std::to_string(tail_norm) + " at tau_max");
        for (const Matrix& node : layers.grids_[k]) {
            if (node.rowwise().sum().cwiseAbs().maxCoeff() > 1e-9)
                throw Error("layer term row sums drifted from zero");
        }
    }
    return layers;
}

Matrix expansion_eval(const Expansion& expansion, const LayerTerms& layers, double t,
                      double eps) {
    if (t < layers.base_point())
        throw ConfigError("expansion evaluated before its base point");
    const double tau = (t - layers.base_point()) / eps;
    Matrix acc = expansion.phi(0, t) + layers.psi(0, tau);
    double eps_pow = 1.0;
    for (int k = 1; k <= expansion.order(); ++k) {
        eps_pow *= eps;
        acc += eps_pow * (expansion.phi(k, t) + layers.psi(k, tau));
    }
    return acc;
}

}  // namespace spmc
