#include "spmc/diffusion.hpp"

#include <cmath>

#include "spmc/errors.hpp"
#include "spmc/matrix_exp.hpp"
#include "spmc/simulate.hpp"

namespace spmc {

namespace {

constexpr double kClampFloor = -1e-8;

// Gauss-Legendre nodes/weights on [-1, 1], order 5.
constexpr double kGlNode[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                               0.5384693101056831, 0.9061798459386640};
constexpr double kGlWeight[5] = {0.2369268850561891, 0.4786286704993665,
                                 0.5688888888888889, 0.4786286704993665,
                                 0.2369268850561891};

double clamp_variance_rate(double raw, int* clamp_count) {
    if (raw >= 0.0) return raw;
    if (raw < kClampFloor)
        throw Error("sigma^2 clamp of " + std::to_string(raw) +
                    " exceeds 1e-8; group inverse is broken");
    if (clamp_count) ++(*clamp_count);
    return 0.0;
}

double sigma_squared_raw(const TimeVaryingGenerator& fast, const Vector& weights,
                         double s) {
    const Matrix q = fast.at(s);
    const RowVector nu = quasi_stationary_of(q).row();
    const Matrix sharp = group_inverse(q, nu).group_inverse;
    // Shifting the weights by a constant leaves the value unchanged
    // (A# 1 = 0 and nu A# = 0) and makes constant vectors exactly zero.
    const Vector shifted = weights.array() - weights[0];
    const RowVector nu_weighted = nu.cwiseProduct(shifted.transpose());
    return -2.0 * (nu_weighted * sharp * shifted).value();
}

struct AdaptiveSimpson {
    const std::function<double(double)>& f;
    double tol;
    int depth_limit = 40;

    double simpson(double a, double fa, double fm, double b, double fb) const {
        return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    }

    double recurse(double a, double fa, double m, double fm, double b, double fb,
                   double whole, double local_tol, int depth) const {
        const double lm = 0.5 * (a + m);
        const double rm = 0.5 * (m + b);
        const double flm = f(lm);
        const double frm = f(rm);
        const double left = simpson(a, fa, flm, m, fm);
        const double right = simpson(m, fm, frm, b, fb);
        const double delta = left + right - whole;
        if (depth >= depth_limit || std::abs(delta) <= 15.0 * local_tol)
            return left + right + delta / 15.0;
        return recurse(a, fa, lm, flm, m, fm, left, local_tol / 2.0, depth + 1) +
               recurse(m, fm, rm, frm, b, fb, right, local_tol / 2.0, depth + 1);
    }

    double integrate(double a, double b) const {
        if (b <= a) return 0.0;
        const double m = 0.5 * (a + b);
        const double fa = f(a), fm = f(m), fb = f(b);
        return recurse(a, fa, m, fm, b, fb, simpson(a, fa, fm, b, fb), tol, 0);
    }
};

}  // namespace

void check_occupation_spec(const OccupationSpec& spec, int dimension, double horizon) {
    if (spec.weights.size() != dimension)
        throw ConfigError("weight vector length must equal the state count");
    if (!spec.weights.allFinite()) throw ConfigError("weights must be finite");
    if (spec.grid.empty()) throw ConfigError("evaluation grid must be nonempty");
    double prev = 0.0;
    for (double t : spec.grid) {
        if (t < prev) throw ConfigError("evaluation grid must be nondecreasing");
        prev = t;
    }
    if (spec.grid.front() < 0.0 || spec.grid.back() > horizon + 1e-12)
        throw ConfigError("evaluation grid must lie within [0, horizon]");
}

double sigma_squared(const TimeVaryingGenerator& fast, const Vector& weights,
                     double s) {
    return clamp_variance_rate(sigma_squared_raw(fast, weights, s), nullptr);
}

double sigma_squared_quadrature(const TimeVaryingGenerator& fast, const Vector& weights,
                                double s, double tau_max, double step) {
    const Matrix q = fast.at(s);
    const int dim = static_cast<int>(q.rows());
    const RowVector nu = quasi_stationary_of(q).row();
    const Matrix psi0_init = Matrix::Identity(dim, dim) - Matrix::Ones(dim, 1) * nu;

    if (tau_max <= 0.0) {
        const double probe_step = 0.5;
        const Matrix hop = matrix_exponential(q * probe_step);
        Matrix probe = psi0_init;
        tau_max = 0.0;
        while (probe.cwiseAbs().rowwise().sum().maxCoeff() >= 1e-12 && tau_max < 200.0) {
            probe = probe * hop;
            tau_max += probe_step;
        }
        tau_max = std::max(tau_max, 2.0);
    }

    // Entrywise Simpson quadrature of int_0^{tau_max} Psi_0(s, tau) dtau,
    // marching the exact layer solution node to node.
    int panels = static_cast<int>(std::ceil(tau_max / step));
    if (panels % 2 == 1) ++panels;
    const double h = tau_max / panels;
    const Matrix hop = matrix_exponential(q * h);
    Matrix node = psi0_init;
    Matrix acc = node;
    for (int k = 1; k < panels; ++k) {
        node = node * hop;
        acc += (k % 2 == 1 ? 4.0 : 2.0) * node;
    }
    node = node * hop;
    if (node.cwiseAbs().rowwise().sum().maxCoeff() > 1e-6)
        throw NoDecayError("Psi_0 tail above 1e-6 at tau_max; enlarge tau_max");
    acc += node;
    const Matrix layer_integral = acc * (h / 3.0);

    double total = 0.0;
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j)
            total += weights[i] * weights[j] *
                     (nu[i] * layer_integral(i, j) + nu[j] * layer_integral(j, i));
    return clamp_variance_rate(total, nullptr);
}

VarianceProfile VarianceProfile::build(const TimeVaryingGenerator& fast,
                                       const Vector& weights,
                                       const std::vector<double>& grid,
                                       double abs_tol) {
    if (grid.empty() || grid.front() < 0.0)
        throw ConfigError("variance profile grid must start at or after 0");
    VarianceProfile profile;
    profile.grid_ = grid;
    profile.rate_.reserve(grid.size());
    int clamps = 0;
    for (double s : grid)
        profile.rate_.push_back(
            clamp_variance_rate(sigma_squared_raw(fast, weights, s), &clamps));

    const std::function<double(double)> rate_fn = [&](double s) {
        return clamp_variance_rate(sigma_squared_raw(fast, weights, s), &clamps);
    };
    const double span = std::max(grid.back() - grid.front(), 1e-300);
    profile.cumulative_.reserve(grid.size());
    double running = 0.0;
    // Leading segment [0, grid.front()] so cumulative(t) = int_0^t.
    if (grid.front() > 0.0) {
        AdaptiveSimpson quad{rate_fn, abs_tol * 0.5};
        running += quad.integrate(0.0, grid.front());
    }
    profile.cumulative_.push_back(running);
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const double seg_tol =
            abs_tol * std::max((grid[i] - grid[i - 1]) / span, 1e-6);
        AdaptiveSimpson quad{rate_fn, seg_tol};
        const double increment = quad.integrate(grid[i - 1], grid[i]);
        running += std::max(increment, 0.0);
        profile.cumulative_.push_back(running);
    }
    profile.clamp_count_ = clamps;
    return profile;
}

std::vector<double> initial_layer_bias_profile(const TwoScaleModel& model,
                                               int initial_state, const Vector& weights,
                                               const std::vector<double>& grid) {
    const int dim = model.fast.dimension();
    if (initial_state < 0 || initial_state >= dim)
        throw ConfigError("initial state out of range");
    double prev = 0.0;
    for (double t : grid) {
        if (t < prev) throw ConfigError("grid must be nondecreasing");
        prev = t;
    }
    if (!grid.empty() && grid.back() > model.horizon + 1e-12)
        throw ConfigError("grid must lie within [0, horizon]");

    const NuInterpolant nu(model.fast, model.horizon);
    const bool frozen = model.fast.is_constant() && model.slow.is_constant();

    RowVector p = RowVector::Zero(dim);
    p[initial_state] = 1.0;
    std::vector<double> result;
    result.reserve(grid.size());

    auto advance = [&](RowVector& state, double from, double to) {
        // Exponential midpoint over one short hop (exact when frozen).
        const double dt = to - from;
        if (dt <= 0.0) return;
        const double mid = frozen ? 0.0 : from + dt / 2.0;
        state = state * matrix_exponential(model.combined(mid) * dt);
    };

    // Shifting the weights by f_0 leaves the integral unchanged (both p and
    // nu carry unit mass) and makes constant weight vectors integrate to an
    // exact zero.
    const double weight_origin = weights[0];
    auto centered_weight_sum = [&](const RowVector& state, double s) {
        const RowVector nus = nu(s);
        double v = 0.0;
        for (int j = 0; j < dim; ++j)
            v += (state[j] - nus[j]) * (weights[j] - weight_origin);
        return v;
    };

    const double h = model.epsilon / 10.0;
    double t_now = 0.0;
    double integral = 0.0;
    for (double target : grid) {
        const double span = target - t_now;
        if (span > 0.0) {
            const int substeps = std::max(1, static_cast<int>(std::ceil(span / h)));
            const double dt = span / substeps;
            for (int k = 0; k < substeps; ++k) {
                const double a = t_now + k * dt;
                double cursor = a;
                double panel = 0.0;
                for (int g = 0; g < 5; ++g) {
                    const double s = a + (kGlNode[g] + 1.0) * dt / 2.0;
                    advance(p, cursor, s);
                    cursor = s;
                    panel += kGlWeight[g] * centered_weight_sum(p, s);
                }
                advance(p, cursor, a + dt);
                integral += panel * dt / 2.0;
            }
            t_now = target;
        }
        result.push_back(integral);
    }
    return result;
}

double initial_layer_bias(const TwoScaleModel& model, int initial_state,
                          const Vector& weights, double t) {
    return initial_layer_bias_profile(model, initial_state, weights, {t}).front();
}

std::vector<double> martingale_component(const PathRecord& path,
                                         const OccupationSpec& spec,
                                         const NuEvaluator& nu,
                                         const TwoScaleModel& model) {
    const std::vector<double> z = occupation(path, spec, nu);
    const std::vector<double> bias =
        initial_layer_bias_profile(model, path.initial_state, spec.weights, spec.grid);
    std::vector<double> m(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) m[i] = z[i] - bias[i];
    return m;
}

}  // namespace spmc
