#include <doctest.h>

#include <cmath>

#include "oracle_helpers.hpp"
#include "spmc/diffusion.hpp"
#include "spmc/experiments.hpp"
#include "spmc/simulate.hpp"

using namespace spmc;

namespace {

TimeVaryingGenerator two_state_symmetric() {
    Matrix q(2, 2);
    q << -1.0, 1.0, 1.0, -1.0;
    return TimeVaryingGenerator::constant(q);
}

TwoScaleModel symmetric_model(double eps) {
    return TwoScaleModel(two_state_symmetric(), TimeVaryingGenerator::zero(2), eps, 1.0);
}

}  // namespace

TEST_CASE("variance rate of the symmetric two-state indicator") {
    // -2 (nu o F) A# F with A# = [[-1/4, 1/4], [1/4, -1/4]] gives 1/4.
    Vector f(2);
    f << 1.0, 0.0;
    CHECK(sigma_squared(two_state_symmetric(), f, 0.3) ==
          doctest::Approx(0.25).epsilon(1e-12));
    CHECK(sigma_squared_quadrature(two_state_symmetric(), f, 0.3) ==
          doctest::Approx(0.25).epsilon(1e-8));
}

TEST_CASE("constant weights have zero variance rate") {
    Vector f = Vector::Constant(3, 0.7);
    const auto model = reference_model(0.1);
    CHECK(sigma_squared(model.fast, f, 0.4) == 0.0);
    CHECK(std::abs(sigma_squared_quadrature(model.fast, f, 0.4)) < 1e-10);
}

TEST_CASE("closed form agrees with the literal quadrature on random instances") {
    PhiloxRng rng(808, 2);
    for (int trial = 0; trial < 15; ++trial) {
        const int dim = 2 + static_cast<int>(rng.next_double() * 5);
        const Matrix q = spmc::testing::random_generator(dim, rng);
        const auto gen = TimeVaryingGenerator::constant(q);
        const Vector f = spmc::testing::random_weights(dim, rng);
        const double s = rng.next_double();
        const double closed = sigma_squared(gen, f, s);
        const double literal = sigma_squared_quadrature(gen, f, s);
        CHECK(std::abs(closed - literal) < 1e-8);
    }
}

TEST_CASE("single-state weight reduces to the scalar layer integral") {
    // For F = e_i the double sum collapses to 2 nu^i int psi0^{ii}.
    const auto model = reference_model(0.1);
    const double s = 0.45;
    const Matrix q = model.fast.at(s);
    const RowVector nu = quasi_stationary_of(q).row();
    for (int i = 0; i < 3; ++i) {
        Vector f = Vector::Zero(3);
        f[i] = 1.0;
        const double closed = sigma_squared(model.fast, f, s);
        // Simpson quadrature of the single entry psi0^{ii}.
        const double tau_max = 40.0;
        const int panels = 40000;
        const double h = tau_max / panels;
        const Matrix hop = matrix_exponential(q * h);
        const Matrix one_nu = Matrix::Ones(3, 1) * nu;
        Matrix node = Matrix::Identity(3, 3) - one_nu;
        double acc = node(i, i);
        for (int k = 1; k < panels; ++k) {
            node = node * hop;
            acc += (k % 2 == 1 ? 4.0 : 2.0) * node(i, i);
        }
        node = node * hop;
        acc += node(i, i);
        const double entry_integral = acc * h / 3.0;
        CHECK(closed == doctest::Approx(2.0 * nu[i] * entry_integral).epsilon(1e-9));
    }
}

TEST_CASE("variance profile integrates constant rates linearly") {
    Vector f(2);
    f << 1.0, 0.0;
    const auto profile =
        VarianceProfile::build(two_state_symmetric(), f, linspace(0.0, 1.0, 21));
    CHECK(profile.cumulative().front() == 0.0);
    for (std::size_t i = 0; i < profile.grid().size(); ++i) {
        CHECK(profile.rate()[i] == doctest::Approx(0.25).epsilon(1e-12));
        CHECK(profile.cumulative()[i] ==
              doctest::Approx(0.25 * profile.grid()[i]).epsilon(1e-10));
    }
    for (std::size_t i = 1; i < profile.cumulative().size(); ++i)
        CHECK(profile.cumulative()[i] >= profile.cumulative()[i - 1]);
}

TEST_CASE("variance profile is stable under grid refinement") {
    const auto model = reference_model(0.1);
    Vector f(3);
    f << 1.0, 0.0, -1.0;
    const auto coarse = VarianceProfile::build(model.fast, f, {0.0, 1.0});
    const auto fine = VarianceProfile::build(model.fast, f, linspace(0.0, 1.0, 101));
    CHECK(std::abs(coarse.total() - fine.total()) < 1e-8);
    CHECK(coarse.clamp_count() == 0);
}

TEST_CASE("initial layer bias closed form for the symmetric chain") {
    // Starting in state 0 with F = (1, 0): the integrand is e^{-2s/eps}/2,
    // so X_eps(t) = (eps/4)(1 - e^{-2t/eps}).
    Vector f(2);
    f << 1.0, 0.0;
    for (double eps : {0.1, 0.05, 0.02}) {
        const auto model = symmetric_model(eps);
        CHECK(initial_layer_bias(model, 0, f, 0.0) == 0.0);
        for (double t : {0.05, 0.3, 1.0}) {
            const double expected = eps / 4.0 * (1.0 - std::exp(-2.0 * t / eps));
            CHECK(std::abs(initial_layer_bias(model, 0, f, t) - expected) < 1e-8);
        }
    }
}

TEST_CASE("initial layer bias scales like eps on the reference model") {
    Vector f(3);
    f << 1.0, 0.0, -1.0;
    const auto grid = linspace(0.0, 1.0, 41);
    std::vector<double> ratios;
    for (double eps : {0.1, 0.05, 0.02}) {
        const auto model = reference_model(eps);
        const auto bias = initial_layer_bias_profile(model, 0, f, grid);
        double sup = 0.0;
        for (double x : bias) sup = std::max(sup, std::abs(x));
        ratios.push_back(sup / eps);
    }
    const double lo = *std::min_element(ratios.begin(), ratios.end());
    const double hi = *std::max_element(ratios.begin(), ratios.end());
    CHECK(hi / lo < 4.0);
    CHECK(hi < 2.0 * ratios.front() + 1e-12);
}

TEST_CASE("martingale component vanishes for constant weights") {
    const auto model = symmetric_model(0.1);
    const PathRecord path = sample_path(model, 0, 9001, 0);
    OccupationSpec spec{Vector::Constant(2, 3.0), linspace(0.0, 1.0, 5)};
    const NuInterpolant nu(model.fast, model.horizon);
    const auto m = martingale_component(path, spec, nu.as_evaluator(), model);
    for (double v : m) CHECK(v == 0.0);
}

TEST_CASE("martingale component is mean zero across replications") {
    const double eps = 0.05;
    const auto model = symmetric_model(eps);
    Vector f(2);
    f << 1.0, 0.0;
    OccupationSpec spec{f, {1.0}};
    const NuInterpolant nu(model.fast, model.horizon);
    const auto nu_eval = nu.as_evaluator();
    const int n = 5000;
    // X_eps(T) is deterministic; averaging z - X across paths checks the
    // martingale mean-zero property.
    const double bias = initial_layer_bias(model, 0, f, 1.0);
    double sum = 0.0, sum_sq = 0.0;
    for (int r = 0; r < n; ++r) {
        const PathRecord path = sample_path(model, 0, 20240817, r);
        const double z = occupation(path, spec, nu_eval).back();
        const double m = z - bias;
        sum += m;
        sum_sq += m * m;
    }
    const double mean = sum / n;
    const double sd = std::sqrt(std::max(0.0, sum_sq / n - mean * mean));
    CHECK(std::abs(mean) <= 3.0 * sd / std::sqrt(double(n)));
}
