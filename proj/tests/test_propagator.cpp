#include <doctest.h>

#include <cmath>

#include "oracle_helpers.hpp"
#include "spmc/errors.hpp"
#include "spmc/experiments.hpp"
#include "spmc/propagator.hpp"

using namespace spmc;

namespace {

TwoScaleModel symmetric_model(double eps) {
    Matrix q(2, 2);
    q << -1.0, 1.0, 1.0, -1.0;
    return TwoScaleModel(TimeVaryingGenerator::constant(q),
                         TimeVaryingGenerator::zero(2), eps, 1.0);
}

}  // namespace

TEST_CASE("forward solve reproduces the scalar relaxation closed form") {
    const auto model = symmetric_model(1.0);
    RowVector p0(2);
    p0 << 1.0, 0.0;
    const auto grid = linspace(0.0, 1.0, 11);
    const auto solution = forward_solve(model, p0, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double expected = 0.5 + 0.5 * std::exp(-2.0 * grid[i]);
        CHECK(solution[i][0] == doctest::Approx(expected).epsilon(1e-10));
        CHECK(solution[i][1] == doctest::Approx(1.0 - expected).epsilon(1e-10));
    }
}

TEST_CASE("stationary initial data stays put") {
    const auto model = symmetric_model(0.05);
    RowVector nu(2);
    nu << 0.5, 0.5;
    const auto solution = forward_solve(model, nu, {0.2, 0.9});
    for (const auto& p : solution) {
        CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-12));
    }
}

TEST_CASE("mass is conserved on the reference model") {
    const auto model = reference_model(0.05);
    RowVector p0(3);
    p0 << 1.0, 0.0, 0.0;
    const auto solution = forward_solve(model, p0, linspace(0.1, 1.0, 7));
    for (const auto& p : solution) {
        CHECK(p.row().sum() == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(p.row().minCoeff() >= 0.0);
    }
}

TEST_CASE("transition matrix at t = t0 is the identity") {
    const auto model = reference_model(0.1);
    const Matrix p = transition_matrix(model, 0.4, 0.4);
    CHECK((p - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("frozen generator transition equals the matrix exponential") {
    for (double eps : {0.1, 0.01}) {
        const auto model = symmetric_model(eps);
        const double t0 = 0.2, t = 0.75;
        const Matrix p = transition_matrix(model, t0, t);
        const Matrix expected =
            matrix_exponential(model.fast.at(0.0) * ((t - t0) / eps));
        CHECK((p - expected).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("Chapman-Kolmogorov residual stays below 1e-8") {
    const auto model = reference_model(0.08);
    PhiloxRng rng(11, 3);
    for (int trial = 0; trial < 4; ++trial) {
        double a = rng.next_double(), b = rng.next_double(), c = rng.next_double();
        if (a > b) std::swap(a, b);
        if (b > c) std::swap(b, c);
        if (a > b) std::swap(a, b);
        const Matrix left = transition_matrix(model, a, b) * transition_matrix(model, b, c);
        const Matrix direct = transition_matrix(model, a, c);
        CHECK((left - direct).cwiseAbs().maxCoeff() < 1e-8);
        for (int i = 0; i < 3; ++i)
            CHECK(direct.row(i).sum() == doctest::Approx(1.0).epsilon(1e-10));
    }
}

TEST_CASE("step underflow is reported for hopeless epsilon") {
    const auto model = symmetric_model(1e-16);
    RowVector p0(2);
    p0 << 1.0, 0.0;
    CHECK_THROWS_AS(forward_solve(model, p0, {1.0}), StepUnderflowError);
}

TEST_CASE("grid checking") {
    const auto model = symmetric_model(0.1);
    RowVector p0(2);
    p0 << 1.0, 0.0;
    CHECK_THROWS_AS(forward_solve(model, p0, {0.5, 0.2}), ConfigError);
    CHECK_THROWS_AS(forward_solve(model, p0, {2.0}), ConfigError);
    CHECK_THROWS_AS(transition_matrix(model, -0.1, 0.5), ConfigError);
}
