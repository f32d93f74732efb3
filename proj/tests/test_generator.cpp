#include <doctest.h>

#include <nlohmann/json.hpp>

#include "spmc/errors.hpp"
#include "spmc/generator.hpp"

using namespace spmc;

namespace {

TimeVaryingGenerator linear_two_state() {
    // Q(t) = [[-(1+t), 1+t], [1, -1]]
    Matrix base(2, 2), ramp(2, 2);
    base << -1.0, 1.0, 1.0, -1.0;
    ramp << -1.0, 1.0, 0.0, 0.0;
    std::vector<PolyTerm> terms;
    terms.push_back({base, {1.0}});
    terms.push_back({ramp, {0.0, 1.0}});
    return TimeVaryingGenerator::from_polynomial_terms(2, std::move(terms));
}

}  // namespace

TEST_CASE("polynomial evaluation and analytic derivatives") {
    const auto g = linear_two_state();
    CHECK(g.dimension() == 2);
    CHECK(g.analytic_derivatives());
    CHECK_FALSE(g.is_constant());
    const Matrix q = g.at(0.5);
    CHECK(q(0, 0) == doctest::Approx(-1.5));
    CHECK(q(0, 1) == doctest::Approx(1.5));
    const Matrix d1 = g.derivative(1, 0.3);
    CHECK(d1(0, 1) == doctest::Approx(1.0));
    CHECK(d1(1, 0) == doctest::Approx(0.0));
    const Matrix d2 = g.derivative(2, 0.3);
    CHECK(d2.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("constant detection and zero generator") {
    Matrix q(2, 2);
    q << -1.0, 1.0, 1.0, -1.0;
    const auto g = TimeVaryingGenerator::constant(q);
    CHECK(g.is_constant());
    CHECK((g.at(0.1) - g.at(0.9)).cwiseAbs().maxCoeff() == 0.0);
    const auto z = TimeVaryingGenerator::zero(3);
    CHECK(z.at(0.5).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("callable generators fall back to finite differences") {
    const auto g = TimeVaryingGenerator::from_callable(
        2,
        [](double t) {
            Matrix q(2, 2);
            q << -(1.0 + t), 1.0 + t, 1.0, -1.0;
            return q;
        },
        2);
    CHECK_FALSE(g.analytic_derivatives());
    const Matrix d1 = g.derivative(1, 0.4);
    CHECK(d1(0, 0) == doctest::Approx(-1.0).epsilon(1e-7));
}

TEST_CASE("validation accepts the canonical two-state generator") {
    Matrix q(2, 2);
    q << -1.0, 1.0, 1.0, -1.0;
    const auto report =
        validate_generator(TimeVaryingGenerator::constant(q), {0.0, 0.5, 1.0});
    CHECK(report.valid());
}

TEST_CASE("validation reports a row-sum violation") {
    Matrix q(2, 2);
    q << -1.0, 0.5, 1.0, -1.0;
    const auto report =
        validate_generator(TimeVaryingGenerator::constant(q), {0.25});
    REQUIRE_FALSE(report.valid());
    bool found = false;
    for (const auto& v : report.violations)
        if (v.kind == "row_sum" && v.row == 0 &&
            v.value == doctest::Approx(-0.5)) found = true;
    CHECK(found);
}

TEST_CASE("validation reports negative off-diagonal entries") {
    Matrix q(2, 2);
    q << 1.0, -1.0, -1.0, 1.0;
    const auto report =
        validate_generator(TimeVaryingGenerator::constant(q), {0.1});
    REQUIRE_FALSE(report.valid());
    int negatives = 0;
    for (const auto& v : report.violations)
        if (v.kind == "negative_offdiagonal") ++negatives;
    CHECK(negatives == 2);
}

TEST_CASE("validation flags inconsistent derivative evaluators") {
    const auto lying = TimeVaryingGenerator::from_callable(
        2,
        [](double t) {
            Matrix q(2, 2);
            q << -(1.0 + t), 1.0 + t, 1.0, -1.0;
            return q;
        },
        1,
        {[](double) { return Matrix::Zero(2, 2); }});
    const auto report = validate_generator(lying, {0.5});
    bool found = false;
    for (const auto& v : report.violations)
        if (v.kind == "derivative_mismatch") found = true;
    CHECK(found);
}

TEST_CASE("two-scale model invariants") {
    Matrix q(2, 2);
    q << -1.0, 1.0, 1.0, -1.0;
    const auto a = TimeVaryingGenerator::constant(q);
    const auto b = TimeVaryingGenerator::zero(2);
    CHECK_THROWS_AS(TwoScaleModel(a, TimeVaryingGenerator::zero(3), 0.1, 1.0),
                    ConfigError);
    CHECK_THROWS_AS(TwoScaleModel(a, b, 0.0, 1.0), ConfigError);
    CHECK_THROWS_AS(TwoScaleModel(a, b, 0.1, -1.0), ConfigError);

    const TwoScaleModel model(a, TimeVaryingGenerator::constant(0.5 * q), 0.25, 1.0);
    const Matrix combined = model.combined(0.3);
    CHECK(combined(0, 1) == doctest::Approx(4.0 + 0.5));
    const auto cg = model.combined_generator();
    CHECK((cg.at(0.3) - combined).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(validate_generator(cg, {0.0, 0.7}).valid());
    CHECK(model.with_epsilon(0.5).epsilon == doctest::Approx(0.5));
}

TEST_CASE("generator JSON round trip") {
    const auto g = linear_two_state();
    const nlohmann::json j = generator_to_json(g);
    const auto back = generator_from_json(j);
    for (double t : {0.0, 0.4, 1.0}) {
        CHECK((back.at(t) - g.at(t)).cwiseAbs().maxCoeff() == 0.0);
        CHECK((back.derivative(1, t) - g.derivative(1, t)).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK_THROWS_AS(generator_from_json(nlohmann::json{{"m0", 2}}), ConfigError);
    nlohmann::json bad = j;
    bad["terms"][0]["coeff"][0] = {1.0};
    CHECK_THROWS_AS(generator_from_json(bad), ConfigError);
}
