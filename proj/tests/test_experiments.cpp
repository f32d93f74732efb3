#include <doctest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "oracle_helpers.hpp"
#include "spmc/errors.hpp"
#include "spmc/experiments.hpp"
#include "spmc/stationary.hpp"

using namespace spmc;
using nlohmann::json;

namespace {

json homogeneous_model_json() {
    // Constant symmetric fast part, zero slow part.
    return json{{"fast",
                 {{"m0", 2},
                  {"terms",
                   {{{"coeff", {{-1.0, 1.0}, {1.0, -1.0}}}, {"time_poly", {1.0}}}}}}},
                {"horizon", 1.0}};
}

json strip_timings(json j) {
    j.erase("timings");
    return j;
}

}  // namespace

TEST_CASE("reference model is valid and weakly irreducible") {
    const auto model = reference_model(0.1);
    const auto grid = linspace(0.0, 1.0, 25);
    CHECK(validate_generator(model.fast, grid).valid());
    CHECK(validate_generator(model.slow, grid).valid());
    CHECK(validate_generator(model.combined_generator(), grid).valid());
    PhiloxRng rng(3, 3);
    for (int k = 0; k < 10; ++k) {
        const double t = rng.next_double();
        Eigen::ColPivHouseholderQR<Matrix> qr(model.fast.at(t));
        CHECK(qr.rank() == 2);
    }
}

TEST_CASE("reference model stationary law at t = 0") {
    // Birth rates (1, 1), death rates (1, 2) at t = 0: detailed balance gives
    // weights (1, 1, 1/2), i.e. (0.4, 0.4, 0.2); cross-checked by the
    // eigensolver oracle.
    const auto model = reference_model(0.1);
    const auto nu = quasi_stationary(model.fast, 0.0);
    CHECK(nu[0] == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(nu[1] == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(nu[2] == doctest::Approx(0.2).epsilon(1e-12));
    const RowVector oracle = spmc::testing::eigen_stationary(model.fast.at(0.0));
    CHECK((nu.row() - oracle).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("experiment config validation") {
    json base = {{"kind", "second_moment"},
                 {"model", "reference"},
                 {"F", {1.0, 0.0, -1.0}},
                 {"epsilons", {0.2, 0.1}},
                 {"N", 200}};
    CHECK_NOTHROW(experiment_config_from_json(base));

    json increasing = base;
    increasing["epsilons"] = {0.1, 0.2};
    CHECK_THROWS_AS(experiment_config_from_json(increasing), ConfigError);

    json out_of_range = base;
    out_of_range["epsilons"] = {1.5, 0.1};
    CHECK_THROWS_AS(experiment_config_from_json(out_of_range), ConfigError);

    json small_n = base;
    small_n["N"] = 50;
    CHECK_THROWS_AS(experiment_config_from_json(small_n), ConfigError);

    json no_model = base;
    no_model.erase("model");
    CHECK_THROWS_AS(experiment_config_from_json(no_model), ConfigError);

    json bad_kind = base;
    bad_kind["kind"] = "mystery";
    CHECK_THROWS_AS(experiment_config_from_json(bad_kind), ConfigError);
}

TEST_CASE("expansion error experiment is exact for the homogeneous model") {
    json cfg = {{"kind", "expansion_error"},
                {"model", homogeneous_model_json()},
                {"epsilons", {0.1, 0.01}},
                {"order", 0},
                {"grid_points", 8}};
    const auto report = run_expansion_error(experiment_config_from_json(cfg));
    CHECK(report.passed);
    CHECK(report.body.at("exact").get<bool>());
    for (const auto& row : report.body.at("per_epsilon"))
        CHECK(row.at("sup_error").get<double>() < 1e-10);
}

TEST_CASE("expansion error report embeds thresholds and config") {
    json cfg = {{"kind", "expansion_error"},
                {"model", homogeneous_model_json()},
                {"epsilons", {0.1, 0.05}},
                {"order", 1},
                {"grid_points", 5}};
    const auto report = run_expansion_error(experiment_config_from_json(cfg));
    CHECK(report.body.contains("thresholds"));
    CHECK(report.body.at("thresholds").at("slope_min").get<double>() ==
          doctest::Approx(1.6));
    CHECK(report.body.at("config") == json(cfg));
    const std::string csv = report_tables_csv(report);
    CHECK(csv.find("sup_error") != std::string::npos);
}

TEST_CASE("clt experiment is deterministic across thread counts") {
    json cfg = {{"kind", "clt"},          {"model", "reference"},
                {"F", {1.0, 0.0, -1.0}},  {"epsilons", {0.2, 0.1}},
                {"N", 300},               {"base_seed", 4242}};
    auto parsed = experiment_config_from_json(cfg);
    parsed.threads = 1;
    const auto serial = run_clt(parsed);
    parsed.threads = 8;
    const auto wide = run_clt(parsed);
    const json lhs = strip_timings(json(serial.body));
    const json rhs = strip_timings(json(wide.body));
    CHECK(lhs == rhs);
}

TEST_CASE("second moment degenerates cleanly for constant weights") {
    // Constant F centers to an exact zero functional: every deviation is 0.
    json cfg = {{"kind", "second_moment"}, {"model", "reference"},
                {"F", {2.0, 2.0, 2.0}},    {"epsilons", {0.2, 0.1, 0.05}},
                {"N", 150},                {"base_seed", 5}};
    const auto report = run_second_moment(experiment_config_from_json(cfg));
    CHECK(report.passed);
    CHECK(report.body.at("degenerate").get<bool>());
    for (const auto& row : report.body.at("per_epsilon"))
        CHECK(row.at("deviation").get<double>() == 0.0);
}

TEST_CASE("rerunning the embedded config reproduces the report") {
    json cfg = {{"kind", "rate_proxy"},   {"model", "reference"},
                {"F", {1.0, 0.0, -1.0}},  {"epsilons", {0.4, 0.2, 0.1}},
                {"N", 250},               {"base_seed", 616}};
    const auto first = run_rate_proxy(experiment_config_from_json(cfg));
    const json echoed = first.body.at("config");
    const auto second = run_rate_proxy(experiment_config_from_json(echoed));
    CHECK(strip_timings(json(first.body)) == strip_timings(json(second.body)));
}

TEST_CASE("second moment experiment flags unresolved noise floors") {
    json cfg = {{"kind", "second_moment"}, {"model", "reference"},
                {"F", {1.0, 0.0, -1.0}},   {"epsilons", {0.2, 0.1, 0.05}},
                {"N", 100},                {"base_seed", 777}};
    CHECK_THROWS_AS(run_second_moment(experiment_config_from_json(cfg)),
                    InsufficientResolutionError);
}

TEST_CASE("rate proxy report carries its proxy label") {
    json cfg = {{"kind", "rate_proxy"},   {"model", "reference"},
                {"F", {1.0, 0.0, -1.0}},  {"epsilons", {0.4, 0.2, 0.1}},
                {"N", 400},               {"base_seed", 90210}};
    const auto report = run_rate_proxy(experiment_config_from_json(cfg));
    CHECK(report.body.at("proxy").get<bool>());
    CHECK(report.body.contains("calibration"));
    CHECK(report.body.at("per_epsilon").size() == 3);
}

TEST_CASE("queue demo compares the closed form and reports coverage") {
    json cfg = {{"kind", "queue_demo"},
                {"model",
                 {{"queue",
                   {{"m0", 1},
                    {"lambda_base", {1.0}},
                    {"mu_base", {1.0}}}},
                  {"horizon", 1.0}}},
                {"epsilons", {0.05}},
                {"N", 400},
                {"state", 0},
                {"base_seed", 1999}};
    const auto report = run_queue_demo(experiment_config_from_json(cfg));
    CHECK(report.body.at("nu_agreement").get<double>() <= 1e-12);
    const double coverage = report.body.at("band95").at("coverage").get<double>();
    CHECK(coverage > 0.88);
    CHECK(coverage <= 1.0);
    CHECK(report.body.at("band90").at("coverage").get<double>() <= coverage);
}

TEST_CASE("expansion error marks epsilon points that underflow the stepper") {
    json cfg = {{"kind", "expansion_error"},
                {"model", homogeneous_model_json()},
                {"epsilons", {0.1, 0.05, 1e-13}},
                {"order", 0},
                {"grid_points", 4}};
    const auto report = run_expansion_error(experiment_config_from_json(cfg));
    CHECK_FALSE(report.passed);
    const auto& rows = report.body.at("per_epsilon");
    CHECK_FALSE(rows[0].at("step_underflow").get<bool>());
    CHECK(rows[2].at("step_underflow").get<bool>());
}

TEST_CASE("dispatch runs the configured kind") {
    json cfg = {{"kind", "expansion_error"},
                {"model", homogeneous_model_json()},
                {"epsilons", {0.1, 0.05}},
                {"order", 0},
                {"grid_points", 4}};
    const auto report = run_experiment(experiment_config_from_json(cfg));
    CHECK(report.body.at("kind").get<std::string>() == "expansion_error");
}
