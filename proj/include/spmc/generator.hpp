#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "spmc/matrix_exp.hpp"

namespace spmc {

// One summand of a polynomially modulated rate matrix:
// contribution(t) = coeff * (c0 + c1*t + c2*t^2 + ...).
struct PolyTerm {
    Matrix coeff;
    std::vector<double> time_poly;
};

// Time-indexed rate matrix Q(t) with derivative access.
//
// Immutable after construction and cheap to copy; evaluators built from
// polynomial terms carry exact derivatives of every order, while
// callable-backed generators without supplied derivatives fall back to
// central finite differences and are flagged as such.
class TimeVaryingGenerator {
public:
    using MatrixFn = std::function<Matrix(double)>;

    TimeVaryingGenerator() = default;

    static TimeVaryingGenerator from_polynomial_terms(int dimension,
                                                      std::vector<PolyTerm> terms);
    static TimeVaryingGenerator constant(Matrix q);
    static TimeVaryingGenerator zero(int dimension);
    // smoothness_order bounds the derivative orders callers may request.
    // If derivatives is empty, finite differences are used (analytic flag off).
    static TimeVaryingGenerator from_callable(int dimension, MatrixFn evaluator,
                                              int smoothness_order,
                                              std::vector<MatrixFn> derivatives = {});

    int dimension() const;
    int smoothness_order() const;
    bool analytic_derivatives() const;
    bool is_constant() const;
    bool valid() const { return impl_ != nullptr; }

    Matrix at(double t) const;
    // j-th time derivative of Q, j >= 1.
    Matrix derivative(int order, double t) const;

    // Pointwise sum alpha*this + beta*other, derivatives combined likewise.
    TimeVaryingGenerator scaled_sum(double alpha, const TimeVaryingGenerator& other,
                                    double beta) const;

    // Polynomial terms when this generator was built from them (else empty).
    const std::vector<PolyTerm>& polynomial_terms() const;

private:
    struct Impl;
    explicit TimeVaryingGenerator(std::shared_ptr<const Impl> impl);
    std::shared_ptr<const Impl> impl_;
};

// JSON form: {"m0": int, "terms": [{"coeff": [[...]], "time_poly": [c0, c1, ...]}]}.
TimeVaryingGenerator generator_from_json(const nlohmann::json& spec);
nlohmann::json generator_to_json(const TimeVaryingGenerator& g);

// Two-time-scale model with combined generator A(t)/epsilon + B(t).
struct TwoScaleModel {
    TwoScaleModel(TimeVaryingGenerator fast_part, TimeVaryingGenerator slow_part,
                  double epsilon, double horizon);

    Matrix combined(double t) const;
    TimeVaryingGenerator combined_generator() const;
    TwoScaleModel with_epsilon(double new_epsilon) const;

    TimeVaryingGenerator fast;
    TimeVaryingGenerator slow;
    double epsilon;
    double horizon;
};

struct Violation {
    std::string kind;  // "negative_offdiagonal" | "row_sum" | "derivative_mismatch"
    double t;
    int row;
    int col;  // -1 for row-level violations
    double value;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool derivatives_analytic = true;
    bool valid() const { return violations.empty(); }
};

// Checks generator invariants at each probe time: nonnegative off-diagonal
// entries, zero row sums (tolerance 1e-12 x largest row magnitude), and
// consistency of the first derivative evaluator with central differences
// (relative tolerance 1e-5). Never throws; everything lands in the report.
ValidationReport validate_generator(const TimeVaryingGenerator& g,
                                    const std::vector<double>& probe_times);

nlohmann::json validation_report_to_json(const ValidationReport& report);

}  // namespace spmc
