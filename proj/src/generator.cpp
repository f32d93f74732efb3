#include "spmc/generator.hpp"

#include <cmath>
#include <utility>

#include <nlohmann/json.hpp>

#include "spmc/errors.hpp"

namespace spmc {

namespace {

double poly_eval(const std::vector<double>& c, double t) {
    double v = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * t + *it;
    return v;
}

// Value of the order-th derivative of the polynomial at t.
double poly_derivative(const std::vector<double>& c, int order, double t) {
    const int deg = static_cast<int>(c.size()) - 1;
    if (order > deg) return 0.0;
    double v = 0.0;
    for (int k = deg; k >= order; --k) {
        double factor = 1.0;
        for (int j = 0; j < order; ++j) factor *= static_cast<double>(k - j);
        v = v * t + factor * c[static_cast<std::size_t>(k)];
    }
    return v;
}

}  // namespace

struct TimeVaryingGenerator::Impl {
    int dimension = 0;
    int smoothness = 0;
    bool analytic = false;
    bool constant = false;

    std::vector<PolyTerm> poly_terms;  // nonempty iff polynomial-backed
    MatrixFn evaluator;
    std::vector<MatrixFn> derivative_fns;
    Matrix cached_constant;

    Matrix eval(double t) const {
        if (constant) return cached_constant;
        if (!poly_terms.empty()) {
            Matrix q = Matrix::Zero(dimension, dimension);
            for (const auto& term : poly_terms) q += term.coeff * poly_eval(term.time_poly, t);
            return q;
        }
        return evaluator(t);
    }

    Matrix deriv(int order, double t) const {
        if (constant) return Matrix::Zero(dimension, dimension);
        if (!poly_terms.empty()) {
            Matrix q = Matrix::Zero(dimension, dimension);
            for (const auto& term : poly_terms)
                q += term.coeff * poly_derivative(term.time_poly, order, t);
            return q;
        }
        if (static_cast<std::size_t>(order) <= derivative_fns.size() &&
            derivative_fns[static_cast<std::size_t>(order) - 1]) {
            return derivative_fns[static_cast<std::size_t>(order) - 1](t);
        }
        // Central finite-difference fallback.
        const double h = 1e-5 * std::max(1.0, std::abs(t));
        if (order == 1) return (eval(t + h) - eval(t - h)) / (2.0 * h);
        return (deriv(order - 1, t + h) - deriv(order - 1, t - h)) / (2.0 * h);
    }
};

TimeVaryingGenerator::TimeVaryingGenerator(std::shared_ptr<const Impl> impl)
    : impl_(std::move(impl)) {}

TimeVaryingGenerator TimeVaryingGenerator::from_polynomial_terms(
    int dimension, std::vector<PolyTerm> terms) {
    auto impl = std::make_shared<Impl>();
    impl->dimension = dimension;
    impl->smoothness = 64;  // polynomials are smooth to every order
    impl->analytic = true;
    for (const auto& term : terms) {
        if (term.coeff.rows() != dimension || term.coeff.cols() != dimension)
            throw ConfigError("polynomial term coefficient has wrong shape");
        if (term.time_poly.empty()) throw ConfigError("empty time polynomial");
    }
    bool constant = true;
    for (const auto& term : terms)
        for (std::size_t k = 1; k < term.time_poly.size(); ++k)
            if (term.time_poly[k] != 0.0) constant = false;
    impl->poly_terms = std::move(terms);
    if (constant) {
        impl->constant = true;
        Matrix q = Matrix::Zero(dimension, dimension);
        for (const auto& term : impl->poly_terms) q += term.coeff * term.time_poly[0];
        impl->cached_constant = std::move(q);
    }
    return TimeVaryingGenerator(std::move(impl));
}

TimeVaryingGenerator TimeVaryingGenerator::constant(Matrix q) {
    if (q.rows() != q.cols()) throw ConfigError("generator matrix must be square");
    const int dim = static_cast<int>(q.rows());
    std::vector<PolyTerm> terms;
    terms.push_back(PolyTerm{std::move(q), {1.0}});
    return from_polynomial_terms(dim, std::move(terms));
}

TimeVaryingGenerator TimeVaryingGenerator::zero(int dimension) {
    return constant(Matrix::Zero(dimension, dimension));
}

TimeVaryingGenerator TimeVaryingGenerator::from_callable(
    int dimension, MatrixFn evaluator, int smoothness_order,
    std::vector<MatrixFn> derivatives) {
    auto impl = std::make_shared<Impl>();
    impl->dimension = dimension;
    impl->smoothness = smoothness_order;
    impl->analytic = !derivatives.empty();
    impl->evaluator = std::move(evaluator);
    impl->derivative_fns = std::move(derivatives);
    return TimeVaryingGenerator(std::move(impl));
}

int TimeVaryingGenerator::dimension() const { return impl_->dimension; }
int TimeVaryingGenerator::smoothness_order() const { return impl_->smoothness; }
bool TimeVaryingGenerator::analytic_derivatives() const { return impl_->analytic; }
bool TimeVaryingGenerator::is_constant() const { return impl_->constant; }

Matrix TimeVaryingGenerator::at(double t) const { return impl_->eval(t); }

Matrix TimeVaryingGenerator::derivative(int order, double t) const {
    if (order < 1) throw ConfigError("derivative order must be >= 1");
    return impl_->deriv(order, t);
}

const std::vector<PolyTerm>& TimeVaryingGenerator::polynomial_terms() const {
    return impl_->poly_terms;
}

TimeVaryingGenerator TimeVaryingGenerator::scaled_sum(
    double alpha, const TimeVaryingGenerator& other, double beta) const {
    if (other.dimension() != dimension())
        throw ConfigError("cannot combine generators of different dimension");
    if (!impl_->poly_terms.empty() && !other.impl_->poly_terms.empty()) {
        std::vector<PolyTerm> terms;
        for (const auto& term : impl_->poly_terms) {
            PolyTerm scaled = term;
            scaled.coeff *= alpha;
            terms.push_back(std::move(scaled));
        }
        for (const auto& term : other.impl_->poly_terms) {
            PolyTerm scaled = term;
            scaled.coeff *= beta;
            terms.push_back(std::move(scaled));
        }
        return from_polynomial_terms(dimension(), std::move(terms));
    }
    auto lhs = impl_;
    auto rhs = other.impl_;
    const int dim = dimension();
    const int smooth = std::min(impl_->smoothness, other.impl_->smoothness);
    MatrixFn eval = [lhs, rhs, alpha, beta](double t) {
        return alpha * lhs->eval(t) + beta * rhs->eval(t);
    };
    std::vector<MatrixFn> derivs;
    if (impl_->analytic && other.impl_->analytic) {
        for (int order = 1; order <= smooth; ++order) {
            derivs.push_back([lhs, rhs, alpha, beta, order](double t) {
                return alpha * lhs->deriv(order, t) + beta * rhs->deriv(order, t);
            });
        }
    }
    auto result = from_callable(dim, std::move(eval), smooth, std::move(derivs));
    return result;
}

TimeVaryingGenerator generator_from_json(const nlohmann::json& spec) {
    if (!spec.contains("m0") || !spec.contains("terms"))
        throw ConfigError("generator spec needs \"m0\" and \"terms\"");
    const int dim = spec.at("m0").get<int>();
    if (dim < 1) throw ConfigError("generator dimension must be positive");
    std::vector<PolyTerm> terms;
    for (const auto& jterm : spec.at("terms")) {
        PolyTerm term;
        const auto& rows = jterm.at("coeff");
        if (static_cast<int>(rows.size()) != dim)
            throw ConfigError("coeff matrix row count mismatch");
        term.coeff = Matrix::Zero(dim, dim);
        for (int i = 0; i < dim; ++i) {
            const auto& row = rows.at(static_cast<std::size_t>(i));
            if (static_cast<int>(row.size()) != dim)
                throw ConfigError("coeff matrix column count mismatch");
            for (int j = 0; j < dim; ++j)
                term.coeff(i, j) = row.at(static_cast<std::size_t>(j)).get<double>();
        }
        term.time_poly = jterm.at("time_poly").get<std::vector<double>>();
        if (term.time_poly.empty()) throw ConfigError("empty time_poly");
        terms.push_back(std::move(term));
    }
    return TimeVaryingGenerator::from_polynomial_terms(dim, std::move(terms));
}

nlohmann::json generator_to_json(const TimeVaryingGenerator& g) {
    const auto& terms = g.polynomial_terms();
    if (terms.empty())
        throw ConfigError("only polynomial-backed generators can be serialized");
    nlohmann::json out;
    out["m0"] = g.dimension();
    out["terms"] = nlohmann::json::array();
    for (const auto& term : terms) {
        nlohmann::json jterm;
        auto rows = nlohmann::json::array();
        for (int i = 0; i < term.coeff.rows(); ++i) {
            auto row = nlohmann::json::array();
            for (int j = 0; j < term.coeff.cols(); ++j) row.push_back(term.coeff(i, j));
            rows.push_back(std::move(row));
        }
        jterm["coeff"] = std::move(rows);
        jterm["time_poly"] = term.time_poly;
        out["terms"].push_back(std::move(jterm));
    }
    return out;
}

TwoScaleModel::TwoScaleModel(TimeVaryingGenerator fast_part,
                             TimeVaryingGenerator slow_part, double epsilon_in,
                             double horizon_in)
    : fast(std::move(fast_part)),
      slow(std::move(slow_part)),
      epsilon(epsilon_in),
      horizon(horizon_in) {
    if (!fast.valid() || !slow.valid()) throw ConfigError("model parts must be set");
    if (fast.dimension() != slow.dimension())
        throw ConfigError("fast and slow generators must share a dimension");
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    if (!(horizon > 0.0)) throw ConfigError("horizon must be positive");
}

Matrix TwoScaleModel::combined(double t) const {
    return fast.at(t) / epsilon + slow.at(t);
}

TimeVaryingGenerator TwoScaleModel::combined_generator() const {
    return fast.scaled_sum(1.0 / epsilon, slow, 1.0);
}

TwoScaleModel TwoScaleModel::with_epsilon(double new_epsilon) const {
    return TwoScaleModel(fast, slow, new_epsilon, horizon);
}

ValidationReport validate_generator(const TimeVaryingGenerator& g,
                                    const std::vector<double>& probe_times) {
    ValidationReport report;
    report.derivatives_analytic = g.analytic_derivatives();
    const int dim = g.dimension();
    for (double t : probe_times) {
        const Matrix q = g.at(t);
        for (int i = 0; i < dim; ++i) {
            const double row_mag = q.row(i).cwiseAbs().maxCoeff();
            const double tol = 1e-12 * std::max(row_mag, 1e-300);
            for (int j = 0; j < dim; ++j) {
                if (i != j && q(i, j) < -tol)
                    report.violations.push_back({"negative_offdiagonal", t, i, j, q(i, j)});
            }
            const double row_sum = q.row(i).sum();
            if (std::abs(row_sum) > tol)
                report.violations.push_back({"row_sum", t, i, -1, row_sum});
        }
        if (g.smoothness_order() >= 1 && g.analytic_derivatives()) {
            const double h = 1e-4 * std::max(1.0, std::abs(t));
            const Matrix fd = (g.at(t + h) - g.at(t - h)) / (2.0 * h);
            const Matrix an = g.derivative(1, t);
            const double scale = std::max(1.0, an.cwiseAbs().maxCoeff());
            const double err = (fd - an).cwiseAbs().maxCoeff() / scale;
            if (err > 1e-5)
                report.violations.push_back({"derivative_mismatch", t, -1, -1, err});
        }
    }
    return report;
}

nlohmann::json validation_report_to_json(const ValidationReport& report) {
    nlohmann::json out;
    out["valid"] = report.valid();
    out["derivatives_analytic"] = report.derivatives_analytic;
    out["violations"] = nlohmann::json::array();
    for (const auto& v : report.violations) {
        out["violations"].push_back({{"kind", v.kind},
                                     {"t", v.t},
                                     {"row", v.row},
                                     {"col", v.col},
                                     {"value", v.value}});
    }
    return out;
}

}  // namespace spmc
