#include "spmc/queue_model.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "spmc/diffusion.hpp"
#include "spmc/errors.hpp"
#include "spmc/stats.hpp"

namespace spmc {

namespace {

double poly_at(const std::vector<double>& c, double t) {
    double v = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * t + *it;
    return v;
}

}  // namespace

void QueueModel::validate(double horizon) const {
    if (capacity < 1) throw ConfigError("queue capacity must be >= 1");
    if (static_cast<int>(lambda_base.size()) != capacity)
        throw ConfigError("lambda_base must list capacity birth rates");
    if (static_cast<int>(mu_base.size()) != capacity)
        throw ConfigError("mu_base must list capacity death rates");
    for (double r : lambda_base)
        if (!(r > 0.0)) throw ConfigError("birth rates must be strictly positive");
    for (double r : mu_base)
        if (!(r > 0.0)) throw ConfigError("death rates must be strictly positive");
    for (int k = 0; k <= 200; ++k) {
        const double t = horizon * k / 200.0;
        if (!(lambda_mod(t) > 1e-9) || !(mu_mod(t) > 1e-9))
            throw ConfigError("modulation must stay above 1e-9 on [0, horizon]");
    }
}

double QueueModel::lambda_mod(double t) const { return poly_at(lambda_mod_poly, t); }
double QueueModel::mu_mod(double t) const { return poly_at(mu_mod_poly, t); }

TimeVaryingGenerator QueueModel::build_generator() const {
    const int dim = capacity + 1;
    Matrix births = Matrix::Zero(dim, dim);
    Matrix deaths = Matrix::Zero(dim, dim);
    for (int j = 0; j < capacity; ++j) {
        births(j, j + 1) = lambda_base[static_cast<std::size_t>(j)];
        births(j, j) = -lambda_base[static_cast<std::size_t>(j)];
    }
    for (int j = 1; j <= capacity; ++j) {
        deaths(j, j - 1) = mu_base[static_cast<std::size_t>(j - 1)];
        deaths(j, j) = -mu_base[static_cast<std::size_t>(j - 1)];
    }
    std::vector<PolyTerm> terms;
    terms.push_back({std::move(births), lambda_mod_poly});
    terms.push_back({std::move(deaths), mu_mod_poly});
    return TimeVaryingGenerator::from_polynomial_terms(dim, std::move(terms));
}

ProbabilityVector QueueModel::nu_closed_form(double t) const {
    const int dim = capacity + 1;
    const double ratio = lambda_mod(t) / mu_mod(t);
    RowVector weights(dim);
    double w = 1.0;
    weights[0] = 1.0;
    for (int j = 1; j < dim; ++j) {
        w *= ratio * lambda_base[static_cast<std::size_t>(j - 1)] /
             mu_base[static_cast<std::size_t>(j - 1)];
        weights[j] = w;
    }
    weights /= weights.sum();
    return ProbabilityVector::checked(std::move(weights));
}

QueueModel queue_from_json(const nlohmann::json& spec) {
    QueueModel q;
    q.capacity = spec.at("m0").get<int>();
    q.lambda_base = spec.at("lambda_base").get<std::vector<double>>();
    q.mu_base = spec.at("mu_base").get<std::vector<double>>();
    if (spec.contains("lambda_mod_poly"))
        q.lambda_mod_poly = spec.at("lambda_mod_poly").get<std::vector<double>>();
    if (spec.contains("mu_mod_poly"))
        q.mu_mod_poly = spec.at("mu_mod_poly").get<std::vector<double>>();
    return q;
}

nlohmann::json queue_to_json(const QueueModel& q) {
    return {{"m0", q.capacity},
            {"lambda_base", q.lambda_base},
            {"mu_base", q.mu_base},
            {"lambda_mod_poly", q.lambda_mod_poly},
            {"mu_mod_poly", q.mu_mod_poly}};
}

OccupationBand queue_occupation_band(const QueueModel& q, int state, double eps,
                                     double t, double level) {
    if (state < 0 || state > q.capacity) throw ConfigError("state out of range");
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("level must lie in (0, 1)");
    if (t == 0.0) return {0.0, 0.0};
    const TimeVaryingGenerator gen = q.build_generator();
    Vector indicator = Vector::Zero(q.capacity + 1);
    indicator[state] = 1.0;

    const std::vector<double> grid = {0.0, t};
    const VarianceProfile profile = VarianceProfile::build(gen, indicator, grid);

    // center = int_0^t nu^i(s) ds by Simpson on a fine fixed grid.
    const int panels = 2000;
    const double h = t / panels;
    double acc = q.nu_closed_form(0.0)[state] + q.nu_closed_form(t)[state];
    for (int k = 1; k < panels; ++k)
        acc += (k % 2 == 1 ? 4.0 : 2.0) * q.nu_closed_form(k * h)[state];
    const double center = acc * h / 3.0;

    const double z = normal_quantile(0.5 + level / 2.0);
    return {center, z * std::sqrt(eps * profile.total())};
}

}  // namespace spmc
