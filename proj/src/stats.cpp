#include "spmc/stats.hpp"

#include <algorithm>
#include <cmath>

#include "spmc/errors.hpp"

namespace spmc {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
    // AS 241 (Wichura 1988), PPND16: relative error below 1e-15.
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("quantile needs p in (0, 1)");
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                     6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                   1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
                 1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
               (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                     3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
                   5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
                 4.2313330701600911252e1) * r + 1.0);
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double value;
    if (r <= 5.0) {
        r -= 1.6;
        value = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                      2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                    3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
                  4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
                (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                      1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                    6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
                  2.05319162663775882187e0) * r + 1.0);
    } else {
        r -= 5.0;
        value = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                      1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                    2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
                  5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
                (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                      1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                    1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
                  5.99832206555887937690e-1) * r + 1.0);
    }
    return q < 0.0 ? -value : value;
}

double ks_statistic(std::vector<double> samples,
                    const std::function<double(double)>& cdf) {
    if (samples.empty()) throw ConfigError("KS statistic needs samples");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        d = std::max(d, (static_cast<double>(i) + 1.0) / n - f);
        d = std::max(d, f - static_cast<double>(i) / n);
    }
    return d;
}

namespace {

// Tail of the Kolmogorov limit distribution. The alternating series is used
// for large lambda; its theta-function dual converges for small lambda.
double kolmogorov_tail(double lambda) {
    constexpr double pi = 3.14159265358979323846;
    if (lambda < 1e-8) return 1.0;
    if (lambda < 1.18) {
        const double y = std::exp(-pi * pi / (8.0 * lambda * lambda));
        const double cdf = std::sqrt(2.0 * pi) / lambda *
                           (y + std::pow(y, 9.0) + std::pow(y, 25.0) +
                            std::pow(y, 49.0));
        return std::clamp(1.0 - cdf, 0.0, 1.0);
    }
    const double x = std::exp(-2.0 * lambda * lambda);
    return std::clamp(
        2.0 * (x - std::pow(x, 4.0) + std::pow(x, 9.0) - std::pow(x, 16.0)), 0.0,
        1.0);
}

}  // namespace

double ks_pvalue(double statistic, int n) {
    const double rootn = std::sqrt(static_cast<double>(n));
    const double lambda = (rootn + 0.12 + 0.11 / rootn) * statistic;
    return kolmogorov_tail(lambda);
}

double wasserstein1_vs_normal(std::vector<double> samples, double mean, double sd) {
    if (samples.empty()) throw ConfigError("Wasserstein distance needs samples");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double total = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double level = (static_cast<double>(i) + 0.5) / n;
        total += std::abs(samples[i] - (mean + sd * normal_quantile(level)));
    }
    return total / n;
}

SlopeFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw ConfigError("slope fit needs at least two matched points");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double denom = n * sxx - sx * sx;
    if (denom == 0.0) throw ConfigError("degenerate abscissae in slope fit");
    SlopeFit fit;
    fit.points = static_cast<int>(x.size());
    fit.slope = (n * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / n;
    if (x.size() > 2) {
        double rss = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double r = y[i] - fit.intercept - fit.slope * x[i];
            rss += r * r;
        }
        const double sigma2 = rss / (n - 2.0);
        fit.slope_stderr = std::sqrt(sigma2 * n / denom);
    }
    return fit;
}

SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> lx(x.size()), ly(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0))
            throw ConfigError("log-log fit needs positive values");
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
    }
    return fit_line(lx, ly);
}

namespace {

// Regularized upper incomplete gamma Q(a, x) by series / continued fraction.
double gamma_q(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw ConfigError("gamma_q domain error");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) {
        // P(a, x) series, then Q = 1 - P.
        double term = 1.0 / a;
        double sum = term;
        double ap = a;
        for (int k = 0; k < 500; ++k) {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if (std::abs(term) < std::abs(sum) * 1e-16) break;
        }
        const double p = sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
        return std::clamp(1.0 - p, 0.0, 1.0);
    }
    // Lentz continued fraction for Q(a, x).
    double b = x + 1.0 - a;
    double c = 1e300;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < 1e-300) d = 1e-300;
        c = b + an / c;
        if (std::abs(c) < 1e-300) c = 1e-300;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    return std::clamp(std::exp(-x + a * std::log(x) - std::lgamma(a)) * h, 0.0, 1.0);
}

}  // namespace

double chi_square_pvalue(double statistic, int dof) {
    if (dof < 1) throw ConfigError("chi-square needs dof >= 1");
    return gamma_q(dof / 2.0, statistic / 2.0);
}

double chi_square_statistic(const std::vector<long long>& observed,
                            const std::vector<double>& expected_probability) {
    if (observed.size() != expected_probability.size())
        throw ConfigError("observed/expected size mismatch");
    long long total = 0;
    for (long long c : observed) total += c;
    double stat = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const double expected = expected_probability[i] * static_cast<double>(total);
        if (expected <= 0.0) {
            if (observed[i] != 0)
                throw ConfigError("observed counts in a zero-probability cell");
            continue;
        }
        const double diff = static_cast<double>(observed[i]) - expected;
        stat += diff * diff / expected;
    }
    return stat;
}

}  // namespace spmc
