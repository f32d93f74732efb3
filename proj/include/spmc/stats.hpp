#pragma once

#include <functional>
#include <vector>

namespace spmc {

// Standard normal CDF through the error function.
double normal_cdf(double x);

// Standard normal quantile (Wichura's AS 241, double precision).
double normal_quantile(double p);

// One-sample Kolmogorov-Smirnov statistic of samples against a CDF.
// The sample vector is sorted internally.
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);

// Asymptotic p-value for the one-sample statistic with n observations
// (Kolmogorov limit law with Stephens' small-sample correction).
double ks_pvalue(double statistic, int n);

// Wasserstein-1 distance between the empirical law of the samples and a
// normal(mean, sd) reference, by sorted samples against quantiles at the
// midpoint plotting positions.
double wasserstein1_vs_normal(std::vector<double> samples, double mean, double sd);

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
    int points = 0;
};

// Ordinary least squares of y against x.
SlopeFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

// OLS on (log x, log y); every x and y must be positive.
SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

// Upper tail of the chi-square distribution with dof degrees of freedom.
double chi_square_pvalue(double statistic, int dof);

// Pearson statistic of observed counts against expected probabilities.
double chi_square_statistic(const std::vector<long long>& observed,
                            const std::vector<double>& expected_probability);

}  // namespace spmc
