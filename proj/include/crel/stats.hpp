#pragma once

#include <functional>
#include <vector>

namespace crel::stats {

double normal_pdf(double x);
double normal_cdf(double x);

// Inverse of the standard normal CDF; Newton refinement on erfc, accurate
// to machine precision for p in (0,1).
double normal_quantile(double p);

double chi2_cdf_1df(double x);

// One-sample Kolmogorov-Smirnov distance against an arbitrary CDF.
double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf);

// Order-statistic quantile with linear interpolation (type 7); input sorted.
double sample_quantile_sorted(const std::vector<double>& sorted, double alpha);

double median(std::vector<double> values);
double mean(const std::vector<double>& values);
double variance(const std::vector<double>& values);  // denominator n-1

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};
LineFit ols_line(const std::vector<double>& x, const std::vector<double>& y);

// Adaptive Simpson quadrature on [a,b].
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-12, int max_depth = 40);

}  // namespace crel::stats
