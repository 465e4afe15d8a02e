#include "crel/stats.hpp"

#include <algorithm>
#include <cmath>

#include "crel/errors.hpp"

namespace crel::stats {

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("normal_quantile: p outside (0,1)");
  // rough start, then Newton on Phi(x) - p
  double q = p - 0.5;
  double x;
  if (std::fabs(q) <= 0.425) {
    x = q * std::sqrt(2.0 * M_PI);  // linearized around the centre
  } else {
    double r = (q < 0) ? p : 1.0 - p;
    double t = std::sqrt(-2.0 * std::log(r));
    x = t - (2.30753 + 0.27061 * t) / (1.0 + (0.99229 + 0.04481 * t) * t);
    if (q < 0) x = -x;
  }
  for (int it = 0; it < 60; ++it) {
    double err = normal_cdf(x) - p;
    double d = normal_pdf(x);
    if (d <= 0.0) break;
    double step = err / d;
    x -= step;
    if (std::fabs(step) < 1e-15 * (1.0 + std::fabs(x))) break;
  }
  return x;
}

double chi2_cdf_1df(double x) {
  if (x <= 0.0) return 0.0;
  return std::erf(std::sqrt(0.5 * x));
}

double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    double f = cdf(sample[i]);
    d = std::max(d, std::fabs(f - static_cast<double>(i) / n));
    d = std::max(d, std::fabs(static_cast<double>(i + 1) / n - f));
  }
  return d;
}

double sample_quantile_sorted(const std::vector<double>& sorted, double alpha) {
  if (sorted.empty()) throw DomainError("sample_quantile: empty sample");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("sample_quantile: alpha outside (0,1)");
  const std::size_t m = sorted.size();
  if (m == 1) return sorted[0];
  double h = alpha * static_cast<double>(m - 1);
  std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo >= m - 1) return sorted[m - 1];
  double w = h - static_cast<double>(lo);
  return sorted[lo] + w * (sorted[lo + 1] - sorted[lo]);
}

double median(std::vector<double> values) {
  if (values.empty()) throw DomainError("median: empty sample");
  std::sort(values.begin(), values.end());
  std::size_t m = values.size();
  if (m % 2 == 1) return values[m / 2];
  return 0.5 * (values[m / 2 - 1] + values[m / 2]);
}

double mean(const std::vector<double>& values) {
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

double variance(const std::vector<double>& values) {
  if (values.size() < 2) throw DomainError("variance: need at least two values");
  double m = mean(values);
  double s = 0.0;
  for (double v : values) s += (v - m) * (v - m);
  return s / static_cast<double>(values.size() - 1);
}

LineFit ols_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("ols_line: bad input");
  double mx = mean(x), my = mean(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  return f;
}

namespace {

double simpson(const std::function<double(double)>& f, double a, double fa, double b,
               double fb, double m, double fm) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double simpson_rec(const std::function<double(double)>& f, double a, double fa, double b,
                   double fb, double m, double fm, double whole, double tol, int depth) {
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = simpson(f, a, fa, m, fm, lm, flm);
  double right = simpson(f, m, fm, b, fb, rm, frm);
  double delta = left + right - whole;
  if (depth <= 0 || std::fabs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_rec(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
         simpson_rec(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double tol, int max_depth) {
  if (!(a < b)) return 0.0;
  double m = 0.5 * (a + b);
  double fa = f(a), fb = f(b), fm = f(m);
  if (!std::isfinite(fa) || !std::isfinite(fb) || !std::isfinite(fm))
    throw QuadratureError("adaptive_simpson: non-finite integrand");
  double whole = simpson(f, a, fa, b, fb, m, fm);
  double r = simpson_rec(f, a, fa, b, fb, m, fm, whole, tol, max_depth);
  if (!std::isfinite(r)) throw QuadratureError("adaptive_simpson: diverged");
  return r;
}

}  // namespace crel::stats
