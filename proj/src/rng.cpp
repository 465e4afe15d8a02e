#include "crel/rng.hpp"

#include <cmath>

#include "crel/errors.hpp"

namespace crel {

double RngStream::normal() {
  // Box-Muller without the cached second value; keeps the stream state a
  // pure function of the draw count.
  double u1 = uniform01();
  double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double RngStream::laplace(double loc, double scale) {
  double u = uniform01() - 0.5;
  return loc - scale * ((u < 0) ? -1.0 : 1.0) * std::log1p(-2.0 * std::fabs(u));
}

double RngStream::exponential(double mean) {
  return -mean * std::log(uniform01());
}

long RngStream::poisson(double mean) {
  if (mean < 0 || !std::isfinite(mean)) throw DomainError("poisson: invalid mean");
  if (mean == 0.0) return 0;
  if (mean < 10.0) return poisson_inversion(mean);
  return poisson_ptrs(mean);
}

long RngStream::poisson_inversion(double mean) {
  double p = std::exp(-mean);
  double cum = p;
  double u = uniform01();
  long k = 0;
  while (u > cum && k < 10000) {
    ++k;
    p *= mean / static_cast<double>(k);
    cum += p;
  }
  return k;
}

// Hoermann's transformed rejection (PTRS), valid for mean >= 10.
long RngStream::poisson_ptrs(double mean) {
  const double b = 0.931 + 2.53 * std::sqrt(mean);
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double v_r = 0.9277 - 3.6224 / (b - 2.0);
  const double log_mean = std::log(mean);
  for (;;) {
    double u = uniform01() - 0.5;
    double v = uniform01();
    double us = 0.5 - std::fabs(u);
    double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= v_r) return static_cast<long>(kf);
    if (kf < 0 || (us < 0.013 && v > us)) continue;
    double lhs = std::log(v * inv_alpha / (a / (us * us) + b));
    double rhs = kf * log_mean - mean - std::lgamma(kf + 1.0);
    if (lhs <= rhs) return static_cast<long>(kf);
  }
}

}  // namespace crel
