#include <doctest.h>

#include <cmath>

#include "crel/errors.hpp"
#include "crel/stats.hpp"

using namespace crel;

TEST_CASE("normal quantile inverts the cdf") {
  for (double p : {1e-6, 0.001, 0.025, 0.25, 0.5, 0.75, 0.975, 0.999, 1.0 - 1e-6}) {
    double x = stats::normal_quantile(p);
    CHECK(stats::normal_cdf(x) == doctest::Approx(p).epsilon(1e-12));
  }
  CHECK(stats::normal_quantile(0.5) == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
  CHECK(stats::normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-10));
  CHECK(stats::normal_quantile(0.95) == doctest::Approx(1.6448536269514722).epsilon(1e-10));
  CHECK_THROWS_AS(stats::normal_quantile(0.0), DomainError);
  CHECK_THROWS_AS(stats::normal_quantile(1.0), DomainError);
}

TEST_CASE("chi-square(1) cdf") {
  CHECK(stats::chi2_cdf_1df(0.0) == 0.0);
  // P(Z^2 <= 3.841459) = 0.95
  CHECK(stats::chi2_cdf_1df(3.8414588206941236) == doctest::Approx(0.95).epsilon(1e-10));
}

TEST_CASE("ks distance of a uniform grid is ~1/(2n)") {
  std::vector<double> grid(100);
  for (int i = 0; i < 100; ++i) grid[i] = (i + 0.5) / 100.0;
  double d = stats::ks_distance(grid, [](double x) { return x; });
  CHECK(d == doctest::Approx(0.005).epsilon(1e-9));
}

TEST_CASE("interpolated sample quantile") {
  std::vector<double> v = {1.0, 2.0, 3.0, 4.0};
  CHECK(stats::sample_quantile_sorted(v, 0.5) == doctest::Approx(2.5));
  CHECK(stats::sample_quantile_sorted(v, 0.25) == doctest::Approx(1.75));
  CHECK(stats::median({3.0, 1.0, 2.0}) == doctest::Approx(2.0));
}

TEST_CASE("adaptive simpson integrates a gaussian") {
  double v = stats::adaptive_simpson([](double x) { return stats::normal_pdf(x); }, -10, 10,
                                     1e-13);
  CHECK(v == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("ols slope") {
  std::vector<double> x = {1, 2, 3, 4}, y = {2.0, 3.9, 6.1, 8.0};
  auto fit = stats::ols_line(x, y);
  CHECK(fit.slope == doctest::Approx(2.0).epsilon(0.02));
}
