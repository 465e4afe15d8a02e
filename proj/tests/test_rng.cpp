#include <doctest.h>

#include <cmath>
#include <vector>

#include "crel/rng.hpp"
#include "crel/stats.hpp"

using namespace crel;

TEST_CASE("streams are deterministic and substreams differ") {
  RngStream a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  RngStream s0 = RngStream::substream(7, 0);
  RngStream s1 = RngStream::substream(7, 1);
  CHECK(s0.next_u64() != s1.next_u64());

  // substream draws do not depend on how much the master stream was used
  RngStream c0 = RngStream::substream(99, 5);
  RngStream m(99);
  m.next_u64();
  RngStream c1 = RngStream::substream(99, 5);
  CHECK(c0.next_u64() == c1.next_u64());
}

TEST_CASE("uniform draws stay inside the open interval") {
  RngStream rng(1);
  for (int i = 0; i < 20000; ++i) {
    double u = rng.uniform01();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("normal and laplace moments") {
  RngStream rng(2024);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    double z = rng.normal();
    s += z;
    s2 += z * z;
  }
  CHECK(std::fabs(s / n) < 0.01);
  CHECK(std::fabs(s2 / n - 1.0) < 0.02);

  s = 0;
  s2 = 0;
  for (int i = 0; i < n; ++i) {
    double z = rng.laplace(0.5, 1.0);
    s += z;
    s2 += (z - 0.5) * (z - 0.5);
  }
  CHECK(std::fabs(s / n - 0.5) < 0.01);
  CHECK(std::fabs(s2 / n - 2.0) < 0.05);  // variance 2 b^2
}

TEST_CASE("poisson sampler matches its mean and variance across regimes") {
  for (double mean : {0.3, 4.0, 12.0, 80.0, 3000.0}) {
    RngStream rng(static_cast<std::uint64_t>(mean * 1000) + 5);
    const int n = 100000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
      double k = static_cast<double>(rng.poisson(mean));
      s += k;
      s2 += k * k;
    }
    double m = s / n;
    double v = s2 / n - m * m;
    CHECK(std::fabs(m - mean) < 5.0 * std::sqrt(mean / n));
    CHECK(v / mean == doctest::Approx(1.0).epsilon(0.05));
  }
}

TEST_CASE("poisson small-mean pmf agrees with the closed form") {
  RngStream rng(77);
  const double mean = 2.5;
  const int n = 200000;
  std::vector<int> counts(30, 0);
  for (int i = 0; i < n; ++i) {
    long k = rng.poisson(mean);
    if (k < 30) ++counts[k];
  }
  double p = std::exp(-mean);
  for (int k = 0; k < 10; ++k) {
    double expected = n * p;
    CHECK(std::fabs(counts[k] - expected) < 5.0 * std::sqrt(expected) + 5.0);
    p *= mean / (k + 1);
  }
}
