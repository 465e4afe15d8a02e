#pragma once

#include <cstdint>

namespace crel {

// splitmix64 finalizer (Steele, Lea and Flood 2014 / Vigna's fixed-increment
// variant). Used both as the stream generator and to derive substream seeds.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * UINT64_C(0xBF58476D1CE4E5B9);
  z = (z ^ (z >> 27)) * UINT64_C(0x94D049BB133111EB);
  return z ^ (z >> 31);
}

// Counter-based stream: state advances by a fixed odd increment and the
// output is a mix of the counter.  Substreams for (master, index) are
// independent streams regardless of how many draws other streams consume,
// which keeps parallel replications deterministic under any scheduling.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  static RngStream substream(std::uint64_t master, std::uint64_t index) {
    std::uint64_t s = mix64(master + UINT64_C(0x9E3779B97F4A7C15) * (index + 1));
    return RngStream(mix64(s ^ UINT64_C(0xD1B54A32D192ED03)));
  }

  std::uint64_t next_u64() {
    state_ += UINT64_C(0x9E3779B97F4A7C15);
    return mix64(state_);
  }

  // strictly inside (0,1)
  double uniform01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
  }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  double laplace(double loc, double scale);
  double exponential(double mean) ;
  long poisson(double mean);

 private:
  std::uint64_t state_;

  long poisson_inversion(double mean);
  long poisson_ptrs(double mean);
};

}  // namespace crel
