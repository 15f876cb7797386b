#ifndef POPDYN_RNG_HPP
#define POPDYN_RNG_HPP

#include <cmath>
#include <cstdint>

namespace popdyn {

// Counter-mode generator built on the splitmix64 finalizer:
//   output(n) = fin(key + (n+1) * 0x9E3779B97F4A7C15)
// Streams are derived by hashing (seed, stream), so replicate i of an
// ensemble gets an independent stream regardless of thread schedule.
// State is two 64-bit words; sequences are reproducible across platforms.
class CounterRng {
 public:
  CounterRng(uint64_t seed, uint64_t stream)
      : key_(fin(fin(seed + kGamma) ^ fin(stream * kGamma + 0x1F123BB5ull))) {}

  uint64_t next_u64() {
    ++n_;
    return fin(key_ + n_ * kGamma);
  }

  // Uniform in [0,1), 53-bit resolution.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Inverse-CDF exponential draw with the given rate.
  double next_exponential(double rate) {
    return -std::log1p(-next_unit()) / rate;
  }

  uint64_t draws() const { return n_; }

 private:
  static constexpr uint64_t kGamma = 0x9E3779B97F4A7C15ull;

  static uint64_t fin(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  uint64_t key_;
  uint64_t n_ = 0;
};

}  // namespace popdyn

#endif
