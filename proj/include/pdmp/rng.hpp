#pragma once

#include <cmath>
#include <cstdint>

namespace pdmp {

// Counter-based splittable generator in the SplitMix64 family
// (Steele, Lea, Flood 2014; Vigna 2015).  The i-th output of a stream is a
// pure function of (seed, stream, i), so Monte Carlo results do not depend
// on execution order or the number of worker threads: path k always draws
// from RngStream(seed, k).
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream)
      : counter_(derive(seed, stream)) {}

  std::uint64_t next_u64() {
    counter_ += kGamma;
    return mix(counter_);
  }

  /// Uniform on the open interval (0,1); never returns an endpoint.
  double uniform01() {
    const std::uint64_t bits = next_u64() >> 11;  // top 53 bits
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  double exponential(double rate) { return -std::log(uniform01()) / rate; }

  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= UINT64_C(0xBF58476D1CE4E5B9);
    z ^= z >> 27;
    z *= UINT64_C(0x94D049BB133111EB);
    z ^= z >> 31;
    return z;
  }

 private:
  static constexpr std::uint64_t kGamma = UINT64_C(0x9E3779B97F4A7C15);

  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
    // Two mixing rounds keep nearby (seed, stream) pairs uncorrelated.
    return mix(mix(seed + kGamma) ^ mix(stream * kGamma + UINT64_C(0x1F123BB5)));
  }

  std::uint64_t counter_;
};

}  // namespace pdmp
