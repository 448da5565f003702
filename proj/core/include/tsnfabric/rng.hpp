#pragma once

#include <cstdint>
#include <random>

namespace tsnfabric {

/// Independent random streams derived from one 64-bit seed.
///
/// Stream ids:
///   traffic(t)  per-terminal Bernoulli arrivals, destinations, priorities
///   routing(e)  per-element route choice among equivalent output ports
///   faults()    fault placement for nested fault experiments
///   sweep(k)    seed of the k-th run in an injection sweep
///   oracle()    Monte Carlo reliability estimation
///
/// Conversions to doubles and bounded integers are done here rather than
/// with <random> distributions so that a stream yields the same values on
/// every standard library.
enum class StreamDomain : std::uint64_t { Traffic = 1, Routing = 2, Faults = 3, Sweep = 4, Oracle = 5 };

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, StreamDomain domain, std::uint64_t index) {
  return splitmix64(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(domain))) + index);
}

class RandomStream {
 public:
  RandomStream() : RandomStream(0, StreamDomain::Traffic, 0) {}
  RandomStream(std::uint64_t seed, StreamDomain domain, std::uint64_t index)
      : engine_(derive_seed(seed, domain, index)) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return uniform() < p;
  }

  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) {
    if (bound <= 1) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % bound;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace tsnfabric
