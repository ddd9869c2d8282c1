#pragma once

#include <cstdint>
#include <limits>

namespace sadmm {

/// Counter-addressed pseudo-random stream.
///
/// A generator is identified by (seed, stream, counter); two generators built
/// from the same triple emit the same sequence. Each oracle call uses its own
/// counter value, so replications never share mutable RNG state. The bit
/// source is SplitMix64 keyed by a mix of the triple. Satisfies
/// UniformRandomBitGenerator, so the standard <random> distributions apply.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter)
      : state_(mix(seed ^ mix(stream ^ mix(counter + 0x632be59bd9b4e019ULL)))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

/// Stream identifiers reserved inside one replication.
namespace streams {
inline constexpr std::uint64_t kProbes = 0x7072'6f62'6573ULL;  // invariant probes
inline constexpr std::uint64_t kData = 0x6461'7461ULL;         // preset data generation
}  // namespace streams

}  // namespace sadmm
