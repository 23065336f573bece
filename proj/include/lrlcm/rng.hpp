#pragma once

#include <cstdint>
#include <random>

namespace lrlcm {

/// Deterministic random stream keyed by (seed, stream id).
///
/// The same (seed, id) pair always reproduces the same draw sequence, and
/// distinct ids give streams that may be used concurrently. All samplers in
/// the library take an explicit RngStream so that chains, replications and
/// tests are reproducible bit for bit.
class RngStream {
public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed), stream_id_(stream_id) {
    // SplitMix64 over (seed, id) to decorrelate nearby keys before seeding
    // the engine.
    std::uint64_t s0 = mix(seed ^ 0x9E3779B97F4A7C15ULL);
    std::uint64_t s1 = mix(s0 + stream_id);
    std::uint64_t s2 = mix(s1 + 0xBF58476D1CE4E5B9ULL);
    std::seed_seq seq{static_cast<std::uint32_t>(s0), static_cast<std::uint32_t>(s0 >> 32),
                      static_cast<std::uint32_t>(s1), static_cast<std::uint32_t>(s1 >> 32),
                      static_cast<std::uint32_t>(s2), static_cast<std::uint32_t>(s2 >> 32)};
    engine_.seed(seq);
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform draw strictly inside (0, 1).
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1p-53;
  }

  /// Uniform draw on (lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  /// Derived stream for a child task (replication, chain, ...).
  RngStream substream(std::uint64_t child) const {
    return RngStream(seed_, mix(stream_id_ * 0x9E3779B97F4A7C15ULL + child + 1));
  }

private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
};

}  // namespace lrlcm
