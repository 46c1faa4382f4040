#pragma once

#include <cmath>
#include <cstdint>

namespace ctta {

// Counter-based splittable RNG (SplitMix64 stream). State is a (key, counter)
// pair carried by value: every draw is a pure function of the pair, so any
// point of a run can be regenerated from (seed, stream tag, index) without
// replaying history. No global state anywhere.
class Rng {
 public:
  Rng() = default;
  explicit Rng(std::uint64_t key) : key_(key) {}

  static Rng from_seed(std::uint64_t seed) { return Rng(mix(seed ^ kGolden)); }

  // Derives an independent stream keyed by `stream`; this generator is not
  // advanced.
  [[nodiscard]] Rng split(std::uint64_t stream) const {
    return Rng(mix(key_ ^ mix(stream + kGolden)));
  }

  std::uint64_t next_u64() { return mix(key_ + (++counter_) * kGolden); }

  // Uniform in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller (one value per call, no cached state).
  double next_gaussian() {
    double u1 = next_double();
    const double u2 = next_double();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Uniform in [0, n), unbiased (rejection).
  std::uint64_t next_below(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t rem = (~std::uint64_t{0} % n + 1) % n;  // 2^64 mod n
    if (rem == 0) return next_u64() % n;
    const std::uint64_t threshold = std::uint64_t{0} - rem;     // 2^64 - rem
    std::uint64_t x = next_u64();
    while (x >= threshold) x = next_u64();
    return x % n;
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  static std::uint64_t mix(std::uint64_t x) {
    x += kGolden;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
  }

 private:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

// Fixed stream tags; every consumer of randomness splits off one of these so
// streams never collide across purposes.
enum class RngStream : std::uint64_t {
  kSourceMeans = 1,
  kSourceData = 2,
  kAdaptBatch = 3,
  kEvalSplit = 4,
  kDomainParams = 5,
  kReplay = 6,
  kPretrainShuffle = 7,
  kInitWeights = 8,
  kReservoir = 9,
};

inline Rng split(const Rng& rng, RngStream s) {
  return rng.split(static_cast<std::uint64_t>(s));
}

}  // namespace ctta
