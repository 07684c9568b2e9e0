#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace cvar {

/// Deterministic random stream.
///
/// Uniform variates are built directly from the 64-bit engine output rather
/// than through std::uniform_real_distribution, whose algorithm is
/// implementation-defined; this keeps outputs identical across standard
/// libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::uint64_t next_u64() { return engine_(); }

  /// Index drawn from a discrete distribution given by `probabilities`.
  std::size_t categorical(std::span<const double> probabilities);

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finaliser; used to derive independent substream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for the substream identified by (master, tag, a, b). Rollout j of
/// iteration i uses substream_seed(master, tag, i, j), so results do not depend
/// on the order in which rollouts are executed.
constexpr std::uint64_t substream_seed(std::uint64_t master, std::uint64_t tag, std::uint64_t a = 0,
                                       std::uint64_t b = 0) {
  std::uint64_t h = mix64(master);
  h = mix64(h ^ (tag + 0x632be59bd9b4e019ULL));
  h = mix64(h ^ (a + 0x8cb92ba72f3d8dd7ULL));
  return mix64(h ^ (b + 0x2545f4914f6cdd1dULL));
}

// Substream tags.
inline constexpr std::uint64_t kTagWarmup = 1;
inline constexpr std::uint64_t kTagTrain = 2;
inline constexpr std::uint64_t kTagEval = 3;

}  // namespace cvar
