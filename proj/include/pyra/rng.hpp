#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace pyra {

// All randomness in the project flows through Rng. The distributions are
// written out by hand (instead of <random>'s distribution classes, whose
// output is implementation-defined) so that a given seed produces the same
// stream on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t bits() { return eng_(); }

  // Uniform in [0, 1), 53 bits of mantissa.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Rejection-free modulo is fine here: n is
  // always tiny compared to 2^64 so the bias is far below any tolerance
  // used in this project, and the stream stays one-draw-per-call.
  std::uint64_t uniform_int(std::uint64_t n) { return n ? eng_() % n : 0; }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 eng_;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

// Derives an independent seed from (root seed, stream name, index). Used to
// give each purpose ("init", "sample") and each epoch its own stream, so
// e.g. resuming training at epoch k replays exactly the epoch-k draws.
inline std::uint64_t substream_seed(std::uint64_t seed, std::string_view name,
                                    std::uint64_t index = 0) {
  std::uint64_t h = detail::splitmix64(seed);
  h ^= detail::fnv1a(name);
  h = detail::splitmix64(h);
  h ^= index;
  return detail::splitmix64(h);
}

inline Rng substream(std::uint64_t seed, std::string_view name,
                     std::uint64_t index = 0) {
  return Rng(substream_seed(seed, name, index));
}

}  // namespace pyra
