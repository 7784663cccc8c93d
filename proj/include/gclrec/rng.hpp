#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace gclrec {

/// Seeded random stream. All draws go through the hand-rolled helpers below
/// rather than <random> distributions, so a given (seed, purpose) stream
/// produces the same values on every standard-conforming platform.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1), 53-bit resolution.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform on the open interval (0, 1); safe for log(u) and log(1-u).
  double uniform_open01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Unbiased integer in [0, n). Rejection sampling on the top bits.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t threshold = (~n + 1) % n;  // 2^64 mod n
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  /// Fisher-Yates shuffle.
  template <typename Vec>
  void shuffle(Vec& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

private:
  std::mt19937_64 engine_;
};

namespace detail {

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t mix64(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Derives an independent stream from the run seed and a purpose label
/// (plus optional integer qualifiers such as epoch or batch index).
/// Adding a new consumer with a new label never perturbs existing streams.
inline Rng derive_stream(std::uint64_t seed, std::string_view purpose,
                         std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = detail::fnv1a64(purpose);
  h = detail::mix64(h ^ detail::mix64(seed));
  h = detail::mix64(h ^ detail::mix64(a + 0x517CC1B727220A95ULL));
  h = detail::mix64(h ^ detail::mix64(b + 0x2545F4914F6CDD1DULL));
  return Rng(h);
}

}  // namespace gclrec
