#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace curator {

// Deterministic cross-platform RNG. std::shuffle / uniform_int_distribution
// are stdlib-dependent, so everything random in the toolkit goes through this.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    // splitmix64
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, bound), bound > 0. Rejection sampling keeps it unbiased.
  std::uint64_t bounded(std::uint64_t bound) {
    std::uint64_t threshold = (0ULL - bound) % bound;
    for (;;) {
      std::uint64_t r = next();
      if (r >= threshold) return r % bound;
    }
  }

  double uniform01() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  // Box-Muller; one value per call, cached pair discarded for simplicity.
  double gaussian();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(bounded(i));
      using std::swap;
      swap(v[i - 1], v[j]);
    }
  }

  // k distinct indices from [0, n), order of draw preserved.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  std::uint64_t state_;
};

// 64-bit FNV-1a, used for keying per-item RNG streams.
std::uint64_t fnv1a64(std::string_view bytes);

// Derives an independent stream from a master seed and a string key, so
// per-example randomness is stable under any processing order.
inline Rng keyed_rng(std::uint64_t seed, std::string_view key) {
  return Rng(seed ^ fnv1a64(key));
}

struct Hash128 {
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;
  bool operator==(const Hash128&) const = default;
  auto operator<=>(const Hash128&) const = default;
};

// 128-bit fingerprint of a byte string (two independent FNV streams).
Hash128 fingerprint128(std::string_view bytes);

struct Hash128Hasher {
  std::size_t operator()(const Hash128& h) const noexcept {
    return static_cast<std::size_t>(h.lo ^ (h.hi * 0x9E3779B97F4A7C15ULL));
  }
};

}  // namespace curator
