#include "curator/rng.hpp"

#include <cmath>
#include <unordered_set>

namespace curator {

double Rng::gaussian() {
  double u1 = uniform01();
  double u2 = uniform01();
  while (u1 <= 1e-300) u1 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::vector<std::size_t> Rng::sample_without_replacement(std::size_t n, std::size_t k) {
  std::vector<std::size_t> out;
  if (k >= n) {
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = i;
    shuffle(out);
    return out;
  }
  out.reserve(k);
  std::unordered_set<std::size_t> seen;
  while (out.size() < k) {
    std::size_t idx = static_cast<std::size_t>(bounded(n));
    if (seen.insert(idx).second) out.push_back(idx);
  }
  return out;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

Hash128 fingerprint128(std::string_view bytes) {
  Hash128 out;
  out.lo = fnv1a64(bytes);
  // Second stream: different offset basis, same prime.
  std::uint64_t h = 0x6C62272E07BB0142ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
    h ^= h >> 29;
  }
  out.hi = h;
  return out;
}

}  // namespace curator
