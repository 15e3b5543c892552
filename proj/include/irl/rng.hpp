#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace irl {

/// splitmix64 finalizer; used to decorrelate derived seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Named-stream seed derivation. Each consumer of randomness asks for its own
/// stream by name, so adding a consumer never shifts the draws of another.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view stream) {
  return mix64(master ^ mix64(fnv1a(stream)));
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view stream,
                                    std::uint64_t index) {
  return mix64(derive_seed(master, stream) + mix64(index + 1));
}

/// Portable random source. mt19937_64 is bit-specified by the standard; the
/// distributions below are written out so results do not depend on the
/// standard library vendor.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Rejection sampling avoids modulo bias.
  std::uint64_t uniform_index(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace irl
