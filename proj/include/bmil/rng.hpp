#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace bmil {

// splitmix64 finalizer; used to derive stream seeds from a master seed.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Deterministic random stream. mt19937_64 output is fully specified by the
// standard; the uniform/normal transforms are our own so sampled values do
// not depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  // Named sub-stream of a master seed ("demo", "policy_train", ...).
  static Rng stream(std::uint64_t master, std::string_view name) {
    return Rng(mix64(master ^ fnv1a64(name)));
  }

  // Indexed child stream (per-trial, per-worker); independent of how many
  // values the parent has consumed.
  Rng split(std::uint64_t index) const {
    return Rng(mix64(seed_ ^ mix64(index + 0x51ed270b7a64a1ULL)));
  }

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1).
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via Box-Muller (cosine branch only: two uniforms per
  // draw, fixed stream consumption).
  double normal() {
    double u1 = static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;  // (0,1]
    double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;        // [0,1)
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925287 * u2);
  }

  // Uniform index in [0, n). Modulo bias is < n/2^64, irrelevant here.
  std::size_t index(std::size_t n) { return engine_() % n; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace bmil
