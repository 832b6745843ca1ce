#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace l2t {

// Deterministic random stream. The engine is mt19937_64, whose output
// sequence is fixed by the standard; the real-valued draws are derived
// here rather than through <random> distributions, which differ between
// standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  // Independent stream for a named purpose, e.g. ("attack", image_index).
  static Rng substream(std::uint64_t seed, std::string_view name, std::uint64_t index = 0);

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0,1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  // Standard normal via Box-Muller (no cached second value).
  double normal();

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace l2t
