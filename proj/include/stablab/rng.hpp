#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace stablab {

// SplitMix64 finalizer; used to derive independent named sub-streams.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);
std::uint64_t fnv1a64(std::string_view bytes);

// mt19937_64 with portable distribution code: the standard library's
// distributions are implementation-defined, so draws here are hand-rolled to
// keep outputs identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n), rejection sampled (no modulo bias).
  std::uint64_t below(std::uint64_t n);
  double normal();
  std::vector<double> normal_vector(std::size_t n, double scale = 1.0);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace stablab
