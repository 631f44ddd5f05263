#pragma once

#include <complex>
#include <cstdint>

namespace mimo {

// Deterministic splittable generator. splitmix64 core with explicit
// (trial, purpose) stream derivation so results are reproducible for a
// given master seed regardless of worker count or platform. Gaussians
// come from our own Box-Muller; std::normal_distribution is
// implementation-defined and would break byte-identical output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  // Independent stream for one (trial, purpose) pair under a master seed.
  static Rng stream(std::uint64_t master_seed, std::uint64_t trial, std::uint64_t purpose);

  std::uint64_t next_u64();

  // Uniform on [0, 1).
  double next_double();

  // Standard normal N(0, 1).
  double next_gaussian();

  // Circularly-symmetric complex normal CN(0, 1): each part N(0, 1/2).
  std::complex<double> next_cgaussian();

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Stream purposes used by the simulation harness.
namespace rng_purpose {
inline constexpr std::uint64_t kChannel = 1;
inline constexpr std::uint64_t kNoise = 2;
inline constexpr std::uint64_t kSymbols = 3;
inline constexpr std::uint64_t kHypothesis = 4;
inline constexpr std::uint64_t kRedraw = 100;  // offset added per redraw attempt
}  // namespace rng_purpose

}  // namespace mimo
