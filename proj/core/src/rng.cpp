#include "mimo/rng.hpp"

#include <cmath>
#include <numbers>

namespace mimo {
namespace {

inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

Rng Rng::stream(std::uint64_t master_seed, std::uint64_t trial, std::uint64_t purpose) {
  std::uint64_t s = master_seed;
  std::uint64_t a = splitmix64(s);
  s ^= trial * 0xD1B54A32D192ED03ULL;
  std::uint64_t b = splitmix64(s);
  s ^= purpose * 0x8CB92BA72F3D8DD7ULL;
  std::uint64_t c = splitmix64(s);
  return Rng(a ^ (b + 0x9E3779B97F4A7C15ULL) ^ (c << 1));
}

std::uint64_t Rng::next_u64() { return splitmix64(state_); }

double Rng::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::next_gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // 1 - u in (0, 1] keeps the log argument positive.
  double u1 = 1.0 - next_double();
  double u2 = next_double();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::complex<double> Rng::next_cgaussian() {
  const double scale = std::numbers::sqrt2 / 2.0;
  double re = next_gaussian();
  double im = next_gaussian();
  return {re * scale, im * scale};
}

}  // namespace mimo
