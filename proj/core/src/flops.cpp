#include "mimo/flops.hpp"

#include <stdexcept>

namespace mimo {

FlopCost flop_cost(CostKind kind, int n) {
  if (n < 2) throw std::invalid_argument("flop_cost: n must be >= 2");
  const std::int64_t N = n;
  FlopCost c;
  switch (kind) {
    case CostKind::kPuncturedProduct:
      c.real_adds = static_cast<std::uint64_t>(N * N - 3 * N + 2);
      c.real_mults = static_cast<std::uint64_t>(2 * N * N - 6 * N + 4);
      break;
    case CostKind::kQrd:
      c.real_adds = static_cast<std::uint64_t>(4 * N * N * N - N * N - N);
      c.real_mults = static_cast<std::uint64_t>(4 * N * N * N + 3 * N * N);
      break;
    case CostKind::kPuncture:
      c.real_adds = static_cast<std::uint64_t>(2 * (8 * N * N * N - 15 * N * N + 4 * N - 12) / 3);
      c.real_mults = static_cast<std::uint64_t>((16 * N * N * N - 21 * N * N + 8 * N - 60) / 3);
      break;
  }
  return c;
}

std::uint64_t nc_multiplication_baseline(int n) {
  if (n < 1) throw std::invalid_argument("nc_multiplication_baseline: n must be >= 1");
  const std::uint64_t N = static_cast<std::uint64_t>(n);
  return 2 * N * N + 2 * N + 2;
}

}  // namespace mimo
