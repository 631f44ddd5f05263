#pragma once

#include <cstdint>

namespace mimo {

// Real-operation tally. Conventions: one complex multiplication costs
// 4 real multiplications and 2 real additions, one complex addition
// costs 2 real additions, and a real division or square root counts as
// one real multiplication.
struct FlopLedger {
  std::uint64_t real_mults = 0;
  std::uint64_t real_adds = 0;

  FlopLedger& operator+=(const FlopLedger& o) {
    real_mults += o.real_mults;
    real_adds += o.real_adds;
    return *this;
  }

  void complex_mult(std::uint64_t n = 1) { real_mults += 4 * n; real_adds += 2 * n; }
  void complex_add(std::uint64_t n = 1) { real_adds += 2 * n; }
  // |z|^2 as a complex multiplication under the cost model.
  void complex_mag2(std::uint64_t n = 1) { complex_mult(n); }
  // complex / positive real: two real divisions.
  void complex_real_div(std::uint64_t n = 1) { real_mults += 2 * n; }
  void real_div(std::uint64_t n = 1) { real_mults += n; }
  void real_sqrt(std::uint64_t n = 1) { real_mults += n; }
  void real_mult(std::uint64_t n = 1) { real_mults += n; }
  void real_add(std::uint64_t n = 1) { real_adds += n; }

  // Instrumented orthogonalization steps on columns of height m. The
  // norm-and-scale step costs 7m mults + 2m adds; one projection update
  // costs 8m mults + 6m adds. These per-step constants reproduce the
  // reference operation counts (e.g. 304/176 for a full 4x4 pass).
  void mgs_norm_scale(std::uint64_t m) { real_mults += 7 * m; real_adds += 2 * m; }
  void mgs_projection(std::uint64_t m) { real_mults += 8 * m; real_adds += 6 * m; }

  std::uint64_t total() const { return real_mults + real_adds; }
};

struct FlopCost {
  std::uint64_t real_mults = 0;
  std::uint64_t real_adds = 0;
  std::uint64_t total() const { return real_mults + real_adds; }
};

enum class CostKind {
  kQrd,              // full decomposition of an n x n channel
  kPuncture,         // zeroing pass applied after the decomposition
  kPuncturedProduct  // savings of one punctured-matrix/vector product
};

// Closed-form polynomial costs.
//   kPuncturedProduct: (n^2-3n+2) adds + (2n^2-6n+4) mults
//   kQrd:              (4n^3-n^2-n) adds + (4n^3+3n^2) mults
//   kPuncture:         2/3(8n^3-15n^2+4n-12) adds + (16/3 n^3-7n^2+8/3 n-20) mults
FlopCost flop_cost(CostKind kind, int n);

// Real-multiplication baseline of a nulling-and-cancellation pass,
// 2n^2+2n+2; the punctured-product savings ratio against it gives 77%
// at n=16 and ~94% at n=64.
std::uint64_t nc_multiplication_baseline(int n);

}  // namespace mimo
