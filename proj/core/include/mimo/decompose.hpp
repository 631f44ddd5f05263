#pragma once

#include <optional>
#include <vector>

#include "mimo/constellation.hpp"
#include "mimo/flops.hpp"
#include "mimo/matrix.hpp"

namespace mimo {

// QR decomposition with orthonormal Q and real positive diagonal in R.
struct Qrd {
  ComplexMatrix Q;  // M x N
  ComplexMatrix R;  // N x N upper triangular
};

// Rank-deficiency threshold, relative to the Frobenius norm of the input.
inline constexpr double kRankTolerance = 1e-12;

Qrd qrd_mgs(const ComplexMatrix& H, FlopLedger* ledger = nullptr);

// Punctured decomposition: W^H H = Rp where Rp is upper triangular with
// zeros above the diagonal except in the last column, and W has unit-norm
// columns. The last column of W equals the last column of Q.
struct Wrd {
  ComplexMatrix W;   // M x N
  ComplexMatrix Rp;  // N x N, punctured
};

Wrd puncture(const Qrd& qr, FlopLedger* ledger = nullptr);
Wrd wrd(const ComplexMatrix& H, FlopLedger* ledger = nullptr);

// One decomposition of a permuted channel within a prefix-reuse sequence.
struct OrderedQrd {
  std::vector<int> order;  // column order applied to H (0-based)
  Qrd qr;
  int reused_prefix = 0;   // leading columns taken from the previous stage
};

// Decomposes H with its columns permuted per each order, reusing the work
// for the longest prefix shared with the immediately preceding order.
std::vector<OrderedQrd> prqrd(const ComplexMatrix& H,
                              const std::vector<std::vector<int>>& orders,
                              FlopLedger* ledger = nullptr);

enum class ScheduleKind {
  kSinglePermutation,  // order t swaps column t with the last column
  kPairwise,           // paired roots sharing an N-2 column prefix
  kCyclic,             // order t is a right rotation by t-1
};

// Column orders (0-based) for the given schedule; every column appears in
// the last (root) position exactly once across the schedule.
std::vector<std::vector<int>> permutation_schedule(ScheduleKind kind, int n);

// Channel column order minimizing the cumulative residual of the partial
// Babai solutions, ties broken lexicographically. Enumerates all orderings.
std::vector<int> mrqrd_order(const ComplexMatrix& H, const ComplexVector& y,
                             const Constellation& cons);

}  // namespace mimo
