#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mimo/constellation.hpp"
#include "mimo/decompose.hpp"
#include "mimo/flops.hpp"
#include "mimo/matrix.hpp"

namespace mimo {

struct SearchSpaceTooLarge : ConfigError {
  explicit SearchSpaceTooLarge(const std::string& what) : ConfigError(what) {}
};
struct SingularMatrix : NumericalError {
  explicit SingularMatrix(const std::string& what) : NumericalError(what) {}
};
struct RadiusTooSmall : NumericalError {
  explicit RadiusTooSmall(const std::string& what) : NumericalError(what) {}
};
struct UnsupportedLayerCount : ConfigError {
  explicit UnsupportedLayerCount(const std::string& what) : ConfigError(what) {}
};

// LLR magnitude cap, as a multiple of 1/sigma^2.
inline constexpr double kDefaultLlrClampScale = 50.0;

struct DetectionResult {
  std::vector<int> hard;    // labels, original layer order
  ComplexVector symbols;    // constellation points, original layer order
  RealMatrix llrs;          // q x N; bit k of layer n at (k, n); empty if hard-only
  double distance = 0.0;    // metric achieved by the hard decision
  FlopLedger ledger;
  std::int64_t nodes_visited = 0;  // lattice points / tree nodes whose metric was computed
  int iterations = 0;              // center-refinement passes, where applicable
};

struct Candidate {
  std::vector<int> labels;  // original layer order
  double distance;
};

struct CandidateList {
  std::vector<Candidate> entries;
};

// One candidate per root symbol: interference cancellation down the rows of
// R (plain successive cancellation for a dense R, independent per-layer
// slicing when R is punctured). `order[i]` is the original layer held at
// permuted position i; labels are reported in original layer order.
CandidateList sic_candidates(const ComplexVector& yt, const ComplexMatrix& R,
                             const Constellation& c,
                             const std::vector<int>& order,
                             FlopLedger* ledger = nullptr);

DetectionResult detect_ml_exhaustive(const ComplexVector& y, const ComplexMatrix& H,
                                     const Constellation& c, double sigma2, bool soft,
                                     double llr_clamp_scale = kDefaultLlrClampScale);

// Exhaustive minimization over a per-layer alphabet product lattice. The LLR
// matrix is sized by the widest alphabet; rows past a layer's bit count stay
// zero. With a uniform alphabet this reproduces detect_ml_exhaustive exactly.
DetectionResult detect_ml_mixed(const ComplexVector& y, const ComplexMatrix& H,
                                const std::vector<const Constellation*>& layers,
                                double sigma2, bool soft,
                                double llr_clamp_scale = kDefaultLlrClampScale);

// Exhaustive minimization of the punctured metric over the whole lattice.
DetectionResult detect_pml_exhaustive(const ComplexVector& y, const Wrd& pdec,
                                      const Constellation& c, double sigma2, bool soft,
                                      double llr_clamp_scale = kDefaultLlrClampScale);

DetectionResult detect_zf(const ComplexVector& y, const ComplexMatrix& H,
                          const Constellation& c, double sigma2, bool soft,
                          double llr_clamp_scale = kDefaultLlrClampScale);

DetectionResult detect_mmse(const ComplexVector& y, const ComplexMatrix& H,
                            const Constellation& c, double sigma2, bool soft,
                            double llr_clamp_scale = kDefaultLlrClampScale);

DetectionResult detect_nc(const ComplexVector& y, const Qrd& dec, const Constellation& c);

DetectionResult detect_pnc(const ComplexVector& y, const Wrd& pdec, const Constellation& c);

DetectionResult detect_chase(const ComplexVector& y, const Qrd& dec,
                             const Constellation& c, double sigma2, bool soft,
                             double llr_clamp_scale = kDefaultLlrClampScale);

DetectionResult detect_pchase(const ComplexVector& y, const Wrd& pdec,
                              const Constellation& c, double sigma2, bool soft,
                              double llr_clamp_scale = kDefaultLlrClampScale);

// Chase detection repeated across layer orderings; the winner is the global
// minimum (metrics are preserved under the orthonormal rotation, so they are
// comparable across orderings). Soft output tracks global per-bit minima.
DetectionResult detect_lord(const ComplexVector& y, const ComplexMatrix& H,
                            const Constellation& c, double sigma2, bool soft,
                            const std::vector<std::vector<int>>& layer_schedule,
                            double llr_clamp_scale = kDefaultLlrClampScale);

// Punctured counterpart; per-ordering metrics are not comparable, so the
// winner is picked by the true distance ||y - Hx||^2.
DetectionResult detect_ssd(const ComplexVector& y, const ComplexMatrix& H,
                           const Constellation& c, double sigma2, bool soft,
                           const std::vector<std::vector<int>>& layer_schedule,
                           double llr_clamp_scale = kDefaultLlrClampScale);

// Symbol-based variants: each ordering contributes only its root symbol
// (and that symbol's LLRs) to the assembled output. The schedule must root
// every layer exactly once.
DetectionResult detect_slord(const ComplexVector& y, const ComplexMatrix& H,
                             const Constellation& c, double sigma2, bool soft,
                             const std::vector<std::vector<int>>& layer_schedule,
                             double llr_clamp_scale = kDefaultLlrClampScale);

DetectionResult detect_sssd(const ComplexVector& y, const ComplexMatrix& H,
                            const Constellation& c, double sigma2, bool soft,
                            const std::vector<std::vector<int>>& layer_schedule,
                            double llr_clamp_scale = kDefaultLlrClampScale);

// Depth-first search with distance-increment enumeration at every level.
// Soft mode adds one complement-constrained traversal per bit.
DetectionResult detect_sphere(const ComplexVector& y, const Qrd& dec,
                              const Constellation& c, double sigma2, bool soft,
                              std::optional<double> radius = std::nullopt,
                              double llr_clamp_scale = kDefaultLlrClampScale);

enum class CenterStrategy {
  kEqualized,   // per-ordering equalized root symbol
  kZfdfOrdered, // decision-feedback candidates from both orderings, best kept
  kIterative,   // center-generator fixed point, bounded passes
  kMmse,        // equalizer hard decision
};

enum class LlrFill {
  kSaturate,         // clamp missing hypotheses
  kMaxNorm,          // substitute the worst visited metric
  kRegionThreshold,  // approximate distance via nearest opposite-bit point
};

// Dual-layer reduced-region detection: the root symbol enumerates a square
// region of the constellation around a center instead of the full alphabet.
// With priors, the search maximizes the prior-augmented metric.
DetectionResult detect_lclord(const ComplexVector& y, const ComplexMatrix& H,
                              const Constellation& c, double sigma2, int region_size,
                              CenterStrategy center, LlrFill fill, bool soft,
                              const RealMatrix* priors = nullptr,
                              int max_center_iterations = 8,
                              double llr_clamp_scale = kDefaultLlrClampScale);

}  // namespace mimo
