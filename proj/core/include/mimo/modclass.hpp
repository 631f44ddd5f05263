#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mimo/constellation.hpp"
#include "mimo/matrix.hpp"

namespace mimo {

// One received tone: y = h x + n with the leading layers of x drawn from a
// known constellation and the trailing layers from an unknown one.
struct Observation {
  ComplexVector y;
  ComplexMatrix h;
};
using ObservationList = std::vector<Observation>;

// Candidate constellations for the unknown stream, with the implied
// log(1/|U_j|) prior-correction terms. Tags must be distinct.
class HypothesisSet {
 public:
  explicit HypothesisSet(std::vector<ConstellationId> ids);
  static HypothesisSet defaults();  // phi, qpsk, qam16, qam64, qam256

  int size() const { return static_cast<int>(members_.size()); }
  const Constellation& hypothesis(int j) const { return *members_[static_cast<std::size_t>(j)]; }
  double log_prior(int j) const;  // log(1 / |U_j|)
  int phi_index() const;          // index of the zero-power hypothesis, -1 if absent

 private:
  std::vector<const Constellation*> members_;
};

struct ClassifierDecision {
  int winner = -1;
  std::vector<double> scores;  // accumulated log-likelihood per hypothesis
  int tones_used = 0;
  // Lattice metric evaluations consumed; zero when a feature gate decided.
  std::int64_t likelihood_evaluations = 0;
};

// Which detector supplies the reduced candidate list for the quasi variants.
enum class QuasiDetector {
  kSubspace,  // punctured decomposition, independent slicing per layer
  kChase,     // plain decomposition, successive cancellation per candidate
};

struct QuasiVariant {
  QuasiDetector detector = QuasiDetector::kSubspace;
  // Accumulate the reduced metric from every known layer instead of one.
  bool sum_user_layers = false;
};

// Full-lattice likelihood classification of the unknown trailing layers,
// accumulated over the first t_tones observations. The quasi variant replaces
// the exhaustive sum with the candidate list of a reduced-complexity
// detector. glrt drops the prior-correction terms.
ClassifierDecision classify_logmap(const ObservationList& obs, const Constellation& user_const,
                                   const HypothesisSet& hyps, double sigma2, int t_tones,
                                   int n_user = 1, bool glrt = false,
                                   std::optional<QuasiVariant> quasi = std::nullopt);

// Keeps only the dominant exponential per hypothesis.
ClassifierDecision classify_maxlogmap(const ObservationList& obs, const Constellation& user_const,
                                      const HypothesisSet& hyps, double sigma2, int t_tones,
                                      int n_user = 1, bool glrt = false,
                                      std::optional<QuasiVariant> quasi = std::nullopt);

// Accumulates the minimum distance plus the counter-minimum for every bit of
// the known layers, the same distances a soft detector emits for LLRs.
ClassifierDecision classify_cmld(const ObservationList& obs, const Constellation& user_const,
                                 const HypothesisSet& hyps, double sigma2, int t_tones,
                                 int n_user = 1, bool glrt = false);

// Accumulates the n_distances smallest lattice distances per tone; with
// n_distances covering the whole lattice this reduces to classify_logmap.
ClassifierDecision classify_closest_n(int n_distances, const ObservationList& obs,
                                      const Constellation& user_const, const HypothesisSet& hyps,
                                      double sigma2, int t_tones, int n_user = 1,
                                      bool glrt = false);

struct CumulantVector {
  Complex k20;        // E{s^2}
  double k21 = 0.0;   // E{|s|^2}
  Complex k40;
  double k42 = 0.0;
  Complex k61;
  double k63 = 0.0;
  bool low_sample = false;  // fewer than 100 samples were provided
};

// Plug-in estimates: printed shortcut forms for orders two and four, the
// general partition sum for order six.
CumulantVector estimate_cumulants(const ComplexVector& samples);

// Exact population values for a uniformly used alphabet.
const CumulantVector& theoretical_cumulants(const Constellation& c);

// Nearest theoretical feature vector (fourth-order cumulant pair by default)
// over an equalized sample stream.
ClassifierDecision classify_features(const ComplexVector& stream_samples,
                                     const HypothesisSet& hyps, bool sixth_order = false);

// Equalizes each tone, estimates features on the unknown streams, and keeps
// the stream with the least noise amplification.
ClassifierDecision classify_features(const ObservationList& obs, int n_user,
                                     const HypothesisSet& hyps, bool sixth_order = false);

// Gates on the measured power of the equalized unknown streams: below 1/2 the
// zero-power hypothesis wins outright, otherwise the likelihood classifier
// runs over the remaining hypotheses.
ClassifierDecision classify_hierarchical(const ObservationList& obs,
                                         const Constellation& user_const,
                                         const HypothesisSet& hyps, double sigma2, int t_tones,
                                         int n_user = 1, bool glrt = false);

enum class SubspaceMetric { kLogMap, kMaxLogMap };

// Per-layer classification for single-user streams: the layer of interest is
// swapped to the root of a punctured decomposition and enumerated over each
// hypothesis, while every other layer is sliced over a dense constellation.
ClassifierDecision classify_per_layer_subspace(
    const ObservationList& obs, int layer, const HypothesisSet& hyps, double sigma2, int t_tones,
    SubspaceMetric metric = SubspaceMetric::kLogMap,
    const Constellation& dense = Constellation::get(ConstellationId::kQam1024));

}  // namespace mimo
