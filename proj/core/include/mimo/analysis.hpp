#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mimo/constellation.hpp"
#include "mimo/decompose.hpp"
#include "mimo/matrix.hpp"

namespace mimo {

// Rates for one channel realization, in bits per channel use.
struct RateReport {
  double c_h = 0.0;          // log-det rate of the full channel
  double c_punct_opt = 0.0;  // punctured factor with the exact colored-noise covariance
  double c_punct = 0.0;      // punctured factor, noise color neglected
  double lower_h = 0.0;      // diagonal product bound for c_h
  double lower_punct = 0.0;  // diagonal product bound for c_punct
};

struct BerCurvePoint {
  double snr_db = 0.0;
  double ber = 0.0;
  std::string detector;
  int layer = -1;  // -1: aggregate over layers
};

// log2 det(I + H H^H / sigma2).
double capacity(const ComplexMatrix& h, double sigma2);

// Rate of the punctured triangular factor, in bits. colored = true uses the
// exact covariance sigma2 * W^H W of the filtered noise, under which the
// rate equals capacity(h, sigma2) on every realization; false treats the
// filtered noise as white.
double rate_punctured(const Wrd& pdec, double sigma2, bool colored);

// (lower, actual): the product bound evaluated from the realized diagonal,
// and the exact log-det rate of the same triangular factor. Bits.
std::pair<double, double> capacity_lower_bounds(const Qrd& dec, double sigma2);
std::pair<double, double> capacity_lower_bounds(const Wrd& pdec, double sigma2);

// Decomposes h both ways and assembles all five rates.
RateReport rate_report(const ComplexMatrix& h, double sigma2);

// Rate of the mismatched detection model with one exhaustively-searched root
// layer and decoupled leaf layers, optimized for Gaussian inputs. Nats.
// Throws NumericalDomainError when a diagonal radicand is non-positive.
double air_theory(const ComplexMatrix& h, double sigma2);

// Monte Carlo estimate of the same mismatched-model rate with inputs drawn
// uniformly from the given constellation. Nats; deterministic in
// (trials, seed).
double air_empirical(const ComplexMatrix& h, double sigma2,
                     const Constellation& cons, int trials, std::uint64_t seed);

// Average bit error rate on a d-branch diversity Rayleigh channel with mean
// branch SNR gamma. q = 1 is BPSK; even q >= 2 selects square 2^q-QAM.
double ber_theory_g(int d, double gamma, int q = 1);

// Per-layer BER of decision-feedback detection (entry i is layer i, the
// root layer last). punctured = true keeps only the {no error, root error}
// propagation patterns; false sums over all error patterns of the layers
// already detected.
std::vector<double> ber_theory_nc(int n_layers, double sigma2, int q, bool punctured);

// List-detection approximation: root-layer errors never propagate, and the
// BER is the sum of the remaining per-layer terms.
double ber_theory_chase(int n_layers, double sigma2, int q, bool punctured);

// Sample moments of the squared triangular diagonal against the unit-scale
// gamma reference (integer shape, half the nominal chi-squared degrees of
// freedom), plus the second moment of one surviving off-diagonal entry.
struct DiagonalMomentReport {
  std::vector<double> mean;               // sample mean of the squared diagonal
  std::vector<double> variance;           // unbiased sample variance
  std::vector<double> expected_mean;      // gamma shape per layer
  std::vector<double> expected_variance;  // equals the shape
  std::vector<double> ks_statistic;       // vs the gamma(shape, 1) CDF
  double offdiag_variance = 0.0;          // entry (1, N): expected 1
};

DiagonalMomentReport validate_diagonal_distributions(int n, int trials, bool punctured,
                                                     std::uint64_t seed);

// Least-squares slope of log10(ber) against log10 of linear SNR.
double loglog_slope(const std::vector<double>& snr_db, const std::vector<double>& ber);

}  // namespace mimo
