#pragma once

#include "mimo/matrix.hpp"
#include "mimo/rng.hpp"

namespace mimo {

// Noise characterization for an N-layer transmission at unit symbol energy:
// snr = N / sigma2.
struct NoiseModel {
  double sigma2;
  int layers;
  static NoiseModel from_snr_db(double snr_db, int layers);
  double snr() const { return layers / sigma2; }
  double inv_snr() const { return sigma2 / layers; }
};

// M x N matrix with iid standard circular complex Gaussian entries.
ComplexMatrix sample_channel(int rows, int cols, Rng& rng);

// Exponential correlation profile alpha^|i-j| applied on both sides
// (Kronecker model). alpha = 0 reduces to the uncorrelated channel.
ComplexMatrix sample_correlated_channel(int rows, int cols, double alpha,
                                        Rng& rng);

ComplexVector sample_noise(int rows, double sigma2, Rng& rng);

// y = H x + n with n drawn from the given model.
ComplexVector transmit(const ComplexMatrix& H, const ComplexVector& x,
                       const NoiseModel& noise, Rng& rng);

}  // namespace mimo
