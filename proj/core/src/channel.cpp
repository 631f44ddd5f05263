#include "mimo/channel.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace mimo {
namespace {

ComplexMatrix exponential_sqrt(int n, double alpha) {
  RealMatrix corr(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      corr(i, j) = std::pow(alpha, std::abs(i - j));
    }
  }
  Eigen::SelfAdjointEigenSolver<RealMatrix> es(corr);
  RealVector lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  RealMatrix root = es.eigenvectors() * lam.asDiagonal() *
                    es.eigenvectors().transpose();
  return root.cast<Complex>();
}

}  // namespace

NoiseModel NoiseModel::from_snr_db(double snr_db, int layers) {
  if (layers < 1) throw ConfigError("layer count must be positive");
  return NoiseModel{layers / std::pow(10.0, snr_db / 10.0), layers};
}

ComplexMatrix sample_channel(int rows, int cols, Rng& rng) {
  ComplexMatrix H(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) {
      H(i, j) = rng.next_cgaussian();
    }
  }
  return H;
}

ComplexMatrix sample_correlated_channel(int rows, int cols, double alpha,
                                        Rng& rng) {
  ComplexMatrix H = sample_channel(rows, cols, rng);
  if (alpha == 0.0) return H;
  return exponential_sqrt(rows, alpha) * H * exponential_sqrt(cols, alpha);
}

ComplexVector sample_noise(int rows, double sigma2, Rng& rng) {
  const double s = std::sqrt(sigma2);
  ComplexVector n(rows);
  for (int i = 0; i < rows; ++i) n(i) = s * rng.next_cgaussian();
  return n;
}

ComplexVector transmit(const ComplexMatrix& H, const ComplexVector& x,
                       const NoiseModel& noise, Rng& rng) {
  return H * x + sample_noise(static_cast<int>(H.rows()), noise.sigma2, rng);
}

}  // namespace mimo
