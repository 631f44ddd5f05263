#include "mimo/constellation.hpp"

#include <array>
#include <cmath>

namespace mimo {
namespace {

int gray_encode(int i) { return i ^ (i >> 1); }

int gray_decode(int g) {
  int b = 0;
  while (g) {
    b ^= g;
    g >>= 1;
  }
  return b;
}

}  // namespace

Constellation::Constellation(ConstellationId id, std::string name, int q)
    : id_(id), name_(std::move(name)), q_(q) {
  qi_ = (q + 1) / 2;
  qq_ = q / 2;
  li_ = 1 << qi_;
  lq_ = 1 << qq_;
  const double energy = (li_ * li_ - 1) / 3.0 + (lq_ * lq_ - 1) / 3.0;
  scale_ = q == 0 ? 1.0 : 1.0 / std::sqrt(energy);

  const int m = 1 << q;
  points_.resize(static_cast<size_t>(m));
  for (int label = 0; label < m; ++label) {
    const int bits_i = label >> qq_;
    const int bits_q = label & (lq_ - 1);
    const double re = (2 * gray_decode(bits_i) - (li_ - 1)) * scale_;
    const double im = (2 * gray_decode(bits_q) - (lq_ - 1)) * scale_;
    points_[static_cast<size_t>(label)] = Complex(re, im);
  }
  if (q == 0) points_[0] = Complex(0.0, 0.0);

  partitions_.resize(static_cast<size_t>(2 * q));
  for (int k = 0; k < q; ++k) {
    for (int label = 0; label < m; ++label) {
      partitions_[static_cast<size_t>(2 * k + bit(label, k))].push_back(label);
    }
  }
}

int Constellation::slice_axis(double v, int q_axis, int l_axis) const {
  if (q_axis == 0) return 0;
  const double u = (v / scale_ + (l_axis - 1)) * 0.5;
  if (u <= 0.0) return 0;
  if (u >= l_axis - 1) return l_axis - 1;
  const double lo = std::floor(u);
  const int i0 = static_cast<int>(lo);
  const double frac = u - lo;
  if (frac < 0.5) return i0;
  if (frac > 0.5) return i0 + 1;
  return gray_encode(i0) < gray_encode(i0 + 1) ? i0 : i0 + 1;
}

int Constellation::slice(Complex z) const {
  if (q_ == 0) return 0;
  const int idx_i = slice_axis(z.real(), qi_, li_);
  const int idx_q = slice_axis(z.imag(), qq_, lq_);
  return (gray_encode(idx_i) << qq_) | gray_encode(idx_q);
}

const Constellation& Constellation::get(ConstellationId id) {
  static const Constellation phi(ConstellationId::kPhi, "phi", 0);
  static const Constellation bpsk(ConstellationId::kBpsk, "bpsk", 1);
  static const Constellation qpsk(ConstellationId::kQpsk, "qpsk", 2);
  static const Constellation qam16(ConstellationId::kQam16, "qam16", 4);
  static const Constellation qam64(ConstellationId::kQam64, "qam64", 6);
  static const Constellation qam256(ConstellationId::kQam256, "qam256", 8);
  static const Constellation qam1024(ConstellationId::kQam1024, "qam1024", 10);
  switch (id) {
    case ConstellationId::kPhi: return phi;
    case ConstellationId::kBpsk: return bpsk;
    case ConstellationId::kQpsk: return qpsk;
    case ConstellationId::kQam16: return qam16;
    case ConstellationId::kQam64: return qam64;
    case ConstellationId::kQam256: return qam256;
    case ConstellationId::kQam1024: return qam1024;
  }
  throw ConfigError("unknown constellation id");
}

ConstellationId Constellation::id_from_name(std::string_view name) {
  if (name == "phi") return ConstellationId::kPhi;
  if (name == "bpsk") return ConstellationId::kBpsk;
  if (name == "qpsk") return ConstellationId::kQpsk;
  if (name == "qam16") return ConstellationId::kQam16;
  if (name == "qam64") return ConstellationId::kQam64;
  if (name == "qam256") return ConstellationId::kQam256;
  if (name == "qam1024") return ConstellationId::kQam1024;
  throw ConfigError("unknown constellation: " + std::string(name));
}

const Constellation& Constellation::by_name(std::string_view name) {
  return get(id_from_name(name));
}

}  // namespace mimo
