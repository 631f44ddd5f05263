#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mimo/matrix.hpp"

namespace mimo {

enum class ConstellationId {
  kPhi,      // single zero-power point, carries no bits
  kBpsk,
  kQpsk,
  kQam16,
  kQam64,
  kQam256,
  kQam1024,
};

// Gray-mapped square QAM with unit average energy. Labels are point
// indices; bit k = 0 is the most significant bit of the label. The in-phase
// axis takes the high ceil(q/2) bits, the quadrature axis the low floor(q/2).
class Constellation {
 public:
  static const Constellation& get(ConstellationId id);
  static const Constellation& by_name(std::string_view name);
  static ConstellationId id_from_name(std::string_view name);

  ConstellationId id() const { return id_; }
  const std::string& name() const { return name_; }
  int bits_per_symbol() const { return q_; }
  int size() const { return static_cast<int>(points_.size()); }

  Complex point(int label) const { return points_[static_cast<size_t>(label)]; }
  const std::vector<Complex>& points() const { return points_; }

  // Bit k (0 = MSB) of the given label.
  int bit(int label, int k) const {
    return (label >> (q_ - 1 - k)) & 1;
  }

  // Nearest point by Euclidean distance; axis ties resolve to the smaller
  // Gray codeword on that axis. O(1).
  int slice(Complex z) const;

  // Labels whose bit k equals b. Precomputed.
  const std::vector<int>& labels_with_bit(int k, int b) const {
    return partitions_[static_cast<size_t>(2 * k + b)];
  }

  int levels_i() const { return li_; }
  int levels_q() const { return lq_; }
  // Grid step is 2 * scale(); axis coordinates are odd multiples of scale().
  double scale() const { return scale_; }

  // Distance parameter used by the layered error-rate bounds: 2 / q for
  // bit-carrying constellations, 0 for the zero-power point.
  double min_bit_error_distance() const {
    return q_ == 0 ? 0.0 : 2.0 / static_cast<double>(q_);
  }

  Constellation(const Constellation&) = delete;
  Constellation& operator=(const Constellation&) = delete;

 private:
  Constellation(ConstellationId id, std::string name, int q);

  ConstellationId id_;
  std::string name_;
  int q_;
  int qi_, qq_;     // bits per axis
  int li_, lq_;     // levels per axis
  double scale_;    // odd-integer grid -> unit average energy
  std::vector<Complex> points_;
  std::vector<std::vector<int>> partitions_;

  int slice_axis(double v, int q_axis, int l_axis) const;
};

}  // namespace mimo
