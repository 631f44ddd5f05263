#include "mimo/detect.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

namespace mimo {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ComplexVector labels_to_symbols(const std::vector<int>& labels, const Constellation& c) {
  ComplexVector x(static_cast<Eigen::Index>(labels.size()));
  for (size_t n = 0; n < labels.size(); ++n) x(static_cast<Eigen::Index>(n)) = c.point(labels[n]);
  return x;
}

ComplexVector rotate(const ComplexMatrix& Q, const ComplexVector& y, FlopLedger* ledger) {
  if (ledger) {
    const auto n = Q.cols();
    ledger->complex_mult(n * Q.rows());
    ledger->complex_add(n * (Q.rows() - 1));
  }
  return Q.adjoint() * y;
}

ComplexMatrix permute_columns(const ComplexMatrix& H, const std::vector<int>& order) {
  ComplexMatrix Hp(H.rows(), H.cols());
  for (size_t i = 0; i < order.size(); ++i)
    Hp.col(static_cast<Eigen::Index>(i)) = H.col(order[i]);
  return Hp;
}

double true_distance(const ComplexVector& y, const ComplexMatrix& H,
                     const std::vector<int>& labels, const Constellation& c,
                     FlopLedger* ledger) {
  if (ledger) {
    ledger->complex_mult(H.rows() * H.cols());
    ledger->complex_add(H.rows() * H.cols());
    ledger->complex_mag2(H.rows());
    ledger->real_add(H.rows() - 1);
  }
  return (y - H * labels_to_symbols(labels, c)).squaredNorm();
}

// Per-bit extrema of the search metric, indexed (bit, layer).
struct BitMinima {
  RealMatrix d0, d1;
  BitMinima(int q, int n)
      : d0(RealMatrix::Constant(q, n, kInf)), d1(RealMatrix::Constant(q, n, kInf)) {}

  void update_layer(const Constellation& c, int label, int layer, double dist) {
    for (int k = 0; k < d0.rows(); ++k) {
      double& slot = c.bit(label, k) ? d1(k, layer) : d0(k, layer);
      if (dist < slot) slot = dist;
    }
  }
  void update(const Constellation& c, const std::vector<int>& labels, double dist) {
    for (size_t n = 0; n < labels.size(); ++n)
      update_layer(c, labels[n], static_cast<int>(n), dist);
  }
};

// lambda = (d0 - d1) / sigma^2, saturated at +-(scale / sigma^2). A missing
// hypothesis pins the ratio at the saturation value.
RealMatrix llrs_from_minima(const RealMatrix& d0, const RealMatrix& d1, double sigma2,
                            double clamp_scale) {
  const double cap = clamp_scale / sigma2;
  RealMatrix llrs(d0.rows(), d0.cols());
  for (Eigen::Index n = 0; n < d0.cols(); ++n) {
    for (Eigen::Index k = 0; k < d0.rows(); ++k) {
      const double a = d0(k, n), b = d1(k, n);
      if (std::isinf(a) && std::isinf(b)) {
        llrs(k, n) = 0.0;
      } else if (std::isinf(a)) {
        llrs(k, n) = cap;
      } else if (std::isinf(b)) {
        llrs(k, n) = -cap;
      } else {
        llrs(k, n) = std::clamp((a - b) / sigma2, -cap, cap);
      }
    }
  }
  return llrs;
}

// Interference cancellation down the rows of R with the root symbol pinned.
// Exact zeros in R (punctured entries) cost nothing, so the same routine
// serves both the dense and the punctured decompositions.
Candidate sic_candidate(const ComplexVector& yt, const ComplexMatrix& R,
                        const Constellation& c, const std::vector<int>& order,
                        int root_label, FlopLedger* ledger) {
  const int N = static_cast<int>(R.cols());
  std::vector<int> labels(static_cast<size_t>(N));
  ComplexVector xs(N);
  double dist = 0.0;
  for (int n = N - 1; n >= 0; --n) {
    Complex acc = yt(n);
    for (int l = n + 1; l < N; ++l) {
      if (R(n, l) != Complex(0.0, 0.0)) {
        acc -= R(n, l) * xs(l);
        if (ledger) {
          ledger->complex_mult();
          ledger->complex_add();
        }
      }
    }
    int lab;
    if (n == N - 1) {
      lab = root_label;
    } else {
      lab = c.slice(acc / R(n, n).real());
      if (ledger) ledger->complex_real_div();
    }
    xs(n) = c.point(lab);
    labels[static_cast<size_t>(n)] = lab;
    dist += std::norm(acc - R(n, n) * xs(n));
    if (ledger) {
      ledger->complex_mult();
      ledger->complex_add();
      ledger->complex_mag2();
      ledger->real_add();
    }
  }
  Candidate out;
  out.labels.resize(static_cast<size_t>(N));
  for (int n = 0; n < N; ++n) out.labels[static_cast<size_t>(order[static_cast<size_t>(n)])] =
      labels[static_cast<size_t>(n)];
  out.distance = dist;
  return out;
}

std::vector<int> identity_order(int n) {
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  return order;
}

void check_schedule(const std::vector<std::vector<int>>& schedule, int n, bool roots_once) {
  if (schedule.empty()) throw ConfigError("layer schedule is empty");
  std::vector<int> rooted(static_cast<size_t>(n), 0);
  for (const auto& order : schedule) {
    if (static_cast<int>(order.size()) != n)
      throw ConfigError("layer ordering length does not match the channel");
    std::vector<int> seen(static_cast<size_t>(n), 0);
    for (int v : order) {
      if (v < 0 || v >= n || seen[static_cast<size_t>(v)]++)
        throw ConfigError("layer ordering is not a permutation");
    }
    ++rooted[static_cast<size_t>(order.back())];
  }
  if (roots_once) {
    for (int v : rooted)
      if (v != 1) throw ConfigError("schedule must place every layer at the root exactly once");
  }
}

void guard_search_space(int alphabet, int layers) {
  const double space = std::pow(static_cast<double>(alphabet), layers);
  if (space > 16777216.0)
    throw SearchSpaceTooLarge("exhaustive search space exceeds 2^24 vectors");
}

// Odometer over all |M|^N label vectors; calls f(labels).
template <typename F>
void enumerate_lattice(int alphabet, int layers, F&& f) {
  std::vector<int> labels(static_cast<size_t>(layers), 0);
  while (true) {
    f(labels);
    int n = 0;
    while (n < layers && ++labels[static_cast<size_t>(n)] == alphabet) {
      labels[static_cast<size_t>(n)] = 0;
      ++n;
    }
    if (n == layers) break;
  }
}

DetectionResult exhaustive_min(const ComplexVector& yt, const ComplexMatrix& A,
                               const Constellation& c, double sigma2, bool soft,
                               double clamp_scale) {
  const int N = static_cast<int>(A.cols());
  const int M = c.size();
  const int q = c.bits_per_symbol();
  guard_search_space(M, N);

  DetectionResult res;
  BitMinima track(q, N);
  double best = kInf;
  std::vector<int> best_labels;
  ComplexVector x(N);
  enumerate_lattice(M, N, [&](const std::vector<int>& labels) {
    for (int n = 0; n < N; ++n) x(n) = c.point(labels[static_cast<size_t>(n)]);
    const double d = (yt - A * x).squaredNorm();
    ++res.nodes_visited;
    if (d < best) {
      best = d;
      best_labels = labels;
    }
    if (soft) track.update(c, labels, d);
  });
  res.hard = best_labels;
  res.symbols = labels_to_symbols(best_labels, c);
  res.distance = best;
  if (soft) res.llrs = llrs_from_minima(track.d0, track.d1, sigma2, clamp_scale);
  return res;
}

std::vector<int> back_substitute(const ComplexVector& yt, const ComplexMatrix& R,
                                 const Constellation& c, double* dist_out,
                                 FlopLedger* ledger) {
  const int N = static_cast<int>(R.cols());
  std::vector<int> labels(static_cast<size_t>(N));
  ComplexVector xs(N);
  double dist = 0.0;
  for (int n = N - 1; n >= 0; --n) {
    Complex acc = yt(n);
    for (int l = n + 1; l < N; ++l) {
      if (R(n, l) != Complex(0.0, 0.0)) {
        acc -= R(n, l) * xs(l);
        if (ledger) {
          ledger->complex_mult();
          ledger->complex_add();
        }
      }
    }
    labels[static_cast<size_t>(n)] = c.slice(acc / R(n, n).real());
    if (ledger) ledger->complex_real_div();
    xs(n) = c.point(labels[static_cast<size_t>(n)]);
    dist += std::norm(acc - R(n, n) * xs(n));
    if (ledger) {
      ledger->complex_mult();
      ledger->complex_add();
      ledger->complex_mag2();
      ledger->real_add();
    }
  }
  if (dist_out) *dist_out = dist;
  return labels;
}

struct LinearEqualized {
  ComplexVector xhat;     // equalized symbol estimates
  RealVector tau;         // diagonal of the (regularized) Gram inverse
};

LinearEqualized equalize(const ComplexVector& y, const ComplexMatrix& H, double reg) {
  const int N = static_cast<int>(H.cols());
  ComplexMatrix A = H.adjoint() * H;
  for (int n = 0; n < N; ++n) A(n, n) += reg;
  Eigen::FullPivLU<ComplexMatrix> lu(A);
  if (!lu.isInvertible())
    throw SingularMatrix("Gram matrix is singular; zero-forcing equalization failed");
  ComplexMatrix G = lu.inverse();
  LinearEqualized out;
  out.xhat = G * (H.adjoint() * y);
  out.tau = G.diagonal().real();
  return out;
}

DetectionResult detect_linear(const ComplexVector& y, const ComplexMatrix& H,
                              const Constellation& c, double sigma2, bool soft,
                              double reg, double clamp_scale) {
  const int N = static_cast<int>(H.cols());
  const int q = c.bits_per_symbol();
  const LinearEqualized eq = equalize(y, H, reg);

  DetectionResult res;
  res.hard.resize(static_cast<size_t>(N));
  for (int n = 0; n < N; ++n) res.hard[static_cast<size_t>(n)] = c.slice(eq.xhat(n));
  res.symbols = labels_to_symbols(res.hard, c);
  res.distance = (y - H * res.symbols).squaredNorm();
  if (soft) {
    const double cap = clamp_scale / sigma2;
    res.llrs.resize(q, N);
    for (int n = 0; n < N; ++n) {
      const double layer_var = sigma2 * eq.tau(n);
      for (int k = 0; k < q; ++k) {
        double m0 = kInf, m1 = kInf;
        for (int s = 0; s < c.size(); ++s) {
          const double d = std::norm(eq.xhat(n) - c.point(s));
          double& slot = c.bit(s, k) ? m1 : m0;
          if (d < slot) slot = d;
        }
        res.llrs(k, n) = std::clamp((m0 - m1) / layer_var, -cap, cap);
      }
    }
  }
  return res;
}

// Depth-first sphere traversal. Children at every level are visited in
// ascending order of their distance increment; a node is counted as visited
// once its partial distance clears the pruning radius.
struct SphereSearch {
  const ComplexVector& yt;
  const ComplexMatrix& R;
  const Constellation& c;
  int N;
  int pinned_layer = -1;  // restrict this layer ...
  int pinned_bit = -1;    // ... to labels whose bit equals pinned_value
  int pinned_value = -1;
  double best = kInf;
  std::vector<int> best_labels;
  std::vector<int> path;
  ComplexVector xs;
  std::int64_t nodes = 0;

  SphereSearch(const ComplexVector& yt_, const ComplexMatrix& R_, const Constellation& c_)
      : yt(yt_), R(R_), c(c_), N(static_cast<int>(R_.cols())),
        path(static_cast<size_t>(N)), xs(N) {}

  void run(double radius) {
    best = radius;
    best_labels.clear();
    descend(N - 1, 0.0);
  }

  void descend(int n, double ped) {
    Complex acc = yt(n);
    for (int l = n + 1; l < N; ++l) acc -= R(n, l) * xs(l);

    std::vector<std::pair<double, int>> children;
    if (n == pinned_layer) {
      const auto& allowed = c.labels_with_bit(pinned_bit, pinned_value);
      children.reserve(allowed.size());
      for (int s : allowed) children.emplace_back(std::norm(acc - R(n, n) * c.point(s)), s);
    } else {
      children.reserve(static_cast<size_t>(c.size()));
      for (int s = 0; s < c.size(); ++s)
        children.emplace_back(std::norm(acc - R(n, n) * c.point(s)), s);
    }
    std::sort(children.begin(), children.end());

    for (const auto& [di, s] : children) {
      const double npd = ped + di;
      if (npd >= best) break;  // sorted: nothing further can qualify
      ++nodes;
      if (n == 0) {
        path[0] = s;
        best = npd;
        best_labels = path;
      } else {
        path[static_cast<size_t>(n)] = s;
        xs(n) = c.point(s);
        descend(n - 1, npd);
      }
    }
  }
};

// Square region of the constellation around `center`, shifted to stay inside
// the grid; label order is ascending.
std::vector<int> region_labels(const Constellation& c, Complex center, int side) {
  const int li = c.levels_i(), lq = c.levels_q();
  const int ki = std::min(side, li), kq = std::min(side, lq);
  const double ui = (center.real() / c.scale() + (li - 1)) * 0.5;
  const double uq = (center.imag() / c.scale() + (lq - 1)) * 0.5;
  const int si = std::clamp(static_cast<int>(std::lround(ui - (ki - 1) * 0.5)), 0, li - ki);
  const int sq = std::clamp(static_cast<int>(std::lround(uq - (kq - 1) * 0.5)), 0, lq - kq);
  const double step = 2.0 * c.scale();
  const double lo_i = (2.0 * si - (li - 1)) * c.scale() - 0.25 * step;
  const double hi_i = (2.0 * (si + ki - 1) - (li - 1)) * c.scale() + 0.25 * step;
  const double lo_q = (2.0 * sq - (lq - 1)) * c.scale() - 0.25 * step;
  const double hi_q = (2.0 * (sq + kq - 1) - (lq - 1)) * c.scale() + 0.25 * step;

  std::vector<int> labels;
  labels.reserve(static_cast<size_t>(ki) * static_cast<size_t>(kq));
  for (int s = 0; s < c.size(); ++s) {
    const Complex p = c.point(s);
    if (p.real() >= lo_i && p.real() <= hi_i && p.imag() >= lo_q && p.imag() <= hi_q)
      labels.push_back(s);
  }
  return labels;
}

}  // namespace

CandidateList sic_candidates(const ComplexVector& yt, const ComplexMatrix& R,
                             const Constellation& c, const std::vector<int>& order,
                             FlopLedger* ledger) {
  CandidateList list;
  list.entries.reserve(static_cast<size_t>(c.size()));
  for (int s = 0; s < c.size(); ++s)
    list.entries.push_back(sic_candidate(yt, R, c, order, s, ledger));
  return list;
}

DetectionResult detect_ml_exhaustive(const ComplexVector& y, const ComplexMatrix& H,
                                     const Constellation& c, double sigma2, bool soft,
                                     double llr_clamp_scale) {
  return exhaustive_min(y, H, c, sigma2, soft, llr_clamp_scale);
}

DetectionResult detect_pml_exhaustive(const ComplexVector& y, const Wrd& pdec,
                                      const Constellation& c, double sigma2, bool soft,
                                      double llr_clamp_scale) {
  const ComplexVector yb = pdec.W.adjoint() * y;
  return exhaustive_min(yb, pdec.Rp, c, sigma2, soft, llr_clamp_scale);
}

DetectionResult detect_ml_mixed(const ComplexVector& y, const ComplexMatrix& H,
                                const std::vector<const Constellation*>& layers,
                                double sigma2, bool soft, double llr_clamp_scale) {
  const int N = static_cast<int>(H.cols());
  if (static_cast<int>(layers.size()) != N)
    throw ConfigError("per-layer alphabet list does not match the channel");
  double space = 1.0;
  int qmax = 0;
  for (const Constellation* c : layers) {
    if (c == nullptr) throw ConfigError("per-layer alphabet list has a null entry");
    space *= static_cast<double>(c->size());
    qmax = std::max(qmax, c->bits_per_symbol());
  }
  if (space > 16777216.0)
    throw SearchSpaceTooLarge("exhaustive search space exceeds 2^24 vectors");

  DetectionResult res;
  BitMinima track(qmax, N);
  double best = kInf;
  std::vector<int> best_labels;
  std::vector<int> labels(static_cast<size_t>(N), 0);
  ComplexVector x(N);
  while (true) {
    for (int n = 0; n < N; ++n)
      x(n) = layers[static_cast<size_t>(n)]->point(labels[static_cast<size_t>(n)]);
    const double d = (y - H * x).squaredNorm();
    ++res.nodes_visited;
    if (d < best) {
      best = d;
      best_labels = labels;
    }
    if (soft) {
      for (int n = 0; n < N; ++n) {
        const Constellation& c = *layers[static_cast<size_t>(n)];
        const int lab = labels[static_cast<size_t>(n)];
        for (int k = 0; k < c.bits_per_symbol(); ++k) {
          double& slot = c.bit(lab, k) ? track.d1(k, n) : track.d0(k, n);
          if (d < slot) slot = d;
        }
      }
    }
    int n = 0;
    while (n < N && ++labels[static_cast<size_t>(n)] ==
                        layers[static_cast<size_t>(n)]->size()) {
      labels[static_cast<size_t>(n)] = 0;
      ++n;
    }
    if (n == N) break;
  }
  res.hard = best_labels;
  res.symbols = ComplexVector(N);
  for (int n = 0; n < N; ++n)
    res.symbols(n) = layers[static_cast<size_t>(n)]->point(best_labels[static_cast<size_t>(n)]);
  res.distance = best;
  if (soft) res.llrs = llrs_from_minima(track.d0, track.d1, sigma2, llr_clamp_scale);
  return res;
}

DetectionResult detect_zf(const ComplexVector& y, const ComplexMatrix& H,
                          const Constellation& c, double sigma2, bool soft,
                          double llr_clamp_scale) {
  return detect_linear(y, H, c, sigma2, soft, 0.0, llr_clamp_scale);
}

DetectionResult detect_mmse(const ComplexVector& y, const ComplexMatrix& H,
                            const Constellation& c, double sigma2, bool soft,
                            double llr_clamp_scale) {
  const double reg = sigma2 / static_cast<double>(H.cols());
  return detect_linear(y, H, c, sigma2, soft, reg, llr_clamp_scale);
}

DetectionResult detect_nc(const ComplexVector& y, const Qrd& dec, const Constellation& c) {
  DetectionResult res;
  const ComplexVector yt = rotate(dec.Q, y, &res.ledger);
  res.hard = back_substitute(yt, dec.R, c, &res.distance, &res.ledger);
  res.symbols = labels_to_symbols(res.hard, c);
  return res;
}

DetectionResult detect_pnc(const ComplexVector& y, const Wrd& pdec, const Constellation& c) {
  DetectionResult res;
  const ComplexVector yb = rotate(pdec.W, y, &res.ledger);
  res.hard = back_substitute(yb, pdec.Rp, c, &res.distance, &res.ledger);
  res.symbols = labels_to_symbols(res.hard, c);
  return res;
}

namespace {

DetectionResult detect_list(const ComplexVector& y, const ComplexMatrix& R,
                            const ComplexMatrix& basis, const Constellation& c,
                            double sigma2, bool soft, double clamp_scale) {
  const int N = static_cast<int>(R.cols());
  const int q = c.bits_per_symbol();
  DetectionResult res;
  const ComplexVector yt = rotate(basis, y, &res.ledger);
  const CandidateList list = sic_candidates(yt, R, c, identity_order(N), &res.ledger);
  res.nodes_visited = static_cast<std::int64_t>(list.entries.size());

  double best = kInf;
  const Candidate* winner = nullptr;
  BitMinima track(q, N);
  for (const auto& cand : list.entries) {
    if (cand.distance < best) {
      best = cand.distance;
      winner = &cand;
    }
    if (soft) track.update(c, cand.labels, cand.distance);
  }
  res.hard = winner->labels;
  res.symbols = labels_to_symbols(res.hard, c);
  res.distance = best;
  if (soft) res.llrs = llrs_from_minima(track.d0, track.d1, sigma2, clamp_scale);
  return res;
}

}  // namespace

DetectionResult detect_chase(const ComplexVector& y, const Qrd& dec,
                             const Constellation& c, double sigma2, bool soft,
                             double llr_clamp_scale) {
  return detect_list(y, dec.R, dec.Q, c, sigma2, soft, llr_clamp_scale);
}

DetectionResult detect_pchase(const ComplexVector& y, const Wrd& pdec,
                              const Constellation& c, double sigma2, bool soft,
                              double llr_clamp_scale) {
  return detect_list(y, pdec.Rp, pdec.W, c, sigma2, soft, llr_clamp_scale);
}

DetectionResult detect_lord(const ComplexVector& y, const ComplexMatrix& H,
                            const Constellation& c, double sigma2, bool soft,
                            const std::vector<std::vector<int>>& layer_schedule,
                            double llr_clamp_scale) {
  const int N = static_cast<int>(H.cols());
  const int q = c.bits_per_symbol();
  check_schedule(layer_schedule, N, false);

  DetectionResult res;
  double best = kInf;
  std::vector<int> best_labels;
  BitMinima track(q, N);
  for (const auto& order : layer_schedule) {
    const ComplexMatrix Hp = permute_columns(H, order);
    const Qrd dec = qrd_mgs(Hp, &res.ledger);
    const ComplexVector yt = rotate(dec.Q, y, &res.ledger);
    const CandidateList list = sic_candidates(yt, dec.R, c, order, &res.ledger);
    res.nodes_visited += static_cast<std::int64_t>(list.entries.size());
    for (const auto& cand : list.entries) {
      if (cand.distance < best) {
        best = cand.distance;
        best_labels = cand.labels;
      }
      if (soft) track.update(c, cand.labels, cand.distance);
    }
  }
  res.hard = best_labels;
  res.symbols = labels_to_symbols(best_labels, c);
  res.distance = best;
  if (soft) res.llrs = llrs_from_minima(track.d0, track.d1, sigma2, llr_clamp_scale);
  return res;
}

DetectionResult detect_ssd(const ComplexVector& y, const ComplexMatrix& H,
                           const Constellation& c, double sigma2, bool soft,
                           const std::vector<std::vector<int>>& layer_schedule,
                           double llr_clamp_scale) {
  const int N = static_cast<int>(H.cols());
  const int q = c.bits_per_symbol();
  check_schedule(layer_schedule, N, false);

  DetectionResult res;
  double best_true = kInf;
  std::vector<int> best_labels;
  BitMinima track(q, N);
  for (const auto& order : layer_schedule) {
    const ComplexMatrix Hp = permute_columns(H, order);
    const Wrd dec = wrd(Hp, &res.ledger);
    const ComplexVector yb = rotate(dec.W, y, &res.ledger);
    const CandidateList list = sic_candidates(yb, dec.Rp, c, order, &res.ledger);
    res.nodes_visited += static_cast<std::int64_t>(list.entries.size());

    double best_frame = kInf;
    const Candidate* winner = nullptr;
    for (const auto& cand : list.entries) {
      if (cand.distance < best_frame) {
        best_frame = cand.distance;
        winner = &cand;
      }
      if (soft) track.update(c, cand.labels, cand.distance);
    }
    // punctured metrics are not comparable across orderings
    const double d = true_distance(y, H, winner->labels, c, &res.ledger);
    if (d < best_true) {
      best_true = d;
      best_labels = winner->labels;
    }
  }
  res.hard = best_labels;
  res.symbols = labels_to_symbols(best_labels, c);
  res.distance = best_true;
  if (soft) res.llrs = llrs_from_minima(track.d0, track.d1, sigma2, llr_clamp_scale);
  return res;
}

namespace {

DetectionResult detect_symbol_assembled(const ComplexVector& y, const ComplexMatrix& H,
                                        const Constellation& c, double sigma2, bool soft,
                                        const std::vector<std::vector<int>>& schedule,
                                        bool punctured, double clamp_scale) {
  const int N = static_cast<int>(H.cols());
  const int q = c.bits_per_symbol();
  check_schedule(schedule, N, true);

  DetectionResult res;
  res.hard.assign(static_cast<size_t>(N), 0);
  BitMinima track(q, N);
  for (const auto& order : schedule) {
    const ComplexMatrix Hp = permute_columns(H, order);
    ComplexMatrix R, basis;
    if (punctured) {
      const Wrd dec = wrd(Hp, &res.ledger);
      R = dec.Rp;
      basis = dec.W;
    } else {
      const Qrd dec = qrd_mgs(Hp, &res.ledger);
      R = dec.R;
      basis = dec.Q;
    }
    const ComplexVector yt = rotate(basis, y, &res.ledger);
    const CandidateList list = sic_candidates(yt, R, c, order, &res.ledger);
    res.nodes_visited += static_cast<std::int64_t>(list.entries.size());

    const int root = order.back();
    double best_frame = kInf;
    const Candidate* winner = nullptr;
    for (const auto& cand : list.entries) {
      if (cand.distance < best_frame) {
        best_frame = cand.distance;
        winner = &cand;
      }
      if (soft) track.update_layer(c, cand.labels[static_cast<size_t>(root)], root,
                                   cand.distance);
    }
    res.hard[static_cast<size_t>(root)] = winner->labels[static_cast<size_t>(root)];
  }
  res.symbols = labels_to_symbols(res.hard, c);
  res.distance = true_distance(y, H, res.hard, c, &res.ledger);
  if (soft) res.llrs = llrs_from_minima(track.d0, track.d1, sigma2, clamp_scale);
  return res;
}

}  // namespace

DetectionResult detect_slord(const ComplexVector& y, const ComplexMatrix& H,
                             const Constellation& c, double sigma2, bool soft,
                             const std::vector<std::vector<int>>& layer_schedule,
                             double llr_clamp_scale) {
  return detect_symbol_assembled(y, H, c, sigma2, soft, layer_schedule, false,
                                 llr_clamp_scale);
}

DetectionResult detect_sssd(const ComplexVector& y, const ComplexMatrix& H,
                            const Constellation& c, double sigma2, bool soft,
                            const std::vector<std::vector<int>>& layer_schedule,
                            double llr_clamp_scale) {
  return detect_symbol_assembled(y, H, c, sigma2, soft, layer_schedule, true,
                                 llr_clamp_scale);
}

DetectionResult detect_sphere(const ComplexVector& y, const Qrd& dec,
                              const Constellation& c, double sigma2, bool soft,
                              std::optional<double> radius, double llr_clamp_scale) {
  const int N = static_cast<int>(dec.R.cols());
  const int q = c.bits_per_symbol();
  DetectionResult res;
  const ComplexVector yt = rotate(dec.Q, y, &res.ledger);

  SphereSearch search(yt, dec.R, c);
  search.run(radius.value_or(kInf));
  if (search.best_labels.empty())
    throw RadiusTooSmall("initial sphere radius excludes every lattice point");
  res.hard = search.best_labels;
  res.distance = search.best;
  res.nodes_visited = search.nodes;
  res.symbols = labels_to_symbols(res.hard, c);

  if (soft) {
    RealMatrix d0(q, N), d1(q, N);
    for (int n = 0; n < N; ++n) {
      for (int k = 0; k < q; ++k) {
        const int b = c.bit(res.hard[static_cast<size_t>(n)], k);
        SphereSearch counter(yt, dec.R, c);
        counter.pinned_layer = n;
        counter.pinned_bit = k;
        counter.pinned_value = 1 - b;
        counter.run(kInf);
        res.nodes_visited += counter.nodes;
        d0(k, n) = b ? counter.best : res.distance;
        d1(k, n) = b ? res.distance : counter.best;
      }
    }
    res.llrs = llrs_from_minima(d0, d1, sigma2, llr_clamp_scale);
  }
  return res;
}

namespace {

struct OrderingContext {
  std::vector<int> order;
  Qrd dec;
  ComplexVector yt;
  Complex center = 0.0;           // region center for the root layer
  std::vector<int> theta;         // root labels enumerated
};

double prior_sum(const Constellation& c, const std::vector<int>& labels,
                 const RealMatrix* priors) {
  if (!priors) return 0.0;
  double acc = 0.0;
  for (size_t n = 0; n < labels.size(); ++n)
    for (int k = 0; k < priors->rows(); ++k)
      if (c.bit(labels[n], k)) acc += (*priors)(k, static_cast<Eigen::Index>(n));
  return acc;
}

}  // namespace

DetectionResult detect_lclord(const ComplexVector& y, const ComplexMatrix& H,
                              const Constellation& c, double sigma2, int region_size,
                              CenterStrategy center, LlrFill fill, bool soft,
                              const RealMatrix* priors, int max_center_iterations,
                              double llr_clamp_scale) {
  if (H.cols() != 2)
    throw UnsupportedLayerCount("reduced-region detection is defined for two layers");
  const int M = c.size();
  const int q = c.bits_per_symbol();
  if (region_size < 1 || region_size > M)
    throw ConfigError("region size must lie in [1, |constellation|]");
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(region_size))));
  if (side * side != region_size)
    throw ConfigError("region size must be a perfect square");
  if (priors && (priors->rows() != q || priors->cols() != 2))
    throw ConfigError("prior matrix must be bits x layers");
  if (center == CenterStrategy::kIterative && max_center_iterations < 1)
    throw ConfigError("center refinement needs at least one pass");

  DetectionResult res;
  std::array<OrderingContext, 2> ctx;
  const auto schedule = permutation_schedule(ScheduleKind::kCyclic, 2);
  for (int t = 0; t < 2; ++t) {
    ctx[static_cast<size_t>(t)].order = schedule[static_cast<size_t>(t)];
    const ComplexMatrix Hp = permute_columns(H, ctx[static_cast<size_t>(t)].order);
    ctx[static_cast<size_t>(t)].dec = qrd_mgs(Hp, &res.ledger);
    ctx[static_cast<size_t>(t)].yt = rotate(ctx[static_cast<size_t>(t)].dec.Q, y, &res.ledger);
  }

  // one reduced pass from a single direction; returns labels in original order
  auto half_pass = [&](const OrderingContext& oc, Complex center_value) -> Candidate {
    const std::vector<int> theta = region_labels(c, center_value, side);
    res.nodes_visited += static_cast<std::int64_t>(theta.size());
    Candidate best;
    double best_metric = -kInf;
    for (int s : theta) {
      Candidate cand = sic_candidate(oc.yt, oc.dec.R, c, oc.order, s, &res.ledger);
      const double phi = -cand.distance / sigma2 + prior_sum(c, cand.labels, priors);
      if (phi > best_metric) {
        best_metric = phi;
        best = std::move(cand);
      }
    }
    return best;
  };

  // centers
  switch (center) {
    case CenterStrategy::kEqualized: {
      for (auto& oc : ctx) oc.center = oc.yt(1) / oc.dec.R(1, 1).real();
      break;
    }
    case CenterStrategy::kZfdfOrdered: {
      std::vector<int> best_labels;
      double best_d = kInf;
      for (auto& oc : ctx) {
        double dist = 0.0;
        const std::vector<int> perm = back_substitute(oc.yt, oc.dec.R, c, &dist, &res.ledger);
        std::vector<int> labels(2);
        for (int i = 0; i < 2; ++i)
          labels[static_cast<size_t>(oc.order[static_cast<size_t>(i)])] =
              perm[static_cast<size_t>(i)];
        const double d = true_distance(y, H, labels, c, &res.ledger);
        if (d < best_d) {
          best_d = d;
          best_labels = labels;
        }
      }
      for (auto& oc : ctx)
        oc.center = c.point(best_labels[static_cast<size_t>(oc.order.back())]);
      break;
    }
    case CenterStrategy::kMmse: {
      const DetectionResult mm = detect_mmse(y, H, c, sigma2, false, llr_clamp_scale);
      for (auto& oc : ctx)
        oc.center = mm.symbols(static_cast<Eigen::Index>(oc.order.back()));
      break;
    }
    case CenterStrategy::kIterative: {
      OrderingContext& oc = ctx[0];
      int root_label = c.slice(oc.yt(1) / oc.dec.R(1, 1).real());
      std::vector<int> labels;
      while (res.iterations < max_center_iterations) {
        const Candidate cand = half_pass(oc, c.point(root_label));
        labels = cand.labels;
        ++res.iterations;
        const int new_root = labels[static_cast<size_t>(oc.order.back())];
        if (new_root == root_label) break;
        root_label = new_root;
      }
      for (auto& oc2 : ctx)
        oc2.center = c.point(labels[static_cast<size_t>(oc2.order.back())]);
      break;
    }
  }

  // full pass: enumerate both regions, track global extrema of the
  // prior-augmented metric
  const double cap = llr_clamp_scale / sigma2;
  double best_phi = -kInf;
  Candidate best_cand;
  RealMatrix p0 = RealMatrix::Constant(q, 2, -kInf);
  RealMatrix p1 = RealMatrix::Constant(q, 2, -kInf);
  double worst_phi = kInf;
  std::array<CandidateList, 2> lists;
  for (int t = 0; t < 2; ++t) {
    OrderingContext& oc = ctx[static_cast<size_t>(t)];
    oc.theta = region_labels(c, oc.center, side);
    CandidateList& list = lists[static_cast<size_t>(t)];
    list.entries.reserve(oc.theta.size());
    for (int s : oc.theta)
      list.entries.push_back(sic_candidate(oc.yt, oc.dec.R, c, oc.order, s, &res.ledger));
    res.nodes_visited += static_cast<std::int64_t>(list.entries.size());
    for (const auto& cand : list.entries) {
      const double phi = -cand.distance / sigma2 + prior_sum(c, cand.labels, priors);
      if (phi > best_phi) {
        best_phi = phi;
        best_cand = cand;
      }
      if (phi < worst_phi) worst_phi = phi;
      if (soft) {
        for (size_t n = 0; n < 2; ++n) {
          for (int k = 0; k < q; ++k) {
            double& slot = c.bit(cand.labels[n], k) ? p1(k, static_cast<Eigen::Index>(n))
                                                    : p0(k, static_cast<Eigen::Index>(n));
            if (phi > slot) slot = phi;
          }
        }
      }
    }
  }

  res.hard = best_cand.labels;
  res.symbols = labels_to_symbols(res.hard, c);
  res.distance = best_cand.distance;

  if (soft) {
    res.llrs.resize(q, 2);
    for (int n = 0; n < 2; ++n) {
      for (int k = 0; k < q; ++k) {
        double m0 = p0(k, n), m1 = p1(k, n);
        if (std::isinf(m0) || std::isinf(m1)) {
          const int missing = std::isinf(m0) ? 0 : 1;
          switch (fill) {
            case LlrFill::kSaturate:
              res.llrs(k, n) = missing == 0 ? cap : -cap;
              continue;
            case LlrFill::kMaxNorm:
              (missing == 0 ? m0 : m1) = worst_phi;
              break;
            case LlrFill::kRegionThreshold: {
              // nearest opposite-bit point to this layer's region center,
              // sliced on the other layer
              const OrderingContext& oc = ctx[0].order.back() == n ? ctx[0] : ctx[1];
              double best_d = kInf;
              int p = -1;
              for (int s : c.labels_with_bit(k, missing)) {
                const double d = std::norm(c.point(s) - oc.center);
                if (d < best_d) {
                  best_d = d;
                  p = s;
                }
              }
              const Candidate cand = sic_candidate(oc.yt, oc.dec.R, c, oc.order, p,
                                                   &res.ledger);
              const double phi = -cand.distance / sigma2 + prior_sum(c, cand.labels, priors);
              (missing == 0 ? m0 : m1) = phi;
              break;
            }
          }
        }
        res.llrs(k, n) = std::clamp(m1 - m0, -cap, cap);
      }
    }
  }
  return res;
}

}  // namespace mimo
