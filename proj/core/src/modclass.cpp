#include "mimo/modclass.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "mimo/decompose.hpp"
#include "mimo/detect.hpp"

namespace mimo {

namespace {

constexpr std::int64_t kMaxLatticeVectors = std::int64_t{1} << 22;

// Running log sum of exp(-d) terms, max-subtracted so arbitrarily large
// distances stay finite.
class NegExpSum {
 public:
  void add(double d) {
    if (d < m_) {
      s_ = s_ * std::exp(d - m_) + 1.0;
      m_ = d;
    } else {
      s_ += std::exp(m_ - d);
    }
  }
  double log_sum() const { return -m_ + std::log(s_); }

 private:
  double m_ = std::numeric_limits<double>::infinity();
  double s_ = 0.0;
};

struct Dims {
  int m;  // receive antennas
  int n;  // layers
};

Dims checked_dims(const ObservationList& obs, double sigma2, int t_tones, int n_user) {
  if (!(sigma2 > 0.0)) throw ConfigError("noise variance must be positive");
  if (t_tones < 1) throw ConfigError("classification needs at least one tone");
  if (obs.size() < static_cast<std::size_t>(t_tones)) {
    throw ConfigError("fewer observations than requested tones");
  }
  const int m = static_cast<int>(obs.front().h.rows());
  const int n = static_cast<int>(obs.front().h.cols());
  if (n < 1 || m < n) throw ConfigError("channel must have at least as many rows as layers");
  if (n_user < 1 || n_user >= n) {
    throw ConfigError("known layers must leave at least one unknown layer");
  }
  for (int t = 0; t < t_tones; ++t) {
    const auto& o = obs[static_cast<std::size_t>(t)];
    if (o.h.rows() != m || o.h.cols() != n || o.y.size() != m) {
      throw ConfigError("observations must share dimensions");
    }
  }
  return {m, n};
}

std::vector<const Constellation*> layer_constellations(const Constellation& user,
                                                       const Constellation& hyp, int n_user,
                                                       int n) {
  std::vector<const Constellation*> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = i < n_user ? &user : &hyp;
  return out;
}

// Visits every vector of the mixed lattice with its scaled distance.
template <typename F>
std::int64_t enumerate_lattice(const ComplexVector& y, const ComplexMatrix& h,
                               const std::vector<const Constellation*>& consts, double sigma2,
                               F&& f) {
  const int n = static_cast<int>(h.cols());
  std::int64_t total = 1;
  for (const auto* c : consts) {
    total *= c->size();
    if (total > kMaxLatticeVectors) {
      throw SearchSpaceTooLarge("hypothesis lattice exceeds the enumeration budget");
    }
  }
  std::vector<std::vector<ComplexVector>> colpts(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    auto& col = colpts[static_cast<std::size_t>(k)];
    const auto* c = consts[static_cast<std::size_t>(k)];
    col.reserve(static_cast<std::size_t>(c->size()));
    for (int label = 0; label < c->size(); ++label) col.push_back(h.col(k) * c->point(label));
  }
  std::vector<ComplexVector> residual(static_cast<std::size_t>(n) + 1);
  residual[0] = y;
  std::vector<int> labels(static_cast<std::size_t>(n));
  auto rec = [&](auto&& self, int k) -> void {
    const auto* c = consts[static_cast<std::size_t>(k)];
    for (int label = 0; label < c->size(); ++label) {
      labels[static_cast<std::size_t>(k)] = label;
      residual[static_cast<std::size_t>(k) + 1] =
          residual[static_cast<std::size_t>(k)] - colpts[static_cast<std::size_t>(k)][label];
      if (k + 1 == n) {
        f(residual[static_cast<std::size_t>(k) + 1].squaredNorm() / sigma2, labels);
      } else {
        self(self, k + 1);
      }
    }
  };
  rec(rec, 0);
  return total;
}

ClassifierDecision finalize(std::vector<double> scores, const HypothesisSet& hyps, int tones,
                            std::int64_t evals) {
  int best = 0;
  for (int j = 1; j < static_cast<int>(scores.size()); ++j) {
    if (scores[static_cast<std::size_t>(j)] > scores[static_cast<std::size_t>(best)]) {
      best = j;
    } else if (scores[static_cast<std::size_t>(j)] == scores[static_cast<std::size_t>(best)] &&
               hyps.hypothesis(j).size() < hyps.hypothesis(best).size()) {
      best = j;
    }
  }
  ClassifierDecision out;
  out.winner = best;
  out.scores = std::move(scores);
  out.tones_used = tones;
  out.likelihood_evaluations = evals;
  return out;
}

ComplexMatrix swap_columns(const ComplexMatrix& h, int a, int b) {
  ComplexMatrix out = h;
  if (a != b) {
    out.col(a) = h.col(b);
    out.col(b) = h.col(a);
  }
  return out;
}

// Reduced candidate metrics: the root position enumerates the known
// constellation while earlier positions are sliced (independently against a
// punctured triangle, successively against a plain one). perm[i] is the
// original layer at position i.
template <typename F>
void quasi_candidates(const ComplexVector& y, const ComplexMatrix& h,
                      const std::vector<int>& perm, const Constellation& user,
                      const Constellation& hyp, int n_user, double sigma2,
                      QuasiDetector detector, F&& f) {
  const int n = static_cast<int>(h.cols());
  ComplexMatrix hp(h.rows(), n);
  for (int i = 0; i < n; ++i) hp.col(i) = h.col(perm[static_cast<std::size_t>(i)]);
  const Constellation& root_const = user;
  auto pos_const = [&](int i) -> const Constellation& {
    return perm[static_cast<std::size_t>(i)] < n_user ? user : hyp;
  };
  if (detector == QuasiDetector::kSubspace) {
    const Wrd pd = wrd(hp);
    const ComplexVector yb = pd.W.adjoint() * y;
    for (int label = 0; label < root_const.size(); ++label) {
      const Complex s = root_const.point(label);
      double d = std::norm(yb(n - 1) - pd.Rp(n - 1, n - 1) * s);
      for (int i = 0; i < n - 1; ++i) {
        const Complex z = yb(i) - pd.Rp(i, n - 1) * s;
        const auto& ci = pos_const(i);
        const Complex xi = ci.point(ci.slice(z / pd.Rp(i, i)));
        d += std::norm(z - pd.Rp(i, i) * xi);
      }
      f(d / sigma2);
    }
  } else {
    const Qrd dec = qrd_mgs(hp);
    const ComplexVector yb = dec.Q.adjoint() * y;
    ComplexVector x(n);
    for (int label = 0; label < root_const.size(); ++label) {
      x(n - 1) = root_const.point(label);
      double d = std::norm(yb(n - 1) - dec.R(n - 1, n - 1) * x(n - 1));
      for (int i = n - 2; i >= 0; --i) {
        Complex u = yb(i);
        for (int k = i + 1; k < n; ++k) u -= dec.R(i, k) * x(k);
        const auto& ci = pos_const(i);
        x(i) = ci.point(ci.slice(u / dec.R(i, i)));
        d += std::norm(u - dec.R(i, i) * x(i));
      }
      f(d / sigma2);
    }
  }
}

ClassifierDecision classify_quasi(const ObservationList& obs, const Constellation& user,
                                  const HypothesisSet& hyps, double sigma2, int t_tones,
                                  int n_user, bool glrt, QuasiVariant variant, bool maxlog) {
  const Dims dims = checked_dims(obs, sigma2, t_tones, n_user);
  std::vector<double> scores(static_cast<std::size_t>(hyps.size()), 0.0);
  std::int64_t evals = 0;
  std::vector<int> roots;
  if (variant.sum_user_layers) {
    for (int l = 0; l < n_user; ++l) roots.push_back(l);
  } else {
    roots.push_back(0);
  }
  std::vector<int> perm(static_cast<std::size_t>(dims.n));
  for (int t = 0; t < t_tones; ++t) {
    const auto& o = obs[static_cast<std::size_t>(t)];
    for (int j = 0; j < hyps.size(); ++j) {
      double term = 0.0;
      for (int root : roots) {
        for (int i = 0; i < dims.n; ++i) perm[static_cast<std::size_t>(i)] = i;
        std::swap(perm[static_cast<std::size_t>(root)], perm[static_cast<std::size_t>(dims.n - 1)]);
        NegExpSum acc;
        double dmin = std::numeric_limits<double>::infinity();
        quasi_candidates(o.y, o.h, perm, user, hyps.hypothesis(j), n_user, sigma2,
                         variant.detector, [&](double d) {
                           if (maxlog) {
                             dmin = std::min(dmin, d);
                           } else {
                             acc.add(d);
                           }
                         });
        evals += user.size();
        term += maxlog ? -dmin : acc.log_sum();
      }
      scores[static_cast<std::size_t>(j)] += term;
      if (!glrt) scores[static_cast<std::size_t>(j)] += hyps.log_prior(j);
    }
  }
  return finalize(std::move(scores), hyps, t_tones, evals);
}

// Sample moments E{s^a conj(s)^b} for a + b <= 6.
struct Moments {
  Complex m[7][7] = {};
};

template <typename Source>
Moments moments_over(const Source& values) {
  Moments mo;
  Complex p[7];
  Complex q[7];
  for (const Complex& s : values) {
    p[0] = q[0] = 1.0;
    for (int i = 1; i <= 6; ++i) {
      p[i] = p[i - 1] * s;
      q[i] = q[i - 1] * std::conj(s);
    }
    for (int a = 0; a <= 6; ++a) {
      for (int b = 0; a + b <= 6; ++b) mo.m[a][b] += p[a] * q[b];
    }
  }
  const double count = static_cast<double>(values.size());
  for (int a = 0; a <= 6; ++a) {
    for (int b = 0; a + b <= 6; ++b) mo.m[a][b] /= count;
  }
  return mo;
}

// Partition sum over the u indices, the last v of them conjugated.
Complex cumulant_from_partitions(const Moments& mo, int u, int v) {
  static constexpr double kFactorial[6] = {1.0, 1.0, 2.0, 6.0, 24.0, 120.0};
  Complex total = 0.0;
  std::array<int, 6> block_of{};
  auto rec = [&](auto&& self, int i, int used) -> void {
    if (i == u) {
      double sign = (used % 2 == 1) ? 1.0 : -1.0;
      Complex prod = sign * kFactorial[used - 1];
      for (int blk = 0; blk < used; ++blk) {
        int a = 0;
        int b = 0;
        for (int pos = 0; pos < u; ++pos) {
          if (block_of[static_cast<std::size_t>(pos)] != blk) continue;
          if (pos >= u - v) {
            ++b;
          } else {
            ++a;
          }
        }
        prod *= mo.m[a][b];
      }
      total += prod;
      return;
    }
    for (int blk = 0; blk <= used; ++blk) {
      block_of[static_cast<std::size_t>(i)] = blk;
      self(self, i + 1, std::max(used, blk + 1));
    }
  };
  rec(rec, 0, 0);
  return total;
}

CumulantVector cumulants_from_moments(const Moments& mo) {
  CumulantVector cv;
  cv.k20 = mo.m[2][0];
  cv.k21 = std::real(mo.m[1][1]);
  cv.k40 = mo.m[4][0] - 3.0 * mo.m[2][0] * mo.m[2][0];
  cv.k42 = std::real(mo.m[2][2]) - std::norm(mo.m[2][0]) - 2.0 * cv.k21 * cv.k21;
  cv.k61 = cumulant_from_partitions(mo, 6, 1);
  cv.k63 = std::real(cumulant_from_partitions(mo, 6, 3));
  return cv;
}

double feature_distance(const CumulantVector& a, const CumulantVector& b, bool sixth_order) {
  double d = std::norm(a.k40 - b.k40) + (a.k42 - b.k42) * (a.k42 - b.k42);
  if (sixth_order) d += std::norm(a.k61 - b.k61) + (a.k63 - b.k63) * (a.k63 - b.k63);
  return d;
}

// Zero-forcing equalization of the unknown streams plus their noise
// amplification factors, accumulated over all observations.
struct ZfStreams {
  std::vector<ComplexVector> samples;  // one vector per unknown stream
  std::vector<double> amplification;   // mean diagonal of the Gram inverse
};

ZfStreams equalize_unknown_streams(const ObservationList& obs, int n_user, int tones) {
  const int n = static_cast<int>(obs.front().h.cols());
  const int n_inter = n - n_user;
  ZfStreams out;
  out.samples.assign(static_cast<std::size_t>(n_inter),
                     ComplexVector(static_cast<Eigen::Index>(tones)));
  out.amplification.assign(static_cast<std::size_t>(n_inter), 0.0);
  const ComplexMatrix eye = ComplexMatrix::Identity(n, n);
  for (int t = 0; t < tones; ++t) {
    const auto& o = obs[static_cast<std::size_t>(t)];
    const ComplexMatrix gram = o.h.adjoint() * o.h;
    const auto ldlt = gram.ldlt();
    const ComplexVector xhat = ldlt.solve(o.h.adjoint() * o.y);
    const ComplexMatrix ginv = ldlt.solve(eye);
    for (int k = 0; k < n_inter; ++k) {
      out.samples[static_cast<std::size_t>(k)](t) = xhat(n_user + k);
      out.amplification[static_cast<std::size_t>(k)] +=
          std::real(ginv(n_user + k, n_user + k)) / static_cast<double>(tones);
    }
  }
  return out;
}

}  // namespace

HypothesisSet::HypothesisSet(std::vector<ConstellationId> ids) {
  if (ids.empty()) throw ConfigError("hypothesis set must not be empty");
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t k = i + 1; k < ids.size(); ++k) {
      if (ids[i] == ids[k]) throw ConfigError("hypothesis tags must be distinct");
    }
    members_.push_back(&Constellation::get(ids[i]));
  }
}

HypothesisSet HypothesisSet::defaults() {
  return HypothesisSet({ConstellationId::kPhi, ConstellationId::kQpsk, ConstellationId::kQam16,
                        ConstellationId::kQam64, ConstellationId::kQam256});
}

double HypothesisSet::log_prior(int j) const {
  return -std::log(static_cast<double>(hypothesis(j).size()));
}

int HypothesisSet::phi_index() const {
  for (int j = 0; j < size(); ++j) {
    if (hypothesis(j).size() == 1) return j;
  }
  return -1;
}

ClassifierDecision classify_logmap(const ObservationList& obs, const Constellation& user_const,
                                   const HypothesisSet& hyps, double sigma2, int t_tones,
                                   int n_user, bool glrt, std::optional<QuasiVariant> quasi) {
  if (quasi) {
    return classify_quasi(obs, user_const, hyps, sigma2, t_tones, n_user, glrt, *quasi, false);
  }
  const Dims dims = checked_dims(obs, sigma2, t_tones, n_user);
  const int n_inter = dims.n - n_user;
  std::vector<double> scores(static_cast<std::size_t>(hyps.size()), 0.0);
  std::int64_t evals = 0;
  for (int t = 0; t < t_tones; ++t) {
    const auto& o = obs[static_cast<std::size_t>(t)];
    for (int j = 0; j < hyps.size(); ++j) {
      const auto consts = layer_constellations(user_const, hyps.hypothesis(j), n_user, dims.n);
      NegExpSum acc;
      evals += enumerate_lattice(o.y, o.h, consts, sigma2,
                                 [&](double d, const std::vector<int>&) { acc.add(d); });
      scores[static_cast<std::size_t>(j)] += acc.log_sum();
      if (!glrt) scores[static_cast<std::size_t>(j)] += n_inter * hyps.log_prior(j);
    }
  }
  return finalize(std::move(scores), hyps, t_tones, evals);
}

ClassifierDecision classify_maxlogmap(const ObservationList& obs, const Constellation& user_const,
                                      const HypothesisSet& hyps, double sigma2, int t_tones,
                                      int n_user, bool glrt, std::optional<QuasiVariant> quasi) {
  if (quasi) {
    return classify_quasi(obs, user_const, hyps, sigma2, t_tones, n_user, glrt, *quasi, true);
  }
  const Dims dims = checked_dims(obs, sigma2, t_tones, n_user);
  const int n_inter = dims.n - n_user;
  std::vector<double> scores(static_cast<std::size_t>(hyps.size()), 0.0);
  std::int64_t evals = 0;
  for (int t = 0; t < t_tones; ++t) {
    const auto& o = obs[static_cast<std::size_t>(t)];
    for (int j = 0; j < hyps.size(); ++j) {
      const auto consts = layer_constellations(user_const, hyps.hypothesis(j), n_user, dims.n);
      double dmin = std::numeric_limits<double>::infinity();
      evals += enumerate_lattice(
          o.y, o.h, consts, sigma2,
          [&](double d, const std::vector<int>&) { dmin = std::min(dmin, d); });
      scores[static_cast<std::size_t>(j)] += -dmin;
      if (!glrt) scores[static_cast<std::size_t>(j)] += n_inter * hyps.log_prior(j);
    }
  }
  return finalize(std::move(scores), hyps, t_tones, evals);
}

ClassifierDecision classify_cmld(const ObservationList& obs, const Constellation& user_const,
                                 const HypothesisSet& hyps, double sigma2, int t_tones,
                                 int n_user, bool glrt) {
  const Dims dims = checked_dims(obs, sigma2, t_tones, n_user);
  const int n_inter = dims.n - n_user;
  const int q = user_const.bits_per_symbol();
  if (q < 1) throw ConfigError("counter-distance classification needs a bit-carrying alphabet");
  const int n_bits = q * n_user;
  std::vector<double> scores(static_cast<std::size_t>(hyps.size()), 0.0);
  std::int64_t evals = 0;
  std::vector<std::array<double, 2>> bit_minima(static_cast<std::size_t>(n_bits));
  std::vector<int> ml_labels(static_cast<std::size_t>(dims.n));
  for (int t = 0; t < t_tones; ++t) {
    const auto& o = obs[static_cast<std::size_t>(t)];
    for (int j = 0; j < hyps.size(); ++j) {
      const auto consts = layer_constellations(user_const, hyps.hypothesis(j), n_user, dims.n);
      double dmin = std::numeric_limits<double>::infinity();
      for (auto& bm : bit_minima) {
        bm[0] = bm[1] = std::numeric_limits<double>::infinity();
      }
      evals += enumerate_lattice(o.y, o.h, consts, sigma2,
                                 [&](double d, const std::vector<int>& labels) {
                                   if (d < dmin) {
                                     dmin = d;
                                     ml_labels = labels;
                                   }
                                   for (int l = 0; l < n_user; ++l) {
                                     for (int k = 0; k < q; ++k) {
                                       const int b = user_const.bit(labels[static_cast<std::size_t>(l)], k);
                                       auto& bm = bit_minima[static_cast<std::size_t>(l * q + k)];
                                       bm[static_cast<std::size_t>(b)] =
                                           std::min(bm[static_cast<std::size_t>(b)], d);
                                     }
                                   }
                                 });
      NegExpSum acc;
      acc.add(dmin);
      for (int l = 0; l < n_user; ++l) {
        for (int k = 0; k < q; ++k) {
          const int b_ml = user_const.bit(ml_labels[static_cast<std::size_t>(l)], k);
          acc.add(bit_minima[static_cast<std::size_t>(l * q + k)][static_cast<std::size_t>(1 - b_ml)]);
        }
      }
      scores[static_cast<std::size_t>(j)] += acc.log_sum();
      if (!glrt) scores[static_cast<std::size_t>(j)] += n_inter * hyps.log_prior(j);
    }
  }
  return finalize(std::move(scores), hyps, t_tones, evals);
}

ClassifierDecision classify_closest_n(int n_distances, const ObservationList& obs,
                                      const Constellation& user_const, const HypothesisSet& hyps,
                                      double sigma2, int t_tones, int n_user, bool glrt) {
  if (n_distances < 1) throw ConfigError("the distance budget must be at least one");
  const Dims dims = checked_dims(obs, sigma2, t_tones, n_user);
  const int n_inter = dims.n - n_user;
  std::vector<double> scores(static_cast<std::size_t>(hyps.size()), 0.0);
  std::int64_t evals = 0;
  std::vector<double> scratch;
  for (int t = 0; t < t_tones; ++t) {
    const auto& o = obs[static_cast<std::size_t>(t)];
    for (int j = 0; j < hyps.size(); ++j) {
      const auto consts = layer_constellations(user_const, hyps.hypothesis(j), n_user, dims.n);
      scratch.clear();
      evals += enumerate_lattice(o.y, o.h, consts, sigma2,
                                 [&](double d, const std::vector<int>&) { scratch.push_back(d); });
      const auto keep = std::min<std::size_t>(scratch.size(), static_cast<std::size_t>(n_distances));
      std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(keep - 1),
                       scratch.end());
      NegExpSum acc;
      for (std::size_t i = 0; i < keep; ++i) acc.add(scratch[i]);
      scores[static_cast<std::size_t>(j)] += acc.log_sum();
      if (!glrt) scores[static_cast<std::size_t>(j)] += n_inter * hyps.log_prior(j);
    }
  }
  return finalize(std::move(scores), hyps, t_tones, evals);
}

CumulantVector estimate_cumulants(const ComplexVector& samples) {
  if (samples.size() < 1) throw ConfigError("cumulant estimation needs at least one sample");
  struct Range {
    const ComplexVector& v;
    const Complex* begin() const { return v.data(); }
    const Complex* end() const { return v.data() + v.size(); }
    std::size_t size() const { return static_cast<std::size_t>(v.size()); }
  };
  CumulantVector cv = cumulants_from_moments(moments_over(Range{samples}));
  cv.low_sample = samples.size() < 100;
  return cv;
}

const CumulantVector& theoretical_cumulants(const Constellation& c) {
  static const std::array<CumulantVector, 7> table = [] {
    std::array<CumulantVector, 7> out{};
    for (int i = 0; i < 7; ++i) {
      const auto& cons = Constellation::get(static_cast<ConstellationId>(i));
      out[static_cast<std::size_t>(i)] = cumulants_from_moments(moments_over(cons.points()));
    }
    return out;
  }();
  return table[static_cast<std::size_t>(c.id())];
}

ClassifierDecision classify_features(const ComplexVector& stream_samples,
                                     const HypothesisSet& hyps, bool sixth_order) {
  const CumulantVector est = estimate_cumulants(stream_samples);
  std::vector<double> scores(static_cast<std::size_t>(hyps.size()), 0.0);
  for (int j = 0; j < hyps.size(); ++j) {
    scores[static_cast<std::size_t>(j)] =
        -feature_distance(est, theoretical_cumulants(hyps.hypothesis(j)), sixth_order);
  }
  return finalize(std::move(scores), hyps, static_cast<int>(stream_samples.size()), 0);
}

ClassifierDecision classify_features(const ObservationList& obs, int n_user,
                                     const HypothesisSet& hyps, bool sixth_order) {
  checked_dims(obs, 1.0, static_cast<int>(obs.size()), n_user);
  const ZfStreams zf = equalize_unknown_streams(obs, n_user, static_cast<int>(obs.size()));
  std::size_t best = 0;
  for (std::size_t k = 1; k < zf.amplification.size(); ++k) {
    if (zf.amplification[k] < zf.amplification[best]) best = k;
  }
  return classify_features(zf.samples[best], hyps, sixth_order);
}

ClassifierDecision classify_hierarchical(const ObservationList& obs,
                                         const Constellation& user_const,
                                         const HypothesisSet& hyps, double sigma2, int t_tones,
                                         int n_user, bool glrt) {
  const int phi = hyps.phi_index();
  if (phi < 0) throw ConfigError("the gate needs a zero-power hypothesis to eliminate");
  checked_dims(obs, sigma2, t_tones, n_user);
  const ZfStreams zf = equalize_unknown_streams(obs, n_user, t_tones);
  double power = 0.0;
  for (const auto& stream : zf.samples) {
    power += stream.squaredNorm() / static_cast<double>(stream.size() * zf.samples.size());
  }
  if (power < 0.5) {
    std::vector<double> scores(static_cast<std::size_t>(hyps.size()), power - 0.5);
    scores[static_cast<std::size_t>(phi)] = 0.5 - power;
    return finalize(std::move(scores), hyps, t_tones, 0);
  }
  std::vector<ConstellationId> rest;
  std::vector<int> back;
  for (int j = 0; j < hyps.size(); ++j) {
    if (j == phi) continue;
    rest.push_back(hyps.hypothesis(j).id());
    back.push_back(j);
  }
  const HypothesisSet reduced(std::move(rest));
  const ClassifierDecision stage2 =
      classify_logmap(obs, user_const, reduced, sigma2, t_tones, n_user, glrt);
  std::vector<double> scores(static_cast<std::size_t>(hyps.size()),
                             -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < back.size(); ++i) {
    scores[static_cast<std::size_t>(back[i])] = stage2.scores[i];
  }
  return finalize(std::move(scores), hyps, t_tones, stage2.likelihood_evaluations);
}

ClassifierDecision classify_per_layer_subspace(const ObservationList& obs, int layer,
                                               const HypothesisSet& hyps, double sigma2,
                                               int t_tones, SubspaceMetric metric,
                                               const Constellation& dense) {
  if (!(sigma2 > 0.0)) throw ConfigError("noise variance must be positive");
  if (t_tones < 1) throw ConfigError("classification needs at least one tone");
  if (obs.size() < static_cast<std::size_t>(t_tones)) {
    throw ConfigError("fewer observations than requested tones");
  }
  const int m = static_cast<int>(obs.front().h.rows());
  const int n = static_cast<int>(obs.front().h.cols());
  if (n < 1 || m < n) throw ConfigError("channel must have at least as many rows as layers");
  if (layer < 0 || layer >= n) throw ConfigError("layer of interest out of range");
  if (dense.size() < 2) throw ConfigError("slicing needs a multi-point constellation");
  std::vector<double> scores(static_cast<std::size_t>(hyps.size()), 0.0);
  std::int64_t evals = 0;
  for (int t = 0; t < t_tones; ++t) {
    const auto& o = obs[static_cast<std::size_t>(t)];
    if (o.h.rows() != m || o.h.cols() != n || o.y.size() != m) {
      throw ConfigError("observations must share dimensions");
    }
    const Wrd pd = wrd(swap_columns(o.h, layer, n - 1));
    const ComplexVector yb = pd.W.adjoint() * o.y;
    for (int j = 0; j < hyps.size(); ++j) {
      const auto& hyp = hyps.hypothesis(j);
      NegExpSum acc;
      double dmin = std::numeric_limits<double>::infinity();
      for (int label = 0; label < hyp.size(); ++label) {
        const Complex s = hyp.point(label);
        double d = std::norm(yb(n - 1) - pd.Rp(n - 1, n - 1) * s);
        for (int i = 0; i < n - 1; ++i) {
          const Complex z = yb(i) - pd.Rp(i, n - 1) * s;
          const Complex xi = dense.point(dense.slice(z / pd.Rp(i, i)));
          d += std::norm(z - pd.Rp(i, i) * xi);
        }
        d /= sigma2;
        if (metric == SubspaceMetric::kLogMap) {
          acc.add(d);
        } else {
          dmin = std::min(dmin, d);
        }
        ++evals;
      }
      scores[static_cast<std::size_t>(j)] +=
          (metric == SubspaceMetric::kLogMap ? acc.log_sum() : -dmin) + hyps.log_prior(j);
    }
  }
  return finalize(std::move(scores), hyps, t_tones, evals);
}

}  // namespace mimo
