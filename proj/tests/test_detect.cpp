#include "mimo/detect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "mimo/channel.hpp"
#include "mimo/constellation.hpp"
#include "mimo/decompose.hpp"

using namespace mimo;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<int> random_labels(const Constellation& c, int n, Rng& rng) {
  std::vector<int> labels(static_cast<size_t>(n));
  for (auto& v : labels) v = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(c.size()));
  return labels;
}

ComplexVector symbols_of(const std::vector<int>& labels, const Constellation& c) {
  ComplexVector x(static_cast<Eigen::Index>(labels.size()));
  for (size_t n = 0; n < labels.size(); ++n) x(static_cast<Eigen::Index>(n)) = c.point(labels[n]);
  return x;
}

// Reference search: base-M digit expansion over every vector, no shared code
// with the library's enumeration.
struct BruteResult {
  std::vector<int> hard;
  double distance = kInf;
  RealMatrix llrs;
};

BruteResult brute_min(const ComplexVector& y, const ComplexMatrix& A,
                      const Constellation& c, double sigma2,
                      double clamp_scale = kDefaultLlrClampScale) {
  const int N = static_cast<int>(A.cols());
  const int M = c.size();
  const int q = c.bits_per_symbol();
  RealMatrix d0 = RealMatrix::Constant(q, N, kInf);
  RealMatrix d1 = RealMatrix::Constant(q, N, kInf);
  BruteResult out;
  long total = 1;
  for (int n = 0; n < N; ++n) total *= M;
  std::vector<int> labels(static_cast<size_t>(N));
  ComplexVector x(N);
  for (long v = 0; v < total; ++v) {
    long rem = v;
    for (int n = 0; n < N; ++n) {
      labels[static_cast<size_t>(n)] = static_cast<int>(rem % M);
      rem /= M;
      x(n) = c.point(labels[static_cast<size_t>(n)]);
    }
    const double d = (y - A * x).squaredNorm();
    if (d < out.distance) {
      out.distance = d;
      out.hard = labels;
    }
    for (int n = 0; n < N; ++n)
      for (int k = 0; k < q; ++k) {
        double& slot = c.bit(labels[static_cast<size_t>(n)], k) ? d1(k, n) : d0(k, n);
        slot = std::min(slot, d);
      }
  }
  const double cap = clamp_scale / sigma2;
  out.llrs.resize(q, N);
  for (int n = 0; n < N; ++n)
    for (int k = 0; k < q; ++k)
      out.llrs(k, n) = std::clamp((d0(k, n) - d1(k, n)) / sigma2, -cap, cap);
  return out;
}

double max_abs_diff(const RealMatrix& a, const RealMatrix& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("exhaustive detection matches a digit-expansion brute force") {
  const auto& c = Constellation::by_name("qpsk");
  Rng rng(777);
  for (int trial = 0; trial < 50; ++trial) {
    const ComplexMatrix H = sample_channel(2, 2, rng);
    const auto sent = random_labels(c, 2, rng);
    const double sigma2 = 0.4;
    ComplexVector y = H * symbols_of(sent, c) + sample_noise(2, sigma2, rng);

    const auto ref = brute_min(y, H, c, sigma2);
    const auto got = detect_ml_exhaustive(y, H, c, sigma2, true);
    CHECK(got.hard == ref.hard);
    CHECK(got.distance == doctest::Approx(ref.distance).epsilon(1e-12));
    CHECK(max_abs_diff(got.llrs, ref.llrs) < 1e-9);
    CHECK(got.nodes_visited == 16);
  }
}

TEST_CASE("exhaustive detection refuses oversized search spaces") {
  Rng rng(3);
  const ComplexMatrix H = sample_channel(4, 4, rng);
  const ComplexVector y = ComplexVector::Zero(4);
  CHECK_THROWS_AS(detect_ml_exhaustive(y, H, Constellation::by_name("qam256"), 1.0, false),
                  SearchSpaceTooLarge);
}

TEST_CASE("sphere search reproduces the exhaustive solution") {
  struct Setup {
    int n;
    const char* cons;
  };
  for (const Setup s : {Setup{2, "qam16"}, Setup{4, "qpsk"}}) {
    const auto& c = Constellation::by_name(s.cons);
    Rng rng(900 + s.n);
    for (int trial = 0; trial < 150; ++trial) {
      const ComplexMatrix H = sample_channel(s.n, s.n, rng);
      const auto sent = random_labels(c, s.n, rng);
      const double sigma2 = 0.5;
      const ComplexVector y = H * symbols_of(sent, c) + sample_noise(s.n, sigma2, rng);

      const auto ref = brute_min(y, H, c, sigma2);
      const auto got = detect_sphere(y, qrd_mgs(H), c, sigma2, true);
      CHECK(got.hard == ref.hard);
      CHECK(got.distance == doctest::Approx(ref.distance).epsilon(1e-9));
      CHECK(max_abs_diff(got.llrs, ref.llrs) < 1e-9);
      long lattice = 1;
      for (int i = 0; i < s.n; ++i) lattice *= c.size();
      CHECK(got.nodes_visited <= lattice * (1 + s.n * c.bits_per_symbol()));
    }
  }
}

TEST_CASE("sphere search enters one node per layer when the input is noiseless") {
  const auto& c = Constellation::by_name("qam16");
  Rng rng(41);
  const ComplexMatrix H = sample_channel(4, 4, rng);
  const auto sent = random_labels(c, 4, rng);
  const ComplexVector y = H * symbols_of(sent, c);
  const auto got = detect_sphere(y, qrd_mgs(H), c, 0.1, false);
  CHECK(got.hard == sent);
  CHECK(got.distance < 1e-18);
  CHECK(got.nodes_visited == 4);
}

TEST_CASE("sphere search honors a finite initial radius") {
  const auto& c = Constellation::by_name("qpsk");
  Rng rng(55);
  const ComplexMatrix H = sample_channel(3, 3, rng);
  const auto sent = random_labels(c, 3, rng);
  const double sigma2 = 0.3;
  const ComplexVector y = H * symbols_of(sent, c) + sample_noise(3, sigma2, rng);
  const Qrd dec = qrd_mgs(H);

  const auto unconstrained = detect_sphere(y, dec, c, sigma2, false);
  const auto generous = detect_sphere(y, dec, c, sigma2, false,
                                      unconstrained.distance * 1.001 + 1e-9);
  CHECK(generous.hard == unconstrained.hard);
  CHECK_THROWS_AS(detect_sphere(y, dec, c, sigma2, false, 1e-15), RadiusTooSmall);
}

TEST_CASE("linear detectors match explicit matrix-inverse equalization") {
  const auto& c = Constellation::by_name("qam16");
  Rng rng(1234);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 4;
    const ComplexMatrix H = sample_channel(n, n, rng);
    const auto sent = random_labels(c, n, rng);
    const double sigma2 = 0.25;
    const ComplexVector y = H * symbols_of(sent, c) + sample_noise(n, sigma2, rng);

    for (const bool mmse : {false, true}) {
      const double reg = mmse ? sigma2 / n : 0.0;
      ComplexMatrix A = H.adjoint() * H + reg * ComplexMatrix::Identity(n, n);
      const ComplexMatrix G = A.inverse();
      const ComplexVector xhat = G * (H.adjoint() * y);

      const auto got = mmse ? detect_mmse(y, H, c, sigma2, true)
                            : detect_zf(y, H, c, sigma2, true);
      const double cap = kDefaultLlrClampScale / sigma2;
      for (int layer = 0; layer < n; ++layer) {
        CHECK(got.hard[static_cast<size_t>(layer)] == c.slice(xhat(layer)));
        const double layer_var = sigma2 * G(layer, layer).real();
        for (int k = 0; k < c.bits_per_symbol(); ++k) {
          double m0 = kInf, m1 = kInf;
          for (int s = 0; s < c.size(); ++s) {
            const double d = std::norm(xhat(layer) - c.point(s));
            (c.bit(s, k) ? m1 : m0) = std::min(c.bit(s, k) ? m1 : m0, d);
          }
          const double want = std::clamp((m0 - m1) / layer_var, -cap, cap);
          CHECK(std::abs(got.llrs(k, layer) - want) < 1e-9);
        }
      }
    }
  }
}

TEST_CASE("zero forcing reports a singular channel") {
  const auto& c = Constellation::by_name("qpsk");
  ComplexMatrix H(2, 2);
  H << Complex(1, 0), Complex(1, 0), Complex(2, 1), Complex(2, 1);
  const ComplexVector y = ComplexVector::Ones(2);
  CHECK_THROWS_AS(detect_zf(y, H, c, 0.1, false), SingularMatrix);
  CHECK_NOTHROW(detect_mmse(y, H, c, 0.1, false));
}

TEST_CASE("decision-feedback cancellation slices layer by layer") {
  const auto& c = Constellation::by_name("qam16");
  Rng rng(88);
  const ComplexMatrix H = sample_channel(4, 4, rng);
  const Qrd dec = qrd_mgs(H);
  const auto sent = random_labels(c, 4, rng);
  const ComplexVector y = H * symbols_of(sent, c) + sample_noise(4, 0.02, rng);

  // reference: substitution straight off the triangular system
  const ComplexVector yt = dec.Q.adjoint() * y;
  std::vector<int> want(4);
  ComplexVector xs(4);
  for (int n = 3; n >= 0; --n) {
    Complex acc = yt(n);
    for (int l = n + 1; l < 4; ++l) acc -= dec.R(n, l) * xs(l);
    want[static_cast<size_t>(n)] = c.slice(acc / dec.R(n, n).real());
    xs(n) = c.point(want[static_cast<size_t>(n)]);
  }
  const auto got = detect_nc(y, dec, c);
  CHECK(got.hard == want);
  CHECK(got.distance == doctest::Approx((yt - dec.R * xs).squaredNorm()).epsilon(1e-9));

  // noiseless input is recovered exactly
  const ComplexVector clean = H * symbols_of(sent, c);
  CHECK(detect_nc(clean, dec, c).hard == sent);
}

TEST_CASE("punctured cancellation agrees with the explicit projector construction") {
  const auto& c = Constellation::by_name("qam16");
  Rng rng(4242);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 4;
    const ComplexMatrix H = sample_channel(n, n, rng);
    const Wrd dec = wrd(H);

    // column n of the reference basis: project h_n onto the complement of the
    // interfering set, then normalize to a positive diagonal
    ComplexMatrix Wref(n, n);
    for (int col = 0; col < n; ++col) {
      std::vector<int> keep;
      for (int j = 0; j < n - 1; ++j)
        if (j != col) keep.push_back(j);
      ComplexMatrix Hi(n, static_cast<Eigen::Index>(keep.size()));
      for (size_t j = 0; j < keep.size(); ++j) Hi.col(static_cast<Eigen::Index>(j)) = H.col(keep[j]);
      ComplexMatrix P = ComplexMatrix::Identity(n, n);
      if (!keep.empty()) P -= Hi * (Hi.adjoint() * Hi).inverse() * Hi.adjoint();
      const ComplexVector w = P * H.col(col);
      const double gain = std::sqrt((H.col(col).adjoint() * P * H.col(col))(0, 0).real());
      Wref.col(col) = w / gain;
    }
    CHECK((dec.W - Wref).cwiseAbs().maxCoeff() < 1e-9);

    // full detection chain against an independent re-derivation
    const auto sent = random_labels(c, n, rng);
    const ComplexVector y = H * symbols_of(sent, c) + sample_noise(n, 0.2, rng);
    const ComplexVector yb = Wref.adjoint() * y;
    const ComplexMatrix Rref = Wref.adjoint() * H;
    std::vector<int> want(static_cast<size_t>(n));
    want[static_cast<size_t>(n - 1)] = c.slice(yb(n - 1) / Rref(n - 1, n - 1).real());
    const Complex xN = c.point(want[static_cast<size_t>(n - 1)]);
    for (int layer = 0; layer < n - 1; ++layer)
      want[static_cast<size_t>(layer)] =
          c.slice((yb(layer) - Rref(layer, n - 1) * xN) / Rref(layer, layer).real());
    CHECK(detect_pnc(y, dec, c).hard == want);
  }
}

TEST_CASE("chase lists are metrically consistent and dominate plain cancellation") {
  const auto& c = Constellation::by_name("qam16");
  Rng rng(606);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 4;
    const ComplexMatrix H = sample_channel(n, n, rng);
    const Qrd dec = qrd_mgs(H);
    const auto sent = random_labels(c, n, rng);
    const ComplexVector y = H * symbols_of(sent, c) + sample_noise(n, 0.6, rng);
    const ComplexVector yt = dec.Q.adjoint() * y;

    std::vector<int> order(4);
    for (int i = 0; i < 4; ++i) order[static_cast<size_t>(i)] = i;
    const CandidateList list = sic_candidates(yt, dec.R, c, order);
    REQUIRE(static_cast<int>(list.entries.size()) == c.size());
    for (const auto& cand : list.entries) {
      const double recomputed = (yt - dec.R * symbols_of(cand.labels, c)).squaredNorm();
      CHECK(cand.distance == doctest::Approx(recomputed).epsilon(1e-9));
    }

    const auto chase = detect_chase(y, dec, c, 0.6, false);
    const auto nc = detect_nc(y, dec, c);
    CHECK(chase.distance <= nc.distance + 1e-12);
    // the sliced-root path appears in the list, so the chase winner can only improve
    bool found_nc = false;
    for (const auto& cand : list.entries) found_nc |= (cand.labels == nc.hard);
    CHECK(found_nc);
  }
}

TEST_CASE("punctured chase equals exhaustive punctured minimization") {
  const auto& c = Constellation::by_name("qpsk");
  Rng rng(321);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 4;
    const ComplexMatrix H = sample_channel(n, n, rng);
    const Wrd dec = wrd(H);
    const auto sent = random_labels(c, n, rng);
    const double sigma2 = 0.5;
    const ComplexVector y = H * symbols_of(sent, c) + sample_noise(n, sigma2, rng);

    const auto pml = detect_pml_exhaustive(y, dec, c, sigma2, true);
    const auto pcd = detect_pchase(y, dec, c, sigma2, true);
    CHECK(pcd.hard == pml.hard);
    CHECK(pcd.distance == doctest::Approx(pml.distance).epsilon(1e-9));
    // per-root separability extends to the root layer's bit minima
    for (int k = 0; k < c.bits_per_symbol(); ++k)
      CHECK(std::abs(pcd.llrs(k, n - 1) - pml.llrs(k, n - 1)) < 1e-9);
  }
}

TEST_CASE("dual-layer full-list detection is exact") {
  const auto& c = Constellation::by_name("qam16");
  Rng rng(2718);
  const auto schedule = permutation_schedule(ScheduleKind::kCyclic, 2);
  for (int trial = 0; trial < 200; ++trial) {
    const ComplexMatrix H = sample_channel(2, 2, rng);
    const auto sent = random_labels(c, 2, rng);
    const double sigma2 = 0.5;
    const ComplexVector y = H * symbols_of(sent, c) + sample_noise(2, sigma2, rng);

    const auto ref = brute_min(y, H, c, sigma2);
    const auto got = detect_lord(y, H, c, sigma2, true, schedule);
    CHECK(got.hard == ref.hard);
    CHECK(got.distance == doctest::Approx(ref.distance).epsilon(1e-9));
    CHECK(max_abs_diff(got.llrs, ref.llrs) < 1e-9);
  }
}

TEST_CASE("ordering diversity never hurts the list metric") {
  const auto& c = Constellation::by_name("qam16");
  Rng rng(99);
  const auto schedule = permutation_schedule(ScheduleKind::kCyclic, 4);
  for (int trial = 0; trial < 40; ++trial) {
    const ComplexMatrix H = sample_channel(4, 4, rng);
    const auto sent = random_labels(c, 4, rng);
    const ComplexVector y = H * symbols_of(sent, c) + sample_noise(4, 0.8, rng);
    const auto all = detect_lord(y, H, c, 0.8, false, schedule);
    const auto one = detect_chase(y, qrd_mgs(H), c, 0.8, false);
    CHECK(all.distance <= one.distance + 1e-12);
  }
}

TEST_CASE("the found minimizer does not depend on the column order") {
  const auto& c = Constellation::by_name("qpsk");
  Rng rng(1001);
  const std::vector<int> perm = {2, 0, 3, 1};
  for (int trial = 0; trial < 30; ++trial) {
    const ComplexMatrix H = sample_channel(4, 4, rng);
    const auto sent = random_labels(c, 4, rng);
    const double sigma2 = 0.5;
    const ComplexVector y = H * symbols_of(sent, c) + sample_noise(4, sigma2, rng);

    ComplexMatrix Hp(4, 4);
    for (int i = 0; i < 4; ++i) Hp.col(i) = H.col(perm[static_cast<size_t>(i)]);
    const auto base = detect_ml_exhaustive(y, H, c, sigma2, false);
    const auto shuffled = detect_ml_exhaustive(y, Hp, c, sigma2, false);
    for (int i = 0; i < 4; ++i)
      CHECK(shuffled.hard[static_cast<size_t>(i)] ==
            base.hard[static_cast<size_t>(perm[static_cast<size_t>(i)])]);
    CHECK(shuffled.distance == doctest::Approx(base.distance).epsilon(1e-9));
  }
}

TEST_CASE("layer schedules are validated") {
  const auto& c = Constellation::by_name("qpsk");
  Rng rng(7);
  const ComplexMatrix H = sample_channel(3, 3, rng);
  const ComplexVector y = ComplexVector::Ones(3);
  CHECK_THROWS_AS(detect_lord(y, H, c, 0.5, false, {}), ConfigError);
  CHECK_THROWS_AS(detect_lord(y, H, c, 0.5, false, {{0, 1}}), ConfigError);
  CHECK_THROWS_AS(detect_lord(y, H, c, 0.5, false, {{0, 1, 1}}), ConfigError);
  // symbol assembly requires every layer at the root exactly once
  CHECK_THROWS_AS(
      detect_slord(y, H, c, 0.5, false, {{0, 1, 2}, {1, 2, 0}, {2, 1, 0}}), ConfigError);
  CHECK_NOTHROW(
      detect_slord(y, H, c, 0.5, false, permutation_schedule(ScheduleKind::kCyclic, 3)));
}

TEST_CASE("symbol-assembled outputs take each root from its own ordering") {
  const auto& c = Constellation::by_name("qpsk");
  Rng rng(515);
  const auto schedule = permutation_schedule(ScheduleKind::kCyclic, 4);
  for (int trial = 0; trial < 30; ++trial) {
    const ComplexMatrix H = sample_channel(4, 4, rng);
    const auto sent = random_labels(c, 4, rng);
    const double sigma2 = 0.5;
    const ComplexVector y = H * symbols_of(sent, c) + sample_noise(4, sigma2, rng);

    for (const bool punctured : {false, true}) {
      const auto got = punctured ? detect_sssd(y, H, c, sigma2, false, schedule)
                                 : detect_slord(y, H, c, sigma2, false, schedule);
      for (const auto& order : schedule) {
        ComplexMatrix Hp(4, 4);
        for (int i = 0; i < 4; ++i) Hp.col(i) = H.col(order[static_cast<size_t>(i)]);
        ComplexMatrix R, basis;
        if (punctured) {
          const Wrd dec = wrd(Hp);
          R = dec.Rp;
          basis = dec.W;
        } else {
          const Qrd dec = qrd_mgs(Hp);
          R = dec.R;
          basis = dec.Q;
        }
        const ComplexVector yt = basis.adjoint() * y;
        // re-derive this ordering's winning root symbol
        double best = kInf;
        int best_root = -1;
        for (int s = 0; s < c.size(); ++s) {
          ComplexVector xs(4);
          xs(3) = c.point(s);
          double d = std::norm(yt(3) - R(3, 3) * xs(3));
          for (int n = 2; n >= 0; --n) {
            Complex acc = yt(n);
            for (int l = n + 1; l < 4; ++l) acc -= R(n, l) * xs(l);
            const int lab = c.slice(acc / R(n, n).real());
            xs(n) = c.point(lab);
            d += std::norm(acc - R(n, n) * xs(n));
          }
          if (d < best) {
            best = d;
            best_root = s;
          }
        }
        CHECK(got.hard[static_cast<size_t>(order.back())] == best_root);
      }
    }
  }
}

TEST_CASE("punctured symbol assembly beats unpunctured assembly at high snr") {
  // the gap opens once list-miss errors dominate; below ~27 dB (snr = N/sigma2)
  // the unpunctured assembly is still ahead
  const auto& c = Constellation::by_name("qam16");
  const int n = 4;
  const auto schedule = permutation_schedule(ScheduleKind::kCyclic, n);
  const NoiseModel noise = NoiseModel::from_snr_db(30.0, n);
  long errs_sssd = 0, errs_slord = 0;
  Rng rng(20240814);
  for (int trial = 0; trial < 100000; ++trial) {
    const ComplexMatrix H = sample_channel(n, n, rng);
    const auto sent = random_labels(c, n, rng);
    const ComplexVector y = transmit(H, symbols_of(sent, c), noise, rng);
    const auto a = detect_sssd(y, H, c, noise.sigma2, false, schedule);
    const auto b = detect_slord(y, H, c, noise.sigma2, false, schedule);
    for (int layer = 0; layer < n; ++layer)
      for (int k = 0; k < c.bits_per_symbol(); ++k) {
        const int bit = c.bit(sent[static_cast<size_t>(layer)], k);
        errs_sssd += (c.bit(a.hard[static_cast<size_t>(layer)], k) != bit);
        errs_slord += (c.bit(b.hard[static_cast<size_t>(layer)], k) != bit);
      }
  }
  CHECK(errs_slord > 0);
  CHECK(errs_sssd < errs_slord);
}

TEST_CASE("noiseless soft outputs carry the transmitted bits with correct signs") {
  const auto& c = Constellation::by_name("qam16");
  Rng rng(31);
  const int n = 4;
  const ComplexMatrix H = sample_channel(n, n, rng);
  const auto sent = random_labels(c, n, rng);
  const ComplexVector y = H * symbols_of(sent, c);
  const double sigma2 = 0.01;
  const auto schedule = permutation_schedule(ScheduleKind::kCyclic, n);

  std::vector<DetectionResult> results;
  results.push_back(detect_ml_exhaustive(y, H, c, sigma2, true));
  results.push_back(detect_sphere(y, qrd_mgs(H), c, sigma2, true));
  results.push_back(detect_chase(y, qrd_mgs(H), c, sigma2, true));
  results.push_back(detect_pchase(y, wrd(H), c, sigma2, true));
  results.push_back(detect_lord(y, H, c, sigma2, true, schedule));
  results.push_back(detect_ssd(y, H, c, sigma2, true, schedule));
  results.push_back(detect_slord(y, H, c, sigma2, true, schedule));
  results.push_back(detect_sssd(y, H, c, sigma2, true, schedule));
  results.push_back(detect_mmse(y, H, c, sigma2, true));
  results.push_back(detect_zf(y, H, c, sigma2, true));
  for (const auto& res : results) {
    CHECK(res.hard == sent);
    for (int layer = 0; layer < n; ++layer)
      for (int k = 0; k < c.bits_per_symbol(); ++k) {
        const double lam = res.llrs(k, layer);
        if (c.bit(sent[static_cast<size_t>(layer)], k))
          CHECK(lam > 0.0);
        else
          CHECK(lam < 0.0);
      }
  }
}

TEST_CASE("reduced-region detection with the full alphabet reduces to the full list") {
  const auto& c = Constellation::by_name("qam16");
  Rng rng(616);
  const auto schedule = permutation_schedule(ScheduleKind::kCyclic, 2);
  for (int trial = 0; trial < 100; ++trial) {
    const ComplexMatrix H = sample_channel(2, 2, rng);
    const auto sent = random_labels(c, 2, rng);
    const double sigma2 = 0.4;
    const ComplexVector y = H * symbols_of(sent, c) + sample_noise(2, sigma2, rng);

    const auto full = detect_lord(y, H, c, sigma2, true, schedule);
    const auto reduced = detect_lclord(y, H, c, sigma2, c.size(),
                                       CenterStrategy::kEqualized, LlrFill::kSaturate, true);
    CHECK(reduced.hard == full.hard);
    CHECK(reduced.distance == doctest::Approx(full.distance).epsilon(1e-9));
    CHECK(max_abs_diff(reduced.llrs, full.llrs) < 1e-9);
  }
}

TEST_CASE("reduced-region arguments are validated") {
  const auto& c = Constellation::by_name("qam16");
  Rng rng(8);
  const ComplexMatrix H2 = sample_channel(2, 2, rng);
  const ComplexMatrix H4 = sample_channel(4, 4, rng);
  const ComplexVector y2 = ComplexVector::Ones(2);
  const ComplexVector y4 = ComplexVector::Ones(4);
  CHECK_THROWS_AS(detect_lclord(y4, H4, c, 0.5, 4, CenterStrategy::kEqualized,
                                LlrFill::kSaturate, false),
                  UnsupportedLayerCount);
  CHECK_THROWS_AS(detect_lclord(y2, H2, c, 0.5, 8, CenterStrategy::kEqualized,
                                LlrFill::kSaturate, false),
                  ConfigError);
  CHECK_THROWS_AS(detect_lclord(y2, H2, c, 0.5, 25, CenterStrategy::kEqualized,
                                LlrFill::kSaturate, false),
                  ConfigError);
  RealMatrix bad_priors = RealMatrix::Zero(3, 2);
  CHECK_THROWS_AS(detect_lclord(y2, H2, c, 0.5, 4, CenterStrategy::kEqualized,
                                LlrFill::kSaturate, true, &bad_priors),
                  ConfigError);
  CHECK_THROWS_AS(detect_lclord(y2, H2, c, 0.5, 4, CenterStrategy::kIterative,
                                LlrFill::kSaturate, false, nullptr, 0),
                  ConfigError);
}

TEST_CASE("larger regions never worsen the achieved metric") {
  const auto& c = Constellation::by_name("qam64");
  Rng rng(107);
  for (int trial = 0; trial < 40; ++trial) {
    const ComplexMatrix H = sample_channel(2, 2, rng);
    const auto sent = random_labels(c, 2, rng);
    const ComplexVector y = H * symbols_of(sent, c) + sample_noise(2, 0.5, rng);
    double prev = kInf;
    for (const int size : {4, 16, 36, 64}) {
      const auto res = detect_lclord(y, H, c, 0.5, size, CenterStrategy::kEqualized,
                                     LlrFill::kSaturate, false);
      CHECK(res.distance <= prev + 1e-12);
      prev = res.distance;
    }
  }
}

TEST_CASE("region fills behave as pinned on an identity channel") {
  const auto& c = Constellation::by_name("qpsk");
  const ComplexMatrix H = ComplexMatrix::Identity(2, 2);
  ComplexVector y(2);
  y << Complex(0.9, 0.1), Complex(-0.2, -0.8);
  const double sigma2 = 0.5;
  const double cap = kDefaultLlrClampScale / sigma2;

  // a single-point region visits one vector: [label 3, label 0]
  const auto sat = detect_lclord(y, H, c, sigma2, 1, CenterStrategy::kEqualized,
                                 LlrFill::kSaturate, true);
  REQUIRE(sat.hard == std::vector<int>{3, 0});
  for (int k = 0; k < 2; ++k) {
    CHECK(sat.llrs(k, 0) == doctest::Approx(cap));    // layer 0 sent bits 1,1
    CHECK(sat.llrs(k, 1) == doctest::Approx(-cap));   // layer 1 sent bits 0,0
  }

  // with one shared candidate the worst visited metric equals the best, so
  // the substituted side cancels exactly
  const auto worst = detect_lclord(y, H, c, sigma2, 1, CenterStrategy::kEqualized,
                                   LlrFill::kMaxNorm, true);
  CHECK(max_abs_diff(worst.llrs, RealMatrix::Zero(2, 2)) < 1e-12);

  // threshold fill: nearest opposite-bit point to the region center, sliced
  // on the other layer, distance recomputed by hand
  const auto thr = detect_lclord(y, H, c, sigma2, 1, CenterStrategy::kEqualized,
                                 LlrFill::kRegionThreshold, true);
  const double d_vis = std::norm(y(0) - c.point(3)) + std::norm(y(1) - c.point(0));
  auto fill_llr = [&](int layer, int k, int missing) {
    const Complex center = layer == 0 ? y(0) : y(1);  // identity channel equalizes to y
    double best = kInf;
    int p = -1;
    for (int s : c.labels_with_bit(k, missing)) {
      const double d = std::norm(c.point(s) - center);
      if (d < best) {
        best = d;
        p = s;
      }
    }
    const Complex other_obs = layer == 0 ? y(1) : y(0);
    const int other = c.slice(other_obs);
    const double d_fill = std::norm((layer == 0 ? y(0) : y(1)) - c.point(p)) +
                          std::norm(other_obs - c.point(other));
    const double phi_fill = -d_fill / sigma2;
    const double phi_vis = -d_vis / sigma2;
    const double lam = missing == 0 ? phi_vis - phi_fill : phi_fill - phi_vis;
    return std::clamp(lam, -cap, cap);
  };
  for (int k = 0; k < 2; ++k) {
    CHECK(std::abs(thr.llrs(k, 0) - fill_llr(0, k, 0)) < 1e-9);
    CHECK(std::abs(thr.llrs(k, 1) - fill_llr(1, k, 1)) < 1e-9);
  }
}

TEST_CASE("priors reweight the candidate lists per the joint metric") {
  // the candidate set stays distance-sliced; priors only enter the metric
  // used to rank candidates and form soft outputs
  const auto& c = Constellation::by_name("qpsk");
  Rng rng(2024);
  const auto schedule = permutation_schedule(ScheduleKind::kCyclic, 2);
  for (int trial = 0; trial < 60; ++trial) {
    const ComplexMatrix H = sample_channel(2, 2, rng);
    const auto sent = random_labels(c, 2, rng);
    const double sigma2 = 0.6;
    const ComplexVector y = H * symbols_of(sent, c) + sample_noise(2, sigma2, rng);
    RealMatrix priors(2, 2);
    for (int k = 0; k < 2; ++k)
      for (int n = 0; n < 2; ++n) priors(k, n) = 3.0 * rng.next_gaussian();

    // re-derive both orderings' chase lists and rank by the augmented metric
    double best_phi = -kInf;
    std::vector<int> best(2);
    RealMatrix m0 = RealMatrix::Constant(2, 2, -kInf);
    RealMatrix m1 = RealMatrix::Constant(2, 2, -kInf);
    for (const auto& order : schedule) {
      ComplexMatrix Hp(2, 2);
      for (int i = 0; i < 2; ++i) Hp.col(i) = H.col(order[static_cast<size_t>(i)]);
      const Qrd dec = qrd_mgs(Hp);
      const ComplexVector yt = dec.Q.adjoint() * y;
      for (int s = 0; s < 4; ++s) {
        const Complex root = c.point(s);
        const Complex acc = yt(0) - dec.R(0, 1) * root;
        const int follower = c.slice(acc / dec.R(0, 0).real());
        const double d = std::norm(yt(1) - dec.R(1, 1) * root) +
                         std::norm(acc - dec.R(0, 0) * c.point(follower));
        std::vector<int> labels(2);
        labels[static_cast<size_t>(order[1])] = s;
        labels[static_cast<size_t>(order[0])] = follower;
        double phi = -d / sigma2;
        for (int n = 0; n < 2; ++n)
          for (int k = 0; k < 2; ++k)
            if (c.bit(labels[static_cast<size_t>(n)], k)) phi += priors(k, n);
        if (phi > best_phi) {
          best_phi = phi;
          best = labels;
        }
        for (int n = 0; n < 2; ++n)
          for (int k = 0; k < 2; ++k) {
            double& slot = c.bit(labels[static_cast<size_t>(n)], k) ? m1(k, n) : m0(k, n);
            slot = std::max(slot, phi);
          }
      }
    }
    const double cap = kDefaultLlrClampScale / sigma2;
    const auto got = detect_lclord(y, H, c, sigma2, c.size(), CenterStrategy::kEqualized,
                                   LlrFill::kSaturate, true, &priors);
    CHECK(got.hard == best);
    for (int n = 0; n < 2; ++n)
      for (int k = 0; k < 2; ++k) {
        double want;
        if (std::isinf(m0(k, n)))
          want = cap;
        else if (std::isinf(m1(k, n)))
          want = -cap;
        else
          want = std::clamp(m1(k, n) - m0(k, n), -cap, cap);
        CHECK(std::abs(got.llrs(k, n) - want) < 1e-9);
      }

    // zero priors reduce to the plain metric
    RealMatrix zeros = RealMatrix::Zero(2, 2);
    const auto plain = detect_lclord(y, H, c, sigma2, c.size(), CenterStrategy::kEqualized,
                                     LlrFill::kSaturate, true);
    const auto zeroed = detect_lclord(y, H, c, sigma2, c.size(), CenterStrategy::kEqualized,
                                      LlrFill::kSaturate, true, &zeros);
    CHECK(zeroed.hard == plain.hard);
    CHECK(max_abs_diff(zeroed.llrs, plain.llrs) < 1e-12);
  }
}

TEST_CASE("center strategies stay within budget and produce sane outputs") {
  const auto& c = Constellation::by_name("qam1024");
  Rng rng(75);
  const NoiseModel noise = NoiseModel::from_snr_db(22.0, 2);
  double total_iters = 0;
  const int trials = 40;
  for (int trial = 0; trial < trials; ++trial) {
    const ComplexMatrix H = sample_channel(2, 2, rng);
    const auto sent = random_labels(c, 2, rng);
    const ComplexVector y = transmit(H, symbols_of(sent, c), noise, rng);

    for (const auto strategy : {CenterStrategy::kEqualized, CenterStrategy::kZfdfOrdered,
                                CenterStrategy::kIterative, CenterStrategy::kMmse}) {
      const auto res = detect_lclord(y, H, c, noise.sigma2, 225, strategy,
                                     LlrFill::kSaturate, false);
      REQUIRE(res.hard.size() == 2);
      for (int v : res.hard) {
        CHECK(v >= 0);
        CHECK(v < c.size());
      }
      if (strategy == CenterStrategy::kIterative) {
        CHECK(res.iterations >= 1);
        CHECK(res.iterations <= 8);
        total_iters += res.iterations;
      }
    }
  }
  const double avg = total_iters / trials;
  CHECK(avg >= 1.0);
  CHECK(avg < 4.0);
}

TEST_CASE("residual-optimized orderings reduce tree search work") {
  const auto& c = Constellation::by_name("qam16");
  const int n = 4;
  const NoiseModel noise = NoiseModel::from_snr_db(10.0, n);
  Rng rng(990);
  std::vector<double> nat, opt;
  for (int trial = 0; trial < 200; ++trial) {
    const ComplexMatrix H = sample_channel(n, n, rng);
    const auto sent = random_labels(c, n, rng);
    const ComplexVector y = transmit(H, symbols_of(sent, c), noise, rng);

    nat.push_back(static_cast<double>(
        detect_sphere(y, qrd_mgs(H), c, noise.sigma2, false).nodes_visited));

    const std::vector<int> order = mrqrd_order(H, y, c);
    ComplexMatrix Hp(n, n);
    for (int i = 0; i < n; ++i) Hp.col(i) = H.col(order[static_cast<size_t>(i)]);
    opt.push_back(static_cast<double>(
        detect_sphere(y, qrd_mgs(Hp), c, noise.sigma2, false).nodes_visited));
  }
  auto median = [](std::vector<double> v) {
    std::nth_element(v.begin(), v.begin() + static_cast<long>(v.size() / 2), v.end());
    return v[v.size() / 2];
  };
  CHECK(median(opt) <= median(nat));
  double mean_nat = 0, mean_opt = 0;
  for (double v : nat) mean_nat += v;
  for (double v : opt) mean_opt += v;
  CHECK(mean_opt < mean_nat);
}
