#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "mimo/channel.hpp"
#include "mimo/constellation.hpp"
#include "mimo/decompose.hpp"
#include "mimo/rng.hpp"

using mimo::Complex;
using mimo::ComplexMatrix;
using mimo::ComplexVector;
using mimo::Constellation;
using mimo::FlopLedger;
using mimo::NumericalError;
using mimo::Qrd;
using mimo::Rng;
using mimo::ScheduleKind;
using mimo::Wrd;

namespace {

void check_qr(const ComplexMatrix& H, const Qrd& qr, double tol) {
  const auto n = H.cols();
  CHECK((qr.Q.adjoint() * qr.Q - ComplexMatrix::Identity(n, n)).norm() < tol);
  CHECK((qr.Q * qr.R - H).norm() < tol * H.norm());
  for (int i = 0; i < n; ++i) {
    CHECK(qr.R(i, i).imag() == 0.0);
    CHECK(qr.R(i, i).real() > 0.0);
    for (int j = 0; j < i; ++j) {
      CHECK(std::abs(qr.R(i, j)) == 0.0);
    }
  }
}

}  // namespace

TEST_CASE("hand-checked 2x2 decomposition") {
  ComplexMatrix H(2, 2);
  H << Complex(3, 0), Complex(4, 0), Complex(4, 0), Complex(3, 0);
  const Qrd qr = mimo::qrd_mgs(H);
  CHECK(qr.R(0, 0).real() == doctest::Approx(5.0));
  CHECK(qr.R(0, 1).real() == doctest::Approx(4.8));
  CHECK(qr.R(1, 1).real() == doctest::Approx(1.4));
  CHECK(qr.Q(0, 0).real() == doctest::Approx(0.6));
  CHECK(qr.Q(1, 0).real() == doctest::Approx(0.8));
  CHECK(qr.Q(0, 1).real() == doctest::Approx(0.8));
  CHECK(qr.Q(1, 1).real() == doctest::Approx(-0.6));
}

TEST_CASE("decomposition invariants on random channels") {
  Rng rng(11);
  for (int n : {2, 3, 4, 8}) {
    for (int rep = 0; rep < 20; ++rep) {
      const ComplexMatrix H = mimo::sample_channel(n, n, rng);
      check_qr(H, mimo::qrd_mgs(H), 1e-10);
    }
  }
  const ComplexMatrix tall = mimo::sample_channel(6, 4, rng);
  check_qr(tall, mimo::qrd_mgs(tall), 1e-10);
}

TEST_CASE("rank deficiency is rejected") {
  Rng rng(12);
  ComplexMatrix H = mimo::sample_channel(4, 4, rng);
  H.col(2) = H.col(0);
  CHECK_THROWS_AS(mimo::qrd_mgs(H), NumericalError);
}

TEST_CASE("instrumented operation counts for full decompositions") {
  Rng rng(13);
  FlopLedger led4;
  mimo::qrd_mgs(mimo::sample_channel(4, 4, rng), &led4);
  CHECK(led4.real_mults == 304);
  CHECK(led4.real_adds == 176);

  FlopLedger led8;
  mimo::qrd_mgs(mimo::sample_channel(8, 8, rng), &led8);
  CHECK(led8.real_mults == 2240);
  CHECK(led8.real_adds == 1472);
}

TEST_CASE("puncturing zeroes the upper rows and keeps the last column pair") {
  Rng rng(14);
  for (int n : {2, 3, 4, 8}) {
    const ComplexMatrix H = mimo::sample_channel(n, n, rng);
    const Qrd qr = mimo::qrd_mgs(H);
    const Wrd wr = mimo::puncture(qr);
    // Zero everywhere above the diagonal except the last column.
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j + 1 < n; ++j) {
        CHECK(std::abs(wr.Rp(i, j)) <= 1e-10);
      }
      CHECK(wr.Rp(i, i).imag() == 0.0);
      CHECK(wr.Rp(i, i).real() > 0.0);
      CHECK(std::abs(wr.W.col(i).norm() - 1.0) < 1e-10);
    }
    CHECK((wr.W.col(n - 1) - qr.Q.col(n - 1)).norm() == 0.0);
    CHECK((wr.W.adjoint() * H - wr.Rp).norm() < 1e-9 * H.norm());
    if (n == 2) {
      CHECK((wr.W - qr.Q).norm() == 0.0);
      CHECK((wr.Rp - qr.R).norm() == 0.0);
    }
  }
}

TEST_CASE("prefix reuse reproduces direct decompositions at lower cost") {
  Rng rng(15);
  const ComplexMatrix H = mimo::sample_channel(4, 4, rng);
  const std::vector<std::vector<int>> orders = {{0, 1, 2, 3}, {0, 1, 3, 2}};
  FlopLedger led;
  const auto stages = mimo::prqrd(H, orders, &led);
  REQUIRE(stages.size() == 2);
  CHECK(stages[0].reused_prefix == 0);
  CHECK(stages[1].reused_prefix == 2);
  // Full pass plus a pass that skips two norm steps and one projection.
  CHECK(led.real_mults == 304 + 304 - 88);
  CHECK(led.real_adds == 176 + 176 - 40);
  for (const auto& stage : stages) {
    ComplexMatrix Hp(4, 4);
    for (int j = 0; j < 4; ++j) Hp.col(j) = H.col(stage.order[j]);
    const Qrd direct = mimo::qrd_mgs(Hp);
    CHECK((stage.qr.Q - direct.Q).norm() < 1e-12);
    CHECK((stage.qr.R - direct.R).norm() < 1e-12);
    check_qr(Hp, stage.qr, 1e-10);
  }
}

TEST_CASE("permutation schedules") {
  const auto spsd = mimo::permutation_schedule(ScheduleKind::kSinglePermutation, 4);
  REQUIRE(spsd.size() == 4);
  CHECK(spsd[1] == std::vector<int>{0, 3, 2, 1});
  CHECK(spsd[3] == std::vector<int>{0, 1, 2, 3});

  const auto pwsd = mimo::permutation_schedule(ScheduleKind::kPairwise, 4);
  REQUIRE(pwsd.size() == 4);
  CHECK(pwsd[0] == std::vector<int>{2, 3, 0, 1});
  CHECK(pwsd[1] == std::vector<int>{2, 3, 1, 0});
  CHECK(pwsd[2] == std::vector<int>{0, 1, 2, 3});
  CHECK(pwsd[3] == std::vector<int>{0, 1, 3, 2});

  const auto cyclic = mimo::permutation_schedule(ScheduleKind::kCyclic, 2);
  REQUIRE(cyclic.size() == 2);
  CHECK(cyclic[0] == std::vector<int>{0, 1});
  CHECK(cyclic[1] == std::vector<int>{1, 0});

  for (auto kind : {ScheduleKind::kSinglePermutation, ScheduleKind::kPairwise,
                    ScheduleKind::kCyclic}) {
    for (int n : {2, 4, 6}) {
      const auto orders = mimo::permutation_schedule(kind, n);
      std::set<int> roots;
      for (const auto& order : orders) {
        REQUIRE(static_cast<int>(order.size()) == n);
        std::set<int> cols(order.begin(), order.end());
        CHECK(static_cast<int>(cols.size()) == n);
        roots.insert(order.back());
      }
      CHECK(static_cast<int>(roots.size()) == n);
    }
  }
}

TEST_CASE("residual-minimizing order beats or matches every other order") {
  Rng rng(16);
  const auto& cons = Constellation::by_name("qpsk");
  for (int rep = 0; rep < 10; ++rep) {
    const ComplexMatrix H = mimo::sample_channel(4, 4, rng);
    ComplexVector y(4);
    for (int i = 0; i < 4; ++i) y(i) = rng.next_cgaussian() * 2.0;

    auto cres_of = [&](const std::vector<int>& order) {
      ComplexMatrix Hp(4, 4);
      for (int j = 0; j < 4; ++j) Hp.col(j) = H.col(order[j]);
      const Qrd qr = mimo::qrd_mgs(Hp);
      const ComplexVector yt = qr.Q.adjoint() * y;
      ComplexVector xb = ComplexVector::Zero(4);
      double total = 0.0;
      for (int k = 3; k >= 0; --k) {
        Complex acc = yt(k);
        for (int j = k + 1; j < 4; ++j) acc -= qr.R(k, j) * xb(j);
        xb(k) = cons.point(cons.slice(acc / qr.R(k, k).real()));
        total += (qr.R.rightCols(4 - k) * xb.tail(4 - k) - yt).squaredNorm();
      }
      return total;
    };

    const auto best = mimo::mrqrd_order(H, y, cons);
    const double best_val = cres_of(best);
    std::vector<int> perm = {0, 1, 2, 3};
    do {
      CHECK(best_val <= cres_of(perm) + 1e-9);
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
  ComplexMatrix big = mimo::sample_channel(7, 7, rng);
  ComplexVector y7 = ComplexVector::Zero(7);
  CHECK_THROWS_AS(mimo::mrqrd_order(big, y7, cons), std::invalid_argument);
}
