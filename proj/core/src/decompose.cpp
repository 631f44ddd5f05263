#include "mimo/decompose.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace mimo {
namespace {

// Modified Gram-Schmidt over a working copy, optionally resuming after a
// reused prefix whose Q columns and R block are already in place.
void mgs_from(ComplexMatrix& V, ComplexMatrix& Q, ComplexMatrix& R, int start,
              double rank_floor, FlopLedger* ledger) {
  const auto n = V.cols();
  const auto m = V.rows();
  for (int j = start; j < n; ++j) {
    const double nrm = V.col(j).norm();
    if (!(nrm > rank_floor)) {
      throw NumericalError("rank-deficient matrix in QR decomposition");
    }
    R(j, j) = Complex(nrm, 0.0);
    Q.col(j) = V.col(j) / nrm;
    if (ledger) ledger->mgs_norm_scale(static_cast<int>(m));
    for (int l = j + 1; l < n; ++l) {
      const Complex r = Q.col(j).dot(V.col(l));
      R(j, l) = r;
      V.col(l) -= r * Q.col(j);
      if (ledger) ledger->mgs_projection(static_cast<int>(m));
    }
  }
}

}  // namespace

Qrd qrd_mgs(const ComplexMatrix& H, FlopLedger* ledger) {
  const auto m = H.rows();
  const auto n = H.cols();
  if (m < n) throw NumericalError("QR decomposition needs rows >= cols");
  Qrd out;
  out.Q = ComplexMatrix::Zero(m, n);
  out.R = ComplexMatrix::Zero(n, n);
  ComplexMatrix V = H;
  mgs_from(V, out.Q, out.R, 0, kRankTolerance * H.norm(), ledger);
  return out;
}

Wrd puncture(const Qrd& qr, FlopLedger* ledger) {
  const auto n = qr.R.cols();
  Wrd out;
  out.W = qr.Q;
  out.Rp = qr.R;
  if (n >= 3) {
    for (auto m = n - 3; m >= 0; --m) {
      for (auto k = n - 2; k >= m + 1; --k) {
        const Complex rho = out.Rp(m, k) / out.Rp(k, k).real();
        out.W.col(m) -= out.W.col(k) * std::conj(rho);
        out.Rp(m, k) = Complex(0.0, 0.0);
        out.Rp(m, n - 1) -= out.Rp(k, n - 1) * rho;
      }
      const double nrm = out.W.col(m).norm();
      out.Rp(m, m) /= nrm;
      out.Rp(m, n - 1) /= nrm;
      out.W.col(m) /= nrm;
    }
  }
  if (ledger && n >= 2) {
    const FlopCost c = flop_cost(CostKind::kPuncture, static_cast<int>(n));
    ledger->real_mults += c.real_mults;
    ledger->real_adds += c.real_adds;
  }
  return out;
}

Wrd wrd(const ComplexMatrix& H, FlopLedger* ledger) {
  return puncture(qrd_mgs(H, ledger), ledger);
}

std::vector<OrderedQrd> prqrd(const ComplexMatrix& H,
                              const std::vector<std::vector<int>>& orders,
                              FlopLedger* ledger) {
  const auto m = H.rows();
  const auto n = H.cols();
  const double rank_floor = kRankTolerance * H.norm();
  std::vector<OrderedQrd> out;
  out.reserve(orders.size());
  for (const auto& order : orders) {
    if (order.size() != static_cast<size_t>(n)) {
      throw std::invalid_argument("order length mismatch");
    }
    OrderedQrd stage;
    stage.order = order;
    int prefix = 0;
    if (!out.empty()) {
      const auto& prev = out.back().order;
      while (prefix < static_cast<int>(n) && prev[prefix] == order[prefix]) {
        ++prefix;
      }
    }
    stage.reused_prefix = prefix;
    stage.qr.Q = ComplexMatrix::Zero(m, n);
    stage.qr.R = ComplexMatrix::Zero(n, n);
    ComplexMatrix V(m, n);
    for (int j = 0; j < n; ++j) V.col(j) = H.col(order[j]);
    if (prefix > 0) {
      const Qrd& prev_qr = out.back().qr;
      stage.qr.Q.leftCols(prefix) = prev_qr.Q.leftCols(prefix);
      stage.qr.R.topLeftCorner(prefix, prefix) =
          prev_qr.R.topLeftCorner(prefix, prefix);
      // Re-project the fresh suffix columns against the reused basis.
      for (int j = 0; j < prefix; ++j) {
        for (int l = prefix; l < n; ++l) {
          const Complex r = stage.qr.Q.col(j).dot(V.col(l));
          stage.qr.R(j, l) = r;
          V.col(l) -= r * stage.qr.Q.col(j);
          if (ledger) ledger->mgs_projection(static_cast<int>(m));
        }
      }
    }
    mgs_from(V, stage.qr.Q, stage.qr.R, prefix, rank_floor, ledger);
    out.push_back(std::move(stage));
  }
  return out;
}

std::vector<std::vector<int>> permutation_schedule(ScheduleKind kind, int n) {
  if (n < 2) throw std::invalid_argument("schedule needs at least two layers");
  std::vector<std::vector<int>> orders;
  std::vector<int> identity(static_cast<size_t>(n));
  std::iota(identity.begin(), identity.end(), 0);
  switch (kind) {
    case ScheduleKind::kSinglePermutation:
      for (int t = 0; t < n; ++t) {
        auto order = identity;
        std::swap(order[static_cast<size_t>(t)], order[static_cast<size_t>(n - 1)]);
        orders.push_back(std::move(order));
      }
      break;
    case ScheduleKind::kPairwise: {
      if (n % 2 != 0) throw std::invalid_argument("pairwise schedule needs even layers");
      for (int p = 0; p < n / 2; ++p) {
        std::vector<int> prefix;
        for (int c = 0; c < n; ++c) {
          if (c != 2 * p && c != 2 * p + 1) prefix.push_back(c);
        }
        auto first = prefix;
        first.push_back(2 * p);
        first.push_back(2 * p + 1);
        auto second = prefix;
        second.push_back(2 * p + 1);
        second.push_back(2 * p);
        orders.push_back(std::move(first));
        orders.push_back(std::move(second));
      }
      break;
    }
    case ScheduleKind::kCyclic:
      for (int t = 0; t < n; ++t) {
        std::vector<int> order(static_cast<size_t>(n));
        for (int c = 0; c < n; ++c) order[static_cast<size_t>(c)] = (c + n - t) % n;
        orders.push_back(std::move(order));
      }
      break;
  }
  return orders;
}

std::vector<int> mrqrd_order(const ComplexMatrix& H, const ComplexVector& y,
                             const Constellation& cons) {
  const auto n = H.cols();
  if (n > 6) throw std::invalid_argument("cumulative-residual ordering is limited to 6 layers");
  std::vector<int> perm(static_cast<size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  double best_cres = std::numeric_limits<double>::infinity();
  ComplexMatrix Hp(H.rows(), n);
  do {
    for (int j = 0; j < n; ++j) Hp.col(j) = H.col(perm[static_cast<size_t>(j)]);
    const Qrd qr = qrd_mgs(Hp);
    const ComplexVector yt = qr.Q.adjoint() * y;
    ComplexVector xbab = ComplexVector::Zero(n);
    double cres = 0.0;
    for (auto k = n - 1; k >= 0; --k) {
      Complex acc = yt(k);
      for (auto j = k + 1; j < n; ++j) acc -= qr.R(k, j) * xbab(j);
      xbab(k) = cons.point(cons.slice(acc / qr.R(k, k).real()));
      cres += (qr.R.rightCols(n - k) * xbab.tail(n - k) - yt).squaredNorm();
      if (cres >= best_cres) break;
    }
    if (cres < best_cres) {
      best_cres = cres;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace mimo
