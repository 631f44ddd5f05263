#include "mimo/precode.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

#include "mimo/decompose.hpp"
#include "mimo/detect.hpp"

namespace mimo {

namespace {

constexpr int kMaxExhaustiveAntennas = 10;

struct Dims {
  int u;
  int b;
};

Dims checked_problem(const PrecodeProblem& prob) {
  const int u = static_cast<int>(prob.h.rows());
  const int b = static_cast<int>(prob.h.cols());
  if (u < 1) throw ConfigError("precoder needs at least one user");
  if (b < u) throw ConfigError("precoder needs at least as many antennas as users");
  if (static_cast<int>(prob.s.size()) != u) {
    throw ConfigError("symbol count must match the user count");
  }
  if (!(prob.p > 0.0)) throw ConfigError("transmit power must be positive");
  if (!(prob.sigma2 >= 0.0)) throw ConfigError("noise variance must be non-negative");
  return {u, b};
}

Complex quantize_scalar(Complex z, double amp) {
  return Complex(z.real() < 0.0 ? -amp : amp, z.imag() < 0.0 ? -amp : amp);
}

std::array<Complex, 4> grid_points(double amp) {
  return {Complex(amp, amp), Complex(amp, -amp), Complex(-amp, amp), Complex(-amp, -amp)};
}

ComplexVector channel_image(const PrecodeProblem& prob, const ComplexVector& x,
                            FlopLedger& led) {
  led.complex_mult(static_cast<std::uint64_t>(prob.h.rows()) * prob.h.cols());
  led.complex_add(static_cast<std::uint64_t>(prob.h.rows()) * (prob.h.cols() - 1));
  return prob.h * x;
}

// ||s - beta v||^2 + beta^2 u sigma2 for v = h x.
double objective_with(const ComplexVector& s, const ComplexVector& v, double beta,
                      double u_sigma2, FlopLedger& led) {
  const auto u = static_cast<std::uint64_t>(v.size());
  led.real_mult(2 * u + 2);
  led.complex_add(u);
  led.complex_mag2(u);
  led.real_add(u);
  return (s - beta * v).squaredNorm() + beta * beta * u_sigma2;
}

// Minimizer of the objective over the scale for a fixed transmit vector.
double beta_fit(const ComplexVector& s, const ComplexVector& v, double u_sigma2,
                FlopLedger& led) {
  const auto u = static_cast<std::uint64_t>(v.size());
  led.complex_mult(u);
  led.complex_mag2(u);
  led.real_add(2 * u);
  led.real_div();
  return s.dot(v).real() / (v.squaredNorm() + u_sigma2);
}

struct ZfCore {
  ComplexMatrix ginv;  // (h h^H)^{-1}
  double beta_zf = 0.0;
};

ZfCore zf_core(const PrecodeProblem& prob, const Dims& d, FlopLedger& led) {
  const auto u = static_cast<std::uint64_t>(d.u);
  const auto b = static_cast<std::uint64_t>(d.b);
  ComplexMatrix g = prob.h * prob.h.adjoint();
  led.complex_mult(u * u * b);
  led.complex_add(u * u * (b - 1));
  Eigen::FullPivLU<ComplexMatrix> lu(g);
  if (!lu.isInvertible()) throw SingularMatrix("downlink gram matrix is singular");
  ZfCore core;
  core.ginv = lu.inverse();
  led.complex_mult(u * u * u);
  led.real_add(u - 1);
  led.real_div();
  led.real_sqrt();
  core.beta_zf = std::sqrt(core.ginv.trace().real() / prob.p);
  return core;
}

// Quantized zero-forcing direction via a right-hand solve; the positive
// 1/beta factor of the unquantized precoder cannot change any sign.
ComplexVector zf_start(const PrecodeProblem& prob, const Dims& d, const ZfCore& core,
                       double amp, FlopLedger& led) {
  const auto u = static_cast<std::uint64_t>(d.u);
  const auto b = static_cast<std::uint64_t>(d.b);
  led.complex_mult(u * u + b * u);
  led.complex_add(u * (u - 1) + b * (u - 1));
  const ComplexVector z = prob.h.adjoint() * (core.ginv * prob.s);
  ComplexVector x(d.b);
  for (int i = 0; i < d.b; ++i) x(i) = quantize_scalar(z(i), amp);
  return x;
}

double initial_beta(const PrecodeProblem& prob, const Dims& d, const BetaSchedule& schedule,
                    FlopLedger& led) {
  if (schedule.beta0) {
    if (!(*schedule.beta0 > 0.0)) throw ConfigError("initial scale must be positive");
    return *schedule.beta0;
  }
  return zf_core(prob, d, led).beta_zf;
}

struct AugmentedQrd {
  Qrd qr;
  ComplexVector stilde;           // b-vector, image of [s; 0] under Q^H
  std::vector<int> order;         // original antenna at each column position
};

// QR of [h; sqrt(u sigma2 / p) I] with columns taken in the given order.
AugmentedQrd augmented_qrd(const PrecodeProblem& prob, const Dims& d,
                           const std::vector<int>& order, FlopLedger& led) {
  const double loading = std::sqrt(d.u * prob.sigma2 / prob.p);
  led.real_sqrt();
  led.real_div();
  ComplexMatrix hbar = ComplexMatrix::Zero(d.u + d.b, d.b);
  for (int i = 0; i < d.b; ++i) {
    hbar.col(i).head(d.u) = prob.h.col(order[static_cast<std::size_t>(i)]);
    hbar(d.u + order[static_cast<std::size_t>(i)], i) = loading;
  }
  AugmentedQrd aq;
  aq.order = order;
  try {
    aq.qr = qrd_mgs(hbar, &led);
  } catch (const NumericalError& e) {
    throw RankDeficient(e.what());
  }
  aq.stilde = aq.qr.Q.topRows(d.u).adjoint() * prob.s;
  led.complex_mult(static_cast<std::uint64_t>(d.u) * d.b);
  led.complex_add(static_cast<std::uint64_t>(d.u - 1) * d.b);
  return aq;
}

std::vector<int> identity_order(int b) {
  std::vector<int> order(static_cast<std::size_t>(b));
  for (int i = 0; i < b; ++i) order[static_cast<std::size_t>(i)] = i;
  return order;
}

// Back-substitution with 1-bit slicing against the scaled triangle; the last
// position can be pinned to a root value.
ComplexVector sic_sliced(const AugmentedQrd& aq, double beta, double amp,
                         const Complex* root_value, FlopLedger& led) {
  const int b = static_cast<int>(aq.qr.R.cols());
  ComplexVector x(b);
  for (int i = b - 1; i >= 0; --i) {
    if (i == b - 1 && root_value != nullptr) {
      x(i) = *root_value;
      continue;
    }
    Complex acc = aq.stilde(i);
    for (int l = i + 1; l < b; ++l) acc -= beta * aq.qr.R(i, l) * x(l);
    led.complex_mult(static_cast<std::uint64_t>(b - 1 - i));
    led.real_mult(2 * static_cast<std::uint64_t>(b - 1 - i));
    led.complex_add(static_cast<std::uint64_t>(b - 1 - i));
    led.complex_real_div();
    led.real_mult();
    x(i) = quantize_scalar(acc / (beta * aq.qr.R(i, i).real()), amp);
  }
  return x;
}

// ||stilde - beta R x||^2 within one decomposition.
double triangle_distance(const AugmentedQrd& aq, double beta, const ComplexVector& x,
                         FlopLedger& led) {
  const int b = static_cast<int>(aq.qr.R.cols());
  double dist = 0.0;
  for (int i = 0; i < b; ++i) {
    Complex acc = aq.stilde(i);
    for (int l = i; l < b; ++l) acc -= beta * aq.qr.R(i, l) * x(l);
    dist += std::norm(acc);
  }
  const auto terms = static_cast<std::uint64_t>(b) * (b + 1) / 2;
  led.complex_mult(terms);
  led.real_mult(2 * terms);
  led.complex_add(terms);
  led.complex_mag2(static_cast<std::uint64_t>(b));
  led.real_add(static_cast<std::uint64_t>(b));
  return dist;
}

// Chase pass over one decomposition: every root value back-substituted, the
// nearest candidate kept. Outputs in decomposition (permuted) positions.
ComplexVector chase_candidate(const AugmentedQrd& aq, double beta, double amp,
                              double* best_dist, FlopLedger& led) {
  ComplexVector best;
  double dmin = 0.0;
  const auto roots = grid_points(amp);
  for (std::size_t k = 0; k < roots.size(); ++k) {
    ComplexVector cand = sic_sliced(aq, beta, amp, &roots[k], led);
    const double dist = triangle_distance(aq, beta, cand, led);
    if (k == 0 || dist < dmin) {
      dmin = dist;
      best = std::move(cand);
    }
  }
  if (best_dist != nullptr) *best_dist = dmin;
  return best;
}

ComplexVector unpermute(const ComplexVector& xp, const std::vector<int>& order) {
  ComplexVector x(xp.size());
  for (int i = 0; i < static_cast<int>(xp.size()); ++i) {
    x(order[static_cast<std::size_t>(i)]) = xp(i);
  }
  return x;
}

template <typename Solver>
PrecodeResult run_schedule(const PrecodeProblem& prob, const Dims& d,
                           const BetaSchedule& schedule, FlopLedger led, double beta0,
                           Solver&& solve) {
  if (schedule.max_iter < 1) throw ConfigError("schedule needs at least one pass");
  const double u_sigma2 = d.u * prob.sigma2;
  PrecodeResult out;
  double beta = beta0;
  ComplexVector x = solve(beta, led);
  ComplexVector v = channel_image(prob, x, led);
  double obj = objective_with(prob.s, v, beta, u_sigma2, led);
  out.objective_trace.push_back(obj);
  for (int tau = 2; tau <= schedule.max_iter; ++tau) {
    const double beta_new = beta_fit(prob.s, v, u_sigma2, led);
    if (!(beta_new > 0.0)) break;
    ComplexVector xn = solve(beta_new, led);
    ComplexVector vn = channel_image(prob, xn, led);
    const double obj_new = objective_with(prob.s, vn, beta_new, u_sigma2, led);
    if (obj_new > obj) break;
    const bool fixed = std::equal(xn.data(), xn.data() + xn.size(), x.data());
    x = std::move(xn);
    v = std::move(vn);
    beta = beta_new;
    obj = obj_new;
    out.objective_trace.push_back(obj);
    ++out.iterations;
    if (fixed) break;
  }
  out.x = std::move(x);
  out.beta = beta;
  out.ledger = led;
  return out;
}

}  // namespace

ComplexVector quantize_transmit(const ComplexVector& z, double p) {
  if (z.size() < 1) throw ConfigError("nothing to quantize");
  if (!(p > 0.0)) throw ConfigError("transmit power must be positive");
  const double amp = std::sqrt(p / (2.0 * static_cast<double>(z.size())));
  ComplexVector x(z.size());
  for (int i = 0; i < static_cast<int>(z.size()); ++i) x(i) = quantize_scalar(z(i), amp);
  return x;
}

PrecodeResult precode_zf_quantized(const PrecodeProblem& prob) {
  const Dims d = checked_problem(prob);
  const auto u = static_cast<std::uint64_t>(d.u);
  const auto b = static_cast<std::uint64_t>(d.b);
  FlopLedger led;
  const ZfCore core = zf_core(prob, d, led);
  ComplexMatrix pmat = prob.h.adjoint() * core.ginv;
  led.complex_mult(b * u * u);
  led.complex_add(b * u * (u - 1));
  pmat /= core.beta_zf;
  led.complex_real_div(b * u);
  const ComplexVector z = pmat * prob.s;
  led.complex_mult(b * u);
  led.complex_add(b * (u - 1));
  const double amp = std::sqrt(prob.p / (2.0 * d.b));
  PrecodeResult out;
  out.x = ComplexVector(d.b);
  for (int i = 0; i < d.b; ++i) out.x(i) = quantize_scalar(z(i), amp);
  out.beta = core.beta_zf;
  const ComplexVector v = channel_image(prob, out.x, led);
  out.objective_trace.push_back(objective_with(prob.s, v, out.beta, d.u * prob.sigma2, led));
  out.ledger = led;
  return out;
}

PrecodeResult precode_nc(const PrecodeProblem& prob, const BetaSchedule& schedule) {
  const Dims d = checked_problem(prob);
  FlopLedger led;
  const double beta0 = initial_beta(prob, d, schedule, led);
  const double amp = std::sqrt(prob.p / (2.0 * d.b));
  const AugmentedQrd aq = augmented_qrd(prob, d, identity_order(d.b), led);
  return run_schedule(prob, d, schedule, led, beta0,
                      [&](double beta, FlopLedger& l) {
                        return sic_sliced(aq, beta, amp, nullptr, l);
                      });
}

PrecodeResult precode_chase(const PrecodeProblem& prob, const BetaSchedule& schedule) {
  const Dims d = checked_problem(prob);
  FlopLedger led;
  const double beta0 = initial_beta(prob, d, schedule, led);
  const double amp = std::sqrt(prob.p / (2.0 * d.b));
  const AugmentedQrd aq = augmented_qrd(prob, d, identity_order(d.b), led);
  return run_schedule(prob, d, schedule, led, beta0,
                      [&](double beta, FlopLedger& l) {
                        return chase_candidate(aq, beta, amp, nullptr, l);
                      });
}

PrecodeResult precode_lorp(const PrecodeProblem& prob, const BetaSchedule& schedule) {
  const Dims d = checked_problem(prob);
  FlopLedger led;
  const double beta0 = initial_beta(prob, d, schedule, led);
  const double amp = std::sqrt(prob.p / (2.0 * d.b));
  const auto orders = permutation_schedule(ScheduleKind::kCyclic, d.b);
  std::vector<AugmentedQrd> decomps;
  decomps.reserve(orders.size());
  for (const auto& order : orders) decomps.push_back(augmented_qrd(prob, d, order, led));
  return run_schedule(prob, d, schedule, led, beta0, [&](double beta, FlopLedger& l) {
    ComplexVector best;
    double dmin = 0.0;
    for (std::size_t t = 0; t < decomps.size(); ++t) {
      double dist = 0.0;
      ComplexVector cand = chase_candidate(decomps[t], beta, amp, &dist, l);
      if (t == 0 || dist < dmin) {
        dmin = dist;
        best = unpermute(cand, decomps[t].order);
      }
    }
    return best;
  });
}

PrecodeResult precode_gibbs(const PrecodeProblem& prob, int max_iter, bool single_layer,
                            int layer) {
  const Dims d = checked_problem(prob);
  if (max_iter < 1) throw ConfigError("schedule needs at least one pass");
  if (single_layer && (layer < 0 || layer >= d.b)) {
    throw ConfigError("flip layer out of range");
  }
  const double u_sigma2 = d.u * prob.sigma2;
  const auto u = static_cast<std::uint64_t>(d.u);
  const double amp = std::sqrt(prob.p / (2.0 * d.b));
  FlopLedger led;
  const ZfCore core = zf_core(prob, d, led);

  PrecodeResult out;
  out.x = zf_start(prob, d, core, amp, led);
  out.beta = core.beta_zf;
  ComplexVector v = channel_image(prob, out.x, led);
  double obj = objective_with(prob.s, v, out.beta, u_sigma2, led);
  out.objective_trace.push_back(obj);

  const auto grid = grid_points(amp);
  const int first = single_layer ? layer : 0;
  const int last = single_layer ? layer + 1 : d.b;
  for (int tau = 2; tau <= max_iter; ++tau) {
    double best = objective_with(prob.s, v, out.beta, u_sigma2, led);
    int best_pos = -1;
    Complex best_val;
    for (int pos = first; pos < last; ++pos) {
      for (const Complex& g : grid) {
        if (g == out.x(pos)) continue;
        // One changed position shifts the image by a single scaled column.
        led.complex_mult(u);
        led.complex_add(u);
        const ComplexVector vt = v + prob.h.col(pos) * (g - out.x(pos));
        const double cand = objective_with(prob.s, vt, out.beta, u_sigma2, led);
        if (cand < best) {
          best = cand;
          best_pos = pos;
          best_val = g;
        }
      }
    }
    const bool changed = best_pos >= 0;
    if (changed) {
      led.complex_mult(u);
      led.complex_add(u);
      v += prob.h.col(best_pos) * (best_val - out.x(best_pos));
      out.x(best_pos) = best_val;
    }
    const double beta_new = beta_fit(prob.s, v, u_sigma2, led);
    double obj_new = best;
    if (beta_new > 0.0) {
      const double refit = objective_with(prob.s, v, beta_new, u_sigma2, led);
      if (refit <= out.objective_trace.back()) {
        out.beta = beta_new;
        obj_new = refit;
      }
    }
    obj = obj_new;
    out.objective_trace.push_back(obj);
    ++out.iterations;
    if (!changed || !(beta_new > 0.0)) break;
  }
  out.ledger = led;
  return out;
}

PrecodeResult precode_exhaustive(const PrecodeProblem& prob, const BetaSchedule& schedule) {
  const Dims d = checked_problem(prob);
  if (d.b > kMaxExhaustiveAntennas) {
    throw SearchSpaceTooLarge("exhaustive precoding limited to 10 antennas");
  }
  FlopLedger led;
  const double beta0 = initial_beta(prob, d, schedule, led);
  const double amp = std::sqrt(prob.p / (2.0 * d.b));
  const auto grid = grid_points(amp);
  const auto u = static_cast<std::uint64_t>(d.u);

  // Per-antenna column contributions, shared across passes.
  std::vector<std::array<ComplexVector, 4>> colpts(static_cast<std::size_t>(d.b));
  for (int i = 0; i < d.b; ++i) {
    for (std::size_t k = 0; k < grid.size(); ++k) {
      colpts[static_cast<std::size_t>(i)][k] = prob.h.col(i) * grid[k];
    }
  }
  led.complex_mult(4 * u * static_cast<std::uint64_t>(d.b));

  return run_schedule(prob, d, schedule, led, beta0, [&](double beta, FlopLedger& l) {
    // The scale factors out of the argmin: compare against s/beta instead of
    // rescaling every candidate image.
    const ComplexVector target = prob.s / beta;
    l.complex_real_div(u);
    std::vector<ComplexVector> partial(static_cast<std::size_t>(d.b) + 1);
    partial[0] = ComplexVector::Zero(d.u);
    ComplexVector best(d.b), current(d.b);
    double dmin = 0.0;
    bool have = false;
    std::uint64_t leaves = 0;
    auto walk = [&](auto&& self, int i) -> void {
      if (i == d.b) {
        ++leaves;
        const double dist = (target - partial[static_cast<std::size_t>(i)]).squaredNorm();
        if (!have || dist < dmin) {
          dmin = dist;
          best = current;
          have = true;
        }
        return;
      }
      for (std::size_t k = 0; k < grid.size(); ++k) {
        current(i) = grid[k];
        partial[static_cast<std::size_t>(i) + 1] =
            partial[static_cast<std::size_t>(i)] + colpts[static_cast<std::size_t>(i)][k];
        self(self, i + 1);
      }
    };
    walk(walk, 0);
    l.complex_add(4 * u * ((static_cast<std::uint64_t>(1) << (2 * d.b)) - 1) / 3);
    l.complex_add(u * leaves);
    l.complex_mag2(u * leaves);
    l.real_add(u * leaves);
    return best;
  });
}

int ue_receive(Complex y_u, double beta, const Constellation& user_const) {
  if (!(beta > 0.0)) throw ConfigError("receive scale must be positive");
  return user_const.slice(beta * y_u);
}

}  // namespace mimo
