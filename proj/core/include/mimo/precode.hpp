#pragma once

#include <optional>
#include <vector>

#include "mimo/constellation.hpp"
#include "mimo/flops.hpp"
#include "mimo/matrix.hpp"

namespace mimo {

struct RankDeficient : NumericalError {
  explicit RankDeficient(const std::string& what) : NumericalError(what) {}
};

// Downlink problem: a base station with b antennas (columns of h) delivers
// one QAM symbol to each of u single-antenna users under a total transmit
// power budget, with 1-bit in-phase/quadrature DACs.
struct PrecodeProblem {
  ComplexMatrix h;      // u x b downlink channel
  ComplexVector s;      // u symbols to deliver
  double p = 1.0;       // transmit power budget, ||x||^2 = p
  double sigma2 = 0.0;  // per-user noise variance
};

// x lies on the scaled quaternary grid sqrt(p/2b)(+-1 +-j) and beta is the
// receive-side scale the objective ||s - beta*h*x||^2 + beta^2*u*sigma2 was
// evaluated with. The trace records the objective of the initial solution
// followed by every accepted refinement; iterations counts the refinement
// passes beyond the initial solve.
struct PrecodeResult {
  ComplexVector x;
  double beta = 0.0;
  std::vector<double> objective_trace;
  int iterations = 0;
  FlopLedger ledger;
};

// Refinement schedule shared by the nonlinear precoders: the scale starts at
// the zero-forcing value (or beta0 when given) and is re-fitted to each new
// transmit vector. Refinement stops on a fixed point, on a rejected update
// (non-positive fit or objective increase), or after max_iter passes total.
struct BetaSchedule {
  int max_iter = 10;
  std::optional<double> beta0;
};

// Element-wise 1-bit quantizer onto the feasible transmit grid; components
// on an axis quantize positive.
ComplexVector quantize_transmit(const ComplexVector& z, double p);

// Linear zero-forcing precoder followed by quantization; forms the explicit
// b x u precoding matrix.
PrecodeResult precode_zf_quantized(const PrecodeProblem& prob);

// Back-substitution with slicing over the regularized augmented channel.
PrecodeResult precode_nc(const PrecodeProblem& prob, const BetaSchedule& schedule = {});

// Enumerates the four root values of the augmented decomposition and keeps
// the best back-substituted candidate.
PrecodeResult precode_chase(const PrecodeProblem& prob, const BetaSchedule& schedule = {});

// Repeats the chase routine with every antenna rooted once via cyclic column
// rotations, keeping the minimum-distance candidate.
PrecodeResult precode_lorp(const PrecodeProblem& prob, const BetaSchedule& schedule = {});

// Greedy sign-flip search started from the quantized zero-forcing vector:
// each pass scores every single-position substitution (or only `layer` when
// single_layer is set) against the entry scale, applies the best flip, then
// re-fits the scale.
PrecodeResult precode_gibbs(const PrecodeProblem& prob, int max_iter = 10,
                            bool single_layer = false, int layer = 0);

// Exact minimization over all 4^b feasible vectors per pass; b is capped at
// 10 antennas.
PrecodeResult precode_exhaustive(const PrecodeProblem& prob, const BetaSchedule& schedule = {});

// Receive-side decision: scales y_u by beta and slices over the user
// constellation, returning the symbol label.
int ue_receive(Complex y_u, double beta, const Constellation& user_const);

}  // namespace mimo
