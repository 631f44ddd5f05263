#include "mimo/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mimo/channel.hpp"
#include "mimo/rng.hpp"

namespace mimo {

namespace {

constexpr double kLn2 = std::numbers::ln2;

// 2 sum ln L_nn of the Cholesky factor. Requires Hermitian positive definite.
double logdet_hermitian(const ComplexMatrix& a, const char* what) {
  Eigen::LLT<ComplexMatrix> llt(a);
  if (llt.info() != Eigen::Success) {
    throw NumericalDomainError(std::string(what) + ": matrix is not positive definite");
  }
  double sum = 0.0;
  const auto& l = llt.matrixLLT();
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    sum += std::log(std::real(l(i, i)));
  }
  return 2.0 * sum;
}

// ln det(I + A A^H / sigma2) through the Gram of the smaller side.
double logdet_rate(const ComplexMatrix& a, double sigma2) {
  const Eigen::Index k = std::min(a.rows(), a.cols());
  ComplexMatrix gram;
  if (a.rows() <= a.cols()) {
    gram = a * a.adjoint();
  } else {
    gram = a.adjoint() * a;
  }
  gram /= sigma2;
  gram += ComplexMatrix::Identity(k, k);
  return logdet_hermitian(gram, "log-det rate");
}

double diagonal_bound_bits(const ComplexMatrix& r, double sigma2) {
  double bits = 0.0;
  for (Eigen::Index i = 0; i < r.cols(); ++i) {
    const double d = std::real(r(i, i));
    bits += std::log2(1.0 + d * d / sigma2);
  }
  return bits;
}

void check_sigma2(double sigma2) {
  if (!(sigma2 > 0.0)) {
    throw ConfigError("noise variance must be positive");
  }
}

// Mismatched single-root detection model. The triangular model factor has
// real positive diagonal u_diag and a dense last row u_last; the remaining
// entries are zero. wbar is the linear front end applied to y.
struct AirModel {
  RealVector u_diag;
  ComplexVector u_last;  // entries 0..N-2; the (N, N) element is u_diag(N-1)
  ComplexMatrix wbar;    // N x M
};

AirModel air_model(const ComplexMatrix& h, double sigma2) {
  check_sigma2(sigma2);
  const Eigen::Index m = h.rows();
  const Eigen::Index n = h.cols();
  if (n < 1 || m < n) {
    throw ConfigError("mismatched-model rate needs M >= N >= 1");
  }
  ComplexMatrix cov = h * h.adjoint();
  cov += sigma2 * ComplexMatrix::Identity(m, m);
  Eigen::LLT<ComplexMatrix> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw NumericalDomainError("mismatched-model rate: received covariance not positive definite");
  }
  AirModel model;
  model.wbar = llt.solve(h).adjoint();                    // H^H (H H^H + s2 I)^-1
  ComplexMatrix b = -model.wbar * h;                      // B = I - Wbar H
  b += ComplexMatrix::Identity(n, n);
  const double bnn = std::real(b(n - 1, n - 1));
  if (!(bnn > 0.0)) {
    throw NumericalDomainError("mismatched-model rate: root radicand is not positive");
  }
  model.u_diag.resize(n);
  model.u_last.resize(n - 1);
  model.u_diag(n - 1) = 1.0 / std::sqrt(bnn);
  for (Eigen::Index c = 0; c + 1 < n; ++c) {
    const double t = std::real(b(c, c)) - std::norm(b(c, n - 1)) / bnn;
    if (!(t > 0.0)) {
      throw NumericalDomainError("mismatched-model rate: leaf radicand is not positive");
    }
    model.u_diag(c) = 1.0 / std::sqrt(t);
    model.u_last(c) = -(b(n - 1, c) / bnn) * model.u_diag(c);
  }
  return model;
}

double log_sum_exp(const std::vector<double>& v) {
  const double mx = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

double diversity_sum(int d, double mu) {
  const double lo = 0.5 * (1.0 - mu);
  const double hi = 0.5 * (1.0 + mu);
  double sum = 0.0;
  double binom = 1.0;  // C(d-1+k, k)
  double pk = 1.0;     // hi^k
  for (int k = 0; k <= d - 1; ++k) {
    if (k > 0) {
      binom *= static_cast<double>(d - 1 + k) / static_cast<double>(k);
      pk *= hi;
    }
    sum += binom * pk;
  }
  return std::pow(lo, d) * sum;
}

// BER on a d-branch diversity channel, BPSK, mean branch SNR gamma.
double g_bpsk(int d, double gamma) {
  return diversity_sum(d, std::sqrt(gamma / (1.0 + gamma)));
}

// BER of square 2^q-QAM on a d-branch diversity channel.
double g_qam(int d, double gamma, int q) {
  const double size = std::pow(2.0, q);
  const double axis = std::sqrt(size);
  const double rho_bar = 3.0 * q / (2.0 * (size - 1.0));
  const double a = rho_bar * gamma;
  const double mu = std::sqrt(a / (1.0 + a));
  const double i1 = diversity_sum(d, mu);
  double i2;
  if (d == 1) {
    i2 = (4.0 / std::numbers::pi) * mu * std::atan(mu);
  } else {
    const double inv1 = 1.0 / (1.0 + a);
    const double inv2 = 1.0 / (1.0 + 2.0 * a);
    double first = 0.0;
    double second = 0.0;
    double ck = 1.0;  // (2k)! / (2^{2k} (k!)^2)
    for (int k = 0; k <= d - 1; ++k) {
      if (k > 0) ck *= (2.0 * k - 1.0) / (2.0 * k);
      first += ck * std::pow(inv1, k);
      if (k >= 1) {
        double inner = 0.0;
        double tv = 2.0;  // 2^{2v} v! (v-1)! / (2v)!
        for (int v = 1; v <= k; ++v) {
          if (v > 1) tv *= 2.0 * (v - 1.0) / (2.0 * v - 1.0);
          inner += tv * std::pow(inv1, k - v + 1) * (a * inv2) * std::pow(inv2, v - 1);
        }
        second += ck * inner;
      }
    }
    i2 = (4.0 / std::numbers::pi) * first * mu * std::atan(mu) +
         (2.0 / std::numbers::pi) * second;
  }
  return ((axis - 1.0) / size) * ((axis - 1.0) + 4.0 * i1 - (axis - 1.0) * i2);
}

void check_q(int q) {
  if (q != 1 && q != 2 && q != 4 && q != 6 && q != 8) {
    throw ConfigError("bits per symbol must be one of 1, 2, 4, 6, 8");
  }
}

// CDF of gamma(shape, 1) for integer shape.
double gamma_cdf(int shape, double x) {
  if (x <= 0.0) return 0.0;
  double term = 1.0;
  double sum = 1.0;
  for (int j = 1; j < shape; ++j) {
    term *= x / j;
    sum += term;
  }
  return 1.0 - std::exp(-x) * sum;
}

double ks_statistic(std::vector<double>& samples, int shape) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = gamma_cdf(shape, samples[i]);
    d = std::max(d, std::max((i + 1.0) / n - f, f - i / n));
  }
  return d;
}

}  // namespace

double capacity(const ComplexMatrix& h, double sigma2) {
  check_sigma2(sigma2);
  return logdet_rate(h, sigma2) / kLn2;
}

double rate_punctured(const Wrd& pdec, double sigma2, bool colored) {
  check_sigma2(sigma2);
  if (!colored) {
    return logdet_rate(pdec.Rp, sigma2) / kLn2;
  }
  ComplexMatrix z = sigma2 * (pdec.W.adjoint() * pdec.W);
  ComplexMatrix num = z + pdec.Rp * pdec.Rp.adjoint();
  return (logdet_hermitian(num, "colored rate") - logdet_hermitian(z, "colored rate")) / kLn2;
}

std::pair<double, double> capacity_lower_bounds(const Qrd& dec, double sigma2) {
  check_sigma2(sigma2);
  return {diagonal_bound_bits(dec.R, sigma2), logdet_rate(dec.R, sigma2) / kLn2};
}

std::pair<double, double> capacity_lower_bounds(const Wrd& pdec, double sigma2) {
  check_sigma2(sigma2);
  return {diagonal_bound_bits(pdec.Rp, sigma2), logdet_rate(pdec.Rp, sigma2) / kLn2};
}

RateReport rate_report(const ComplexMatrix& h, double sigma2) {
  check_sigma2(sigma2);
  RateReport report;
  report.c_h = capacity(h, sigma2);
  const Qrd qr = qrd_mgs(h);
  const Wrd pdec = puncture(qr);
  report.c_punct_opt = rate_punctured(pdec, sigma2, true);
  report.c_punct = rate_punctured(pdec, sigma2, false);
  report.lower_h = diagonal_bound_bits(qr.R, sigma2);
  report.lower_punct = diagonal_bound_bits(pdec.Rp, sigma2);
  return report;
}

double air_theory(const ComplexMatrix& h, double sigma2) {
  const AirModel model = air_model(h, sigma2);
  double rate = 0.0;
  for (Eigen::Index n = 0; n < model.u_diag.size(); ++n) {
    rate += 2.0 * std::log(model.u_diag(n));
  }
  return rate;
}

double air_empirical(const ComplexMatrix& h, double sigma2,
                     const Constellation& cons, int trials, std::uint64_t seed) {
  if (trials < 1) {
    throw ConfigError("empirical rate needs at least one trial");
  }
  if (cons.bits_per_symbol() < 1) {
    throw ConfigError("empirical rate needs a bit-carrying constellation");
  }
  const AirModel model = air_model(h, sigma2);
  const Eigen::Index n = h.cols();
  const int size = cons.size();
  const double ln_size = std::log(static_cast<double>(size));
  const double noise_scale = std::sqrt(sigma2);

  // Row c of the adjoint model factor pairs x_c with the root symbol:
  // a_c(x_c, s) = conj(u_cc) x_c + conj(u_last_c) s; a_root(s) = u_NN s.
  const auto leaf_term = [&](Eigen::Index c, Complex xc, Complex s, Complex vc) {
    const Complex a = model.u_diag(c) * xc + std::conj(model.u_last(c)) * s;
    return 2.0 * std::real(std::conj(a) * vc) - std::norm(a) + std::norm(xc);
  };

  double ln_joint = 0.0;     // sum of ln Pr(y | x)
  double ln_marginal = 0.0;  // sum of ln Pr(y)
  std::vector<double> leaf_buf(static_cast<std::size_t>(size));
  std::vector<double> root_buf(static_cast<std::size_t>(size));
  ComplexVector x(n);
  ComplexVector noise(h.rows());
  for (int t = 0; t < trials; ++t) {
    Rng sym = Rng::stream(seed, static_cast<std::uint64_t>(t), rng_purpose::kSymbols);
    Rng nse = Rng::stream(seed, static_cast<std::uint64_t>(t), rng_purpose::kNoise);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int label = std::min(size - 1, static_cast<int>(sym.next_double() * size));
      x(i) = cons.point(label);
    }
    for (Eigen::Index i = 0; i < h.rows(); ++i) {
      noise(i) = noise_scale * nse.next_cgaussian();
    }
    const ComplexVector y = h * x + noise;
    const ComplexVector xhat = model.wbar * y;

    // v = U^H xhat with the same sparsity as the rows of U^H.
    ComplexVector v(n);
    for (Eigen::Index c = 0; c + 1 < n; ++c) {
      v(c) = model.u_diag(c) * xhat(c) + std::conj(model.u_last(c)) * xhat(n - 1);
    }
    v(n - 1) = model.u_diag(n - 1) * xhat(n - 1);

    const Complex root_a = model.u_diag(n - 1) * x(n - 1);
    double joint = 2.0 * std::real(std::conj(root_a) * v(n - 1)) - std::norm(root_a) +
                   std::norm(x(n - 1));
    for (Eigen::Index c = 0; c + 1 < n; ++c) {
      joint += leaf_term(c, x(c), x(n - 1), v(c));
    }
    ln_joint += joint;

    for (int sl = 0; sl < size; ++sl) {
      const Complex s = cons.point(sl);
      const Complex ar = model.u_diag(n - 1) * s;
      double total = 2.0 * std::real(std::conj(ar) * v(n - 1)) - std::norm(ar) + std::norm(s);
      for (Eigen::Index c = 0; c + 1 < n; ++c) {
        for (int l = 0; l < size; ++l) {
          leaf_buf[static_cast<std::size_t>(l)] = leaf_term(c, cons.point(l), s, v(c));
        }
        total += log_sum_exp(leaf_buf) - ln_size;
      }
      root_buf[static_cast<std::size_t>(sl)] = total;
    }
    ln_marginal += log_sum_exp(root_buf) - ln_size;
  }
  return (ln_joint - ln_marginal) / trials;
}

double ber_theory_g(int d, double gamma, int q) {
  if (d < 1) throw ConfigError("diversity order must be at least 1");
  if (!(gamma > 0.0)) throw ConfigError("branch SNR must be positive");
  check_q(q);
  return q == 1 ? g_bpsk(d, gamma) : g_qam(d, gamma, q);
}

std::vector<double> ber_theory_nc(int n_layers, double sigma2, int q, bool punctured) {
  if (n_layers < 2) throw ConfigError("decision-feedback BER needs at least two layers");
  check_sigma2(sigma2);
  check_q(q);
  const double rho2 = (2.0 / q) * (2.0 / q);
  std::vector<double> ber(static_cast<std::size_t>(n_layers));
  const double p_root = ber_theory_g(1, 1.0 / sigma2, q);
  ber[static_cast<std::size_t>(n_layers - 1)] = p_root;
  if (punctured) {
    const double clean = ber_theory_g(2, 1.0 / sigma2, q);
    const double hit = ber_theory_g(2, 1.0 / (sigma2 + rho2), q);
    for (int i = 0; i < n_layers - 1; ++i) {
      ber[static_cast<std::size_t>(i)] = clean * (1.0 - p_root) + hit * p_root;
    }
    return ber;
  }
  // The conditional error probability depends on a pattern only through its
  // weight, so the recursion tracks the weight distribution of the layers
  // already detected.
  std::vector<double> weight = {1.0 - p_root, p_root};
  for (int m = n_layers - 1; m >= 1; --m) {
    const int diversity = n_layers - m + 1;
    double pm = 0.0;
    std::vector<double> err(weight.size());
    for (std::size_t w = 0; w < weight.size(); ++w) {
      err[w] = ber_theory_g(diversity, 1.0 / (sigma2 + rho2 * static_cast<double>(w)), q);
      pm += weight[w] * err[w];
    }
    ber[static_cast<std::size_t>(m - 1)] = pm;
    if (m > 1) {
      std::vector<double> next(weight.size() + 1, 0.0);
      for (std::size_t w = 0; w < weight.size(); ++w) {
        next[w] += weight[w] * (1.0 - err[w]);
        next[w + 1] += weight[w] * err[w];
      }
      weight.swap(next);
    }
  }
  return ber;
}

double ber_theory_chase(int n_layers, double sigma2, int q, bool punctured) {
  if (n_layers < 2) throw ConfigError("list BER needs at least two layers");
  check_sigma2(sigma2);
  check_q(q);
  if (punctured) {
    return (n_layers - 1) * ber_theory_g(2, 1.0 / sigma2, q);
  }
  const double rho2 = (2.0 / q) * (2.0 / q);
  std::vector<double> weight = {1.0};  // the root is exhaustively enumerated
  double total = 0.0;
  for (int m = n_layers - 1; m >= 1; --m) {
    const int diversity = n_layers - m + 1;
    double pm = 0.0;
    std::vector<double> err(weight.size());
    for (std::size_t w = 0; w < weight.size(); ++w) {
      err[w] = ber_theory_g(diversity, 1.0 / (sigma2 + rho2 * static_cast<double>(w)), q);
      pm += weight[w] * err[w];
    }
    total += pm;
    if (m > 1) {
      std::vector<double> next(weight.size() + 1, 0.0);
      for (std::size_t w = 0; w < weight.size(); ++w) {
        next[w] += weight[w] * (1.0 - err[w]);
        next[w + 1] += weight[w] * err[w];
      }
      weight.swap(next);
    }
  }
  return total;
}

DiagonalMomentReport validate_diagonal_distributions(int n, int trials, bool punctured,
                                                     std::uint64_t seed) {
  if (n < 2) throw ConfigError("distribution check needs at least two layers");
  if (trials < 2) throw ConfigError("distribution check needs at least two trials");
  std::vector<std::vector<double>> samples(static_cast<std::size_t>(n));
  for (auto& s : samples) s.reserve(static_cast<std::size_t>(trials));
  Complex off_sum = 0.0;
  double off_sq = 0.0;
  for (int t = 0; t < trials; ++t) {
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(t), rng_purpose::kChannel);
    const ComplexMatrix h = sample_channel(n, n, rng);
    const ComplexMatrix r = punctured ? wrd(h).Rp : qrd_mgs(h).R;
    for (int i = 0; i < n; ++i) {
      const double d = std::real(r(i, i));
      samples[static_cast<std::size_t>(i)].push_back(d * d);
    }
    const Complex z = r(0, n - 1);
    off_sum += z;
    off_sq += std::norm(z);
  }
  DiagonalMomentReport report;
  const double tn = static_cast<double>(trials);
  for (int i = 0; i < n; ++i) {
    auto& s = samples[static_cast<std::size_t>(i)];
    double mean = 0.0;
    for (double x : s) mean += x;
    mean /= tn;
    double var = 0.0;
    for (double x : s) var += (x - mean) * (x - mean);
    var /= tn - 1.0;
    const int shape = punctured ? (i + 1 < n ? 2 : 1) : n - i;
    report.mean.push_back(mean);
    report.variance.push_back(var);
    report.expected_mean.push_back(static_cast<double>(shape));
    report.expected_variance.push_back(static_cast<double>(shape));
    report.ks_statistic.push_back(ks_statistic(s, shape));
  }
  const Complex off_mean = off_sum / tn;
  report.offdiag_variance = off_sq / tn - std::norm(off_mean);
  return report;
}

double loglog_slope(const std::vector<double>& snr_db, const std::vector<double>& ber) {
  if (snr_db.size() != ber.size() || snr_db.size() < 2) {
    throw ConfigError("slope fit needs two equal-length series");
  }
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t i = 0; i < ber.size(); ++i) {
    if (!(ber[i] > 0.0)) {
      throw ConfigError("slope fit needs positive error rates");
    }
    xs.push_back(snr_db[i] / 10.0);
    ys.push_back(std::log10(ber[i]));
  }
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(xs.size());
  my /= static_cast<double>(xs.size());
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    num += (xs[i] - mx) * (ys[i] - my);
    den += (xs[i] - mx) * (xs[i] - mx);
  }
  if (den == 0.0) {
    throw ConfigError("slope fit needs at least two distinct SNR points");
  }
  return num / den;
}

}  // namespace mimo
