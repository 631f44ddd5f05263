#include "mimo/harness.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "mimo/analysis.hpp"
#include "mimo/channel.hpp"
#include "mimo/decompose.hpp"
#include "mimo/precode.hpp"
#include "mimo/rng.hpp"

namespace mimo {

namespace {

constexpr std::uint64_t kChunk = 1024;
constexpr int kRedrawBudget = 100;

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> items;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string::npos) {
      items.push_back(s.substr(start));
      return items;
    }
    items.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<std::string> split_names(const std::string& key, const std::string& raw) {
  std::vector<std::string> names;
  for (const std::string& item : split(raw, ',')) {
    const std::string name = trim(item);
    if (name.empty()) throw ConfigError(key + " contains an empty list entry");
    names.push_back(name);
  }
  return names;
}

double parse_double(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (!v.empty()) {
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (end == v.c_str() + v.size() && std::isfinite(x)) return x;
  }
  throw ConfigError("bad number for " + key + ": '" + raw + "'");
}

long long parse_int(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (!v.empty()) {
    char* end = nullptr;
    const long long x = std::strtoll(v.c_str(), &end, 10);
    if (end == v.c_str() + v.size()) return x;
  }
  throw ConfigError("bad integer for " + key + ": '" + raw + "'");
}

std::uint64_t parse_u64(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (!v.empty() && v[0] != '-') {
    char* end = nullptr;
    const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
    if (end == v.c_str() + v.size()) return x;
  }
  throw ConfigError("bad unsigned integer for " + key + ": '" + raw + "'");
}

const char* scenario_name(Scenario s) {
  switch (s) {
    case Scenario::kDetect: return "detect";
    case Scenario::kClassify: return "classify";
    case Scenario::kJoint: return "joint";
    case Scenario::kPrecode: return "precode";
    case Scenario::kAnalyze: return "analyze";
  }
  return "?";
}

Scenario parse_scenario(const std::string& raw) {
  const std::string v = trim(raw);
  if (v == "detect") return Scenario::kDetect;
  if (v == "classify") return Scenario::kClassify;
  if (v == "joint") return Scenario::kJoint;
  if (v == "precode") return Scenario::kPrecode;
  if (v == "analyze") return Scenario::kAnalyze;
  throw ConfigError("unknown scenario: '" + raw + "'");
}

ConstellationId parse_tag(const std::string& key, const std::string& name) {
  try {
    return Constellation::id_from_name(name);
  } catch (const ConfigError&) {
    throw ConfigError(key + " names an unknown alphabet: '" + name + "'");
  }
}

// ---- algorithm registries ------------------------------------------------

enum class DetAlg {
  kMl, kZf, kMmse, kNc, kPnc, kChase, kPchase, kSphere, kPml,
  kLord, kSlord, kSsd, kSssd,
};

struct DetEntry {
  DetAlg alg;
  bool needs_qrd = false;
  bool needs_wrd = false;
  bool needs_schedule = false;
};

const std::map<std::string, DetEntry>& detect_registry() {
  static const std::map<std::string, DetEntry> reg = {
      {"ml", {DetAlg::kMl}},
      {"zf", {DetAlg::kZf}},
      {"mmse", {DetAlg::kMmse}},
      {"nc", {DetAlg::kNc, true, false, false}},
      {"pnc", {DetAlg::kPnc, false, true, false}},
      {"chase", {DetAlg::kChase, true, false, false}},
      {"pchase", {DetAlg::kPchase, false, true, false}},
      {"sphere", {DetAlg::kSphere, true, false, false}},
      {"pml", {DetAlg::kPml, false, true, false}},
      {"lord", {DetAlg::kLord, false, false, true}},
      {"slord", {DetAlg::kSlord, false, false, true}},
      {"ssd", {DetAlg::kSsd, false, false, true}},
      {"sssd", {DetAlg::kSssd, false, false, true}},
  };
  return reg;
}

enum class ClsAlg {
  kLogMap, kMaxLog, kCmld, kQuasiSubspace, kQuasiChase, kFeatures, kFeatures6, kHierarchical,
};

const std::map<std::string, ClsAlg>& classify_registry() {
  static const std::map<std::string, ClsAlg> reg = {
      {"logmap", ClsAlg::kLogMap},
      {"maxlog", ClsAlg::kMaxLog},
      {"cmld", ClsAlg::kCmld},
      {"quasi_subspace", ClsAlg::kQuasiSubspace},
      {"quasi_chase", ClsAlg::kQuasiChase},
      {"features", ClsAlg::kFeatures},
      {"features6", ClsAlg::kFeatures6},
      {"hierarchical", ClsAlg::kHierarchical},
  };
  return reg;
}

enum class PreAlg { kZf, kNc, kChase, kLorp, kGp, kSgp, kSp };

const std::map<std::string, PreAlg>& precode_registry() {
  static const std::map<std::string, PreAlg> reg = {
      {"zf", PreAlg::kZf},     {"nc", PreAlg::kNc}, {"chase", PreAlg::kChase},
      {"lorp", PreAlg::kLorp}, {"gp", PreAlg::kGp}, {"sgp", PreAlg::kSgp},
      {"sp", PreAlg::kSp},
  };
  return reg;
}

std::vector<std::string> resolved_algorithms(const ExperimentSpec& spec) {
  if (!spec.algorithms.empty()) return spec.algorithms;
  switch (spec.scenario) {
    case Scenario::kDetect: return {"ml"};
    case Scenario::kClassify: return {"maxlog"};
    case Scenario::kPrecode: return {"zf"};
    default: return {};
  }
}

HypothesisSet resolved_hypotheses(const ExperimentSpec& spec) {
  if (spec.hypotheses.empty()) return HypothesisSet::defaults();
  return HypothesisSet(spec.hypotheses);
}

void validate_spec(const ExperimentSpec& spec) {
  if (spec.rx < 1) throw ConfigError("mimo.rx must be >= 1");
  if (spec.tx < 1) throw ConfigError("mimo.tx must be >= 1");
  if (spec.trials < 1) throw ConfigError("experiment.trials must be >= 1");
  if (spec.frame_length < 1) throw ConfigError("experiment.frame_length must be >= 1");
  if (spec.snr_db.empty()) throw ConfigError("experiment.snr_db must list at least one point");
  for (double v : spec.snr_db) {
    if (!std::isfinite(v)) throw ConfigError("experiment.snr_db entries must be finite");
  }
  if (!(spec.correlation >= 0.0 && spec.correlation < 1.0)) {
    throw ConfigError("mimo.correlation must lie in [0, 1)");
  }
  if (spec.layer_constellations.empty()) {
    throw ConfigError("mimo.constellation must name an alphabet");
  }
  for (ConstellationId id : spec.layer_constellations) {
    if (id != spec.layer_constellations.front()) {
      throw ConfigError("mimo.constellation must use one alphabet across layers");
    }
  }
  if (spec.layer_constellations.front() == ConstellationId::kPhi) {
    throw ConfigError("mimo.constellation must carry data; phi is a hypothesis, not a source");
  }
  if (spec.layer_constellations.size() > 1 &&
      spec.layer_constellations.size() != static_cast<std::size_t>(spec.tx)) {
    throw ConfigError("mimo.constellation must list one alphabet or one per layer");
  }

  const std::vector<std::string> algs = resolved_algorithms(spec);
  switch (spec.scenario) {
    case Scenario::kDetect:
      for (const std::string& a : algs) {
        if (!detect_registry().count(a)) throw ConfigError("unknown detection algorithm: '" + a + "'");
      }
      break;
    case Scenario::kClassify:
    case Scenario::kJoint:
      if (spec.rx != spec.tx) {
        throw ConfigError("classification needs a square channel (mimo.rx == mimo.tx)");
      }
      if (spec.tones < 1) throw ConfigError("classify.tones must be >= 1");
      if (spec.known_layers < 1 || spec.known_layers >= spec.tx) {
        throw ConfigError("classify.known_layers must lie in [1, layers - 1]");
      }
      resolved_hypotheses(spec);
      if (spec.scenario == Scenario::kClassify) {
        for (const std::string& a : algs) {
          if (!classify_registry().count(a)) throw ConfigError("unknown classifier: '" + a + "'");
        }
      }
      break;
    case Scenario::kPrecode:
      if (spec.tx < spec.rx) {
        throw ConfigError("precoding needs at least as many antennas as users (mimo.tx >= mimo.rx)");
      }
      if (!(spec.power > 0.0)) throw ConfigError("precode.power must be positive");
      if (spec.max_iter < 1) throw ConfigError("precode.max_iter must be >= 1");
      for (const std::string& a : algs) {
        if (!precode_registry().count(a)) throw ConfigError("unknown precoding algorithm: '" + a + "'");
      }
      break;
    case Scenario::kAnalyze:
      break;
  }
}

// ---- tallies ---------------------------------------------------------------

struct RateTally {
  std::uint64_t count = 0;  // favorable or erroneous events, metric-dependent
  std::uint64_t n = 0;
  void add(const RateTally& o) {
    count += o.count;
    n += o.n;
  }
};

struct AvgTally {
  double sum = 0.0;
  double sumsq = 0.0;
  std::uint64_t n = 0;
  void push(double v) {
    sum += v;
    sumsq += v * v;
    ++n;
  }
  void add(const AvgTally& o) {
    sum += o.sum;
    sumsq += o.sumsq;
    n += o.n;
  }
};

void push_rate_row(std::vector<ResultRow>& rows, const ExperimentSpec& spec,
                   const std::string& alg, double snr, const std::string& metric,
                   const RateTally& t) {
  const double n = static_cast<double>(t.n);
  const double p = t.n ? static_cast<double>(t.count) / n : 0.0;
  const double se = t.n ? std::sqrt(std::max(0.0, p * (1.0 - p) / n)) : 0.0;
  rows.push_back({scenario_name(spec.scenario), alg, snr, metric, p, t.n, se});
}

void push_avg_row(std::vector<ResultRow>& rows, const ExperimentSpec& spec,
                  const std::string& alg, double snr, const std::string& metric,
                  const AvgTally& t) {
  const double mean = t.n ? t.sum / static_cast<double>(t.n) : 0.0;
  double se = 0.0;
  if (t.n >= 2) {
    const double n = static_cast<double>(t.n);
    const double var = std::max(0.0, (t.sumsq - n * mean * mean) / (n - 1.0));
    se = std::sqrt(var / n);
  }
  rows.push_back({scenario_name(spec.scenario), alg, snr, metric, mean, t.n, se});
}

void sort_rows(std::vector<ResultRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    if (a.algorithm != b.algorithm) return a.algorithm < b.algorithm;
    if (a.snr_db != b.snr_db) return a.snr_db < b.snr_db;
    return a.metric < b.metric;
  });
}

// ---- deterministic chunked execution ---------------------------------------

// Trials are split into fixed 1024-wide chunks; each chunk owns a private
// accumulator and the chunk results are merged in index order, so the reduced
// totals are bit-identical for every worker count.
template <typename Accum, typename Body>
Accum run_chunked(std::uint64_t trials, int workers, const Accum& proto, Body&& body) {
  const std::uint64_t nchunks = (trials + kChunk - 1) / kChunk;
  std::vector<Accum> parts(static_cast<std::size_t>(nchunks), proto);
  std::atomic<std::uint64_t> next{0};
  std::mutex err_mu;
  std::exception_ptr err;
  auto drain = [&] {
    for (;;) {
      const std::uint64_t ci = next.fetch_add(1);
      if (ci >= nchunks) return;
      const std::uint64_t lo = ci * kChunk;
      const std::uint64_t hi = std::min(trials, lo + kChunk);
      try {
        for (std::uint64_t t = lo; t < hi; ++t) body(t, parts[static_cast<std::size_t>(ci)]);
      } catch (...) {
        std::lock_guard<std::mutex> g(err_mu);
        if (!err) err = std::current_exception();
        return;
      }
    }
  };
  const int nw = static_cast<int>(std::min<std::uint64_t>(std::max(workers, 1), nchunks));
  if (nw <= 1) {
    drain();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nw));
    for (int w = 0; w < nw; ++w) pool.emplace_back(drain);
    for (std::thread& th : pool) th.join();
  }
  if (err) std::rethrow_exception(err);
  Accum total = proto;
  for (const Accum& p : parts) total.merge(p);
  return total;
}

// Runs one trial body, redrawing the randomness on numerical failures until
// the per-trial budget is spent.
template <typename Trial>
void with_redraws(Trial&& trial) {
  for (int attempt = 0;; ++attempt) {
    try {
      trial(static_cast<std::uint64_t>(attempt) * rng_purpose::kRedraw);
      return;
    } catch (const NumericalError& e) {
      if (attempt >= kRedrawBudget) {
        throw NumericalError(std::string("redraw budget exhausted: ") + e.what());
      }
    }
  }
}

int draw_label(Rng& rng, const Constellation& c) {
  return std::min(c.size() - 1, static_cast<int>(rng.next_double() * c.size()));
}

ComplexMatrix draw_channel(const ExperimentSpec& spec, Rng& rng) {
  if (spec.correlation > 0.0) {
    return sample_correlated_channel(spec.rx, spec.tx, spec.correlation, rng);
  }
  return sample_channel(spec.rx, spec.tx, rng);
}

std::uint64_t bit_mismatch(int a, int b) {
  return static_cast<std::uint64_t>(
      std::popcount(static_cast<unsigned>(a) ^ static_cast<unsigned>(b)));
}

// ---- detect scenario -------------------------------------------------------

DetectionResult dispatch_detect(const DetEntry& e, const ComplexVector& y, const ComplexMatrix& H,
                                const std::optional<Qrd>& q, const std::optional<Wrd>& w,
                                const Constellation& c, double sigma2,
                                const std::vector<std::vector<int>>& sched) {
  switch (e.alg) {
    case DetAlg::kMl: return detect_ml_exhaustive(y, H, c, sigma2, false);
    case DetAlg::kZf: return detect_zf(y, H, c, sigma2, false);
    case DetAlg::kMmse: return detect_mmse(y, H, c, sigma2, false);
    case DetAlg::kNc: return detect_nc(y, *q, c);
    case DetAlg::kPnc: return detect_pnc(y, *w, c);
    case DetAlg::kChase: return detect_chase(y, *q, c, sigma2, false);
    case DetAlg::kPchase: return detect_pchase(y, *w, c, sigma2, false);
    case DetAlg::kSphere: return detect_sphere(y, *q, c, sigma2, false);
    case DetAlg::kPml: return detect_pml_exhaustive(y, *w, c, sigma2, false);
    case DetAlg::kLord: return detect_lord(y, H, c, sigma2, false, sched);
    case DetAlg::kSlord: return detect_slord(y, H, c, sigma2, false, sched);
    case DetAlg::kSsd: return detect_ssd(y, H, c, sigma2, false, sched);
    case DetAlg::kSssd: return detect_sssd(y, H, c, sigma2, false, sched);
  }
  throw ConfigError("unreachable detection dispatch");
}

struct DetectTally {
  RateTally bit, sym, frame;
  AvgTally flops, nodes;
  void add(const DetectTally& o) {
    bit.add(o.bit);
    sym.add(o.sym);
    frame.add(o.frame);
    flops.add(o.flops);
    nodes.add(o.nodes);
  }
};

struct DetectAccum {
  std::vector<DetectTally> algs;
  void merge(const DetectAccum& o) {
    for (std::size_t i = 0; i < algs.size(); ++i) algs[i].add(o.algs[i]);
  }
};

void run_detect(const ExperimentSpec& spec, int workers, std::vector<ResultRow>& rows) {
  const Constellation& c = Constellation::get(spec.layer_constellations.front());
  const std::vector<std::string> names = resolved_algorithms(spec);
  std::vector<DetEntry> entries;
  bool needs_qrd = false, needs_wrd = false, needs_sched = false;
  for (const std::string& a : names) {
    entries.push_back(detect_registry().at(a));
    needs_qrd |= entries.back().needs_qrd;
    needs_wrd |= entries.back().needs_wrd;
    needs_sched |= entries.back().needs_schedule;
  }
  const std::vector<std::vector<int>> sched =
      needs_sched ? permutation_schedule(ScheduleKind::kSinglePermutation, spec.tx)
                  : std::vector<std::vector<int>>{};
  const std::size_t nalgs = entries.size();
  const std::uint64_t trials = static_cast<std::uint64_t>(spec.trials);
  const int frames = spec.frame_length;

  for (std::size_t pi = 0; pi < spec.snr_db.size(); ++pi) {
    const double snr = spec.snr_db[pi];
    const double sigma2 = NoiseModel::from_snr_db(snr, spec.tx).sigma2;
    DetectAccum proto;
    proto.algs.resize(nalgs);
    auto body = [&](std::uint64_t t, DetectAccum& acc) {
      const std::uint64_t g = pi * trials + t;
      with_redraws([&](std::uint64_t shift) {
        Rng ch = Rng::stream(spec.seed, g, rng_purpose::kChannel + shift);
        Rng sy = Rng::stream(spec.seed, g, rng_purpose::kSymbols + shift);
        Rng nz = Rng::stream(spec.seed, g, rng_purpose::kNoise + shift);
        const ComplexMatrix H = draw_channel(spec, ch);
        std::optional<Qrd> q;
        std::optional<Wrd> w;
        FlopLedger qled, wled;
        if (needs_qrd) q = qrd_mgs(H, &qled);
        if (needs_wrd) w = wrd(H, &wled);
        std::vector<DetectTally> local(nalgs);
        std::vector<char> any_err(nalgs, 0);
        for (int f = 0; f < frames; ++f) {
          std::vector<int> labels(static_cast<std::size_t>(spec.tx));
          ComplexVector x(spec.tx);
          for (int l = 0; l < spec.tx; ++l) {
            labels[static_cast<std::size_t>(l)] = draw_label(sy, c);
            x(l) = c.point(labels[static_cast<std::size_t>(l)]);
          }
          const ComplexVector yv = H * x + sample_noise(spec.rx, sigma2, nz);
          for (std::size_t ai = 0; ai < nalgs; ++ai) {
            const DetectionResult r =
                dispatch_detect(entries[ai], yv, H, q, w, c, sigma2, sched);
            std::uint64_t berr = 0, serr = 0;
            for (int l = 0; l < spec.tx; ++l) {
              const int truth = labels[static_cast<std::size_t>(l)];
              if (r.hard[static_cast<std::size_t>(l)] != truth) ++serr;
              berr += bit_mismatch(r.hard[static_cast<std::size_t>(l)], truth);
            }
            local[ai].bit.count += berr;
            local[ai].bit.n += static_cast<std::uint64_t>(spec.tx) *
                               static_cast<std::uint64_t>(c.bits_per_symbol());
            local[ai].sym.count += serr;
            local[ai].sym.n += static_cast<std::uint64_t>(spec.tx);
            if (berr) any_err[ai] = 1;
            double fl = r.ledger.total();
            // The shared decomposition is computed once per realization and
            // amortized over the frame.
            if (entries[ai].needs_qrd) fl += qled.total() / frames;
            if (entries[ai].needs_wrd) fl += wled.total() / frames;
            local[ai].flops.push(fl);
            local[ai].nodes.push(static_cast<double>(r.nodes_visited));
          }
        }
        for (std::size_t ai = 0; ai < nalgs; ++ai) {
          local[ai].frame.count += any_err[ai] ? 1 : 0;
          local[ai].frame.n += 1;
          acc.algs[ai].add(local[ai]);
        }
      });
    };
    const DetectAccum total = run_chunked(trials, workers, proto, body);
    for (std::size_t ai = 0; ai < nalgs; ++ai) {
      push_rate_row(rows, spec, names[ai], snr, "ber", total.algs[ai].bit);
      push_rate_row(rows, spec, names[ai], snr, "ser", total.algs[ai].sym);
      push_rate_row(rows, spec, names[ai], snr, "fer", total.algs[ai].frame);
      push_avg_row(rows, spec, names[ai], snr, "avg_flops", total.algs[ai].flops);
      push_avg_row(rows, spec, names[ai], snr, "avg_nodes", total.algs[ai].nodes);
    }
  }
}

// ---- classify / joint scenarios ---------------------------------------------

struct TruthTone {
  std::vector<int> known;
  std::vector<int> unknown;
};

// Draws the true hypothesis, then per-tone channels and transmissions. The
// unknown trailing layers modulate the true alphabet (phi sends zeros).
int draw_observations(const ExperimentSpec& spec, const Constellation& c_known,
                      const HypothesisSet& hyps, double sigma2, std::uint64_t g,
                      std::uint64_t shift, ObservationList& obs, std::vector<TruthTone>& truth) {
  Rng hy = Rng::stream(spec.seed, g, rng_purpose::kHypothesis + shift);
  Rng ch = Rng::stream(spec.seed, g, rng_purpose::kChannel + shift);
  Rng sy = Rng::stream(spec.seed, g, rng_purpose::kSymbols + shift);
  Rng nz = Rng::stream(spec.seed, g, rng_purpose::kNoise + shift);
  const int truth_idx = std::min(hyps.size() - 1,
                                 static_cast<int>(hy.next_double() * hyps.size()));
  const Constellation& c_true = hyps.hypothesis(truth_idx);
  const int n = spec.tx;
  const int kl = spec.known_layers;
  obs.clear();
  truth.clear();
  obs.reserve(static_cast<std::size_t>(spec.tones));
  truth.reserve(static_cast<std::size_t>(spec.tones));
  for (int tn = 0; tn < spec.tones; ++tn) {
    const ComplexMatrix H = draw_channel(spec, ch);
    ComplexVector x(n);
    TruthTone tt;
    for (int l = 0; l < kl; ++l) {
      tt.known.push_back(draw_label(sy, c_known));
      x(l) = c_known.point(tt.known.back());
    }
    for (int l = kl; l < n; ++l) {
      tt.unknown.push_back(draw_label(sy, c_true));
      x(l) = c_true.point(tt.unknown.back());
    }
    const ComplexVector yv = H * x + sample_noise(spec.rx, sigma2, nz);
    obs.push_back({yv, H});
    truth.push_back(std::move(tt));
  }
  return truth_idx;
}

ClassifierDecision dispatch_classify(ClsAlg alg, const ObservationList& obs,
                                     const Constellation& c_known, const HypothesisSet& hyps,
                                     double sigma2, int tones, int kl) {
  switch (alg) {
    case ClsAlg::kLogMap: return classify_logmap(obs, c_known, hyps, sigma2, tones, kl);
    case ClsAlg::kMaxLog: return classify_maxlogmap(obs, c_known, hyps, sigma2, tones, kl);
    case ClsAlg::kCmld: return classify_cmld(obs, c_known, hyps, sigma2, tones, kl);
    case ClsAlg::kQuasiSubspace:
      return classify_maxlogmap(obs, c_known, hyps, sigma2, tones, kl, false,
                                QuasiVariant{QuasiDetector::kSubspace, false});
    case ClsAlg::kQuasiChase:
      return classify_maxlogmap(obs, c_known, hyps, sigma2, tones, kl, false,
                                QuasiVariant{QuasiDetector::kChase, false});
    case ClsAlg::kFeatures: return classify_features(obs, kl, hyps, false);
    case ClsAlg::kFeatures6: return classify_features(obs, kl, hyps, true);
    case ClsAlg::kHierarchical:
      return classify_hierarchical(obs, c_known, hyps, sigma2, tones, kl);
  }
  throw ConfigError("unreachable classifier dispatch");
}

struct ClassifyTally {
  RateTally ccr;
  AvgTally evals;
  void add(const ClassifyTally& o) {
    ccr.add(o.ccr);
    evals.add(o.evals);
  }
};

struct ClassifyAccum {
  std::vector<ClassifyTally> algs;
  void merge(const ClassifyAccum& o) {
    for (std::size_t i = 0; i < algs.size(); ++i) algs[i].add(o.algs[i]);
  }
};

void run_classify(const ExperimentSpec& spec, int workers, std::vector<ResultRow>& rows) {
  const Constellation& c_known = Constellation::get(spec.layer_constellations.front());
  const HypothesisSet hyps = resolved_hypotheses(spec);
  const std::vector<std::string> names = resolved_algorithms(spec);
  std::vector<ClsAlg> algs;
  for (const std::string& a : names) algs.push_back(classify_registry().at(a));
  const std::size_t nalgs = algs.size();
  const std::uint64_t trials = static_cast<std::uint64_t>(spec.trials);

  for (std::size_t pi = 0; pi < spec.snr_db.size(); ++pi) {
    const double snr = spec.snr_db[pi];
    const double sigma2 = NoiseModel::from_snr_db(snr, spec.tx).sigma2;
    ClassifyAccum proto;
    proto.algs.resize(nalgs);
    auto body = [&](std::uint64_t t, ClassifyAccum& acc) {
      const std::uint64_t g = pi * trials + t;
      with_redraws([&](std::uint64_t shift) {
        ObservationList obs;
        std::vector<TruthTone> truth;
        const int truth_idx =
            draw_observations(spec, c_known, hyps, sigma2, g, shift, obs, truth);
        std::vector<ClassifyTally> local(nalgs);
        for (std::size_t ai = 0; ai < nalgs; ++ai) {
          const ClassifierDecision d = dispatch_classify(algs[ai], obs, c_known, hyps, sigma2,
                                                         spec.tones, spec.known_layers);
          local[ai].ccr.count += d.winner == truth_idx ? 1 : 0;
          local[ai].ccr.n += 1;
          local[ai].evals.push(static_cast<double>(d.likelihood_evaluations));
        }
        for (std::size_t ai = 0; ai < nalgs; ++ai) acc.algs[ai].add(local[ai]);
      });
    };
    const ClassifyAccum total = run_chunked(trials, workers, proto, body);
    for (std::size_t ai = 0; ai < nalgs; ++ai) {
      push_rate_row(rows, spec, names[ai], snr, "ccr", total.algs[ai].ccr);
      push_avg_row(rows, spec, names[ai], snr, "avg_nodes", total.algs[ai].evals);
    }
  }
}

struct JointTally {
  RateTally ccr, bit;
  AvgTally evals;
  void add(const JointTally& o) {
    ccr.add(o.ccr);
    bit.add(o.bit);
    evals.add(o.evals);
  }
};

struct JointAccum {
  JointTally t;
  void merge(const JointAccum& o) { t.add(o.t); }
};

void run_joint(const ExperimentSpec& spec, int workers, std::vector<ResultRow>& rows) {
  const Constellation& c_known = Constellation::get(spec.layer_constellations.front());
  const HypothesisSet hyps = resolved_hypotheses(spec);
  const std::uint64_t trials = static_cast<std::uint64_t>(spec.trials);
  const int kl = spec.known_layers;
  const int qk = c_known.bits_per_symbol();

  for (std::size_t pi = 0; pi < spec.snr_db.size(); ++pi) {
    const double snr = spec.snr_db[pi];
    const double sigma2 = NoiseModel::from_snr_db(snr, spec.tx).sigma2;
    JointAccum proto;
    auto body = [&](std::uint64_t t, JointAccum& acc) {
      const std::uint64_t g = pi * trials + t;
      with_redraws([&](std::uint64_t shift) {
        ObservationList obs;
        std::vector<TruthTone> truth;
        const int truth_idx =
            draw_observations(spec, c_known, hyps, sigma2, g, shift, obs, truth);
        const JointDecision jd =
            joint_trial(obs, c_known, hyps, sigma2, spec.tones, kl);
        JointTally local;
        const bool correct = jd.decision.winner == truth_idx;
        local.ccr.count += correct ? 1 : 0;
        local.ccr.n += 1;
        local.evals.push(static_cast<double>(jd.decision.likelihood_evaluations));
        const int qt = hyps.hypothesis(truth_idx).bits_per_symbol();
        for (int tn = 0; tn < spec.tones; ++tn) {
          const DetectionResult& r = jd.winner_tones[static_cast<std::size_t>(tn)];
          for (int l = 0; l < kl; ++l) {
            local.bit.count += bit_mismatch(r.hard[static_cast<std::size_t>(l)],
                                            truth[static_cast<std::size_t>(tn)].known
                                                [static_cast<std::size_t>(l)]);
            local.bit.n += static_cast<std::uint64_t>(qk);
          }
          // A misclassified trial forfeits every data bit on the unknown
          // layers; a zero-power truth carries none.
          for (int l = 0; l < spec.tx - kl; ++l) {
            if (qt == 0) break;
            if (correct) {
              local.bit.count +=
                  bit_mismatch(r.hard[static_cast<std::size_t>(kl + l)],
                               truth[static_cast<std::size_t>(tn)].unknown
                                   [static_cast<std::size_t>(l)]);
            } else {
              local.bit.count += static_cast<std::uint64_t>(qt);
            }
            local.bit.n += static_cast<std::uint64_t>(qt);
          }
        }
        acc.t.add(local);
      });
    };
    const JointAccum total = run_chunked(trials, workers, proto, body);
    push_rate_row(rows, spec, "joint", snr, "ber", total.t.bit);
    push_rate_row(rows, spec, "joint", snr, "ccr", total.t.ccr);
    push_avg_row(rows, spec, "joint", snr, "avg_nodes", total.t.evals);
  }
}

// ---- precode scenario --------------------------------------------------------

PrecodeResult dispatch_precode(PreAlg alg, const PrecodeProblem& prob, int max_iter) {
  const BetaSchedule sched{max_iter, std::nullopt};
  switch (alg) {
    case PreAlg::kZf: return precode_zf_quantized(prob);
    case PreAlg::kNc: return precode_nc(prob, sched);
    case PreAlg::kChase: return precode_chase(prob, sched);
    case PreAlg::kLorp: return precode_lorp(prob, sched);
    case PreAlg::kGp: return precode_gibbs(prob, max_iter);
    case PreAlg::kSgp: return precode_gibbs(prob, max_iter, true, 0);
    case PreAlg::kSp: return precode_exhaustive(prob, sched);
  }
  throw ConfigError("unreachable precoder dispatch");
}

struct PrecodeTally {
  RateTally bit, sym, frame;
  AvgTally flops;
  void add(const PrecodeTally& o) {
    bit.add(o.bit);
    sym.add(o.sym);
    frame.add(o.frame);
    flops.add(o.flops);
  }
};

struct PrecodeAccum {
  std::vector<PrecodeTally> algs;
  void merge(const PrecodeAccum& o) {
    for (std::size_t i = 0; i < algs.size(); ++i) algs[i].add(o.algs[i]);
  }
};

void run_precode(const ExperimentSpec& spec, int workers, std::vector<ResultRow>& rows) {
  const Constellation& c = Constellation::get(spec.layer_constellations.front());
  const std::vector<std::string> names = resolved_algorithms(spec);
  std::vector<PreAlg> algs;
  for (const std::string& a : names) algs.push_back(precode_registry().at(a));
  const std::size_t nalgs = algs.size();
  const std::uint64_t trials = static_cast<std::uint64_t>(spec.trials);
  const int users = spec.rx;
  const int frames = spec.frame_length;

  for (std::size_t pi = 0; pi < spec.snr_db.size(); ++pi) {
    const double snr = spec.snr_db[pi];
    // Downlink convention: SNR = P / sigma^2.
    const double sigma2 = spec.power * std::pow(10.0, -snr / 10.0);
    PrecodeAccum proto;
    proto.algs.resize(nalgs);
    auto body = [&](std::uint64_t t, PrecodeAccum& acc) {
      const std::uint64_t g = pi * trials + t;
      with_redraws([&](std::uint64_t shift) {
        Rng ch = Rng::stream(spec.seed, g, rng_purpose::kChannel + shift);
        Rng sy = Rng::stream(spec.seed, g, rng_purpose::kSymbols + shift);
        Rng nz = Rng::stream(spec.seed, g, rng_purpose::kNoise + shift);
        const ComplexMatrix H = draw_channel(spec, ch);
        std::vector<PrecodeTally> local(nalgs);
        std::vector<char> any_err(nalgs, 0);
        for (int f = 0; f < frames; ++f) {
          std::vector<int> labels(static_cast<std::size_t>(users));
          PrecodeProblem prob;
          prob.h = H;
          prob.s = ComplexVector(users);
          prob.p = spec.power;
          prob.sigma2 = sigma2;
          for (int u = 0; u < users; ++u) {
            labels[static_cast<std::size_t>(u)] = draw_label(sy, c);
            prob.s(u) = c.point(labels[static_cast<std::size_t>(u)]);
          }
          const ComplexVector noise = sample_noise(users, sigma2, nz);
          for (std::size_t ai = 0; ai < nalgs; ++ai) {
            const PrecodeResult pr = dispatch_precode(algs[ai], prob, spec.max_iter);
            const ComplexVector yv = H * pr.x + noise;
            std::uint64_t berr = 0, serr = 0;
            for (int u = 0; u < users; ++u) {
              const int est = ue_receive(yv(u), pr.beta, c);
              const int truth = labels[static_cast<std::size_t>(u)];
              if (est != truth) ++serr;
              berr += bit_mismatch(est, truth);
            }
            local[ai].bit.count += berr;
            local[ai].bit.n += static_cast<std::uint64_t>(users) *
                               static_cast<std::uint64_t>(c.bits_per_symbol());
            local[ai].sym.count += serr;
            local[ai].sym.n += static_cast<std::uint64_t>(users);
            if (berr) any_err[ai] = 1;
            local[ai].flops.push(pr.ledger.total());
          }
        }
        for (std::size_t ai = 0; ai < nalgs; ++ai) {
          local[ai].frame.count += any_err[ai] ? 1 : 0;
          local[ai].frame.n += 1;
          acc.algs[ai].add(local[ai]);
        }
      });
    };
    const PrecodeAccum total = run_chunked(trials, workers, proto, body);
    for (std::size_t ai = 0; ai < nalgs; ++ai) {
      push_rate_row(rows, spec, names[ai], snr, "ber", total.algs[ai].bit);
      push_rate_row(rows, spec, names[ai], snr, "ser", total.algs[ai].sym);
      push_rate_row(rows, spec, names[ai], snr, "fer", total.algs[ai].frame);
      push_avg_row(rows, spec, names[ai], snr, "avg_flops", total.algs[ai].flops);
    }
  }
}

// ---- analyze scenario ----------------------------------------------------------

struct AnalyzeAccum {
  AvgTally v[5];
  void merge(const AnalyzeAccum& o) {
    for (int i = 0; i < 5; ++i) v[i].add(o.v[i]);
  }
};

void run_analyze(const ExperimentSpec& spec, int workers, std::vector<ResultRow>& rows) {
  static const char* const kNames[5] = {"capacity", "punctured_colored", "punctured_white",
                                        "capacity_lower", "punctured_lower"};
  const std::uint64_t trials = static_cast<std::uint64_t>(spec.trials);
  for (std::size_t pi = 0; pi < spec.snr_db.size(); ++pi) {
    const double snr = spec.snr_db[pi];
    const double sigma2 = NoiseModel::from_snr_db(snr, spec.tx).sigma2;
    AnalyzeAccum proto;
    auto body = [&](std::uint64_t t, AnalyzeAccum& acc) {
      const std::uint64_t g = pi * trials + t;
      with_redraws([&](std::uint64_t shift) {
        Rng ch = Rng::stream(spec.seed, g, rng_purpose::kChannel + shift);
        const ComplexMatrix H = draw_channel(spec, ch);
        const RateReport rep = rate_report(H, sigma2);
        acc.v[0].push(rep.c_h);
        acc.v[1].push(rep.c_punct_opt);
        acc.v[2].push(rep.c_punct);
        acc.v[3].push(rep.lower_h);
        acc.v[4].push(rep.lower_punct);
      });
    };
    const AnalyzeAccum total = run_chunked(trials, workers, proto, body);
    for (int i = 0; i < 5; ++i) {
      push_avg_row(rows, spec, kNames[i], snr, "rate_bps_hz", total.v[i]);
    }
  }
}

// ---- serialization helpers ------------------------------------------------------

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string json_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size() + 2);
  for (char ch : s) {
    switch (ch) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(ch) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", ch);
          out += buf;
        } else {
          out += ch;
        }
    }
  }
  return out;
}

constexpr const char* kCsvHeader = "scenario,algorithm,snr_db,metric,value,trials,stderr";

}  // namespace

// ---- public API --------------------------------------------------------------

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap cfg;
  std::istringstream is(text);
  std::string raw;
  std::string section;
  int ln = 0;
  while (std::getline(is, raw)) {
    ++ln;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    const std::string where = "config line " + std::to_string(ln);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError(where + ": empty section name");
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (section.empty()) throw ConfigError(where + ": key outside any [section]");
    cfg[section + "." + key] = trim(line.substr(eq + 1));
  }
  return cfg;
}

ConfigMap load_config_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  if (f.bad()) throw IoError("failed reading config file: " + path);
  return parse_config_text(ss.str());
}

void apply_override(ConfigMap& cfg, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override must look like section.key=value: '" + assignment + "'");
  }
  const std::string key = trim(assignment.substr(0, eq));
  if (key.empty() || key.find('.') == std::string::npos) {
    throw ConfigError("override key must be section.key: '" + assignment + "'");
  }
  cfg[key] = trim(assignment.substr(eq + 1));
}

ExperimentSpec build_spec(const ConfigMap& cfg) {
  static const std::set<std::string> kKnown = {
      "experiment.scenario", "experiment.snr_db", "experiment.trials",
      "experiment.frame_length", "experiment.seed", "experiment.out",
      "mimo.rx", "mimo.tx", "mimo.constellation", "mimo.correlation",
      "detect.algorithms",
      "classify.classifiers", "classify.tones", "classify.known_layers", "classify.hypotheses",
      "precode.algorithms", "precode.power", "precode.max_iter",
  };
  for (const auto& [key, value] : cfg) {
    (void)value;
    if (!kKnown.count(key)) throw ConfigError("unknown configuration key: " + key);
  }
  const auto raw = [&](const char* key) -> const std::string* {
    const auto it = cfg.find(key);
    return it == cfg.end() ? nullptr : &it->second;
  };
  const auto require = [&](const char* key) -> const std::string& {
    const std::string* v = raw(key);
    if (!v) throw ConfigError(std::string("missing required key ") + key);
    return *v;
  };

  ExperimentSpec spec;
  spec.scenario = parse_scenario(require("experiment.scenario"));
  spec.snr_db.clear();
  for (const std::string& item : split_names("experiment.snr_db", require("experiment.snr_db"))) {
    spec.snr_db.push_back(parse_double("experiment.snr_db", item));
  }
  if (const std::string* v = raw("experiment.trials")) {
    spec.trials = static_cast<int>(parse_int("experiment.trials", *v));
  }
  if (const std::string* v = raw("experiment.frame_length")) {
    spec.frame_length = static_cast<int>(parse_int("experiment.frame_length", *v));
  }
  if (const std::string* v = raw("experiment.seed")) {
    spec.seed = parse_u64("experiment.seed", *v);
  }
  if (const std::string* v = raw("experiment.out")) spec.out_path = *v;
  if (const std::string* v = raw("mimo.rx")) spec.rx = static_cast<int>(parse_int("mimo.rx", *v));
  if (const std::string* v = raw("mimo.tx")) spec.tx = static_cast<int>(parse_int("mimo.tx", *v));
  if (const std::string* v = raw("mimo.constellation")) {
    spec.layer_constellations.clear();
    for (const std::string& name : split_names("mimo.constellation", *v)) {
      spec.layer_constellations.push_back(parse_tag("mimo.constellation", name));
    }
  }
  if (const std::string* v = raw("mimo.correlation")) {
    spec.correlation = parse_double("mimo.correlation", *v);
  }
  const char* alg_key = nullptr;
  switch (spec.scenario) {
    case Scenario::kDetect: alg_key = "detect.algorithms"; break;
    case Scenario::kClassify: alg_key = "classify.classifiers"; break;
    case Scenario::kPrecode: alg_key = "precode.algorithms"; break;
    default: break;
  }
  if (alg_key) {
    if (const std::string* v = raw(alg_key)) spec.algorithms = split_names(alg_key, *v);
  }
  if (const std::string* v = raw("classify.tones")) {
    spec.tones = static_cast<int>(parse_int("classify.tones", *v));
  }
  if (const std::string* v = raw("classify.known_layers")) {
    spec.known_layers = static_cast<int>(parse_int("classify.known_layers", *v));
  }
  if (const std::string* v = raw("classify.hypotheses")) {
    for (const std::string& name : split_names("classify.hypotheses", *v)) {
      spec.hypotheses.push_back(parse_tag("classify.hypotheses", name));
    }
  }
  if (const std::string* v = raw("precode.power")) {
    spec.power = parse_double("precode.power", *v);
  }
  if (const std::string* v = raw("precode.max_iter")) {
    spec.max_iter = static_cast<int>(parse_int("precode.max_iter", *v));
  }

  validate_spec(spec);
  return spec;
}

ConfigMap spec_to_config(const ExperimentSpec& spec) {
  const auto join = [](const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (i) out += ',';
      out += items[i];
    }
    return out;
  };
  ConfigMap cfg;
  cfg["experiment.scenario"] = scenario_name(spec.scenario);
  std::vector<std::string> snr;
  for (double v : spec.snr_db) snr.push_back(fmt_double(v));
  cfg["experiment.snr_db"] = join(snr);
  cfg["experiment.trials"] = std::to_string(spec.trials);
  cfg["experiment.frame_length"] = std::to_string(spec.frame_length);
  cfg["experiment.seed"] = std::to_string(spec.seed);
  if (!spec.out_path.empty()) cfg["experiment.out"] = spec.out_path;
  cfg["mimo.rx"] = std::to_string(spec.rx);
  cfg["mimo.tx"] = std::to_string(spec.tx);
  std::vector<std::string> tags;
  for (ConstellationId id : spec.layer_constellations) {
    tags.push_back(Constellation::get(id).name());
  }
  cfg["mimo.constellation"] = join(tags);
  cfg["mimo.correlation"] = fmt_double(spec.correlation);
  const std::vector<std::string> algs = resolved_algorithms(spec);
  switch (spec.scenario) {
    case Scenario::kDetect: cfg["detect.algorithms"] = join(algs); break;
    case Scenario::kClassify: cfg["classify.classifiers"] = join(algs); break;
    case Scenario::kPrecode: cfg["precode.algorithms"] = join(algs); break;
    default: break;
  }
  if (spec.scenario == Scenario::kClassify || spec.scenario == Scenario::kJoint) {
    cfg["classify.tones"] = std::to_string(spec.tones);
    cfg["classify.known_layers"] = std::to_string(spec.known_layers);
    const HypothesisSet hyps = resolved_hypotheses(spec);
    std::vector<std::string> names;
    for (int j = 0; j < hyps.size(); ++j) names.push_back(hyps.hypothesis(j).name());
    cfg["classify.hypotheses"] = join(names);
  }
  if (spec.scenario == Scenario::kPrecode) {
    cfg["precode.power"] = fmt_double(spec.power);
    cfg["precode.max_iter"] = std::to_string(spec.max_iter);
  }
  return cfg;
}

ResultTable run(const ExperimentSpec& spec, int workers) {
  if (workers < 1) throw ConfigError("workers must be >= 1");
  validate_spec(spec);
  ResultTable table;
  switch (spec.scenario) {
    case Scenario::kDetect: run_detect(spec, workers, table.rows); break;
    case Scenario::kClassify: run_classify(spec, workers, table.rows); break;
    case Scenario::kJoint: run_joint(spec, workers, table.rows); break;
    case Scenario::kPrecode: run_precode(spec, workers, table.rows); break;
    case Scenario::kAnalyze: run_analyze(spec, workers, table.rows); break;
  }
  sort_rows(table.rows);
  return table;
}

JointDecision joint_trial(const ObservationList& obs, const Constellation& known_const,
                          const HypothesisSet& hyps, double sigma2, int tones,
                          int known_layers) {
  if (obs.empty()) throw ConfigError("joint decision needs at least one observation");
  const int n = static_cast<int>(obs.front().h.cols());
  if (known_layers < 1 || known_layers >= n) {
    throw ConfigError("joint decision needs 1 <= known layers < total layers");
  }
  if (tones < 1 || static_cast<std::size_t>(tones) > obs.size()) {
    throw ConfigError("joint decision tone count exceeds the observation list");
  }
  std::vector<std::vector<DetectionResult>> buffered;
  buffered.reserve(static_cast<std::size_t>(hyps.size()));
  for (int j = 0; j < hyps.size(); ++j) {
    std::vector<const Constellation*> layers(static_cast<std::size_t>(n), &known_const);
    for (int l = known_layers; l < n; ++l) {
      layers[static_cast<std::size_t>(l)] = &hyps.hypothesis(j);
    }
    std::vector<DetectionResult> per_tone;
    per_tone.reserve(static_cast<std::size_t>(tones));
    for (int tn = 0; tn < tones; ++tn) {
      per_tone.push_back(detect_ml_mixed(obs[static_cast<std::size_t>(tn)].y,
                                         obs[static_cast<std::size_t>(tn)].h, layers, sigma2,
                                         true));
    }
    buffered.push_back(std::move(per_tone));
  }
  JointDecision out;
  out.decision = classify_maxlogmap(obs, known_const, hyps, sigma2, tones, known_layers);
  out.winner_tones = std::move(buffered[static_cast<std::size_t>(out.decision.winner)]);
  return out;
}

std::string to_csv(const ResultTable& table) {
  std::string out = kCsvHeader;
  out += '\n';
  for (const ResultRow& r : table.rows) {
    out += r.scenario;
    out += ',';
    out += r.algorithm;
    out += ',';
    out += fmt_double(r.snr_db);
    out += ',';
    out += r.metric;
    out += ',';
    out += fmt_double(r.value);
    out += ',';
    out += std::to_string(r.trials);
    out += ',';
    out += fmt_double(r.std_error);
    out += '\n';
  }
  return out;
}

ResultTable parse_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("results text is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) throw ConfigError("unexpected results header: '" + line + "'");
  ResultTable table;
  int ln = 1;
  while (std::getline(is, line)) {
    ++ln;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> f = split(line, ',');
    if (f.size() != 7) {
      throw ConfigError("results line " + std::to_string(ln) + ": expected 7 fields");
    }
    ResultRow row;
    row.scenario = f[0];
    row.algorithm = f[1];
    row.snr_db = parse_double("snr_db", f[2]);
    row.metric = f[3];
    row.value = parse_double("value", f[4]);
    row.trials = parse_u64("trials", f[5]);
    row.std_error = parse_double("stderr", f[6]);
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string to_json(const ResultTable& table, const ConfigMap& provenance) {
  std::string out = "{\n  \"spec\": {";
  bool first = true;
  for (const auto& [key, value] : provenance) {
    out += first ? "\n" : ",\n";
    out += "    \"" + json_escape(key) + "\": \"" + json_escape(value) + "\"";
    first = false;
  }
  out += first ? "},\n" : "\n  },\n";
  out += "  \"rows\": [";
  first = true;
  for (const ResultRow& r : table.rows) {
    out += first ? "\n" : ",\n";
    out += "    {\"scenario\": \"" + json_escape(r.scenario) + "\", \"algorithm\": \"" +
           json_escape(r.algorithm) + "\", \"snr_db\": " + fmt_double(r.snr_db) +
           ", \"metric\": \"" + json_escape(r.metric) + "\", \"value\": " + fmt_double(r.value) +
           ", \"trials\": " + std::to_string(r.trials) +
           ", \"stderr\": " + fmt_double(r.std_error) + "}";
    first = false;
  }
  out += first ? "]\n" : "\n  ]\n";
  out += "}\n";
  return out;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open output file: " + path);
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  f.flush();
  if (!f) throw IoError("failed writing output file: " + path);
}

}  // namespace mimo
