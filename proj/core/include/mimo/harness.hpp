#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "mimo/constellation.hpp"
#include "mimo/detect.hpp"
#include "mimo/modclass.hpp"

namespace mimo {

struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

enum class Scenario { kDetect, kClassify, kJoint, kPrecode, kAnalyze };

// One Monte Carlo experiment. SNR convention per scenario: uplink scenarios
// (detect, classify, joint, analyze) use SNR = layers / sigma^2 at unit
// symbol energy; the precode scenario uses SNR = P / sigma^2.
struct ExperimentSpec {
  Scenario scenario = Scenario::kDetect;
  int rx = 2;  // receive antennas, or users for the precode scenario
  int tx = 2;  // transmit layers, or basestation antennas for precode
  std::vector<ConstellationId> layer_constellations = {ConstellationId::kQpsk};
  double correlation = 0.0;  // exponential channel correlation, 0 = iid
  std::vector<std::string> algorithms;  // empty: scenario default
  std::vector<double> snr_db;
  int trials = 100;       // channel realizations per sweep point
  int frame_length = 1;   // transmissions per realization
  int tones = 8;          // classification observations per trial
  int known_layers = 1;   // leading layers with a known alphabet
  std::vector<ConstellationId> hypotheses;  // empty: stock hypothesis set
  double power = 1.0;     // precode total transmit power
  int max_iter = 10;      // precode refinement pass cap
  std::uint64_t seed = 1;
  std::string out_path;
};

struct ResultRow {
  std::string scenario;
  std::string algorithm;
  double snr_db = 0.0;
  std::string metric;  // ber | ser | fer | ccr | avg_flops | avg_nodes | rate_bps_hz
  double value = 0.0;
  std::uint64_t trials = 0;  // sample count behind the value (bits, frames, calls, ...)
  double std_error = 0.0;    // binomial for rate metrics, sample stderr otherwise
};

struct ResultTable {
  std::vector<ResultRow> rows;
};

// Flattened section.key configuration, e.g. "experiment.trials" -> "200".
using ConfigMap = std::map<std::string, std::string>;

// Plain-text config: [section] headers, key = value lines, # or ; comments.
ConfigMap parse_config_text(const std::string& text);
ConfigMap load_config_file(const std::string& path);  // IoError

// Applies one "section.key=value" assignment on top of a parsed config.
void apply_override(ConfigMap& cfg, const std::string& assignment);

// Validates keys and values; unknown keys and malformed numbers are
// ConfigErrors naming the offending key.
ExperimentSpec build_spec(const ConfigMap& cfg);

// Normalized echo of a runnable spec with defaults materialized;
// build_spec(spec_to_config(s)) reproduces s. Used for output provenance.
ConfigMap spec_to_config(const ExperimentSpec& spec);

// Deterministic in (spec, seed) for any worker count. Throws ConfigError for
// invalid specs and NumericalError when a trial exhausts its redraw budget.
ResultTable run(const ExperimentSpec& spec, int workers = 1);

// Per-trial joint pipeline: soft detection under every hypothesis is
// buffered, the accumulated max-log metric picks the winner, and the
// winner's buffered detection outputs are returned unchanged. When the
// winner is the true hypothesis the outputs are identical to detecting
// with the oracle alphabet.
struct JointDecision {
  ClassifierDecision decision;
  std::vector<DetectionResult> winner_tones;
};
JointDecision joint_trial(const ObservationList& obs, const Constellation& known_const,
                          const HypothesisSet& hyps, double sigma2, int tones,
                          int known_layers);

// Header "scenario,algorithm,snr_db,metric,value,trials,stderr"; floats at 17
// significant digits; one row per line, rows pre-sorted by run().
std::string to_csv(const ResultTable& table);
ResultTable parse_csv(const std::string& text);  // ConfigError on malformed input

// Object with the flattened effective config under "spec" and the rows under
// "rows", keys matching the CSV columns.
std::string to_json(const ResultTable& table, const ConfigMap& provenance);

void write_file(const std::string& path, const std::string& content);  // IoError

}  // namespace mimo
