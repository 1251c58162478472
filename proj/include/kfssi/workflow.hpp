#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kfssi/config.hpp"
#include "kfssi/harmonics.hpp"
#include "kfssi/identify.hpp"
#include "kfssi/io.hpp"
#include "kfssi/stabilize.hpp"

// Orchestration shared by the command-line tool and the end-to-end tests.
namespace kfssi::workflow {

std::uint64_t dataset_seed(std::uint64_t master, std::size_t index);

struct SimOutput {
  std::vector<io::Dataset> datasets;  // carry a rotor_rpm side channel
  sim::ModalTruth truth;
  std::vector<std::uint64_t> seeds;
};

SimOutput simulate_datasets(const SimConfig& cfg, std::uint64_t master_seed);

struct LocalizeResult {
  HarmonicSet set;
  std::string method;  // "rotor", "file" or "indicators"
  double mean_speed_hz = 0.0;
  double coefficient_of_variation = 0.0;
  std::optional<IndicatorCurve> kurtosis;
  std::optional<IndicatorCurve> entropy;
  std::vector<CandidateVerdict> verdicts;  // kurtosis then entropy
};

/// Rotor-based set when a rotor column exists, else the indicator minima.
/// Throws Error(harmonics) "harmonics unresolved" when neither gives a line.
LocalizeResult localize(const io::Dataset& ds, const HarmonicsConfig& cfg);

/// Harmonics for identification: config file, else the rotor column.
HarmonicSet resolve_harmonics(const io::Dataset& ds, const HarmonicsConfig& cfg);

/// Sensor channels after the yaw transform (when a yaw column is present).
TimeSeries prepare(const io::Dataset& ds);

/// Stacked LQ of a single dataset; empty harmonics give the plain SSI factor.
LFactor dataset_factor(const TimeSeries& ts, const HarmonicSet& harmonics, const RunConfig& cfg);

/// Enhanced KF-SSI: each dataset filtered on its own, factors accumulated
/// with concat, optionally on top of a previously saved factor.
LFactor enhanced_factor(std::span<const TimeSeries> series, std::span<const HarmonicSet> harmonics,
                        const RunConfig& cfg, const std::optional<LFactor>& start = std::nullopt);

StabilizationDiagram factor_diagram(const LFactor& l, const RunConfig& cfg);

/// Modified LSCE over the order sweep; the diagram's orders are the full
/// polynomial degrees (swept free degree plus twice the harmonic count).
StabilizationDiagram lsce_diagram(const TimeSeries& ts, const HarmonicSet& harmonics, const RunConfig& cfg);

/// Welch spectrum averaged over the series.
Spectrum mean_spectrum(std::span<const TimeSeries> series, std::size_t segment_len);

struct IdentifyOutcome {
  StabilizationDiagram diagram;
  std::optional<InterpretationResult> interpretation;
  std::optional<std::string> interpretation_error;
  std::optional<LFactor> factor;  // KF-SSI variants only
};

IdentifyOutcome identify(std::span<const TimeSeries> series, std::span<const HarmonicSet> harmonics,
                         const RunConfig& cfg, const std::optional<LFactor>& start = std::nullopt);

/// Leave-one-out interpretations from per-dataset factors: factor i is left
/// out and the rest merged. Failed interpretations are skipped.
std::vector<InterpretationResult> loo_interpretations(std::span<const LFactor> factors, const RunConfig& cfg);
/// One interpretation per dataset factor. Failed interpretations are skipped.
std::vector<InterpretationResult> plain_interpretations(std::span<const LFactor> factors, const RunConfig& cfg);

struct AggregateResult {
  std::vector<io::BoxRow> rows;
  std::vector<std::string> warnings;
};

/// Box statistics per (group, method, mode): Enhanced KF-SSI with
/// leave-one-out next to per-dataset KF-SSI. Each group needs >= 3 datasets.
AggregateResult aggregate(std::span<const io::Dataset> datasets, const RunConfig& cfg);

}  // namespace kfssi::workflow
