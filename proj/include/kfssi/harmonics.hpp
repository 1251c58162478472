#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "kfssi/signal.hpp"

namespace kfssi {

/// Harmonic lines base_freq * multiplier, labelled "1P", "3P", ...
struct HarmonicSet {
  double base_freq = 0.0;  // Hz of the 1P line
  std::vector<double> multipliers;

  bool empty() const { return multipliers.empty(); }
  std::size_t size() const { return multipliers.size(); }
  std::vector<double> freqs() const;
  std::vector<std::string> labels() const;

  /// Requires positive, strictly increasing frequencies below `nyquist`.
  void validate(double nyquist) const;

  /// Set whose base is the first frequency; multipliers are the ratios.
  static HarmonicSet from_freqs(std::span<const double> freqs);
};

enum class SpeedUnit { rpm, hz };

struct RotorHarmonics {
  HarmonicSet set;
  double mean_speed = 0.0;               // in the input unit
  double coefficient_of_variation = 0.0; // std/mean of the speed series
};

/// Harmonic lines from the mean rotor speed. A generator-side speed is
/// converted with `gear_ratio` (generator speed = ratio * rotor speed).
/// Throws Error(harmonics) "no harmonic excitation detected" for an idling
/// (zero mean) rotor.
RotorHarmonics rotor_harmonics(std::span<const double> speed, SpeedUnit unit, std::vector<double> multipliers,
                               double gear_ratio = 1.0);

/// Zero-phase Butterworth bandpass of every channel; band is
/// [center - bandwidth/2, center + bandwidth/2]. Order must be 1..8.
TimeSeries bandpass(const TimeSeries& ts, double center, double bandwidth, int order);

/// Same on one channel.
std::vector<double> bandpass(std::span<const double> x, double rate, double center, double bandwidth, int order);

enum class IndicatorKind { kurtosis, entropy };

struct IndicatorCurve {
  std::vector<double> freqs;
  std::vector<double> values;  // NaN where the point is invalid
  std::vector<bool> valid;
  IndicatorKind kind = IndicatorKind::kurtosis;
  int filter_order = 0;
  double bandwidth = 0.0;
};

/// Kurtosis E[(x-mu)^4]/sigma^4. Returns NaN for (near) zero variance.
double kurtosis(std::span<const double> x);

/// Normalized Shannon entropy of a `bins`-bin histogram, in [0, 1].
///
/// Bins are equal width over [mu - sqrt(3) sigma, mu + sqrt(3) sigma], the
/// support of the uniform law with the sample's mean and variance; samples
/// outside fall into the edge bins. This keeps the value affine invariant,
/// gives 1 for uniform data, and ranks a Gaussian above a sinusoid of equal
/// variance. A constant signal gives 0.
double histogram_entropy(std::span<const double> x, std::size_t bins);

/// Frequency grid from `lo` to `hi` with spacing `step`.
std::vector<double> make_grid(double lo, double hi, double step);

/// Default bandwidth: 2% of Nyquist.
double default_bandwidth(double rate);

/// Each grid point bandpasses the signal and evaluates the indicator on the
/// filtered record without 2 * order * rate / bandwidth samples at either end
/// (the whole record when it is shorter than four times that).
IndicatorCurve kurtosis_sweep(std::span<const double> x, double rate, std::span<const double> grid, double bandwidth,
                              int order);
IndicatorCurve entropy_sweep(std::span<const double> x, double rate, std::span<const double> grid, double bandwidth,
                             int order, std::size_t bins = 32);

enum class Verdict { harmonic, not_harmonic, inconclusive };

const char* to_string(Verdict v);
const char* to_string(IndicatorKind k);

struct CandidateVerdict {
  double freq = 0.0;
  std::string label;
  double value = 0.0;  // indicator at the nearest grid point
  Verdict verdict = Verdict::inconclusive;
};

struct ClassifyOptions {
  double kurtosis_threshold = 2.0;  // below: harmonic
  double kurtosis_noise = 2.6;      // above: not harmonic; in between: inconclusive
};

/// Per-candidate verdicts. Kurtosis: value below the threshold marks a
/// harmonic. Entropy: a local minimum below the curve median marks a
/// harmonic, a value at or above the median does not, anything else is
/// inconclusive.
std::vector<CandidateVerdict> classify(const IndicatorCurve& curve, const HarmonicSet& candidates,
                                       const ClassifyOptions& opt = {});

}  // namespace kfssi
