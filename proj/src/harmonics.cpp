#include "kfssi/harmonics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "kfssi/error.hpp"
#include "kfssi/filter.hpp"

namespace kfssi {

std::vector<double> HarmonicSet::freqs() const {
  std::vector<double> f;
  f.reserve(multipliers.size());
  for (double m : multipliers) f.push_back(base_freq * m);
  return f;
}

std::vector<std::string> HarmonicSet::labels() const {
  std::vector<std::string> out;
  for (double m : multipliers) {
    std::ostringstream os;
    if (std::abs(m - std::round(m)) < 1e-9) {
      os << std::llround(m) << 'P';
    } else {
      os.precision(4);
      os << m << 'P';
    }
    out.push_back(os.str());
  }
  return out;
}

void HarmonicSet::validate(double nyquist) const {
  if (empty()) return;
  if (!(base_freq > 0.0)) invalid("harmonic set: base frequency must be > 0");
  const std::vector<double> f = freqs();
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!(multipliers[i] > 0.0)) invalid("harmonic set: multipliers must be > 0");
    if (i > 0 && !(f[i] > f[i - 1])) invalid("harmonic set: frequencies must be strictly increasing");
    if (!(f[i] < nyquist)) invalid("harmonic set: " + labels()[i] + " is not below Nyquist");
  }
}

HarmonicSet HarmonicSet::from_freqs(std::span<const double> freqs) {
  HarmonicSet s;
  if (freqs.empty()) return s;
  s.base_freq = freqs.front();
  for (double f : freqs) s.multipliers.push_back(f / s.base_freq);
  return s;
}

RotorHarmonics rotor_harmonics(std::span<const double> speed, SpeedUnit unit, std::vector<double> multipliers,
                               double gear_ratio) {
  if (speed.empty()) invalid("rotor_harmonics: empty speed series");
  if (!(gear_ratio > 0.0)) invalid("rotor_harmonics: gear ratio must be > 0");
  for (double v : speed) {
    if (!std::isfinite(v) || v < 0.0) invalid("rotor_harmonics: speed must be finite and nonnegative");
  }
  const double n = static_cast<double>(speed.size());
  const double mean = std::accumulate(speed.begin(), speed.end(), 0.0) / n;
  if (!(mean > 0.0)) fail(ErrorClass::harmonics, "no harmonic excitation detected (rotor is idling)");

  double var = 0.0;
  for (double v : speed) var += (v - mean) * (v - mean);
  var /= n;

  RotorHarmonics r;
  r.mean_speed = mean;
  r.coefficient_of_variation = std::sqrt(var) / mean;
  const double rotor = mean / gear_ratio;
  r.set.base_freq = unit == SpeedUnit::rpm ? rotor / 60.0 : rotor;
  std::sort(multipliers.begin(), multipliers.end());
  r.set.multipliers = std::move(multipliers);
  return r;
}

namespace {

void check_band(double rate, double center, double bandwidth, int order) {
  if (order < 1 || order > 8) invalid("bandpass: order must be in 1..8");
  if (!(bandwidth > 0.0)) invalid("bandpass: bandwidth must be > 0");
  const double lo = center - bandwidth / 2.0;
  const double hi = center + bandwidth / 2.0;
  if (!(lo > 0.0) || !(hi < rate / 2.0)) {
    std::ostringstream os;
    os << "bandpass: band [" << lo << ", " << hi << "] Hz must lie inside (0, " << rate / 2.0 << ")";
    invalid(os.str());
  }
}

std::size_t transient_pad(double rate, double bandwidth, int order) {
  return static_cast<std::size_t>(std::ceil(2.0 * order * rate / bandwidth));
}

}  // namespace

std::vector<double> bandpass(std::span<const double> x, double rate, double center, double bandwidth, int order) {
  check_band(rate, center, bandwidth, order);
  const SosFilter f = butterworth_bandpass(order, center - bandwidth / 2.0, center + bandwidth / 2.0, rate);
  return filtfilt(f, x, transient_pad(rate, bandwidth, order));
}

TimeSeries bandpass(const TimeSeries& ts, double center, double bandwidth, int order) {
  check_band(ts.rate, center, bandwidth, order);
  const SosFilter f = butterworth_bandpass(order, center - bandwidth / 2.0, center + bandwidth / 2.0, ts.rate);
  const std::size_t pad = transient_pad(ts.rate, bandwidth, order);
  TimeSeries out = ts;
  std::vector<double> row(ts.samples());
  for (Eigen::Index c = 0; c < ts.data.rows(); ++c) {
    Eigen::Map<Eigen::RowVectorXd>(row.data(), static_cast<Eigen::Index>(row.size())) = ts.data.row(c);
    const std::vector<double> y = filtfilt(f, row, pad);
    out.data.row(c) = Eigen::Map<const Eigen::RowVectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  }
  return out;
}

double kurtosis(std::span<const double> x) {
  if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double m2 = 0.0;
  double m4 = 0.0;
  double peak = 0.0;
  for (double v : x) {
    const double d = v - mean;
    m2 += d * d;
    m4 += d * d * d * d;
    peak = std::max(peak, std::abs(v));
  }
  m2 /= n;
  m4 /= n;
  const double floor = 1e-12 * peak;
  if (!(m2 > floor * floor) || m2 == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return m4 / (m2 * m2);
}

double histogram_entropy(std::span<const double> x, std::size_t bins) {
  if (bins < 2) invalid("histogram_entropy: need at least 2 bins");
  if (x.empty()) return 0.0;
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double var = 0.0;
  double peak = 0.0;
  for (double v : x) {
    var += (v - mean) * (v - mean);
    peak = std::max(peak, std::abs(v));
  }
  var /= n;
  const double sd = std::sqrt(var);
  if (!(sd > 1e-12 * peak) || sd == 0.0) return 0.0;  // every value certain

  const double half = std::sqrt(3.0) * sd;
  const double lo = mean - half;
  const double width = 2.0 * half / static_cast<double>(bins);
  std::vector<double> counts(bins, 0.0);
  for (double v : x) {
    const double pos = std::floor((v - lo) / width);
    const auto b = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(bins - 1)));
    counts[b] += 1.0;
  }
  double h = 0.0;
  for (double c : counts) {
    if (c > 0.0) {
      const double p = c / n;
      h -= p * std::log(p);
    }
  }
  return h / std::log(static_cast<double>(bins));
}

std::vector<double> make_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi >= lo)) invalid("make_grid: need step > 0 and hi >= lo");
  std::vector<double> g;
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  for (std::size_t i = 0; i < count; ++i) g.push_back(lo + static_cast<double>(i) * step);
  return g;
}

double default_bandwidth(double rate) { return 0.02 * rate / 2.0; }

namespace {

template <class Indicator>
IndicatorCurve sweep(std::span<const double> x, double rate, std::span<const double> grid, double bandwidth, int order,
                     IndicatorKind kind, Indicator&& indicator) {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    check_band(rate, grid[i], bandwidth, order);
    if (i > 0 && !(grid[i] > grid[i - 1])) invalid("indicator sweep: grid must be strictly increasing");
  }
  IndicatorCurve curve;
  curve.kind = kind;
  curve.filter_order = order;
  curve.bandwidth = bandwidth;
  curve.freqs.assign(grid.begin(), grid.end());
  curve.values.resize(grid.size());
  curve.valid.resize(grid.size());
  // Edge samples carry the reflection transient; a narrow band in a spectral
  // valley picks it up as a burst that dominates the statistics.
  const std::size_t trim = transient_pad(rate, bandwidth, order);
  const bool trimmed = x.size() > 4 * trim;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const std::vector<double> y = bandpass(x, rate, grid[i], bandwidth, order);
    const std::span<const double> inner =
        trimmed ? std::span<const double>(y).subspan(trim, y.size() - 2 * trim) : std::span<const double>(y);
    const double v = indicator(inner);
    curve.values[i] = v;
    curve.valid[i] = std::isfinite(v);
  }
  return curve;
}

}  // namespace

IndicatorCurve kurtosis_sweep(std::span<const double> x, double rate, std::span<const double> grid, double bandwidth,
                              int order) {
  return sweep(x, rate, grid, bandwidth, order, IndicatorKind::kurtosis,
               [](std::span<const double> y) { return kurtosis(y); });
}

IndicatorCurve entropy_sweep(std::span<const double> x, double rate, std::span<const double> grid, double bandwidth,
                             int order, std::size_t bins) {
  if (bins < 8) invalid("entropy_sweep: bins must be >= 8");
  return sweep(x, rate, grid, bandwidth, order, IndicatorKind::entropy, [bins](std::span<const double> y) {
    // A band with no energy is not informative.
    const double k = kurtosis(y);
    if (!std::isfinite(k)) return std::numeric_limits<double>::quiet_NaN();
    return histogram_entropy(y, bins);
  });
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::harmonic: return "harmonic";
    case Verdict::not_harmonic: return "not harmonic";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

const char* to_string(IndicatorKind k) { return k == IndicatorKind::kurtosis ? "kurtosis" : "entropy"; }

std::vector<CandidateVerdict> classify(const IndicatorCurve& curve, const HarmonicSet& candidates,
                                       const ClassifyOptions& opt) {
  std::vector<CandidateVerdict> out;
  if (curve.freqs.empty()) invalid("classify: empty indicator curve");

  std::vector<double> valid_values;
  for (std::size_t i = 0; i < curve.values.size(); ++i) {
    if (curve.valid[i]) valid_values.push_back(curve.values[i]);
  }
  double median = std::numeric_limits<double>::quiet_NaN();
  if (!valid_values.empty()) {
    std::sort(valid_values.begin(), valid_values.end());
    const std::size_t m = valid_values.size();
    median = m % 2 == 1 ? valid_values[m / 2] : 0.5 * (valid_values[m / 2 - 1] + valid_values[m / 2]);
  }

  const std::vector<double> freqs = candidates.freqs();
  const std::vector<std::string> labels = candidates.labels();
  for (std::size_t j = 0; j < freqs.size(); ++j) {
    CandidateVerdict v;
    v.freq = freqs[j];
    v.label = labels[j];
    const auto it = std::min_element(curve.freqs.begin(), curve.freqs.end(),
                                     [&](double a, double b) { return std::abs(a - v.freq) < std::abs(b - v.freq); });
    const auto i = static_cast<std::size_t>(it - curve.freqs.begin());
    v.value = curve.values[i];
    if (!curve.valid[i]) {
      v.verdict = Verdict::inconclusive;
    } else if (curve.kind == IndicatorKind::kurtosis) {
      if (v.value < opt.kurtosis_threshold) {
        v.verdict = Verdict::harmonic;
      } else if (v.value > opt.kurtosis_noise) {
        v.verdict = Verdict::not_harmonic;
      } else {
        v.verdict = Verdict::inconclusive;
      }
    } else {
      auto neighbour = [&](std::ptrdiff_t step) -> double {
        for (auto k = static_cast<std::ptrdiff_t>(i) + step; k >= 0 && k < static_cast<std::ptrdiff_t>(curve.values.size());
             k += step) {
          if (curve.valid[static_cast<std::size_t>(k)]) return curve.values[static_cast<std::size_t>(k)];
        }
        return std::numeric_limits<double>::infinity();
      };
      const bool local_min = v.value <= neighbour(-1) && v.value <= neighbour(+1);
      if (v.value >= median) {
        v.verdict = Verdict::not_harmonic;
      } else if (local_min) {
        v.verdict = Verdict::harmonic;
      } else {
        v.verdict = Verdict::inconclusive;
      }
    }
    out.push_back(v);
  }
  return out;
}

}  // namespace kfssi
