#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace kfssi {

/// Uniformly sampled multi-sensor record. Row c of `data` is channel c.
struct TimeSeries {
  double rate = 0.0;  // Hz
  std::vector<std::string> names;
  Eigen::MatrixXd data;  // channels x samples
  std::optional<std::string> start_time;
  std::map<std::string, std::string> meta;

  std::size_t channels() const { return static_cast<std::size_t>(data.rows()); }
  std::size_t samples() const { return static_cast<std::size_t>(data.cols()); }
  double dt() const { return 1.0 / rate; }

  /// Index of the channel called `name`, or nullopt.
  std::optional<std::size_t> find(const std::string& name) const;

  /// Throws Error(invalid_data) unless rate > 0, every channel is named, there
  /// are at least 2 samples and every sample is finite.
  void validate() const;
};

/// One-sided power spectral density, power(c, k) for channel c at freqs[k].
struct Spectrum {
  Eigen::VectorXd freqs;
  Eigen::MatrixXd power;
  double resolution = 0.0;
};

/// Rotates paired `<base>_x` / `<base>_y` channels into `<base>_FA` / `<base>_SS`.
///
/// Positive yaw turns the sensor frame counterclockwise seen from above, so
///   FA =  x cos(yaw) + y sin(yaw)
///   SS = -x sin(yaw) + y cos(yaw).
/// `yaw` holds radians, either one value (constant) or one per sample.
/// Channels that are not part of an x/y pair are passed through unchanged
/// only if `allow_unpaired` is set; otherwise the first offending channel is
/// reported.
TimeSeries yaw_transform(const TimeSeries& ts, std::span<const double> yaw, bool allow_unpaired = false);

/// Welch averaged periodogram with a periodic Hann window. Each segment is
/// mean-detrended. Density units: signal^2 / Hz.
Spectrum welch_psd(const TimeSeries& ts, std::size_t segment_len, double overlap = 0.5);

/// Block-Hankel matrix with `block_rows` row blocks. Row block i, channel c
/// holds samples c[i], c[i+1], ..., c[i+cols-1]; row index = i*channels + c.
/// Shape: (channels*block_rows) x (N - block_rows + 1).
Eigen::MatrixXd build_hankel(const TimeSeries& ts, std::size_t block_rows);

/// Removes a least-squares line (mean and slope) from every channel.
TimeSeries detrend(const TimeSeries& ts);

/// Zero-phase Butterworth anti-alias lowpass followed by downsampling by
/// `factor`. If ts.meta carries "band_of_interest_hz" above the new Nyquist a
/// "warning" entry is added to the result's meta.
TimeSeries decimate(const TimeSeries& ts, std::size_t factor);

/// Root mean square.
double rms(std::span<const double> x);

}  // namespace kfssi
