#include "kfssi/signal.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

#include <unsupported/Eigen/FFT>

#include "kfssi/error.hpp"
#include "kfssi/filter.hpp"

namespace kfssi {

std::optional<std::size_t> TimeSeries::find(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  return std::nullopt;
}

void TimeSeries::validate() const {
  if (!(rate > 0.0) || !std::isfinite(rate)) fail(ErrorClass::invalid_data, "time series: rate must be > 0");
  if (names.size() != channels()) fail(ErrorClass::invalid_data, "time series: channel name count mismatch");
  if (channels() == 0) fail(ErrorClass::invalid_data, "time series: no channels");
  if (samples() < 2) fail(ErrorClass::invalid_data, "time series: need at least 2 samples");
  for (Eigen::Index c = 0; c < data.rows(); ++c) {
    for (Eigen::Index k = 0; k < data.cols(); ++k) {
      if (!std::isfinite(data(c, k))) {
        std::ostringstream os;
        os << "time series: non-finite sample in channel '" << names[static_cast<std::size_t>(c)] << "' at index "
           << k << " (gaps are rejected, not interpolated)";
        fail(ErrorClass::invalid_data, os.str());
      }
    }
  }
}

TimeSeries yaw_transform(const TimeSeries& ts, std::span<const double> yaw, bool allow_unpaired) {
  const std::size_t n = ts.samples();
  if (yaw.size() != 1 && yaw.size() != n) invalid("yaw_transform: yaw must be constant or one value per sample");

  TimeSeries out;
  out.rate = ts.rate;
  out.start_time = ts.start_time;
  out.meta = ts.meta;

  std::vector<Eigen::VectorXd> rows;
  std::vector<bool> used(ts.channels(), false);
  auto yaw_at = [&](std::size_t k) { return yaw.size() == 1 ? yaw[0] : yaw[k]; };

  for (std::size_t c = 0; c < ts.channels(); ++c) {
    const std::string& name = ts.names[c];
    if (used[c]) continue;
    const bool is_x = name.size() > 2 && name.ends_with("_x");
    const bool is_y = name.size() > 2 && name.ends_with("_y");
    if (!is_x && !is_y) {
      if (!allow_unpaired) invalid("yaw_transform: channel '" + name + "' is not an _x/_y channel");
      rows.push_back(ts.data.row(static_cast<Eigen::Index>(c)).transpose());
      out.names.push_back(name);
      used[c] = true;
      continue;
    }
    const std::string base = name.substr(0, name.size() - 2);
    const auto partner = ts.find(base + (is_x ? "_y" : "_x"));
    if (!partner) invalid("yaw_transform: channel '" + name + "' has no matching pair");
    const std::size_t ix = is_x ? c : *partner;
    const std::size_t iy = is_x ? *partner : c;
    used[ix] = used[iy] = true;

    Eigen::VectorXd fa(static_cast<Eigen::Index>(n));
    Eigen::VectorXd ss(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) {
      const double x = ts.data(static_cast<Eigen::Index>(ix), static_cast<Eigen::Index>(k));
      const double y = ts.data(static_cast<Eigen::Index>(iy), static_cast<Eigen::Index>(k));
      const double cs = std::cos(yaw_at(k));
      const double sn = std::sin(yaw_at(k));
      fa(static_cast<Eigen::Index>(k)) = x * cs + y * sn;
      ss(static_cast<Eigen::Index>(k)) = -x * sn + y * cs;
    }
    rows.push_back(std::move(fa));
    rows.push_back(std::move(ss));
    out.names.push_back(base + "_FA");
    out.names.push_back(base + "_SS");
  }

  out.data.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < rows.size(); ++r) out.data.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
  return out;
}

Spectrum welch_psd(const TimeSeries& ts, std::size_t segment_len, double overlap) {
  const std::size_t n = ts.samples();
  if (segment_len < 2) invalid("welch_psd: segment length must be >= 2");
  if (segment_len > n) invalid("welch_psd: segment longer than data");
  if (!(overlap >= 0.0 && overlap < 1.0)) invalid("welch_psd: overlap must lie in [0, 1)");

  const std::size_t hop = std::max<std::size_t>(
      1, segment_len - static_cast<std::size_t>(std::floor(overlap * static_cast<double>(segment_len))));
  const std::size_t bins = segment_len / 2 + 1;

  std::vector<double> window(segment_len);
  double wsum2 = 0.0;
  for (std::size_t i = 0; i < segment_len; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(segment_len));
    wsum2 += window[i] * window[i];
  }
  const double scale = 1.0 / (ts.rate * wsum2);

  Spectrum out;
  out.resolution = ts.rate / static_cast<double>(segment_len);
  out.freqs.resize(static_cast<Eigen::Index>(bins));
  for (std::size_t k = 0; k < bins; ++k) out.freqs(static_cast<Eigen::Index>(k)) = static_cast<double>(k) * out.resolution;
  out.power = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ts.channels()), static_cast<Eigen::Index>(bins));

  Eigen::FFT<double> fft;
  std::vector<double> seg(segment_len);
  std::vector<std::complex<double>> spec;
  std::size_t count = 0;
  for (std::size_t start = 0; start + segment_len <= n; start += hop) {
    ++count;
    for (std::size_t c = 0; c < ts.channels(); ++c) {
      const auto row = ts.data.row(static_cast<Eigen::Index>(c));
      double mean = 0.0;
      for (std::size_t i = 0; i < segment_len; ++i) mean += row(static_cast<Eigen::Index>(start + i));
      mean /= static_cast<double>(segment_len);
      for (std::size_t i = 0; i < segment_len; ++i) {
        seg[i] = (row(static_cast<Eigen::Index>(start + i)) - mean) * window[i];
      }
      fft.fwd(spec, seg);
      for (std::size_t k = 0; k < bins; ++k) {
        double p = std::norm(spec[k]) * scale;
        const bool edge = k == 0 || (segment_len % 2 == 0 && k == segment_len / 2);
        if (!edge) p *= 2.0;
        out.power(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k)) += p;
      }
    }
  }
  out.power /= static_cast<double>(count);
  return out;
}

Eigen::MatrixXd build_hankel(const TimeSeries& ts, std::size_t block_rows) {
  const std::size_t ch = ts.channels();
  const std::size_t n = ts.samples();
  if (block_rows == 0) invalid("build_hankel: block_rows must be >= 1");
  if (n < block_rows || ch * block_rows >= n - block_rows + 1) {
    std::ostringstream os;
    os << "build_hankel: insufficient samples (" << n << ") for " << block_rows << " block rows of " << ch
       << " channels; need at least " << (ch + 1) * block_rows;
    invalid(os.str());
  }
  const auto cols = static_cast<Eigen::Index>(n - block_rows + 1);
  Eigen::MatrixXd h(static_cast<Eigen::Index>(ch * block_rows), cols);
  for (std::size_t i = 0; i < block_rows; ++i) {
    h.middleRows(static_cast<Eigen::Index>(i * ch), static_cast<Eigen::Index>(ch)) =
        ts.data.middleCols(static_cast<Eigen::Index>(i), cols);
  }
  return h;
}

TimeSeries detrend(const TimeSeries& ts) {
  TimeSeries out = ts;
  const auto n = static_cast<Eigen::Index>(ts.samples());
  if (n < 2) return out;
  // Centred time axis makes mean and slope decouple.
  const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(n, 0.0, static_cast<double>(n - 1)).array() - 0.5 * static_cast<double>(n - 1);
  const double tt = t.squaredNorm();
  for (Eigen::Index c = 0; c < out.data.rows(); ++c) {
    const double mean = out.data.row(c).mean();
    const double slope = out.data.row(c).dot(t) / tt;
    out.data.row(c) = (out.data.row(c).array() - mean).matrix() - slope * t.transpose();
  }
  return out;
}

TimeSeries decimate(const TimeSeries& ts, std::size_t factor) {
  if (factor < 1) invalid("decimate: factor must be >= 1");
  if (factor == 1) return ts;

  const double new_rate = ts.rate / static_cast<double>(factor);
  const SosFilter lp = butterworth_lowpass(8, 0.8 * new_rate / 2.0, ts.rate);
  const std::size_t n = ts.samples();
  const std::size_t m = (n + factor - 1) / factor;

  TimeSeries out;
  out.rate = new_rate;
  out.names = ts.names;
  out.start_time = ts.start_time;
  out.meta = ts.meta;
  out.data.resize(ts.data.rows(), static_cast<Eigen::Index>(m));
  std::vector<double> row(n);
  for (Eigen::Index c = 0; c < ts.data.rows(); ++c) {
    for (std::size_t k = 0; k < n; ++k) row[k] = ts.data(c, static_cast<Eigen::Index>(k));
    const std::vector<double> y = filtfilt(lp, row, 8 * factor * 3);
    for (std::size_t k = 0; k < m; ++k) out.data(c, static_cast<Eigen::Index>(k)) = y[k * factor];
  }

  if (auto it = ts.meta.find("band_of_interest_hz"); it != ts.meta.end()) {
    const double band = std::stod(it->second);
    if (band > new_rate / 2.0) {
      out.meta["warning"] = "decimation below Nyquist of declared band of interest (" + it->second + " Hz)";
    }
  }
  return out;
}

double rms(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s / static_cast<double>(x.size()));
}

}  // namespace kfssi
