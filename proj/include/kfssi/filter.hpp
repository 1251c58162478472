#pragma once

#include <array>
#include <complex>
#include <span>
#include <vector>

namespace kfssi {

/// One biquad: (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2).
struct Biquad {
  std::array<double, 3> b{};
  std::array<double, 2> a{};
};

/// Cascade of second-order sections.
struct SosFilter {
  std::vector<Biquad> sections;

  /// Complex frequency response at `freq` Hz for sample rate `rate`.
  std::complex<double> response(double freq, double rate) const;
  /// Largest pole radius over all sections.
  double max_pole_radius() const;
};

/// Digital Butterworth lowpass of `order` poles (bilinear transform with
/// prewarping). The last section is first order when `order` is odd.
SosFilter butterworth_lowpass(int order, double cutoff, double rate);

/// Digital Butterworth bandpass between `low` and `high` Hz built from an
/// `order`-pole analog lowpass prototype (2*order poles total). Passband
/// gain is normalized to 1 at the geometric centre.
/// Throws Error(numerical) when any pole ends up on or outside the unit circle.
SosFilter butterworth_bandpass(int order, double low, double high, double rate);

/// Single forward pass. The state starts at the steady state for a constant
/// input equal to `initial`; 0 gives the zero state.
std::vector<double> sos_filter(const SosFilter& f, std::span<const double> x, double initial = 0.0);

/// Forward-backward (zero-phase) filtering. The signal is extended by odd
/// reflection of `pad` samples at each end (clamped to size-1) and each pass
/// starts from the steady state of its first sample, which suppresses
/// start-up transients.
std::vector<double> filtfilt(const SosFilter& f, std::span<const double> x, std::size_t pad);

}  // namespace kfssi
