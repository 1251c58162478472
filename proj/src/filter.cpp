#include "kfssi/filter.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "kfssi/error.hpp"

namespace kfssi {

namespace {

using cplx = std::complex<double>;

cplx bilinear(cplx s, double rate) { return (2.0 * rate + s) / (2.0 * rate - s); }

double prewarp(double freq, double rate) { return 2.0 * rate * std::tan(std::numbers::pi * freq / rate); }

// Analog Butterworth lowpass prototype poles (unit cutoff, left half plane).
std::vector<cplx> prototype_poles(int order) {
  std::vector<cplx> poles;
  poles.reserve(static_cast<std::size_t>(order));
  for (int k = 0; k < order; ++k) {
    const double theta = std::numbers::pi * (2.0 * k + 1.0 + order) / (2.0 * order);
    poles.push_back(std::polar(1.0, theta));
  }
  return poles;
}

cplx section_response(const Biquad& s, cplx zinv) {
  const cplx num = s.b[0] + zinv * (s.b[1] + zinv * s.b[2]);
  const cplx den = 1.0 + zinv * (s.a[0] + zinv * s.a[1]);
  return num / den;
}

// Groups digital poles into real-coefficient denominators. Complex poles are
// taken from the upper half plane; remaining real poles are paired up, a
// single leftover becomes a first-order denominator.
std::vector<std::array<double, 2>> pair_poles(const std::vector<cplx>& poles) {
  std::vector<std::array<double, 2>> dens;
  std::vector<double> reals;
  for (const cplx& p : poles) {
    const double tol = 1e-12 * std::max(1.0, std::abs(p));
    if (p.imag() > tol) {
      dens.push_back({-2.0 * p.real(), std::norm(p)});
    } else if (std::abs(p.imag()) <= tol) {
      reals.push_back(p.real());
    }
  }
  std::sort(reals.begin(), reals.end());
  for (std::size_t i = 0; i + 1 < reals.size(); i += 2) {
    dens.push_back({-(reals[i] + reals[i + 1]), reals[i] * reals[i + 1]});
  }
  if (reals.size() % 2 == 1) dens.push_back({-reals.back(), 0.0});
  return dens;
}

}  // namespace

std::complex<double> SosFilter::response(double freq, double rate) const {
  const cplx zinv = std::polar(1.0, -2.0 * std::numbers::pi * freq / rate);
  cplx h = 1.0;
  for (const auto& s : sections) h *= section_response(s, zinv);
  return h;
}

double SosFilter::max_pole_radius() const {
  double r = 0.0;
  for (const auto& s : sections) {
    // z^2 + a1 z + a2 = 0
    const cplx disc = std::sqrt(cplx(s.a[0] * s.a[0] - 4.0 * s.a[1], 0.0));
    const cplx z1 = (-s.a[0] + disc) / 2.0;
    const cplx z2 = (-s.a[0] - disc) / 2.0;
    r = std::max({r, std::abs(z1), std::abs(z2)});
  }
  return r;
}

SosFilter butterworth_lowpass(int order, double cutoff, double rate) {
  if (order < 1) invalid("butterworth_lowpass: order must be >= 1");
  if (!(cutoff > 0.0 && cutoff < rate / 2.0)) invalid("butterworth_lowpass: cutoff must lie in (0, rate/2)");

  const double wc = prewarp(cutoff, rate);
  std::vector<cplx> zpoles;
  for (const cplx& p : prototype_poles(order)) zpoles.push_back(bilinear(wc * p, rate));

  SosFilter f;
  for (const auto& den : pair_poles(zpoles)) {
    Biquad s;
    s.a = den;
    if (den[1] == 0.0) {
      s.b = {1.0, 1.0, 0.0};  // zero at z = -1
    } else {
      s.b = {1.0, 2.0, 1.0};  // double zero at z = -1
    }
    const double dc = std::abs(section_response(s, 1.0));
    for (double& b : s.b) b /= dc;
    f.sections.push_back(s);
  }
  if (f.max_pole_radius() >= 1.0) fail(ErrorClass::numerical, "butterworth_lowpass: unstable design");
  return f;
}

SosFilter butterworth_bandpass(int order, double low, double high, double rate) {
  if (order < 1) invalid("butterworth_bandpass: order must be >= 1");
  if (!(low > 0.0 && low < high && high < rate / 2.0)) {
    invalid("butterworth_bandpass: need 0 < low < high < rate/2");
  }

  const double w1 = prewarp(low, rate);
  const double w2 = prewarp(high, rate);
  const double w0 = std::sqrt(w1 * w2);
  const double bw = w2 - w1;

  // s -> (s^2 + w0^2) / (s bw): each prototype pole splits into two.
  std::vector<cplx> zpoles;
  for (const cplx& p : prototype_poles(order)) {
    const cplx pb = p * bw;
    const cplx root = std::sqrt(pb * pb - 4.0 * w0 * w0);
    zpoles.push_back(bilinear((pb + root) / 2.0, rate));
    zpoles.push_back(bilinear((pb - root) / 2.0, rate));
  }

  const double centre = rate / std::numbers::pi * std::atan(w0 / (2.0 * rate));
  const cplx zinv_c = std::polar(1.0, -2.0 * std::numbers::pi * centre / rate);

  SosFilter f;
  for (const auto& den : pair_poles(zpoles)) {
    Biquad s;
    s.a = den;
    s.b = {1.0, 0.0, -1.0};  // zeros at z = +1 and z = -1
    const double g = std::abs(section_response(s, zinv_c));
    for (double& b : s.b) b /= g;
    f.sections.push_back(s);
  }

  const double radius = f.max_pole_radius();
  if (!std::isfinite(radius) || radius >= 1.0 - 1e-12) {
    fail(ErrorClass::numerical,
         "butterworth_bandpass: unstable coefficients for this band; use a wider band or a lower order");
  }
  return f;
}

std::vector<double> sos_filter(const SosFilter& f, std::span<const double> x, double initial) {
  std::vector<double> y(x.begin(), x.end());
  double u = initial;  // steady input level seen by the current section
  for (const auto& s : f.sections) {
    // Transposed direct form II state for a constant input u and output g*u.
    const double g = (s.b[0] + s.b[1] + s.b[2]) / (1.0 + s.a[0] + s.a[1]);
    double z1 = g * u - s.b[0] * u;
    double z2 = s.b[2] * u - s.a[1] * g * u;
    u *= g;
    for (double& v : y) {
      const double in = v;
      const double out = s.b[0] * in + z1;
      z1 = s.b[1] * in - s.a[0] * out + z2;
      z2 = s.b[2] * in - s.a[1] * out;
      v = out;
    }
  }
  return y;
}

std::vector<double> filtfilt(const SosFilter& f, std::span<const double> x, std::size_t pad) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  pad = std::min(pad, n - 1);

  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  std::vector<double> y = sos_filter(f, ext, ext.front());
  std::reverse(y.begin(), y.end());
  y = sos_filter(f, y, y.front());
  std::reverse(y.begin(), y.end());
  return {y.begin() + static_cast<std::ptrdiff_t>(pad), y.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

}  // namespace kfssi
