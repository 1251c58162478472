#include "kfssi/kalman.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "kfssi/error.hpp"
#include "kfssi/linalg.hpp"

namespace kfssi::kalman {

LinearGaussianModel OscillatorBank::channel_model(std::size_t channel) const {
  if (channel >= channels()) invalid("oscillator bank: channel out of range");
  const auto n = static_cast<Eigen::Index>(state_dim());
  LinearGaussianModel m;
  m.transition = transition;
  m.output_map = output_map;
  m.process_sqrt = process_noise_std[channel] * Eigen::MatrixXd::Identity(n, n);
  m.measurement_sqrt = Eigen::MatrixXd::Constant(1, 1, measurement_noise_std[channel]);
  return m;
}

OscillatorBank build_bank(std::span<const double> freqs, double dt, std::vector<double> process_noise_std,
                          std::vector<double> measurement_noise_std) {
  if (!(dt > 0.0)) invalid("build_bank: dt must be > 0");
  if (process_noise_std.size() != measurement_noise_std.size() || measurement_noise_std.empty()) {
    invalid("build_bank: need one process and one measurement noise level per channel");
  }
  for (std::size_t c = 0; c < measurement_noise_std.size(); ++c) {
    if (!(process_noise_std[c] > 0.0) || !(measurement_noise_std[c] > 0.0)) {
      invalid("build_bank: noise levels must be > 0");
    }
  }
  const double nyquist = 0.5 / dt;
  std::vector<double> sorted(freqs.begin(), freqs.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (!(sorted[i] > 0.0 && sorted[i] < nyquist)) invalid("build_bank: harmonic frequencies must lie in (0, Nyquist)");
    if (i > 0 && sorted[i] - sorted[i - 1] < 1e-9) {
      invalid("build_bank: duplicate harmonic frequency (unobservable oscillator)");
    }
  }

  OscillatorBank bank;
  bank.freqs.assign(freqs.begin(), freqs.end());
  bank.dt = dt;
  bank.process_noise_std = std::move(process_noise_std);
  bank.measurement_noise_std = std::move(measurement_noise_std);

  const auto n = static_cast<Eigen::Index>(bank.state_dim());
  bank.transition = Eigen::MatrixXd::Zero(n, n);
  bank.output_map = Eigen::RowVectorXd::Zero(n);
  for (std::size_t j = 0; j < bank.freqs.size(); ++j) {
    const double angle = 2.0 * std::numbers::pi * bank.freqs[j] * dt;
    const auto i = static_cast<Eigen::Index>(2 * j);
    bank.transition(i, i) = std::cos(angle);
    bank.transition(i, i + 1) = -std::sin(angle);
    bank.transition(i + 1, i) = std::sin(angle);
    bank.transition(i + 1, i + 1) = std::cos(angle);
    bank.output_map(i) = 1.0;
  }
  return bank;
}

OscillatorBank build_bank(const HarmonicSet& harmonics, double dt, std::vector<double> process_noise_std,
                          std::vector<double> measurement_noise_std) {
  const std::vector<double> f = harmonics.freqs();
  return build_bank(f, dt, std::move(process_noise_std), std::move(measurement_noise_std));
}

StepResult srcf_step(const LinearGaussianModel& model, const FilterState& prior, const Eigen::VectorXd& y,
                     std::size_t step) {
  const Eigen::Index n = model.transition.rows();
  const Eigen::Index m = model.output_map.rows();
  if (prior.x.size() != n || prior.sqrt_cov.rows() != n || prior.sqrt_cov.cols() != n || y.size() != m) {
    invalid("srcf_step: dimension mismatch");
  }
  auto check = [step](bool ok, const char* what) {
    if (!ok) {
      std::ostringstream os;
      os << "srcf_step: non-finite " << what << " at step " << step;
      fail(ErrorClass::numerical, os.str());
    }
  };
  check(y.allFinite(), "measurement");
  check(prior.sqrt_cov.allFinite() && prior.x.allFinite(), "prior");

  // Measurement update.
  Eigen::MatrixXd pre(m + n, m + n);
  pre.topLeftCorner(m, m) = model.measurement_sqrt;
  pre.topRightCorner(m, n) = model.output_map * prior.sqrt_cov;
  pre.bottomLeftCorner(n, m).setZero();
  pre.bottomRightCorner(n, n) = prior.sqrt_cov;
  const Eigen::MatrixXd post = lq_lower(pre);
  const Eigen::MatrixXd re_sqrt = post.topLeftCorner(m, m);    // innovation covariance root
  const Eigen::MatrixXd gain_bar = post.bottomLeftCorner(n, m);  // P H^T Re^(-T/2)

  const Eigen::VectorXd innovation = y - model.output_map * prior.x;
  const Eigen::VectorXd whitened = re_sqrt.triangularView<Eigen::Lower>().solve(innovation);

  StepResult r;
  r.filtered.x = prior.x + gain_bar * whitened;
  r.filtered.sqrt_cov = post.bottomRightCorner(n, n);
  r.y_per = model.output_map * r.filtered.x;

  // Time update.
  Eigen::MatrixXd tpre(n, 2 * n);
  tpre.leftCols(n) = model.transition * r.filtered.sqrt_cov;
  tpre.rightCols(n) = model.process_sqrt;
  r.predicted.sqrt_cov = lq_lower(tpre);
  r.predicted.x = model.transition * r.filtered.x;

  check(r.predicted.x.allFinite() && r.predicted.sqrt_cov.allFinite(), "update");
  return r;
}

namespace {

// Residual RMS after least-squares removal of sinusoids at `freqs`.
double notched_rms(const Eigen::Ref<const Eigen::RowVectorXd>& x, double rate, const std::vector<double>& freqs) {
  const Eigen::Index n = x.size();
  const Eigen::VectorXd centred = x.transpose().array() - x.mean();
  if (freqs.empty()) return std::sqrt(centred.squaredNorm() / static_cast<double>(n));
  Eigen::MatrixXd basis(n, static_cast<Eigen::Index>(2 * freqs.size()));
  for (std::size_t j = 0; j < freqs.size(); ++j) {
    for (Eigen::Index k = 0; k < n; ++k) {
      const double ph = 2.0 * std::numbers::pi * freqs[j] * static_cast<double>(k) / rate;
      basis(k, static_cast<Eigen::Index>(2 * j)) = std::cos(ph);
      basis(k, static_cast<Eigen::Index>(2 * j + 1)) = std::sin(ph);
    }
  }
  const Eigen::VectorXd coef = basis.colPivHouseholderQr().solve(centred);
  const Eigen::VectorXd resid = centred - basis * coef;
  return std::sqrt(resid.squaredNorm() / static_cast<double>(n));
}

}  // namespace

Tuning default_tuning(const TimeSeries& ts, const HarmonicSet& harmonics, double rel_process) {
  if (!(rel_process > 0.0)) invalid("default_tuning: relative process noise must be > 0");
  const std::vector<double> f = harmonics.freqs();
  Tuning t;
  for (Eigen::Index c = 0; c < ts.data.rows(); ++c) {
    const double total = std::sqrt(ts.data.row(c).squaredNorm() / static_cast<double>(ts.samples()));
    double resid = notched_rms(ts.data.row(c), ts.rate, f);
    const double scale = total > 0.0 ? total : 1.0;
    resid = std::max(resid, 1e-6 * scale);
    t.process_noise_std.push_back(rel_process * scale);
    t.measurement_noise_std.push_back(resid);
  }
  return t;
}

TimeSeries estimate_periodic(const OscillatorBank& bank, const TimeSeries& ts, double initial_sqrt_cov,
                             PeriodicOutput output) {
  if (bank.channels() != ts.channels()) invalid("estimate_periodic: bank and series channel counts differ");
  if (std::abs(bank.dt * ts.rate - 1.0) > 1e-9) invalid("estimate_periodic: series rate inconsistent with bank dt");
  if (!(initial_sqrt_cov > 0.0)) invalid("estimate_periodic: initial covariance root must be > 0");

  TimeSeries out;
  out.rate = ts.rate;
  out.names = ts.names;
  out.start_time = ts.start_time;
  out.meta = ts.meta;
  out.data = Eigen::MatrixXd::Zero(ts.data.rows(), ts.data.cols());
  if (bank.state_dim() == 0) return out;

  const auto n = static_cast<Eigen::Index>(bank.state_dim());
  Eigen::VectorXd y(1);
  for (std::size_t c = 0; c < ts.channels(); ++c) {
    const LinearGaussianModel model = bank.channel_model(c);
    FilterState state{Eigen::VectorXd::Zero(n), initial_sqrt_cov * Eigen::MatrixXd::Identity(n, n)};
    for (Eigen::Index k = 0; k < ts.data.cols(); ++k) {
      y(0) = ts.data(static_cast<Eigen::Index>(c), k);
      if (output == PeriodicOutput::predicted) out.data(static_cast<Eigen::Index>(c), k) = (model.output_map * state.x)(0);
      StepResult r = srcf_step(model, state, y, static_cast<std::size_t>(k));
      if (output == PeriodicOutput::filtered) out.data(static_cast<Eigen::Index>(c), k) = r.y_per(0);
      state = std::move(r.predicted);
    }
  }
  return out;
}

}  // namespace kfssi::kalman
