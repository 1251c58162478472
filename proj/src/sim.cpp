#include "kfssi/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include "kfssi/error.hpp"

namespace kfssi::sim {

void ChainModel::validate() const {
  if (masses.empty()) invalid("chain model: need at least one degree of freedom");
  if (stiffnesses.size() != masses.size() || dampings.size() != masses.size()) {
    invalid("chain model: masses, stiffnesses and dampings must have equal length");
  }
  for (double m : masses) {
    if (!(m > 0.0)) invalid("chain model: masses must be > 0");
  }
  for (double k : stiffnesses) {
    if (!(k > 0.0)) invalid("chain model: stiffnesses must be > 0");
  }
  for (double c : dampings) {
    if (!(c >= 0.0)) invalid("chain model: dampings must be >= 0");
  }
}

namespace {

// Assembles the banded matrix of a chain of elements with values `e`.
Eigen::MatrixXd chain_matrix(const std::vector<double>& e) {
  const auto n = static_cast<Eigen::Index>(e.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    m(i, i) += e[static_cast<std::size_t>(i)];
    if (i > 0) {
      m(i - 1, i - 1) += e[static_cast<std::size_t>(i)];
      m(i - 1, i) -= e[static_cast<std::size_t>(i)];
      m(i, i - 1) -= e[static_cast<std::size_t>(i)];
    }
  }
  return m;
}

}  // namespace

Eigen::MatrixXd ChainModel::mass_matrix() const {
  return Eigen::Map<const Eigen::VectorXd>(masses.data(), static_cast<Eigen::Index>(masses.size())).asDiagonal();
}

Eigen::MatrixXd ChainModel::stiffness_matrix() const { return chain_matrix(stiffnesses); }

Eigen::MatrixXd ChainModel::damping_matrix() const { return chain_matrix(dampings); }

Eigen::MatrixXd ChainModel::companion() const {
  const auto n = static_cast<Eigen::Index>(dof());
  const Eigen::MatrixXd minv = mass_matrix().inverse();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  a.topRightCorner(n, n).setIdentity();
  a.bottomLeftCorner(n, n) = -minv * stiffness_matrix();
  a.bottomRightCorner(n, n) = -minv * damping_matrix();
  return a;
}

std::size_t ExcitationSpec::sample_count() const {
  return static_cast<std::size_t>(std::llround(duration * rate));
}

void ExcitationSpec::validate(const ChainModel& model) const {
  if (!(rate > 0.0)) invalid("excitation: rate must be > 0");
  if (!(duration > 0.0)) invalid("excitation: duration must be > 0");
  const double count = duration * rate;
  if (std::abs(count - std::round(count)) > 1e-9 * std::max(1.0, count)) {
    invalid("excitation: duration * rate must be an integer sample count");
  }
  if (sample_count() < 2) invalid("excitation: need at least 2 samples");
  if (!(noise_std >= 0.0) || !(sensor_noise_std >= 0.0)) invalid("excitation: noise levels must be >= 0");

  const HarmonicForcing& h = harmonics;
  if (!h.set.empty()) {
    h.set.validate(rate / 2.0);
    if (h.amplitudes.size() != h.set.size()) invalid("excitation: one amplitude per harmonic required");
    if (!h.phases.empty() && h.phases.size() != h.set.size()) invalid("excitation: one phase per harmonic required");
    if (h.dof != std::numeric_limits<std::size_t>::max() && h.dof >= model.dof()) {
      invalid("excitation: harmonic dof out of range");
    }
    // With drift the top line must stay below Nyquist for the whole record.
    const double top = h.set.freqs().back();
    const double top_end = top + drift_rate * h.set.multipliers.back() * duration;
    if (!(std::max(top, top_end) < rate / 2.0)) invalid("excitation: harmonic exceeds Nyquist (rate/2)");
    if (!(h.set.base_freq + drift_rate * duration > 0.0)) invalid("excitation: drift drives the rotor speed negative");
  }
  if (!initial_displacement.empty() && initial_displacement.size() != model.dof()) {
    invalid("excitation: initial displacement must have one entry per dof");
  }
}

ModalTruth exact_modes(const ChainModel& model) {
  model.validate();
  Eigen::EigenSolver<Eigen::MatrixXd> es(model.companion(), false);
  const Eigen::VectorXcd lambda = es.eigenvalues();

  struct Mode {
    double f, zeta;
  };
  std::vector<Mode> modes;
  std::size_t real_count = 0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    const std::complex<double> l = lambda(i);
    const double mag = std::abs(l);
    if (std::abs(l.imag()) <= 1e-12 * std::max(1.0, mag)) {
      ++real_count;
      continue;
    }
    if (l.imag() < 0.0) continue;  // keep one of each conjugate pair
    modes.push_back({mag / (2.0 * std::numbers::pi), -l.real() / mag});
  }
  std::sort(modes.begin(), modes.end(), [](const Mode& a, const Mode& b) { return a.f < b.f; });

  ModalTruth truth;
  for (const Mode& m : modes) {
    truth.frequencies.push_back(m.f);
    truth.damping_ratios.push_back(m.zeta);
  }
  truth.mode_count = modes.size();
  truth.overdamped = real_count / 2;
  return truth;
}

DiscreteModel discretize(const ChainModel& model, double dt) {
  model.validate();
  if (!(dt > 0.0)) invalid("discretize: dt must be > 0");
  const auto n = static_cast<Eigen::Index>(model.dof());
  const Eigen::MatrixXd minv = model.mass_matrix().inverse();
  const Eigen::MatrixXd a = model.companion();
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(2 * n, n);
  b.bottomRows(n) = minv;

  // exp([[A, B], [0, 0]] dt) = [[Ad, Bd], [0, I]]
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(3 * n, 3 * n);
  aug.topLeftCorner(2 * n, 2 * n) = a * dt;
  aug.topRightCorner(2 * n, n) = b * dt;
  const Eigen::MatrixXd e = aug.exp();

  DiscreteModel d;
  d.dt = dt;
  d.ad = e.topLeftCorner(2 * n, 2 * n);
  d.bd = e.topRightCorner(2 * n, n);
  d.c = a.bottomRows(n);
  d.d = minv;
  return d;
}

namespace {

// Phase of line m at time t with linear drift of the 1P frequency.
double harmonic_phase(double base, double multiplier, double drift, double t, double phase0) {
  return 2.0 * std::numbers::pi * multiplier * (base * t + 0.5 * drift * t * t) + phase0;
}

}  // namespace

TimeSeries simulate(const ChainModel& model, const ExcitationSpec& exc) {
  model.validate();
  exc.validate(model);

  const std::size_t n = model.dof();
  const std::size_t count = exc.sample_count();
  const double dt = 1.0 / exc.rate;
  const DiscreteModel dm = discretize(model, dt);

  const HarmonicForcing& h = exc.harmonics;
  const std::size_t hdof = h.dof == std::numeric_limits<std::size_t>::max() ? n - 1 : h.dof;

  std::mt19937_64 rng(exc.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(2 * n));
  for (std::size_t i = 0; i < exc.initial_displacement.size(); ++i) x(static_cast<Eigen::Index>(i)) = exc.initial_displacement[i];

  TimeSeries ts;
  ts.rate = exc.rate;
  for (std::size_t i = 0; i < n; ++i) ts.names.push_back("a" + std::to_string(i + 1));
  ts.data.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(count));
  ts.meta["source"] = "simulation";
  ts.meta["seed"] = std::to_string(exc.seed);

  Eigen::VectorXd u(static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < count; ++k) {
    const double t = static_cast<double>(k) * dt;
    for (std::size_t i = 0; i < n; ++i) u(static_cast<Eigen::Index>(i)) = exc.noise_std * normal(rng);
    for (std::size_t j = 0; j < h.set.size(); ++j) {
      const double ph0 = h.phases.empty() ? 0.0 : h.phases[j];
      u(static_cast<Eigen::Index>(hdof)) +=
          h.amplitudes[j] * std::sin(harmonic_phase(h.set.base_freq, h.set.multipliers[j], exc.drift_rate, t, ph0));
    }
    auto y = ts.data.col(static_cast<Eigen::Index>(k));
    y = dm.c * x + dm.d * u;
    if (exc.sensor_noise_std > 0.0) {
      for (std::size_t i = 0; i < n; ++i) y(static_cast<Eigen::Index>(i)) += exc.sensor_noise_std * normal(rng);
    }
    x = dm.ad * x + dm.bd * u;
  }
  return ts;
}

std::vector<double> rotor_speed_rpm(const ExcitationSpec& exc) {
  const std::size_t count = exc.sample_count();
  std::vector<double> rpm(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double t = static_cast<double>(k) / exc.rate;
    rpm[k] = 60.0 * (exc.harmonics.set.base_freq + exc.drift_rate * t);
  }
  return rpm;
}

ChainModel default_chain() {
  ChainModel m;
  m.masses = {1.0, 1.0, 1.0};
  m.stiffnesses = {450.0, 450.0, 450.0};
  m.dampings = {1.9, 1.9, 1.9};
  return m;
}

ExcitationSpec default_excitation() {
  ExcitationSpec e;
  e.noise_std = 1.0;
  e.harmonics.set.base_freq = 0.37;
  e.harmonics.set.multipliers = {1, 3, 6, 9, 12, 15, 18, 21, 24, 27};
  e.harmonics.amplitudes.assign(10, 5.0);
  e.duration = 600.0;
  e.rate = 25.0;
  e.seed = 1;
  return e;
}

}  // namespace kfssi::sim
