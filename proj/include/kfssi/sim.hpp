#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "kfssi/harmonics.hpp"
#include "kfssi/signal.hpp"

namespace kfssi::sim {

/// Fixed chain topology: spring/dashpot i joins mass i-1 and mass i; the
/// first pair joins mass 0 to the ground.
struct ChainModel {
  std::vector<double> masses;       // kg
  std::vector<double> stiffnesses;  // N/m
  std::vector<double> dampings;     // N s/m

  std::size_t dof() const { return masses.size(); }
  void validate() const;

  Eigen::MatrixXd mass_matrix() const;
  Eigen::MatrixXd stiffness_matrix() const;
  Eigen::MatrixXd damping_matrix() const;
  /// First-order form x' = A x + B u with x = [q; q'].
  Eigen::MatrixXd companion() const;
};

struct HarmonicForcing {
  HarmonicSet set;
  std::vector<double> amplitudes;  // N, one per line
  std::vector<double> phases;      // rad, one per line (empty = all zero)
  std::size_t dof = std::numeric_limits<std::size_t>::max();  // max = last mass
};

struct ExcitationSpec {
  double noise_std = 1.0;  // N, white force per DOF
  HarmonicForcing harmonics;
  double drift_rate = 0.0;  // Hz/s of the 1P line; line m drifts m times as fast
  double duration = 600.0;  // s
  double rate = 25.0;       // Hz
  std::uint64_t seed = 1;
  std::vector<double> initial_displacement;  // m, empty = at rest
  double sensor_noise_std = 0.0;             // m/s^2 added to every output

  std::size_t sample_count() const;
  void validate(const ChainModel& model) const;
};

struct ModalTruth {
  std::vector<double> frequencies;     // Hz, ascending
  std::vector<double> damping_ratios;  // fraction of critical
  std::size_t mode_count = 0;
  std::size_t overdamped = 0;  // real eigenvalue pairs, excluded above
};

/// Exact modes from the eigenvalues of the companion matrix:
/// f = |lambda| / 2 pi, zeta = -Re(lambda) / |lambda|.
ModalTruth exact_modes(const ChainModel& model);

/// Zero-order-hold discretization of the companion model with acceleration
/// output y = C x + D u.
struct DiscreteModel {
  Eigen::MatrixXd ad, bd, c, d;
  double dt = 0.0;
};

DiscreteModel discretize(const ChainModel& model, double dt);

/// Acceleration response at every mass, channels "a1".."aN". Bit-reproducible
/// for a given seed.
TimeSeries simulate(const ChainModel& model, const ExcitationSpec& exc);

/// Rotor speed in rpm that produces the harmonic lines of `exc`, one value
/// per sample.
std::vector<double> rotor_speed_rpm(const ExcitationSpec& exc);

/// Three-mass chain whose modes interleave with the default ten harmonics.
ChainModel default_chain();
/// Ten minutes at 25 Hz, ten harmonics 1P..27P at 0.37 Hz.
ExcitationSpec default_excitation();

}  // namespace kfssi::sim
