#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "kfssi/harmonics.hpp"
#include "kfssi/signal.hpp"

namespace kfssi::kalman {

/// x[k+1] = F x[k] + w,  y[k] = H x[k] + v, with the noise covariances given
/// by their lower-triangular square roots.
struct LinearGaussianModel {
  Eigen::MatrixXd transition;        // F, n x n
  Eigen::MatrixXd output_map;        // H, m x n
  Eigen::MatrixXd process_sqrt;      // Q^(1/2), n x n
  Eigen::MatrixXd measurement_sqrt;  // R^(1/2), m x m
};

/// Undamped oscillator bank: one 2x2 rotation block per harmonic line, the
/// output sums the first state of every block. One filter runs per channel
/// with the shared bank; noise levels are per channel and shared by all
/// blocks of that channel.
struct OscillatorBank {
  std::vector<double> freqs;  // Hz
  double dt = 0.0;
  Eigen::MatrixXd transition;
  Eigen::RowVectorXd output_map;
  std::vector<double> process_noise_std;      // per channel
  std::vector<double> measurement_noise_std;  // per channel

  std::size_t state_dim() const { return 2 * freqs.size(); }
  std::size_t channels() const { return measurement_noise_std.size(); }
  LinearGaussianModel channel_model(std::size_t channel) const;
};

/// Throws for frequencies at/above Nyquist, duplicates within 1e-9 Hz, or
/// non-positive noise levels.
OscillatorBank build_bank(std::span<const double> freqs, double dt, std::vector<double> process_noise_std,
                          std::vector<double> measurement_noise_std);
OscillatorBank build_bank(const HarmonicSet& harmonics, double dt, std::vector<double> process_noise_std,
                          std::vector<double> measurement_noise_std);

/// Prior (predicted) estimate with P = S S^T, S lower triangular with
/// nonnegative diagonal.
struct FilterState {
  Eigen::VectorXd x;
  Eigen::MatrixXd sqrt_cov;
};

struct StepResult {
  FilterState filtered;   // x[k|k], S[k|k]
  FilterState predicted;  // x[k+1|k], S[k+1|k]
  Eigen::VectorXd y_per;  // H x[k|k]
};

/// One square-root covariance filter step. The measurement update
/// triangularizes [[R^(1/2), H S], [0, S]] and the time update
/// triangularizes [F S, Q^(1/2)]; P itself is never formed. `step` only
/// labels error messages.
StepResult srcf_step(const LinearGaussianModel& model, const FilterState& prior, const Eigen::VectorXd& y,
                     std::size_t step = 0);

struct Tuning {
  std::vector<double> process_noise_std;
  std::vector<double> measurement_noise_std;
};

/// sigma_w = rel_process * RMS(channel); sigma_v = RMS of the channel after
/// least-squares removal of sinusoids at the harmonic frequencies.
Tuning default_tuning(const TimeSeries& ts, const HarmonicSet& harmonics, double rel_process = 1e-4);

/// Which state feeds the periodic output H x. The filtered state carries a
/// white K * innovation term whose row space, once projected out, biases the
/// damping of modes near the harmonics upward; the one-step prediction does
/// not depend on y[k].
enum class PeriodicOutput { predicted, filtered };

/// Runs the filter over every channel from x = 0, S = initial_sqrt_cov * I and
/// returns the periodic subsignal with the input's names and rate.
TimeSeries estimate_periodic(const OscillatorBank& bank, const TimeSeries& ts, double initial_sqrt_cov = 10.0,
                             PeriodicOutput output = PeriodicOutput::predicted);

}  // namespace kfssi::kalman
