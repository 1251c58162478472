#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kfssi/harmonics.hpp"
#include "kfssi/kalman.hpp"
#include "kfssi/signal.hpp"

namespace kfssi {

/// Block-Hankel matrices of the periodic subsignal and of the raw signal,
/// aligned sample for sample (same layout as build_hankel).
struct HankelPair {
  Eigen::MatrixXd y_per;
  Eigen::MatrixXd y_raw;
  std::size_t block_rows = 0;
  std::size_t channels = 0;
  double rate = 0.0;

  std::size_t columns() const { return static_cast<std::size_t>(y_raw.cols()); }
  void validate() const;
};

HankelPair make_hankel_pair(const TimeSeries& periodic, const TimeSeries& raw, std::size_t block_rows);

/// Lower-triangular factor of the LQ decomposition of [Y_per; Y_raw]:
///
///   [ L11   0  ]
///   [ L21  L22 ]
///
/// Q is never stored. Diagonals are nonnegative, so for full-rank data the
/// factor is unique and two routes to it can be compared entry by entry.
struct LFactor {
  Eigen::MatrixXd l;
  std::size_t periodic_rows = 0;
  std::size_t raw_rows = 0;
  std::size_t block_rows = 0;
  std::size_t channels = 0;
  double rate = 0.0;
  std::size_t sample_count = 0;  // Hankel columns accumulated so far
  std::size_t batches = 0;
  bool periodic_rank_deficient = false;  // some diag(L11) ~ 0

  Eigen::MatrixXd l11() const;
  Eigen::MatrixXd l21() const;
  Eigen::MatrixXd l22() const;
};

/// LQ of the stacked pair. An all-zero periodic block yields L11 = L21 = 0
/// and L22 = LQ(Y_raw).
LFactor stack_lq(const HankelPair& pair);

/// LQ of [L | [Y_per; Y_raw]_next]: same L as decomposing all batches side
/// by side, without any state continuity between them. Throws, naming the
/// field, on metadata mismatch.
LFactor concat(const LFactor& existing, const HankelPair& next);

/// LQ of [L_a | L_b]; equivalent to concatenating the raw batches behind both.
LFactor merge(const LFactor& a, const LFactor& b);

/// Raw rows with the row space of the periodic rows projected out; carried
/// by L22 (its implicit Q rows are orthonormal).
struct EditedData {
  Eigen::MatrixXd l22;
  std::size_t block_rows = 0;
  std::size_t channels = 0;
  double rate = 0.0;
};

EditedData remove_harmonic_rows(const LFactor& l);

/// Plain SSI input: LQ of the raw Hankel matrix alone.
EditedData raw_edited_data(const TimeSeries& raw, std::size_t block_rows);

struct StateSpaceModel {
  Eigen::MatrixXd a;  // n x n
  Eigen::MatrixXd c;  // channels x n
  std::size_t order = 0;
  double dt = 0.0;
};

/// Data-driven SSI with unweighted principal components. The raw rows are
/// split into past (block_rows/2 blocks) and future; the projection of the
/// future onto the past is L_fp Q_p^T, so its SVD is that of L_fp. The SVD
/// is computed once and reused for every order.
class SubspaceIdentifier {
 public:
  explicit SubspaceIdentifier(const EditedData& data);

  /// Throws Error(identification) "order exceeds rank" when the order-th
  /// singular value is below 1e-12 of the largest.
  StateSpaceModel model(std::size_t order) const;

  const Eigen::VectorXd& singular_values() const { return sv_; }
  std::size_t max_order() const;

 private:
  Eigen::MatrixXd u_;
  Eigen::VectorXd sv_;
  std::size_t channels_;
  std::size_t future_blocks_;
  double dt_;
};

StateSpaceModel ssi(const EditedData& data, std::size_t order);

struct ModalEstimate {
  double frequency = 0.0;    // Hz
  double damping_pct = 0.0;  // 100 * zeta
  std::size_t order = 0;
  std::complex<double> pole;  // discrete eigenvalue
  double channel_energy = 0.0;
  bool unstable = false;  // |pole| > 1
};

struct ModalSet {
  std::vector<ModalEstimate> modes;  // ascending frequency
  std::size_t real_poles = 0;
  std::size_t zero_poles = 0;
};

/// lambda = ln(mu)/dt, f = |lambda|/2pi, zeta = -Re(lambda)/|lambda|.
ModalEstimate pole_to_modal(std::complex<double> mu, double dt, std::size_t order);

ModalSet modal_params(const StateSpaceModel& model);

struct PipelineConfig {
  std::size_t block_rows = 30;
  std::vector<std::size_t> orders;  // empty = 2, 4, ..., 40 capped at the feasible maximum
  double rel_process_noise = 1e-4;
  double initial_sqrt_cov = 10.0;
  kalman::PeriodicOutput periodic_output = kalman::PeriodicOutput::predicted;
  std::optional<kalman::Tuning> tuning;
};

struct OrderResult {
  std::size_t order = 0;
  ModalSet modes;
  std::optional<std::string> error;
};

std::vector<std::size_t> default_orders(std::size_t channels, std::size_t block_rows);

/// Kalman estimate of the periodic subsignal, Hankel pair, stacked LQ.
LFactor kfssi_factor(const TimeSeries& ts, const HarmonicSet& harmonics, const PipelineConfig& cfg);

/// SSI + modal extraction per order; failures are recorded, not thrown.
std::vector<OrderResult> identify_orders(const EditedData& data, std::span<const std::size_t> orders);

std::vector<OrderResult> kfssi_pipeline(const TimeSeries& ts, const HarmonicSet& harmonics, const PipelineConfig& cfg);
std::vector<OrderResult> ssi_pipeline(const TimeSeries& ts, const PipelineConfig& cfg);

}  // namespace kfssi
