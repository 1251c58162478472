#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kfssi/identify.hpp"
#include "kfssi/sim.hpp"
#include "kfssi/stabilize.hpp"

namespace kfssi {

enum class Algorithm { ssi, kfssi, enhanced_kfssi, mlsce };

const char* to_string(Algorithm a);
Algorithm parse_algorithm(const std::string& s);

struct SimConfig {
  sim::ChainModel model = sim::default_chain();
  sim::ExcitationSpec excitation = sim::default_excitation();
  std::size_t datasets = 10;
  std::vector<std::string> groups;  // optional label per dataset, cycled
};

struct HarmonicsConfig {
  std::vector<double> multipliers{1, 3, 6, 9, 12, 15, 18, 21, 24, 27};
  double gear_ratio = 1.0;
  std::optional<std::string> file;  // harmonics JSON; overrides rotor columns
  bool indicators = false;          // also sweep kurtosis and entropy
  std::string indicator_channel;    // empty = first sensor
  double grid_lo = 0.0;             // 0 = one bandwidth above 0
  double grid_hi = 0.0;             // 0 = one bandwidth below Nyquist
  double bandwidth = 0.0;           // 0 = 2% of Nyquist
  double grid_step = 0.0;           // 0 = bandwidth / 2
  int filter_order = 4;
  std::size_t entropy_bins = 32;
  double kurtosis_threshold = 2.0;
  double kurtosis_noise = 2.6;
};

struct KalmanConfig {
  double rel_process_noise = 1e-4;
  double initial_sqrt_cov = 10.0;
  kalman::PeriodicOutput periodic_output = kalman::PeriodicOutput::predicted;
  std::vector<double> process_noise_std;      // per channel; empty = default tuning
  std::vector<double> measurement_noise_std;  // per channel; empty = default tuning
};

struct IdentifyConfig {
  Algorithm algorithm = Algorithm::enhanced_kfssi;
  std::size_t block_rows = 30;
  std::size_t order_min = 2;
  std::size_t order_max = 40;
  std::size_t order_step = 2;
  std::size_t lsce_max_lag = 375;  // samples
  std::size_t lsce_reference = 0;
  std::size_t welch_segment = 1024;
  bool normalize = false;  // report frequencies as a fraction of Nyquist
};

struct ToleranceConfig {
  double tol_f = 0.01;
  double tol_d = 5.0;  // percentage points
  double cluster_tol = 0.02;
  std::size_t n_min = 3;
  double max_damping_pct = 20.0;
  double min_damping_pct = -1.0;
  double match_tol = 0.05;
  bool stable_only = false;  // cluster only poles flagged stable
};

/// Everything a run needs. Loaded from JSON (see docs/config.md); missing
/// keys keep these defaults.
struct RunConfig {
  std::vector<std::string> inputs;
  std::string output_dir = "out";
  std::uint64_t seed = 1;
  SimConfig sim;
  HarmonicsConfig harmonics;
  KalmanConfig kalman;
  IdentifyConfig identify;
  ToleranceConfig tolerances;

  /// Throws Error(invalid_argument) naming the offending key.
  void validate() const;

  std::vector<std::size_t> orders() const;
  PipelineConfig pipeline() const;
  StabilityTolerances stability() const;
  InterpretOptions interpret() const;
};

RunConfig config_from_json(const std::string& text);
std::string config_to_json(const RunConfig& cfg);

}  // namespace kfssi
