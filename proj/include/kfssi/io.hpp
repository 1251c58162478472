#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kfssi/harmonics.hpp"
#include "kfssi/identify.hpp"
#include "kfssi/signal.hpp"
#include "kfssi/sim.hpp"
#include "kfssi/stabilize.hpp"

namespace kfssi::io {

/// A CSV dataset: header `t,<ch1>,<ch2>,...`. Columns named rotor_rpm,
/// rotor_hz, yaw (rad) and group are side channels, not sensors.
struct Dataset {
  TimeSeries ts;
  std::optional<std::vector<double>> rotor_rpm;
  std::optional<std::vector<double>> rotor_hz;
  std::optional<std::vector<double>> yaw;
  std::optional<std::string> group;
  std::string source;
};

/// Reads a dataset. The rate comes from the `t` column, which must be
/// uniformly spaced. Gaps (empty cells, nan, inf) raise Error(invalid_data).
Dataset read_dataset(const std::filesystem::path& path);
void write_dataset(const std::filesystem::path& path, const Dataset& ds);

void ensure_dir(const std::filesystem::path& dir);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

std::string truth_json(const sim::ChainModel& model, const sim::ExcitationSpec& exc, const sim::ModalTruth& truth,
                       const std::vector<std::uint64_t>& seeds);

std::string harmonics_json(const HarmonicSet& set, const std::string& method, double mean_speed_hz,
                           double coefficient_of_variation, const std::vector<CandidateVerdict>& verdicts);
HarmonicSet read_harmonics(const std::filesystem::path& path);

/// freq,value,valid,kind rows.
std::string indicator_csv(const IndicatorCurve& curve);

/// order,frequency,damping_pct,stable_flag rows; stable_flag is empty for
/// the first order. Frequencies are divided by `freq_scale` (1 = Hz).
std::string diagram_csv(const StabilizationDiagram& diag, double freq_scale = 1.0);

std::string interpretation_json(const InterpretationResult& r, const std::string& algorithm,
                                const StabilizationDiagram& diag, double freq_scale = 1.0);

/// freq followed by one power column per channel.
std::string spectrum_csv(const Spectrum& s, const std::vector<std::string>& names, double freq_scale = 1.0);

struct BoxRow {
  std::string group;
  std::string method;
  std::size_t mode = 0;
  ModeBox box;
};

std::string box_stats_csv(const std::vector<BoxRow>& rows, double freq_scale = 1.0);

/// JSON matrix container: metadata plus row-major `l`, doubles written with
/// round-trip precision so a reload is bit-identical.
std::string lfactor_json(const LFactor& l);
LFactor lfactor_from_json(const std::string& text);

}  // namespace kfssi::io
