// kfssi command-line tool: simulate, localize, identify, aggregate.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kfssi/config.hpp"
#include "kfssi/error.hpp"
#include "kfssi/io.hpp"
#include "kfssi/workflow.hpp"

namespace fs = std::filesystem;
using namespace kfssi;

namespace {

enum Exit { ok = 0, generic = 1, usage = 2, bad_data = 3, ident = 4, harm = 5, io_error = 6 };

int exit_code(ErrorClass c) {
  switch (c) {
    case ErrorClass::invalid_argument: return usage;
    case ErrorClass::invalid_data: return bad_data;
    case ErrorClass::identification: return ident;
    case ErrorClass::harmonics: return harm;
    case ErrorClass::io: return io_error;
    case ErrorClass::numerical: return generic;
  }
  return generic;
}

// Flags shared by every subcommand; unset flags leave the config untouched.
struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::vector<std::string> inputs;
};

struct Overrides {
  std::optional<std::string> algorithm;
  std::optional<std::size_t> block_rows, order_min, order_max, n_min, datasets;
  std::optional<double> tol_f, tol_d, cluster_tol, duration, rate, gear_ratio;
  std::optional<std::string> harmonics_file;
  std::vector<double> multipliers;
  std::vector<std::string> groups;
  bool indicators = false;
  bool normalize = false;
  bool stable_only = false;
};

RunConfig load(const Common& c, const Overrides& o) {
  RunConfig cfg = c.config_path.empty() ? RunConfig{} : config_from_json(io::read_text(c.config_path));
  if (c.seed) cfg.seed = *c.seed;
  if (c.out) cfg.output_dir = *c.out;
  if (!c.inputs.empty()) cfg.inputs = c.inputs;
  if (o.algorithm) cfg.identify.algorithm = parse_algorithm(*o.algorithm);
  if (o.block_rows) cfg.identify.block_rows = *o.block_rows;
  if (o.order_min) cfg.identify.order_min = *o.order_min;
  if (o.order_max) cfg.identify.order_max = *o.order_max;
  if (o.n_min) cfg.tolerances.n_min = *o.n_min;
  if (o.tol_f) cfg.tolerances.tol_f = *o.tol_f;
  if (o.tol_d) cfg.tolerances.tol_d = *o.tol_d;
  if (o.cluster_tol) cfg.tolerances.cluster_tol = *o.cluster_tol;
  if (o.datasets) cfg.sim.datasets = *o.datasets;
  if (o.duration) cfg.sim.excitation.duration = *o.duration;
  if (o.rate) cfg.sim.excitation.rate = *o.rate;
  if (o.gear_ratio) cfg.harmonics.gear_ratio = *o.gear_ratio;
  if (o.harmonics_file) cfg.harmonics.file = *o.harmonics_file;
  if (!o.multipliers.empty()) cfg.harmonics.multipliers = o.multipliers;
  if (!o.groups.empty()) cfg.sim.groups = o.groups;
  if (o.indicators) cfg.harmonics.indicators = true;
  if (o.normalize) cfg.identify.normalize = true;
  if (o.stable_only) cfg.tolerances.stable_only = true;
  cfg.validate();
  return cfg;
}

// Directories expand to their *.csv files in name order.
std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  for (const std::string& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(in)) {
        if (e.is_regular_file() && e.path().extension() == ".csv") found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else {
      out.emplace_back(in);
    }
  }
  if (out.empty()) invalid("no input datasets (use --input)");
  return out;
}

std::vector<io::Dataset> read_all(const RunConfig& cfg) {
  std::vector<io::Dataset> out;
  for (const fs::path& p : expand_inputs(cfg.inputs)) out.push_back(io::read_dataset(p));
  return out;
}

void note(const fs::path& p) { std::cout << "wrote " << p.string() << '\n'; }

int cmd_simulate(const RunConfig& cfg) {
  const fs::path dir = cfg.output_dir;
  const workflow::SimOutput sim = workflow::simulate_datasets(cfg.sim, cfg.seed);
  io::ensure_dir(dir);
  for (std::size_t i = 0; i < sim.datasets.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "dataset_%02zu.csv", i + 1);
    io::write_dataset(dir / name, sim.datasets[i]);
    note(dir / name);
  }
  io::write_text(dir / "truth.json", io::truth_json(cfg.sim.model, cfg.sim.excitation, sim.truth, sim.seeds));
  note(dir / "truth.json");
  io::write_text(dir / "config.json", config_to_json(cfg));
  note(dir / "config.json");
  return ok;
}

int cmd_localize(const RunConfig& cfg) {
  const std::vector<io::Dataset> data = read_all(cfg);
  if (data.size() != 1) invalid("localize takes exactly one dataset");
  const workflow::LocalizeResult r = workflow::localize(data[0], cfg.harmonics);
  const fs::path dir = cfg.output_dir;
  io::ensure_dir(dir);
  io::write_text(dir / "harmonics.json",
                 io::harmonics_json(r.set, r.method, r.mean_speed_hz, r.coefficient_of_variation, r.verdicts));
  note(dir / "harmonics.json");
  if (r.kurtosis) {
    io::write_text(dir / "kurtosis.csv", io::indicator_csv(*r.kurtosis));
    note(dir / "kurtosis.csv");
  }
  if (r.entropy) {
    io::write_text(dir / "entropy.csv", io::indicator_csv(*r.entropy));
    note(dir / "entropy.csv");
  }
  const std::vector<std::string> labels = r.set.labels();
  const std::vector<double> freqs = r.set.freqs();
  std::cout << "harmonics (" << r.method << "):";
  for (std::size_t i = 0; i < freqs.size(); ++i) std::cout << ' ' << labels[i] << '=' << freqs[i] << "Hz";
  std::cout << '\n';
  return ok;
}

int cmd_identify(const RunConfig& cfg, const std::optional<std::string>& lfactor_in,
                 const std::optional<std::string>& lfactor_out) {
  const std::vector<io::Dataset> data = read_all(cfg);
  std::vector<TimeSeries> series;
  std::vector<HarmonicSet> harmonics;
  const bool needs_harmonics = cfg.identify.algorithm != Algorithm::ssi;
  for (const io::Dataset& ds : data) {
    series.push_back(workflow::prepare(ds));
    harmonics.push_back(needs_harmonics ? workflow::resolve_harmonics(ds, cfg.harmonics) : HarmonicSet{});
  }
  std::optional<LFactor> start;
  if (lfactor_in) {
    if (cfg.identify.algorithm != Algorithm::enhanced_kfssi) invalid("--lfactor-in requires enhanced-kfssi");
    start = io::lfactor_from_json(io::read_text(*lfactor_in));
  }
  const workflow::IdentifyOutcome r = workflow::identify(series, harmonics, cfg, start);

  const fs::path dir = cfg.output_dir;
  io::ensure_dir(dir);
  const double scale = cfg.identify.normalize ? series[0].rate / 2.0 : 1.0;
  io::write_text(dir / "stabilization.csv", io::diagram_csv(r.diagram, scale));
  note(dir / "stabilization.csv");
  io::write_text(dir / "spectrum.csv",
                 io::spectrum_csv(workflow::mean_spectrum(series, cfg.identify.welch_segment), series[0].names, scale));
  note(dir / "spectrum.csv");
  if (lfactor_out) {
    if (!r.factor) invalid("--lfactor-out is not available for mlsce");
    io::write_text(*lfactor_out, io::lfactor_json(*r.factor));
    note(*lfactor_out);
  }
  if (!r.interpretation) fail(ErrorClass::identification, *r.interpretation_error);
  io::write_text(dir / "interpretation.json",
                 io::interpretation_json(*r.interpretation, to_string(cfg.identify.algorithm), r.diagram, scale));
  note(dir / "interpretation.json");
  std::cout << "selected order " << r.interpretation->selected_order << '\n';
  for (const ModalEstimate& m : r.interpretation->modes) {
    std::cout << "  f=" << m.frequency / scale << (scale == 1.0 ? " Hz" : "") << "  zeta=" << m.damping_pct << " %\n";
  }
  return ok;
}

int cmd_aggregate(const RunConfig& cfg) {
  const std::vector<io::Dataset> data = read_all(cfg);
  if (data.size() < 3) invalid("aggregate needs at least 3 datasets");
  const workflow::AggregateResult r = workflow::aggregate(data, cfg);
  for (const std::string& w : r.warnings) std::cerr << "warning: " << w << '\n';
  const fs::path dir = cfg.output_dir;
  io::ensure_dir(dir);
  const double scale = cfg.identify.normalize ? data[0].ts.rate / 2.0 : 1.0;
  io::write_text(dir / "box_stats.csv", io::box_stats_csv(r.rows, scale));
  note(dir / "box_stats.csv");
  return ok;
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "Master seed (overrides the config)");
  app->add_option("-o,--out", c.out, "Output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Output-only modal identification with harmonic removal"};
  app.require_subcommand(1);
  Common common;
  Overrides o;
  std::optional<std::string> lfactor_in, lfactor_out;

  CLI::App* sim = app.add_subcommand("simulate", "Write simulated datasets and truth.json");
  add_common(sim, common);
  sim->add_option("--datasets", o.datasets, "Number of datasets");
  sim->add_option("--duration", o.duration, "Seconds per dataset");
  sim->add_option("--rate", o.rate, "Sample rate (Hz)");
  sim->add_option("--groups", o.groups, "Group labels, cycled over the datasets");

  CLI::App* loc = app.add_subcommand("localize", "Locate harmonic lines of one dataset");
  add_common(loc, common);
  loc->add_option("-i,--input", common.inputs, "Dataset CSV");
  loc->add_option("--multipliers", o.multipliers, "Harmonic multipliers, e.g. 1 3 6 9 12");
  loc->add_option("--gear-ratio", o.gear_ratio, "Generator/rotor speed ratio of the speed column");
  loc->add_flag("--indicators", o.indicators, "Also write kurtosis and entropy sweeps");

  CLI::App* id = app.add_subcommand("identify", "Stabilization diagram and automatic interpretation");
  add_common(id, common);
  id->add_option("-i,--input", common.inputs, "Dataset CSVs or directories");
  id->add_option("-a,--algorithm", o.algorithm, "ssi | kfssi | enhanced-kfssi | mlsce");
  id->add_option("--harmonics", o.harmonics_file, "harmonics.json (default: rotor column)");
  id->add_option("--multipliers", o.multipliers, "Harmonic multipliers for the rotor column");
  id->add_option("--block-rows", o.block_rows, "Block rows of the Hankel matrices");
  id->add_option("--order-min", o.order_min, "Lowest model order (even)");
  id->add_option("--order-max", o.order_max, "Highest model order (even)");
  id->add_option("--tol-f", o.tol_f, "Stability tolerance, relative frequency");
  id->add_option("--tol-d", o.tol_d, "Stability tolerance, damping percentage points");
  id->add_option("--cluster-tol", o.cluster_tol, "Clustering tolerance, relative frequency");
  id->add_option("--n-min", o.n_min, "Minimum cluster size");
  id->add_flag("--stable-only", o.stable_only, "Cluster only poles flagged stable");
  id->add_option("--lfactor-in", lfactor_in, "Continue from a saved L factor (enhanced-kfssi)");
  id->add_option("--lfactor-out", lfactor_out, "Save the accumulated L factor");
  id->add_flag("--normalize", o.normalize, "Report frequencies as a fraction of Nyquist");

  CLI::App* agg = app.add_subcommand("aggregate", "Leave-one-out box statistics");
  add_common(agg, common);
  agg->add_option("-i,--input", common.inputs, "Dataset CSVs or directories");
  agg->add_option("-a,--algorithm", o.algorithm, "kfssi (default family) or ssi");
  agg->add_option("--harmonics", o.harmonics_file, "harmonics.json (default: rotor column)");
  agg->add_option("--multipliers", o.multipliers, "Harmonic multipliers for the rotor column");
  agg->add_option("--block-rows", o.block_rows, "Block rows of the Hankel matrices");
  agg->add_option("--n-min", o.n_min, "Minimum cluster size");
  agg->add_flag("--stable-only", o.stable_only, "Cluster only poles flagged stable");
  agg->add_flag("--normalize", o.normalize, "Report frequencies as a fraction of Nyquist");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? ok : usage;
  }

  try {
    const RunConfig cfg = load(common, o);
    if (sim->parsed()) return cmd_simulate(cfg);
    if (loc->parsed()) return cmd_localize(cfg);
    if (id->parsed()) return cmd_identify(cfg, lfactor_in, lfactor_out);
    if (agg->parsed()) return cmd_aggregate(cfg);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.error_class()) << "): " << e.what() << '\n';
    return exit_code(e.error_class());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return generic;
  }
  return generic;
}
