#include "kfssi/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "kfssi/error.hpp"

namespace kfssi::io {

using nlohmann::json;

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Empty cells and unparsable text become NaN so validation can report gaps.
double parse(const std::string& s) {
  double v = std::nan("");
  if (s.empty()) return v;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nan("");
  return v;
}

json modal_json(const ModalEstimate& m, double freq_scale) {
  return json{{"frequency", m.frequency / freq_scale},
              {"damping_pct", m.damping_pct},
              {"order", m.order},
              {"pole_re", m.pole.real()},
              {"pole_im", m.pole.imag()},
              {"channel_energy", m.channel_energy},
              {"unstable", m.unstable}};
}

}  // namespace

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    fail(ErrorClass::io, "cannot create output directory '" + dir.string() + "'");
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) fail(ErrorClass::io, "cannot open '" + path.string() + "' for writing");
  os << text;
  os.close();
  if (!os) fail(ErrorClass::io, "write to '" + path.string() + "' failed");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorClass::io, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::istringstream is(read_text(path));
  std::string line;
  if (!std::getline(is, line)) fail(ErrorClass::invalid_data, path.string() + ": empty file");
  const std::vector<std::string> header = split(line);
  if (header.empty() || header[0] != "t") fail(ErrorClass::invalid_data, path.string() + ": first column must be 't'");

  std::vector<std::vector<double>> cols(header.size());
  std::vector<std::string> group_values;
  std::size_t group_col = header.size();
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == "group") group_col = j;
  }
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> cells = split(line);
    if (cells.size() != header.size()) {
      fail(ErrorClass::invalid_data, path.string() + ": line " + std::to_string(row) + " has " +
                                         std::to_string(cells.size()) + " cells, expected " +
                                         std::to_string(header.size()));
    }
    for (std::size_t j = 0; j < cells.size(); ++j) {
      if (j == group_col) {
        group_values.push_back(cells[j]);
      } else {
        cols[j].push_back(parse(cells[j]));
      }
    }
  }
  const std::size_t n = cols[0].size() > 0 ? cols[0].size() : group_values.size();
  if (n < 2) fail(ErrorClass::invalid_data, path.string() + ": need at least 2 samples");

  const std::vector<double>& t = cols[0];
  for (double v : t) {
    if (!std::isfinite(v)) fail(ErrorClass::invalid_data, path.string() + ": non-finite time stamp");
  }
  const double span = t.back() - t.front();
  if (!(span > 0.0)) fail(ErrorClass::invalid_data, path.string() + ": time column must increase");
  const double dt = span / static_cast<double>(n - 1);
  for (std::size_t k = 0; k < n; ++k) {
    const double expect = t.front() + static_cast<double>(k) * dt;
    if (std::abs(t[k] - expect) > 1e-3 * dt) {
      fail(ErrorClass::invalid_data, path.string() + ": non-uniform sampling at sample " + std::to_string(k));
    }
  }

  Dataset ds;
  ds.source = path.string();
  ds.ts.rate = 1.0 / dt;
  // Snap rates like 24.999999 from rounded time stamps to the nearest 1e-6 Hz.
  const double snapped = std::round(ds.ts.rate * 1e6) / 1e6;
  if (std::abs(snapped - ds.ts.rate) < 1e-6 * ds.ts.rate) ds.ts.rate = snapped;
  ds.ts.meta["t0"] = num(t.front());

  std::vector<std::size_t> sensors;
  for (std::size_t j = 1; j < header.size(); ++j) {
    const std::string& h = header[j];
    if (h == "group") continue;
    if (h == "rotor_rpm") {
      ds.rotor_rpm = cols[j];
    } else if (h == "rotor_hz") {
      ds.rotor_hz = cols[j];
    } else if (h == "yaw") {
      ds.yaw = cols[j];
    } else {
      sensors.push_back(j);
    }
  }
  if (sensors.empty()) fail(ErrorClass::invalid_data, path.string() + ": no sensor channels");
  ds.ts.data.resize(static_cast<Eigen::Index>(sensors.size()), static_cast<Eigen::Index>(n));
  for (std::size_t s = 0; s < sensors.size(); ++s) {
    ds.ts.names.push_back(header[sensors[s]]);
    for (std::size_t k = 0; k < n; ++k) {
      ds.ts.data(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(k)) = cols[sensors[s]][k];
    }
  }
  for (const auto* side : {&ds.rotor_rpm, &ds.rotor_hz, &ds.yaw}) {
    if (*side) {
      for (double v : **side) {
        if (!std::isfinite(v)) fail(ErrorClass::invalid_data, path.string() + ": gap in a side channel");
      }
    }
  }
  if (!group_values.empty()) {
    for (const std::string& g : group_values) {
      if (g != group_values.front()) fail(ErrorClass::invalid_data, path.string() + ": group column must be constant");
    }
    ds.group = group_values.front();
  }
  try {
    ds.ts.validate();
  } catch (const Error& e) {
    fail(ErrorClass::invalid_data, path.string() + ": " + e.what());
  }
  return ds;
}

void write_dataset(const std::filesystem::path& path, const Dataset& ds) {
  const std::size_t n = ds.ts.samples();
  std::ostringstream os;
  os << 't';
  for (const std::string& name : ds.ts.names) os << ',' << name;
  if (ds.rotor_rpm) os << ",rotor_rpm";
  if (ds.rotor_hz) os << ",rotor_hz";
  if (ds.yaw) os << ",yaw";
  if (ds.group) os << ",group";
  os << '\n';
  const double dt = ds.ts.dt();
  for (std::size_t k = 0; k < n; ++k) {
    os << num(static_cast<double>(k) * dt);
    for (Eigen::Index c = 0; c < ds.ts.data.rows(); ++c) os << ',' << num(ds.ts.data(c, static_cast<Eigen::Index>(k)));
    if (ds.rotor_rpm) os << ',' << num((*ds.rotor_rpm)[k]);
    if (ds.rotor_hz) os << ',' << num((*ds.rotor_hz)[k]);
    if (ds.yaw) os << ',' << num((*ds.yaw)[k]);
    if (ds.group) os << ',' << *ds.group;
    os << '\n';
  }
  write_text(path, os.str());
}

std::string truth_json(const sim::ChainModel& model, const sim::ExcitationSpec& exc, const sim::ModalTruth& truth,
                       const std::vector<std::uint64_t>& seeds) {
  json modes = json::array();
  for (std::size_t i = 0; i < truth.frequencies.size(); ++i) {
    modes.push_back({{"frequency", truth.frequencies[i]},
                     {"damping_ratio", truth.damping_ratios[i]},
                     {"damping_pct", 100.0 * truth.damping_ratios[i]}});
  }
  const HarmonicSet& h = exc.harmonics.set;
  json j{{"schema", "kfssi-truth/1"},
         {"modes", modes},
         {"overdamped", truth.overdamped},
         {"model", {{"masses", model.masses}, {"stiffnesses", model.stiffnesses}, {"dampings", model.dampings}}},
         {"harmonics",
          {{"base_freq", h.base_freq},
           {"multipliers", h.multipliers},
           {"freqs", h.freqs()},
           {"labels", h.labels()},
           {"amplitudes", exc.harmonics.amplitudes},
           {"drift_rate", exc.drift_rate}}},
         {"excitation",
          {{"noise_std", exc.noise_std},
           {"sensor_noise_std", exc.sensor_noise_std},
           {"duration", exc.duration},
           {"rate", exc.rate}}},
         {"seeds", seeds}};
  return j.dump(2) + "\n";
}

std::string harmonics_json(const HarmonicSet& set, const std::string& method, double mean_speed_hz,
                           double coefficient_of_variation, const std::vector<CandidateVerdict>& verdicts) {
  json v = json::array();
  for (const CandidateVerdict& c : verdicts) {
    v.push_back({{"freq", c.freq},
                 {"label", c.label},
                 {"value", std::isfinite(c.value) ? json(c.value) : json(nullptr)},
                 {"verdict", to_string(c.verdict)}});
  }
  json j{{"schema", "kfssi-harmonics/1"},
         {"method", method},
         {"base_freq", set.base_freq},
         {"multipliers", set.multipliers},
         {"freqs", set.freqs()},
         {"labels", set.labels()},
         {"mean_speed_hz", mean_speed_hz},
         {"coefficient_of_variation", coefficient_of_variation},
         {"verdicts", v}};
  return j.dump(2) + "\n";
}

HarmonicSet read_harmonics(const std::filesystem::path& path) {
  try {
    const json j = json::parse(read_text(path));
    HarmonicSet s;
    if (j.contains("base_freq") && j.contains("multipliers")) {
      s.base_freq = j.at("base_freq").get<double>();
      s.multipliers = j.at("multipliers").get<std::vector<double>>();
    } else if (j.contains("freqs")) {
      s = HarmonicSet::from_freqs(j.at("freqs").get<std::vector<double>>());
    } else {
      invalid("expected base_freq + multipliers or freqs");
    }
    return s;
  } catch (const json::exception& e) {
    fail(ErrorClass::invalid_argument, path.string() + ": " + e.what());
  } catch (const Error& e) {
    fail(e.error_class(), path.string() + ": " + e.what());
  }
}

std::string indicator_csv(const IndicatorCurve& curve) {
  std::ostringstream os;
  os << "freq,value,valid,kind\n";
  for (std::size_t i = 0; i < curve.freqs.size(); ++i) {
    os << num(curve.freqs[i]) << ',' << (curve.valid[i] ? num(curve.values[i]) : std::string()) << ','
       << (curve.valid[i] ? 1 : 0) << ',' << to_string(curve.kind) << '\n';
  }
  return os.str();
}

std::string diagram_csv(const StabilizationDiagram& diag, double freq_scale) {
  std::ostringstream os;
  os << "order,frequency,damping_pct,stable_flag\n";
  for (std::size_t i = 0; i < diag.entries.size(); ++i) {
    const ModalEstimate& m = diag.entries[i];
    os << m.order << ',' << num(m.frequency / freq_scale) << ',' << num(m.damping_pct) << ',';
    if (diag.stable[i]) os << (*diag.stable[i] ? 1 : 0);
    os << '\n';
  }
  return os.str();
}

std::string interpretation_json(const InterpretationResult& r, const std::string& algorithm,
                                const StabilizationDiagram& diag, double freq_scale) {
  json modes = json::array();
  for (const ModalEstimate& m : r.modes) modes.push_back(modal_json(m, freq_scale));
  json unique = json::array();
  for (double f : r.unique_freqs) unique.push_back(f / freq_scale);
  json failures = json::array();
  for (const auto& [order, what] : diag.failures) failures.push_back({{"order", order}, {"error", what}});
  json j{{"schema", "kfssi-interpretation/1"},
         {"algorithm", algorithm},
         {"frequency_unit", freq_scale == 1.0 ? "Hz" : "fraction of Nyquist"},
         {"selected_order", r.selected_order},
         {"modes", modes},
         {"unique_freqs", unique},
         {"occurrence_counts", r.occurrence_counts},
         {"orders", diag.orders},
         {"counts_per_order", r.counts_per_order},
         {"dropped_poles", r.dropped_poles},
         {"failed_orders", failures}};
  return j.dump(2) + "\n";
}

std::string spectrum_csv(const Spectrum& s, const std::vector<std::string>& names, double freq_scale) {
  std::ostringstream os;
  os << "freq";
  for (const std::string& n : names) os << ',' << n;
  os << '\n';
  for (Eigen::Index k = 0; k < s.freqs.size(); ++k) {
    os << num(s.freqs(k) / freq_scale);
    for (Eigen::Index c = 0; c < s.power.rows(); ++c) os << ',' << num(s.power(c, k));
    os << '\n';
  }
  return os.str();
}

std::string box_stats_csv(const std::vector<BoxRow>& rows, double freq_scale) {
  std::ostringstream os;
  os << "group,method,mode,reference_freq,matched,missing,"
        "freq_median,freq_q1,freq_q3,freq_min,freq_max,"
        "damping_median,damping_q1,damping_q3,damping_min,damping_max\n";
  for (const BoxRow& r : rows) {
    const BoxStats& f = r.box.frequency;
    const BoxStats& d = r.box.damping_pct;
    os << r.group << ',' << r.method << ',' << r.mode << ',' << num(r.box.reference_freq / freq_scale) << ','
       << r.box.matched << ',' << r.box.missing << ',' << num(f.median / freq_scale) << ',' << num(f.q1 / freq_scale)
       << ',' << num(f.q3 / freq_scale) << ',' << num(f.min / freq_scale) << ',' << num(f.max / freq_scale) << ','
       << num(d.median) << ',' << num(d.q1) << ',' << num(d.q3) << ',' << num(d.min) << ',' << num(d.max) << '\n';
  }
  return os.str();
}

std::string lfactor_json(const LFactor& l) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(l.l.size()));
  for (Eigen::Index i = 0; i < l.l.rows(); ++i) {
    for (Eigen::Index j = 0; j < l.l.cols(); ++j) data.push_back(l.l(i, j));
  }
  json j{{"schema", "kfssi-lfactor/1"},
         {"rows", l.l.rows()},
         {"cols", l.l.cols()},
         {"periodic_rows", l.periodic_rows},
         {"raw_rows", l.raw_rows},
         {"block_rows", l.block_rows},
         {"channels", l.channels},
         {"rate", l.rate},
         {"sample_count", l.sample_count},
         {"batches", l.batches},
         {"periodic_rank_deficient", l.periodic_rank_deficient},
         {"l", data}};
  return j.dump() + "\n";
}

LFactor lfactor_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("schema").get<std::string>() != "kfssi-lfactor/1") invalid("lfactor: unsupported schema");
    LFactor l;
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    l.periodic_rows = j.at("periodic_rows").get<std::size_t>();
    l.raw_rows = j.at("raw_rows").get<std::size_t>();
    l.block_rows = j.at("block_rows").get<std::size_t>();
    l.channels = j.at("channels").get<std::size_t>();
    l.rate = j.at("rate").get<double>();
    l.sample_count = j.at("sample_count").get<std::size_t>();
    l.batches = j.at("batches").get<std::size_t>();
    l.periodic_rank_deficient = j.at("periodic_rank_deficient").get<bool>();
    const std::vector<double> data = j.at("l").get<std::vector<double>>();
    if (rows != cols || static_cast<std::size_t>(rows) != l.periodic_rows + l.raw_rows ||
        data.size() != static_cast<std::size_t>(rows * cols)) {
      invalid("lfactor: inconsistent dimensions");
    }
    l.l.resize(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index c = 0; c < cols; ++c) l.l(i, c) = data[static_cast<std::size_t>(i * cols + c)];
    }
    return l;
  } catch (const json::exception& e) {
    fail(ErrorClass::invalid_data, std::string("lfactor: ") + e.what());
  }
}

}  // namespace kfssi::io
