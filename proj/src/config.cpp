#include "kfssi/config.hpp"

#include <set>

#include "json.hpp"
#include "kfssi/error.hpp"

namespace kfssi {

using nlohmann::json;

const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::ssi: return "ssi";
    case Algorithm::kfssi: return "kfssi";
    case Algorithm::enhanced_kfssi: return "enhanced-kfssi";
    case Algorithm::mlsce: return "mlsce";
  }
  return "?";
}

Algorithm parse_algorithm(const std::string& s) {
  for (Algorithm a : {Algorithm::ssi, Algorithm::kfssi, Algorithm::enhanced_kfssi, Algorithm::mlsce}) {
    if (s == to_string(a)) return a;
  }
  invalid("unknown algorithm '" + s + "' (expected ssi, kfssi, enhanced-kfssi or mlsce)");
}

void RunConfig::validate() const {
  auto positive = [](double v, const char* key) {
    if (!(v > 0.0)) invalid(std::string("config: ") + key + " must be > 0");
  };
  positive(tolerances.tol_f, "tolerances.tol_f");
  positive(tolerances.tol_d, "tolerances.tol_d");
  positive(tolerances.cluster_tol, "tolerances.cluster_tol");
  positive(tolerances.match_tol, "tolerances.match_tol");
  if (tolerances.n_min == 0) invalid("config: tolerances.n_min must be >= 1");
  if (!(tolerances.max_damping_pct > tolerances.min_damping_pct)) {
    invalid("config: tolerances.max_damping_pct must exceed min_damping_pct");
  }
  if (identify.order_min < 2 || identify.order_min % 2 != 0 || identify.order_step == 0 || identify.order_step % 2 != 0 ||
      identify.order_max < identify.order_min) {
    invalid("config: identify orders must be even and increasing (order_min >= 2, even order_step)");
  }
  if (identify.block_rows < 4) invalid("config: identify.block_rows must be >= 4");
  if (identify.welch_segment < 8) invalid("config: identify.welch_segment must be >= 8");
  positive(kalman.rel_process_noise, "kalman.rel_process_noise");
  positive(kalman.initial_sqrt_cov, "kalman.initial_sqrt_cov");
  if (kalman.process_noise_std.size() != kalman.measurement_noise_std.size()) {
    invalid("config: kalman.process_noise_std and measurement_noise_std need equal lengths");
  }
  positive(harmonics.gear_ratio, "harmonics.gear_ratio");
  if (harmonics.filter_order < 1 || harmonics.filter_order > 8) invalid("config: harmonics.filter_order must be 1..8");
  if (harmonics.entropy_bins < 8) invalid("config: harmonics.entropy_bins must be >= 8");
  for (double m : harmonics.multipliers) positive(m, "harmonics.multipliers");
  if (sim.datasets == 0) invalid("config: sim.datasets must be >= 1");
  sim.model.validate();
  sim.excitation.validate(sim.model);
}

std::vector<std::size_t> RunConfig::orders() const {
  std::vector<std::size_t> out;
  for (std::size_t n = identify.order_min; n <= identify.order_max; n += identify.order_step) out.push_back(n);
  return out;
}

PipelineConfig RunConfig::pipeline() const {
  PipelineConfig p;
  p.block_rows = identify.block_rows;
  p.orders = orders();
  p.rel_process_noise = kalman.rel_process_noise;
  p.initial_sqrt_cov = kalman.initial_sqrt_cov;
  p.periodic_output = kalman.periodic_output;
  if (!kalman.process_noise_std.empty()) {
    p.tuning = kalman::Tuning{kalman.process_noise_std, kalman.measurement_noise_std};
  }
  return p;
}

StabilityTolerances RunConfig::stability() const { return {tolerances.tol_f, tolerances.tol_d}; }

InterpretOptions RunConfig::interpret() const {
  return {tolerances.cluster_tol, tolerances.n_min, tolerances.max_damping_pct, tolerances.min_damping_pct,
          tolerances.stable_only};
}

namespace {

void check_keys(const json& j, const char* section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) invalid(std::string("config: ") + section + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) invalid(std::string("config: unknown key '") + section + "." + key + "'");
  }
}

template <typename T>
void get(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

RunConfig config_from_json(const std::string& text) {
  RunConfig c;
  try {
    const json j = json::parse(text);
    check_keys(j, "root",
               {"inputs", "output_dir", "seed", "sim", "harmonics", "kalman", "identify", "tolerances"});
    get(j, "inputs", c.inputs);
    get(j, "output_dir", c.output_dir);
    get(j, "seed", c.seed);

    if (j.contains("sim")) {
      const json& s = j.at("sim");
      check_keys(s, "sim",
                 {"datasets", "groups", "masses", "stiffnesses", "dampings", "noise_std", "sensor_noise_std",
                  "duration", "rate", "drift_rate", "base_freq", "multipliers", "amplitudes", "phases",
                  "harmonic_dof"});
      get(s, "datasets", c.sim.datasets);
      get(s, "groups", c.sim.groups);
      get(s, "masses", c.sim.model.masses);
      get(s, "stiffnesses", c.sim.model.stiffnesses);
      get(s, "dampings", c.sim.model.dampings);
      sim::ExcitationSpec& e = c.sim.excitation;
      get(s, "noise_std", e.noise_std);
      get(s, "sensor_noise_std", e.sensor_noise_std);
      get(s, "duration", e.duration);
      get(s, "rate", e.rate);
      get(s, "drift_rate", e.drift_rate);
      get(s, "base_freq", e.harmonics.set.base_freq);
      get(s, "multipliers", e.harmonics.set.multipliers);
      get(s, "amplitudes", e.harmonics.amplitudes);
      get(s, "phases", e.harmonics.phases);
      if (s.contains("harmonic_dof")) e.harmonics.dof = s.at("harmonic_dof").get<std::size_t>() - 1;
      if (s.contains("multipliers") && !s.contains("amplitudes")) {
        e.harmonics.amplitudes.assign(e.harmonics.set.multipliers.size(), 1.0);
      }
    }
    if (j.contains("harmonics")) {
      const json& h = j.at("harmonics");
      check_keys(h, "harmonics",
                 {"multipliers", "gear_ratio", "file", "indicators", "indicator_channel", "grid_lo", "grid_hi",
                  "bandwidth", "grid_step", "filter_order", "entropy_bins", "kurtosis_threshold",
                  "kurtosis_noise"});
      get(h, "multipliers", c.harmonics.multipliers);
      get(h, "gear_ratio", c.harmonics.gear_ratio);
      if (h.contains("file")) c.harmonics.file = h.at("file").get<std::string>();
      get(h, "indicators", c.harmonics.indicators);
      get(h, "indicator_channel", c.harmonics.indicator_channel);
      get(h, "grid_lo", c.harmonics.grid_lo);
      get(h, "grid_hi", c.harmonics.grid_hi);
      get(h, "bandwidth", c.harmonics.bandwidth);
      get(h, "grid_step", c.harmonics.grid_step);
      get(h, "filter_order", c.harmonics.filter_order);
      get(h, "entropy_bins", c.harmonics.entropy_bins);
      get(h, "kurtosis_threshold", c.harmonics.kurtosis_threshold);
      get(h, "kurtosis_noise", c.harmonics.kurtosis_noise);
    }
    if (j.contains("kalman")) {
      const json& k = j.at("kalman");
      check_keys(k, "kalman", {"rel_process_noise", "initial_sqrt_cov", "periodic_output", "process_noise_std",
                             "measurement_noise_std"});
      get(k, "rel_process_noise", c.kalman.rel_process_noise);
      get(k, "initial_sqrt_cov", c.kalman.initial_sqrt_cov);
      if (k.contains("periodic_output")) {
        const std::string o = k.at("periodic_output").get<std::string>();
        if (o == "predicted") c.kalman.periodic_output = kalman::PeriodicOutput::predicted;
        else if (o == "filtered") c.kalman.periodic_output = kalman::PeriodicOutput::filtered;
        else invalid("config: kalman.periodic_output must be predicted or filtered");
      }
      get(k, "process_noise_std", c.kalman.process_noise_std);
      get(k, "measurement_noise_std", c.kalman.measurement_noise_std);
    }
    if (j.contains("identify")) {
      const json& i = j.at("identify");
      check_keys(i, "identify",
                 {"algorithm", "block_rows", "order_min", "order_max", "order_step", "lsce_max_lag",
                  "lsce_reference", "welch_segment", "normalize"});
      if (i.contains("algorithm")) c.identify.algorithm = parse_algorithm(i.at("algorithm").get<std::string>());
      get(i, "block_rows", c.identify.block_rows);
      get(i, "order_min", c.identify.order_min);
      get(i, "order_max", c.identify.order_max);
      get(i, "order_step", c.identify.order_step);
      get(i, "lsce_max_lag", c.identify.lsce_max_lag);
      get(i, "lsce_reference", c.identify.lsce_reference);
      get(i, "welch_segment", c.identify.welch_segment);
      get(i, "normalize", c.identify.normalize);
    }
    if (j.contains("tolerances")) {
      const json& t = j.at("tolerances");
      check_keys(t, "tolerances",
                 {"tol_f", "tol_d", "cluster_tol", "n_min", "max_damping_pct", "min_damping_pct", "match_tol",
                  "stable_only"});
      get(t, "tol_f", c.tolerances.tol_f);
      get(t, "tol_d", c.tolerances.tol_d);
      get(t, "cluster_tol", c.tolerances.cluster_tol);
      get(t, "n_min", c.tolerances.n_min);
      get(t, "max_damping_pct", c.tolerances.max_damping_pct);
      get(t, "min_damping_pct", c.tolerances.min_damping_pct);
      get(t, "match_tol", c.tolerances.match_tol);
      get(t, "stable_only", c.tolerances.stable_only);
    }
  } catch (const json::exception& e) {
    invalid(std::string("config: ") + e.what());
  }
  return c;
}

std::string config_to_json(const RunConfig& c) {
  const sim::ExcitationSpec& e = c.sim.excitation;
  json j{
      {"inputs", c.inputs},
      {"output_dir", c.output_dir},
      {"seed", c.seed},
      {"sim",
       {{"datasets", c.sim.datasets},
        {"groups", c.sim.groups},
        {"masses", c.sim.model.masses},
        {"stiffnesses", c.sim.model.stiffnesses},
        {"dampings", c.sim.model.dampings},
        {"noise_std", e.noise_std},
        {"sensor_noise_std", e.sensor_noise_std},
        {"duration", e.duration},
        {"rate", e.rate},
        {"drift_rate", e.drift_rate},
        {"base_freq", e.harmonics.set.base_freq},
        {"multipliers", e.harmonics.set.multipliers},
        {"amplitudes", e.harmonics.amplitudes},
        {"phases", e.harmonics.phases}}},
      {"harmonics",
       {{"multipliers", c.harmonics.multipliers},
        {"gear_ratio", c.harmonics.gear_ratio},
        {"indicators", c.harmonics.indicators},
        {"indicator_channel", c.harmonics.indicator_channel},
        {"grid_lo", c.harmonics.grid_lo},
        {"grid_hi", c.harmonics.grid_hi},
        {"bandwidth", c.harmonics.bandwidth},
        {"grid_step", c.harmonics.grid_step},
        {"filter_order", c.harmonics.filter_order},
        {"entropy_bins", c.harmonics.entropy_bins},
        {"kurtosis_threshold", c.harmonics.kurtosis_threshold},
        {"kurtosis_noise", c.harmonics.kurtosis_noise}}},
      {"kalman",
       {{"rel_process_noise", c.kalman.rel_process_noise},
        {"initial_sqrt_cov", c.kalman.initial_sqrt_cov},
        {"periodic_output", c.kalman.periodic_output == kalman::PeriodicOutput::predicted ? "predicted" : "filtered"},
        {"process_noise_std", c.kalman.process_noise_std},
        {"measurement_noise_std", c.kalman.measurement_noise_std}}},
      {"identify",
       {{"algorithm", to_string(c.identify.algorithm)},
        {"block_rows", c.identify.block_rows},
        {"order_min", c.identify.order_min},
        {"order_max", c.identify.order_max},
        {"order_step", c.identify.order_step},
        {"lsce_max_lag", c.identify.lsce_max_lag},
        {"lsce_reference", c.identify.lsce_reference},
        {"welch_segment", c.identify.welch_segment},
        {"normalize", c.identify.normalize}}},
      {"tolerances",
       {{"tol_f", c.tolerances.tol_f},
        {"tol_d", c.tolerances.tol_d},
        {"cluster_tol", c.tolerances.cluster_tol},
        {"n_min", c.tolerances.n_min},
        {"max_damping_pct", c.tolerances.max_damping_pct},
        {"min_damping_pct", c.tolerances.min_damping_pct},
        {"match_tol", c.tolerances.match_tol},
        {"stable_only", c.tolerances.stable_only}}}};
  if (c.harmonics.file) j["harmonics"]["file"] = *c.harmonics.file;
  if (e.harmonics.dof != std::numeric_limits<std::size_t>::max()) j["sim"]["harmonic_dof"] = e.harmonics.dof + 1;
  return j.dump(2) + "\n";
}

}  // namespace kfssi
