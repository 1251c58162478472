#include "kfssi/workflow.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "kfssi/error.hpp"
#include "kfssi/lsce.hpp"

namespace kfssi::workflow {

std::uint64_t dataset_seed(std::uint64_t master, std::size_t index) {
  // splitmix64 of (master, index) so neighbouring masters do not share streams.
  std::uint64_t z = master * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(index) + 1;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

SimOutput simulate_datasets(const SimConfig& cfg, std::uint64_t master_seed) {
  if (cfg.datasets == 0) invalid("simulate: need at least one dataset");
  cfg.model.validate();
  cfg.excitation.validate(cfg.model);
  SimOutput out;
  out.truth = sim::exact_modes(cfg.model);
  for (std::size_t i = 0; i < cfg.datasets; ++i) {
    sim::ExcitationSpec exc = cfg.excitation;
    exc.seed = dataset_seed(master_seed, i);
    io::Dataset ds;
    ds.ts = sim::simulate(cfg.model, exc);
    if (!exc.harmonics.set.empty()) ds.rotor_rpm = sim::rotor_speed_rpm(exc);
    if (!cfg.groups.empty()) ds.group = cfg.groups[i % cfg.groups.size()];
    out.seeds.push_back(exc.seed);
    out.datasets.push_back(std::move(ds));
  }
  return out;
}

namespace {

std::optional<RotorHarmonics> rotor_set(const io::Dataset& ds, const HarmonicsConfig& cfg) {
  if (ds.rotor_hz) return rotor_harmonics(*ds.rotor_hz, SpeedUnit::hz, cfg.multipliers, cfg.gear_ratio);
  if (ds.rotor_rpm) return rotor_harmonics(*ds.rotor_rpm, SpeedUnit::rpm, cfg.multipliers, cfg.gear_ratio);
  return std::nullopt;
}

}  // namespace

LocalizeResult localize(const io::Dataset& ds, const HarmonicsConfig& cfg) {
  LocalizeResult r;
  if (std::optional<RotorHarmonics> rh = rotor_set(ds, cfg)) {
    r.set = rh->set;
    r.method = "rotor";
    r.mean_speed_hz = rh->set.base_freq;
    r.coefficient_of_variation = rh->coefficient_of_variation;
    r.set.validate(ds.ts.rate / 2.0);
  }
  const bool need_indicators = cfg.indicators || r.set.empty();
  if (need_indicators) {
    const TimeSeries ts = prepare(ds);
    std::size_t ch = 0;
    if (!cfg.indicator_channel.empty()) {
      const std::optional<std::size_t> found = ts.find(cfg.indicator_channel);
      if (!found) invalid("localize: unknown indicator channel '" + cfg.indicator_channel + "'");
      ch = *found;
    }
    const double nyquist = ts.rate / 2.0;
    const double bw = cfg.bandwidth > 0.0 ? cfg.bandwidth : default_bandwidth(ts.rate);
    const double step = cfg.grid_step > 0.0 ? cfg.grid_step : bw / 2.0;
    const double lo = cfg.grid_lo > 0.0 ? cfg.grid_lo : bw;
    const double hi = cfg.grid_hi > 0.0 ? cfg.grid_hi : nyquist - bw;
    const std::vector<double> grid = make_grid(lo, hi, step);
    const Eigen::RowVectorXd row = ts.data.row(static_cast<Eigen::Index>(ch));
    const std::span<const double> x(row.data(), static_cast<std::size_t>(row.size()));
    r.kurtosis = kurtosis_sweep(x, ts.rate, grid, bw, cfg.filter_order);
    r.entropy = entropy_sweep(x, ts.rate, grid, bw, cfg.filter_order, cfg.entropy_bins);

    const ClassifyOptions opt{cfg.kurtosis_threshold, cfg.kurtosis_noise};
    if (r.set.empty()) {
      // No rotor log: a line is a run of grid points below the kurtosis
      // threshold that also sits below the entropy median; keep its deepest point.
      std::vector<double> ent;
      for (std::size_t i = 0; i < grid.size(); ++i) {
        if (r.entropy->valid[i]) ent.push_back(r.entropy->values[i]);
      }
      std::nth_element(ent.begin(), ent.begin() + static_cast<std::ptrdiff_t>(ent.size() / 2), ent.end());
      const double median = ent.empty() ? 0.0 : ent[ent.size() / 2];
      std::vector<double> found;
      std::optional<std::size_t> best;
      for (std::size_t i = 0; i <= grid.size(); ++i) {
        const bool hit = i < grid.size() && r.kurtosis->valid[i] && r.entropy->valid[i] &&
                         r.kurtosis->values[i] < opt.kurtosis_threshold && r.entropy->values[i] < median;
        if (hit) {
          if (!best || r.kurtosis->values[i] < r.kurtosis->values[*best]) best = i;
        } else if (best) {
          found.push_back(grid[*best]);
          best.reset();
        }
      }
      if (found.empty()) {
        fail(ErrorClass::harmonics, "harmonics unresolved: no rotor channel and the indicators found no line");
      }
      r.set = HarmonicSet::from_freqs(found);
      r.method = "indicators";
    }
    r.verdicts = classify(*r.kurtosis, r.set, opt);
    const std::vector<CandidateVerdict> ev = classify(*r.entropy, r.set, opt);
    r.verdicts.insert(r.verdicts.end(), ev.begin(), ev.end());
  }
  return r;
}

HarmonicSet resolve_harmonics(const io::Dataset& ds, const HarmonicsConfig& cfg) {
  if (cfg.file) return io::read_harmonics(*cfg.file);
  if (std::optional<RotorHarmonics> rh = rotor_set(ds, cfg)) return rh->set;
  fail(ErrorClass::harmonics, "harmonics unresolved: " + ds.source +
                                  " has no rotor_rpm/rotor_hz column and no harmonics file was given");
}

TimeSeries prepare(const io::Dataset& ds) {
  if (!ds.yaw) return ds.ts;
  return yaw_transform(ds.ts, *ds.yaw, true);
}

LFactor dataset_factor(const TimeSeries& ts, const HarmonicSet& harmonics, const RunConfig& cfg) {
  return kfssi_factor(ts, harmonics, cfg.pipeline());
}

LFactor enhanced_factor(std::span<const TimeSeries> series, std::span<const HarmonicSet> harmonics,
                        const RunConfig& cfg, const std::optional<LFactor>& start) {
  if (series.size() != harmonics.size()) invalid("enhanced: one harmonic set per dataset required");
  std::optional<LFactor> acc = start;
  const PipelineConfig p = cfg.pipeline();
  for (std::size_t i = 0; i < series.size(); ++i) {
    const TimeSeries& ts = series[i];
    TimeSeries periodic = ts;
    if (harmonics[i].empty()) {
      periodic.data.setZero();
    } else {
      harmonics[i].validate(ts.rate / 2.0);
      const kalman::Tuning t = p.tuning ? *p.tuning : kalman::default_tuning(ts, harmonics[i], p.rel_process_noise);
      const kalman::OscillatorBank bank =
          kalman::build_bank(harmonics[i], ts.dt(), t.process_noise_std, t.measurement_noise_std);
      periodic = kalman::estimate_periodic(bank, ts, p.initial_sqrt_cov, p.periodic_output);
    }
    const HankelPair pair = make_hankel_pair(periodic, ts, p.block_rows);
    acc = acc ? concat(*acc, pair) : stack_lq(pair);
  }
  if (!acc) invalid("enhanced: no datasets");
  return *acc;
}

StabilizationDiagram factor_diagram(const LFactor& l, const RunConfig& cfg) {
  const std::vector<std::size_t> orders = cfg.orders();
  return make_diagram(identify_orders(remove_harmonic_rows(l), orders), cfg.stability());
}

StabilizationDiagram lsce_diagram(const TimeSeries& ts, const HarmonicSet& harmonics, const RunConfig& cfg) {
  const CorrelationData corr = correlations(ts, cfg.identify.lsce_max_lag, cfg.identify.lsce_reference);
  const std::size_t known = 2 * harmonics.size();
  std::vector<std::size_t> orders;
  for (std::size_t n : cfg.orders()) orders.push_back(n + known);
  return order_sweep(
      orders, [&](std::size_t order) { return ModalSet{modified_lsce(corr, harmonics, order).modes, 0, 0}; },
      cfg.stability());
}

Spectrum mean_spectrum(std::span<const TimeSeries> series, std::size_t segment_len) {
  if (series.empty()) invalid("spectrum: no data");
  std::size_t seg = segment_len;
  for (const TimeSeries& ts : series) seg = std::min(seg, ts.samples());
  Spectrum acc = welch_psd(series[0], seg);
  for (std::size_t i = 1; i < series.size(); ++i) {
    if (series[i].rate != series[0].rate || series[i].channels() != series[0].channels()) {
      invalid("spectrum: datasets differ in rate or channel count");
    }
    acc.power += welch_psd(series[i], seg).power;
  }
  acc.power /= static_cast<double>(series.size());
  return acc;
}

IdentifyOutcome identify(std::span<const TimeSeries> series, std::span<const HarmonicSet> harmonics,
                         const RunConfig& cfg, const std::optional<LFactor>& start) {
  if (series.empty()) invalid("identify: no datasets");
  const Algorithm alg = cfg.identify.algorithm;
  if (alg != Algorithm::enhanced_kfssi && (series.size() != 1 || start)) {
    invalid(std::string("identify: ") + to_string(alg) + " takes exactly one dataset (use enhanced-kfssi to combine)");
  }
  IdentifyOutcome out;
  switch (alg) {
    case Algorithm::ssi:
      out.factor = dataset_factor(series[0], HarmonicSet{}, cfg);
      out.diagram = factor_diagram(*out.factor, cfg);
      break;
    case Algorithm::kfssi:
      out.factor = dataset_factor(series[0], harmonics[0], cfg);
      out.diagram = factor_diagram(*out.factor, cfg);
      break;
    case Algorithm::enhanced_kfssi:
      out.factor = enhanced_factor(series, harmonics, cfg, start);
      out.diagram = factor_diagram(*out.factor, cfg);
      break;
    case Algorithm::mlsce:
      out.diagram = lsce_diagram(series[0], harmonics[0], cfg);
      break;
  }
  try {
    out.interpretation = auto_interpret(out.diagram, cfg.interpret());
  } catch (const Error& e) {
    if (e.error_class() != ErrorClass::identification) throw;
    out.interpretation_error = e.what();
  }
  return out;
}

namespace {

std::optional<InterpretationResult> try_interpret(const LFactor& l, const RunConfig& cfg) {
  try {
    return auto_interpret(factor_diagram(l, cfg), cfg.interpret());
  } catch (const Error& e) {
    if (e.error_class() != ErrorClass::identification) throw;
    return std::nullopt;
  }
}

}  // namespace

std::vector<InterpretationResult> loo_interpretations(std::span<const LFactor> factors, const RunConfig& cfg) {
  if (factors.size() < 3) invalid("leave-one-out: need at least 3 datasets");
  std::vector<InterpretationResult> out;
  for (std::size_t left = 0; left < factors.size(); ++left) {
    std::optional<LFactor> acc;
    for (std::size_t i = 0; i < factors.size(); ++i) {
      if (i == left) continue;
      acc = acc ? merge(*acc, factors[i]) : factors[i];
    }
    if (auto r = try_interpret(*acc, cfg)) out.push_back(std::move(*r));
  }
  return out;
}

std::vector<InterpretationResult> plain_interpretations(std::span<const LFactor> factors, const RunConfig& cfg) {
  std::vector<InterpretationResult> out;
  for (const LFactor& f : factors) {
    if (auto r = try_interpret(f, cfg)) out.push_back(std::move(*r));
  }
  return out;
}

AggregateResult aggregate(std::span<const io::Dataset> datasets, const RunConfig& cfg) {
  if (datasets.size() < 3) invalid("aggregate: need at least 3 datasets");
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < datasets.size(); ++i) groups[datasets[i].group.value_or("all")].push_back(i);

  const bool use_harmonics = cfg.identify.algorithm != Algorithm::ssi;
  AggregateResult out;
  for (const auto& [name, members] : groups) {
    if (members.size() < 3) invalid("aggregate: group '" + name + "' has fewer than 3 datasets");
    std::vector<LFactor> factors;
    for (std::size_t i : members) {
      const TimeSeries ts = prepare(datasets[i]);
      const HarmonicSet h = use_harmonics ? resolve_harmonics(datasets[i], cfg.harmonics) : HarmonicSet{};
      factors.push_back(dataset_factor(ts, h, cfg));
    }
    const std::string enhanced_name = use_harmonics ? "enhanced-kfssi" : "enhanced-ssi";
    const std::string plain_name = use_harmonics ? "kfssi" : "ssi";
    const std::pair<std::string, std::vector<InterpretationResult>> runs[] = {
        {enhanced_name, loo_interpretations(factors, cfg)}, {plain_name, plain_interpretations(factors, cfg)}};
    for (const auto& [method, results] : runs) {
      if (results.size() < members.size()) {
        out.warnings.push_back(name + "/" + method + ": " + std::to_string(members.size() - results.size()) +
                               " run(s) found no persistent modes");
      }
      if (results.size() < 3) {
        out.warnings.push_back(name + "/" + method + ": fewer than 3 usable runs, no statistics");
        continue;
      }
      const std::vector<ModeBox> boxes = loo_aggregate(results, cfg.tolerances.match_tol);
      for (std::size_t m = 0; m < boxes.size(); ++m) out.rows.push_back({name, method, m + 1, boxes[m]});
    }
  }
  return out;
}

}  // namespace kfssi::workflow
