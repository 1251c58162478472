#include "kfssi/identify.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "kfssi/error.hpp"
#include "kfssi/linalg.hpp"

namespace kfssi {

void HankelPair::validate() const {
  if (y_per.rows() != y_raw.rows() || y_per.cols() != y_raw.cols()) {
    invalid("hankel pair: periodic and raw matrices differ in shape");
  }
  if (channels == 0 || block_rows == 0 || static_cast<std::size_t>(y_raw.rows()) != channels * block_rows) {
    invalid("hankel pair: row count must equal channels * block_rows");
  }
  if (!(rate > 0.0)) invalid("hankel pair: rate must be > 0");
}

HankelPair make_hankel_pair(const TimeSeries& periodic, const TimeSeries& raw, std::size_t block_rows) {
  if (periodic.channels() != raw.channels() || periodic.samples() != raw.samples()) {
    invalid("make_hankel_pair: periodic and raw series differ in shape");
  }
  if (periodic.rate != raw.rate) invalid("make_hankel_pair: periodic and raw series differ in rate");
  HankelPair p;
  p.y_per = build_hankel(periodic, block_rows);
  p.y_raw = build_hankel(raw, block_rows);
  p.block_rows = block_rows;
  p.channels = raw.channels();
  p.rate = raw.rate;
  return p;
}

Eigen::MatrixXd LFactor::l11() const {
  const auto p = static_cast<Eigen::Index>(periodic_rows);
  return l.topLeftCorner(p, p);
}

Eigen::MatrixXd LFactor::l21() const {
  const auto p = static_cast<Eigen::Index>(periodic_rows);
  const auto r = static_cast<Eigen::Index>(raw_rows);
  return l.bottomLeftCorner(r, p);
}

Eigen::MatrixXd LFactor::l22() const {
  const auto r = static_cast<Eigen::Index>(raw_rows);
  return l.bottomRightCorner(r, r);
}

namespace {

// Lower factor of the stacked array [per; raw]. When the periodic rows are
// exactly zero the Householder route would leave raw data in the L21 block,
// so the raw rows are factored on their own.
Eigen::MatrixXd stacked_lower(const Eigen::Ref<const Eigen::MatrixXd>& per, const Eigen::Ref<const Eigen::MatrixXd>& raw) {
  const Eigen::Index p = per.rows();
  const Eigen::Index r = raw.rows();
  if (per.isZero(0.0)) {
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(p + r, p + r);
    l.bottomRightCorner(r, r) = lq_lower(raw);
    return l;
  }
  Eigen::MatrixXd stacked(p + r, per.cols());
  stacked.topRows(p) = per;
  stacked.bottomRows(r) = raw;
  return lq_lower(stacked);
}

bool rank_deficient(const Eigen::MatrixXd& l11) {
  if (l11.rows() == 0) return false;
  const Eigen::VectorXd d = l11.diagonal().cwiseAbs();
  return d.minCoeff() <= 1e-12 * std::max(d.maxCoeff(), 1e-300);
}

void check_compatible(const LFactor& a, std::size_t periodic_rows, std::size_t raw_rows, std::size_t block_rows,
                      std::size_t channels, double rate) {
  if (a.block_rows != block_rows) invalid("concat: block_rows mismatch");
  if (a.channels != channels) invalid("concat: channels mismatch");
  if (a.rate != rate) invalid("concat: rate mismatch");
  if (a.periodic_rows != periodic_rows) invalid("concat: periodic_rows mismatch");
  if (a.raw_rows != raw_rows) invalid("concat: raw_rows mismatch");
}

}  // namespace

LFactor stack_lq(const HankelPair& pair) {
  pair.validate();
  if (pair.y_raw.cols() <= 2 * pair.y_raw.rows()) {
    invalid("stack_lq: need more Hankel columns than stacked rows");
  }
  LFactor f;
  f.l = stacked_lower(pair.y_per, pair.y_raw);
  f.periodic_rows = static_cast<std::size_t>(pair.y_per.rows());
  f.raw_rows = static_cast<std::size_t>(pair.y_raw.rows());
  f.block_rows = pair.block_rows;
  f.channels = pair.channels;
  f.rate = pair.rate;
  f.sample_count = pair.columns();
  f.batches = 1;
  f.periodic_rank_deficient = rank_deficient(f.l11());
  return f;
}

LFactor concat(const LFactor& existing, const HankelPair& next) {
  check_compatible(existing, static_cast<std::size_t>(next.y_per.rows()), static_cast<std::size_t>(next.y_raw.rows()),
                   next.block_rows, next.channels, next.rate);
  next.validate();
  if (next.columns() == 0) return existing;

  const auto p = static_cast<Eigen::Index>(existing.periodic_rows);
  const auto r = static_cast<Eigen::Index>(existing.raw_rows);
  const Eigen::Index w = existing.l.cols() + next.y_raw.cols();
  Eigen::MatrixXd per(p, w);
  Eigen::MatrixXd raw(r, w);
  per << existing.l.topRows(p), next.y_per;
  raw << existing.l.bottomRows(r), next.y_raw;

  LFactor f = existing;
  f.l = stacked_lower(per, raw);
  f.sample_count += next.columns();
  f.batches += 1;
  f.periodic_rank_deficient = rank_deficient(f.l11());
  return f;
}

LFactor merge(const LFactor& a, const LFactor& b) {
  check_compatible(a, b.periodic_rows, b.raw_rows, b.block_rows, b.channels, b.rate);
  const auto p = static_cast<Eigen::Index>(a.periodic_rows);
  const auto r = static_cast<Eigen::Index>(a.raw_rows);
  Eigen::MatrixXd per(p, a.l.cols() + b.l.cols());
  Eigen::MatrixXd raw(r, a.l.cols() + b.l.cols());
  per << a.l.topRows(p), b.l.topRows(p);
  raw << a.l.bottomRows(r), b.l.bottomRows(r);

  LFactor f = a;
  f.l = stacked_lower(per, raw);
  f.sample_count = a.sample_count + b.sample_count;
  f.batches = a.batches + b.batches;
  f.periodic_rank_deficient = rank_deficient(f.l11());
  return f;
}

EditedData remove_harmonic_rows(const LFactor& l) {
  EditedData e;
  e.l22 = l.l22();
  e.block_rows = l.block_rows;
  e.channels = l.channels;
  e.rate = l.rate;
  return e;
}

EditedData raw_edited_data(const TimeSeries& raw, std::size_t block_rows) {
  const Eigen::MatrixXd h = build_hankel(raw, block_rows);
  EditedData e;
  e.l22 = lq_lower(h);
  e.block_rows = block_rows;
  e.channels = raw.channels();
  e.rate = raw.rate;
  return e;
}

SubspaceIdentifier::SubspaceIdentifier(const EditedData& data)
    : channels_(data.channels), future_blocks_(0), dt_(1.0 / data.rate) {
  if (data.block_rows < 4) invalid("ssi: need at least 4 block rows");
  if (static_cast<std::size_t>(data.l22.rows()) != data.channels * data.block_rows) {
    invalid("ssi: edited data does not match channels * block_rows");
  }
  const std::size_t past = data.block_rows / 2;
  future_blocks_ = data.block_rows - past;
  const auto pr = static_cast<Eigen::Index>(channels_ * past);
  const auto fr = static_cast<Eigen::Index>(channels_ * future_blocks_);
  const Eigen::MatrixXd lfp = data.l22.block(pr, 0, fr, pr);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(lfp, Eigen::ComputeThinU);
  u_ = svd.matrixU();
  sv_ = svd.singularValues();
}

std::size_t SubspaceIdentifier::max_order() const {
  return std::min(static_cast<std::size_t>(sv_.size()), channels_ * (future_blocks_ - 1));
}

StateSpaceModel SubspaceIdentifier::model(std::size_t order) const {
  if (order == 0) invalid("ssi: order must be >= 1");
  if (order > max_order()) {
    std::ostringstream os;
    os << "ssi: order " << order << " exceeds the maximum " << max_order() << " for these block rows";
    fail(ErrorClass::identification, os.str());
  }
  const auto n = static_cast<Eigen::Index>(order);
  if (!(sv_(n - 1) > 1e-12 * sv_(0))) {
    std::ostringstream os;
    os << "ssi: order exceeds rank (singular value " << n << " is " << sv_(n - 1) << ")";
    fail(ErrorClass::identification, os.str());
  }
  const Eigen::MatrixXd gamma = u_.leftCols(n) * sv_.head(n).cwiseSqrt().asDiagonal();
  const auto ch = static_cast<Eigen::Index>(channels_);
  const Eigen::Index shifted = gamma.rows() - ch;

  StateSpaceModel m;
  m.order = order;
  m.dt = dt_;
  m.a = gamma.topRows(shifted).colPivHouseholderQr().solve(gamma.bottomRows(shifted));
  m.c = gamma.topRows(ch);
  return m;
}

StateSpaceModel ssi(const EditedData& data, std::size_t order) { return SubspaceIdentifier(data).model(order); }

ModalEstimate pole_to_modal(std::complex<double> mu, double dt, std::size_t order) {
  const std::complex<double> lambda = std::log(mu) / dt;
  const double mag = std::abs(lambda);
  ModalEstimate m;
  m.frequency = mag / (2.0 * std::numbers::pi);
  m.damping_pct = mag > 0.0 ? -100.0 * lambda.real() / mag : 0.0;
  m.order = order;
  m.pole = mu;
  m.unstable = std::abs(mu) > 1.0 + 1e-9;
  return m;
}

ModalSet modal_params(const StateSpaceModel& model) {
  ModalSet out;
  if (model.order == 0) return out;
  Eigen::EigenSolver<Eigen::MatrixXd> es(model.a, true);
  if (es.info() != Eigen::Success) fail(ErrorClass::numerical, "modal_params: eigenvalue solver failed");
  const Eigen::VectorXcd mu = es.eigenvalues();
  const Eigen::MatrixXcd vecs = es.eigenvectors();
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    const double mag = std::abs(mu(i));
    if (mag == 0.0) {
      ++out.zero_poles;
      continue;
    }
    if (std::abs(mu(i).imag()) <= 1e-12 * mag) {
      ++out.real_poles;
      continue;
    }
    if (mu(i).imag() < 0.0) continue;
    ModalEstimate m = pole_to_modal(mu(i), model.dt, model.order);
    const Eigen::VectorXcd phi = vecs.col(i);
    m.channel_energy = (model.c.cast<std::complex<double>>() * phi).norm() / phi.norm();
    out.modes.push_back(m);
  }
  std::sort(out.modes.begin(), out.modes.end(),
            [](const ModalEstimate& a, const ModalEstimate& b) { return a.frequency < b.frequency; });
  return out;
}

std::vector<std::size_t> default_orders(std::size_t channels, std::size_t block_rows) {
  const std::size_t past = block_rows / 2;
  const std::size_t future = block_rows - past;
  const std::size_t cap = std::min<std::size_t>({40, channels * past, future > 0 ? channels * (future - 1) : 0});
  std::vector<std::size_t> orders;
  for (std::size_t n = 2; n <= cap; n += 2) orders.push_back(n);
  return orders;
}

LFactor kfssi_factor(const TimeSeries& ts, const HarmonicSet& harmonics, const PipelineConfig& cfg) {
  TimeSeries periodic;
  if (harmonics.empty()) {
    periodic = ts;
    periodic.data.setZero();
  } else {
    harmonics.validate(ts.rate / 2.0);
    const kalman::Tuning t = cfg.tuning ? *cfg.tuning : kalman::default_tuning(ts, harmonics, cfg.rel_process_noise);
    const kalman::OscillatorBank bank =
        kalman::build_bank(harmonics, ts.dt(), t.process_noise_std, t.measurement_noise_std);
    periodic = kalman::estimate_periodic(bank, ts, cfg.initial_sqrt_cov, cfg.periodic_output);
  }
  return stack_lq(make_hankel_pair(periodic, ts, cfg.block_rows));
}

std::vector<OrderResult> identify_orders(const EditedData& data, std::span<const std::size_t> orders) {
  const SubspaceIdentifier id(data);
  std::vector<OrderResult> out;
  for (std::size_t n : orders) {
    OrderResult r;
    r.order = n;
    try {
      r.modes = modal_params(id.model(n));
    } catch (const Error& e) {
      r.error = e.what();
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<OrderResult> kfssi_pipeline(const TimeSeries& ts, const HarmonicSet& harmonics, const PipelineConfig& cfg) {
  const LFactor l = kfssi_factor(ts, harmonics, cfg);
  const std::vector<std::size_t> orders = cfg.orders.empty() ? default_orders(ts.channels(), cfg.block_rows) : cfg.orders;
  return identify_orders(remove_harmonic_rows(l), orders);
}

std::vector<OrderResult> ssi_pipeline(const TimeSeries& ts, const PipelineConfig& cfg) {
  const std::vector<std::size_t> orders = cfg.orders.empty() ? default_orders(ts.channels(), cfg.block_rows) : cfg.orders;
  return identify_orders(raw_edited_data(ts, cfg.block_rows), orders);
}

}  // namespace kfssi
