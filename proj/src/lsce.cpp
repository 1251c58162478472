#include "kfssi/lsce.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "kfssi/error.hpp"

namespace kfssi {

CorrelationData correlations(const TimeSeries& ts, std::size_t max_lag, std::size_t reference) {
  ts.validate();
  const std::size_t n = ts.samples();
  if (reference >= ts.channels()) invalid("correlations: reference channel out of range");
  if (!(4 * max_lag < n)) invalid("correlations: max_lag must be < N/4");

  Eigen::MatrixXd x = ts.data;
  for (Eigen::Index c = 0; c < x.rows(); ++c) {
    x.row(c).array() -= x.row(c).mean();
    if (x.row(c).squaredNorm() <= 1e-24 * std::max(1.0, ts.data.row(c).squaredNorm())) {
      invalid("correlations: channel '" + ts.names[static_cast<std::size_t>(c)] + "' is constant (zero variance)");
    }
  }

  CorrelationData out;
  out.rate = ts.rate;
  out.reference = reference;
  out.names = ts.names;
  out.values.resize(x.rows(), static_cast<Eigen::Index>(max_lag + 1));
  const auto ref = x.row(static_cast<Eigen::Index>(reference));
  for (std::size_t k = 0; k <= max_lag; ++k) {
    out.lags.push_back(k);
    const auto len = static_cast<Eigen::Index>(n - k);
    const auto kk = static_cast<Eigen::Index>(k);
    for (Eigen::Index c = 0; c < x.rows(); ++c) {
      out.values(c, kk) = x.row(c).segment(kk, len).dot(ref.head(len)) / static_cast<double>(len);
    }
  }
  return out;
}

namespace {

Eigen::VectorXd poly_mul(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(a.size() + b.size() - 1);
  for (Eigen::Index i = 0; i < a.size(); ++i) c.segment(i, b.size()) += a(i) * b;
  return c;
}

}  // namespace

Eigen::VectorXd harmonic_factor(const HarmonicSet& harmonics, double dt) {
  Eigen::VectorXd k = Eigen::VectorXd::Ones(1);
  for (double f : harmonics.freqs()) {
    Eigen::Vector3d q(1.0, -2.0 * std::cos(2.0 * std::numbers::pi * f * dt), 1.0);
    k = poly_mul(k, q);
  }
  return k;
}

LsceResult modified_lsce(const CorrelationData& corr, const HarmonicSet& harmonics, std::size_t order,
                         const LsceOptions& opt) {
  if (!(corr.rate > 0.0) || corr.values.cols() == 0) invalid("modified_lsce: empty correlation data");
  const double dt = 1.0 / corr.rate;
  if (!harmonics.empty()) harmonics.validate(corr.rate / 2.0);

  LsceResult r;
  r.known_factor = harmonic_factor(harmonics, dt);
  const auto m = static_cast<Eigen::Index>(r.known_factor.size() - 1);
  const auto n = static_cast<Eigen::Index>(order);
  if (n <= m) invalid("modified_lsce: order must exceed twice the harmonic count");
  const Eigen::Index g = n - m;  // degree of the free factor

  const auto first = static_cast<Eigen::Index>(opt.first_lag);
  const Eigen::Index len = corr.values.cols() - first;
  const Eigen::Index filtered_len = len - m;
  const Eigen::Index eqs_per_channel = filtered_len - g;
  const Eigen::Index channels = corr.values.rows();
  if (eqs_per_channel * channels < g + 1) invalid("modified_lsce: too few lags for this order");

  Eigen::MatrixXd a(eqs_per_channel * channels, g);
  Eigen::VectorXd b(eqs_per_channel * channels);
  for (Eigen::Index c = 0; c < channels; ++c) {
    const Eigen::VectorXd h = corr.values.row(c).segment(first, len).transpose();
    const double scale = corr.values.row(c).cwiseAbs().maxCoeff();
    if (!(scale > 0.0)) invalid("modified_lsce: zero correlation channel");
    // Deflation: u(k) = sum_i K_i h(k+i) removes every harmonic exponential.
    Eigen::VectorXd u = Eigen::VectorXd::Zero(filtered_len);
    for (Eigen::Index i = 0; i <= m; ++i) u += r.known_factor(i) * h.segment(i, filtered_len);
    u /= scale;
    for (Eigen::Index k = 0; k < eqs_per_channel; ++k) {
      a.row(c * eqs_per_channel + k) = u.segment(k, g).transpose();
      b(c * eqs_per_channel + k) = -u(k + g);
    }
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(opt.rank_tol);
  const Eigen::VectorXd diag = qr.matrixR().diagonal().cwiseAbs();
  if (qr.rank() < g) {
    std::ostringstream os;
    os << "modified_lsce: rank deficient least-squares problem (rank " << qr.rank() << " of " << g
       << ", condition estimate " << (diag.minCoeff() > 0.0 ? diag.maxCoeff() / diag.minCoeff() : INFINITY) << ")";
    fail(ErrorClass::identification, os.str());
  }
  r.free_factor.resize(g + 1);
  r.free_factor.head(g) = qr.solve(b);
  r.free_factor(g) = 1.0;
  r.full = poly_mul(r.known_factor, r.free_factor);

  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(g, g);
  if (g > 1) companion.bottomLeftCorner(g - 1, g - 1).setIdentity();
  companion.col(g - 1) = -r.free_factor.head(g);
  Eigen::EigenSolver<Eigen::MatrixXd> es(companion, false);
  if (es.info() != Eigen::Success) fail(ErrorClass::numerical, "modified_lsce: root finding failed");
  for (Eigen::Index i = 0; i < g; ++i) {
    const std::complex<double> mu = es.eigenvalues()(i);
    if (std::abs(mu.imag()) <= 1e-12 * std::max(std::abs(mu), 1e-300)) {
      ++r.real_roots;
      continue;
    }
    if (mu.imag() < 0.0) continue;
    r.modes.push_back(pole_to_modal(mu, dt, order));
  }
  std::sort(r.modes.begin(), r.modes.end(),
            [](const ModalEstimate& x, const ModalEstimate& y) { return x.frequency < y.frequency; });
  return r;
}

}  // namespace kfssi
