#include <cmath>
#include <complex>
#include <random>

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "json.hpp"
#include "kfssi/error.hpp"
#include "kfssi/identify.hpp"
#include "kfssi/io.hpp"
#include "kfssi/linalg.hpp"
#include "kfssi/sim.hpp"
#include "support.hpp"

using namespace kfssi;

namespace {

HankelPair pair_of(const Eigen::MatrixXd& per, const Eigen::MatrixXd& raw, std::size_t channels = 0) {
  HankelPair p;
  p.y_per = per;
  p.y_raw = raw;
  p.channels = channels == 0 ? static_cast<std::size_t>(raw.rows()) : channels;
  p.block_rows = static_cast<std::size_t>(raw.rows()) / p.channels;
  p.rate = 1.0;
  return p;
}

Eigen::MatrixXd hcat(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

Eigen::MatrixXd vcat(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() + b.rows(), a.cols());
  out << a, b;
  return out;
}

double gram_error(const Eigen::MatrixXd& l, const Eigen::MatrixXd& stacked) {
  const Eigen::MatrixXd g = stacked * stacked.transpose();
  return (l * l.transpose() - g).cwiseAbs().maxCoeff() / g.cwiseAbs().maxCoeff();
}

// Conjugate pair with frequency f (Hz) and damping ratio zeta.
std::complex<double> pole(double f, double zeta, double dt) {
  const double w = 2.0 * test::pi * f;
  return std::exp(std::complex<double>(-zeta * w, w * std::sqrt(1.0 - zeta * zeta)) * dt);
}

int near_harmonic_poles(const std::vector<OrderResult>& results, const std::vector<double>& harmonics, double max_pct) {
  int n = 0;
  for (const OrderResult& r : results)
    for (const ModalEstimate& m : r.modes.modes)
      for (double h : harmonics)
        if (std::abs(m.damping_pct) < max_pct && std::abs(m.frequency - h) <= 0.02 * h) ++n;
  return n;
}

bool matches_truth(const ModalSet& s, const sim::ModalTruth& truth) {
  if (s.modes.size() < truth.frequencies.size()) return false;
  for (std::size_t i = 0; i < truth.frequencies.size(); ++i) {
    bool found = false;
    for (const ModalEstimate& m : s.modes) {
      found = found || (test::rel_err(m.frequency, truth.frequencies[i]) < 0.01 &&
                        test::rel_err(m.damping_pct, 100.0 * truth.damping_ratios[i]) < 0.2);
    }
    if (!found) return false;
  }
  return true;
}

const OrderResult& at_order(const std::vector<OrderResult>& r, std::size_t order) {
  for (const OrderResult& o : r)
    if (o.order == order) return o;
  throw std::runtime_error("order not swept");
}

}  // namespace

TEST_SUITE("identify") {
  TEST_CASE("zero periodic block leaves only the raw factor") {
    const Eigen::MatrixXd raw = test::white(4, 40, 1);
    const LFactor l = stack_lq(pair_of(Eigen::MatrixXd::Zero(4, 40), raw, 2));
    CHECK(l.l11().isZero(0.0));
    CHECK(l.l21().isZero(0.0));
    CHECK(gram_error(l.l22(), raw) < 1e-12);
    CHECK(l.periodic_rank_deficient);
    const EditedData e = remove_harmonic_rows(l);
    CHECK(gram_error(e.l22, raw) < 1e-12);
  }

  TEST_CASE("2x4 toy pair matches the transposed QR and the Cholesky factor of the Gram matrix") {
    Eigen::MatrixXd per(1, 4), raw(1, 4);
    per << 1.0, -2.0, 0.5, 3.0;
    raw << 0.3, 1.7, -1.1, 2.2;
    const LFactor l = stack_lq(pair_of(per, raw));
    const Eigen::MatrixXd a = vcat(per, raw);

    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a.transpose());
    Eigen::MatrixXd r = qr.matrixQR().topRows(2).triangularView<Eigen::Upper>();
    for (Eigen::Index i = 0; i < 2; ++i)
      if (r(i, i) < 0.0) r.row(i) *= -1.0;
    CHECK((l.l - r.transpose()).cwiseAbs().maxCoeff() < 1e-14);

    const Eigen::MatrixXd chol = (a * a.transpose()).llt().matrixL();
    CHECK((l.l - chol).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(l.l(0, 1) == 0.0);
  }

  TEST_CASE("rows orthogonal to the periodic rows give no coupling block") {
    Eigen::MatrixXd per(2, 8), raw(2, 8);
    per << 1, 1, 1, 1, 0, 0, 0, 0,
           0, 0, 0, 0, 1, 1, 1, 1;
    raw << 1, -1, 0, 0, 2, -2, 0, 0,
           0, 0, 1, -1, 0, 0, 3, -3;
    const LFactor l = stack_lq(pair_of(per, raw));
    CHECK(l.l21().cwiseAbs().maxCoeff() < 1e-14);
  }

  TEST_CASE("diagonals are nonnegative and the factor is lower triangular") {
    const LFactor l = stack_lq(pair_of(test::white(6, 50, 2), test::white(6, 50, 3), 3));
    CHECK((l.l.diagonal().array() >= 0.0).all());
    CHECK(l.l.triangularView<Eigen::StrictlyUpper>().toDenseMatrix().isZero(0.0));
    CHECK(gram_error(l.l, vcat(test::white(6, 50, 2), test::white(6, 50, 3))) < 1e-12);
  }

  TEST_CASE("an empty batch leaves the factor unchanged") {
    const LFactor l = stack_lq(pair_of(test::white(3, 30, 4), test::white(3, 30, 5)));
    const LFactor same = concat(l, pair_of(Eigen::MatrixXd(3, 0), Eigen::MatrixXd(3, 0)));
    CHECK(same.l == l.l);
    CHECK(same.batches == l.batches);
  }

  TEST_CASE("update equals the factor of the concatenated data") {
    std::mt19937_64 gen(6);
    std::uniform_int_distribution<int> rows(1, 6), extra(0, 40);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      const int r = rows(gen);
      const int c1 = 2 * r + 1 + extra(gen) % (60 - 2 * r);
      const int c2 = 1 + extra(gen);
      const auto s = static_cast<std::uint64_t>(100 + 4 * trial);
      const Eigen::MatrixXd p1 = test::white(r, c1, s), y1 = test::white(r, c1, s + 1);
      const Eigen::MatrixXd p2 = test::white(r, c2, s + 2), y2 = test::white(r, c2, s + 3);
      const LFactor updated = concat(stack_lq(pair_of(p1, y1)), pair_of(p2, y2));
      const LFactor direct = stack_lq(pair_of(hcat(p1, p2), hcat(y1, y2)));
      worst = std::max(worst, max_relative_difference(updated.l, direct.l));
      CHECK(updated.batches == 2);
      CHECK(updated.sample_count == static_cast<std::size_t>(c1 + c2));
    }
    CHECK(worst < 1e-10);
  }

  TEST_CASE("blockwise Gram sums hold after an update") {
    const Eigen::MatrixXd p1 = test::white(3, 20, 7), y1 = test::white(3, 20, 8);
    const Eigen::MatrixXd p2 = test::white(3, 15, 9), y2 = test::white(3, 15, 10);
    const LFactor l = concat(stack_lq(pair_of(p1, y1)), pair_of(p2, y2));
    const Eigen::MatrixXd l11 = l.l11(), l21 = l.l21(), l22 = l.l22();
    const auto rel = [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
      return (a - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff();
    };
    CHECK(rel(l11 * l11.transpose(), p1 * p1.transpose() + p2 * p2.transpose()) < 1e-12);
    CHECK(rel(l21 * l11.transpose(), y1 * p1.transpose() + y2 * p2.transpose()) < 1e-12);
    CHECK(rel(l21 * l21.transpose() + l22 * l22.transpose(), y1 * y1.transpose() + y2 * y2.transpose()) < 1e-12);

    // A single batch reproduces its own Gram blocks.
    const LFactor one = stack_lq(pair_of(p1, y1));
    CHECK(rel(one.l11() * one.l11().transpose(), p1 * p1.transpose()) < 1e-12);
    CHECK(rel(one.l21() * one.l11().transpose(), y1 * p1.transpose()) < 1e-12);
  }

  TEST_CASE("three updates equal one factorization of all three batches") {
    std::vector<Eigen::MatrixXd> p, y;
    for (std::uint64_t i = 0; i < 3; ++i) {
      p.push_back(test::white(4, 25 + 5 * static_cast<Eigen::Index>(i), 20 + 2 * i));
      y.push_back(test::white(4, 25 + 5 * static_cast<Eigen::Index>(i), 21 + 2 * i));
    }
    const LFactor chained = concat(concat(stack_lq(pair_of(p[0], y[0], 2)), pair_of(p[1], y[1], 2)), pair_of(p[2], y[2], 2));
    const LFactor direct = stack_lq(pair_of(hcat(hcat(p[0], p[1]), p[2]), hcat(hcat(y[0], y[1]), y[2]), 2));
    CHECK(max_relative_difference(chained.l, direct.l) < 1e-10);
    CHECK(chained.batches == 3);

    const LFactor merged = merge(stack_lq(pair_of(p[0], y[0], 2)),
                                 merge(stack_lq(pair_of(p[1], y[1], 2)), stack_lq(pair_of(p[2], y[2], 2))));
    CHECK(max_relative_difference(merged.l, direct.l) < 1e-10);
    CHECK(merged.sample_count == direct.sample_count);
  }

  TEST_CASE("metadata mismatch names the field") {
    const LFactor l = stack_lq(pair_of(test::white(4, 30, 11), test::white(4, 30, 12), 2));
    HankelPair other = pair_of(test::white(4, 30, 13), test::white(4, 30, 14), 2);
    other.rate = 2.0;
    CHECK_THROWS_WITH_AS(concat(l, other), doctest::Contains("rate"), Error);
    other = pair_of(test::white(4, 30, 13), test::white(4, 30, 14), 4);
    CHECK_THROWS_WITH_AS(concat(l, other), doctest::Contains("block_rows"), Error);
    CHECK_THROWS_WITH_AS(merge(l, stack_lq(pair_of(test::white(2, 30, 15), test::white(2, 30, 16)))),
                         doctest::Contains("mismatch"), Error);
  }

  TEST_CASE("raw rows identical to the periodic rows are removed completely") {
    const Eigen::MatrixXd y = test::white(4, 60, 17);
    const LFactor l = stack_lq(pair_of(y, y, 2));
    CHECK(l.l22().cwiseAbs().maxCoeff() < 1e-12 * l.l11().cwiseAbs().maxCoeff());
  }

  TEST_CASE("removing a sinusoid leaves the noise Gram matrix") {
    const double rate = 25.0;
    const std::size_t n = 6000;
    const std::size_t block_rows = 5;
    Eigen::MatrixXd tone(2, n);
    tone.row(0) = test::row(test::tone(n, rate, 2.3, 3.0, 0.2));
    tone.row(1) = test::row(test::tone(n, rate, 2.3, 1.5, 1.1));
    // Keep the periodic Hankel rows full rank with a small independent part.
    const Eigen::MatrixXd periodic = tone + test::white(2, static_cast<Eigen::Index>(n), 18, 1e-3);
    const Eigen::MatrixXd noise = test::white(2, static_cast<Eigen::Index>(n), 19, 0.5);
    const HankelPair pair =
        make_hankel_pair(test::series(periodic, rate), test::series(tone + noise, rate), block_rows);
    const EditedData e = remove_harmonic_rows(stack_lq(pair));
    const Eigen::MatrixXd hn = build_hankel(test::series(noise, rate), block_rows);
    const Eigen::MatrixXd want = hn * hn.transpose();
    const Eigen::MatrixXd got = e.l22 * e.l22.transpose();
    CHECK((got - want).norm() / want.norm() < 0.02);
  }

  TEST_CASE("removing the same periodic rows twice changes nothing") {
    const Eigen::MatrixXd per = test::white(4, 80, 21);
    const Eigen::MatrixXd raw = test::white(4, 80, 22) + 0.7 * per;
    const LFactor first = stack_lq(pair_of(per, raw, 2));
    // Explicit residual of the raw rows after projecting out the periodic row space.
    const Eigen::MatrixXd proj = per.transpose() * (per * per.transpose()).ldlt().solve(per);
    const Eigen::MatrixXd residual = raw - raw * proj;
    const LFactor second = stack_lq(pair_of(per, residual, 2));
    CHECK(second.l21().cwiseAbs().maxCoeff() < 1e-12 * second.l11().cwiseAbs().maxCoeff());
    CHECK(max_relative_difference(second.l22(), first.l22()) < 1e-10);
  }

  TEST_CASE("noise-free second-order free decay gives the exact poles") {
    const double dt = 0.1;
    const std::complex<double> mu = pole(1.0, 0.005, dt);
    Eigen::Matrix2d a;
    a << mu.real(), -mu.imag(), mu.imag(), mu.real();
    Eigen::Matrix2d c;
    c << 1.0, 0.3, -0.4, 2.0;
    Eigen::MatrixXd y(2, 2000);
    Eigen::Vector2d x(1.0, 0.5);
    for (Eigen::Index k = 0; k < y.cols(); ++k) {
      y.col(k) = c * x;
      x = a * x;
    }
    const StateSpaceModel m = ssi(raw_edited_data(test::series(y, 1.0 / dt), 10), 2);
    Eigen::ComplexEigenSolver<Eigen::MatrixXd> es(m.a);
    for (Eigen::Index i = 0; i < 2; ++i) {
      const std::complex<double> got = es.eigenvalues()(i);
      CHECK(std::min(std::abs(got - mu), std::abs(got - std::conj(mu))) < 1e-6);
    }
  }

  TEST_CASE("noise-free three-mass free decay gives the exact discrete poles at order 6") {
    const sim::ChainModel model = sim::default_chain();
    sim::ExcitationSpec e;
    e.noise_std = 0.0;
    e.duration = 30.0;
    e.initial_displacement = {0.1, -0.05, 0.02};
    const TimeSeries ts = sim::simulate(model, e);
    const StateSpaceModel m = ssi(raw_edited_data(ts, 12), 6);
    Eigen::ComplexEigenSolver<Eigen::MatrixXd> truth(sim::discretize(model, ts.dt()).ad);
    Eigen::ComplexEigenSolver<Eigen::MatrixXd> got(m.a);
    for (Eigen::Index i = 0; i < 6; ++i) {
      double best = 1e300;
      for (Eigen::Index j = 0; j < 6; ++j) best = std::min(best, std::abs(got.eigenvalues()(j) - truth.eigenvalues()(i)));
      CHECK(best < 1e-6);
    }
  }

  TEST_CASE("white-noise response at order 6 recovers the exact modes") {
    const sim::ChainModel model = sim::default_chain();
    sim::ExcitationSpec e = sim::default_excitation();
    e.harmonics = {};
    e.seed = 11;
    const ModalSet s = modal_params(ssi(raw_edited_data(sim::simulate(model, e), 30), 6));
    CHECK(matches_truth(s, sim::exact_modes(model)));
  }

  TEST_CASE("pure noise at order 2 gives only poles that do not persist") {
    // An order-2 fit to white noise can land near the unit circle; what makes
    // it spurious is that the next order does not reproduce it.
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const TimeSeries ts = test::series(test::white(3, 15000, seed), 25.0);
      const SubspaceIdentifier id(raw_edited_data(ts, 30));
      const ModalSet two = modal_params(id.model(2));
      const ModalSet four = modal_params(id.model(4));
      for (const ModalEstimate& m : two.modes) {
        bool persists = false;
        for (const ModalEstimate& k : four.modes) {
          persists = persists || (std::abs(k.frequency - m.frequency) <= 0.01 * m.frequency &&
                                  std::abs(k.damping_pct - m.damping_pct) <= 5.0);
        }
        CHECK((std::abs(m.pole) < 0.5 || !persists));
      }
    }
  }

  TEST_CASE("order beyond the data rank is reported") {
    const Eigen::MatrixXd y = test::row(test::tone(500, 10.0, 1.0));
    const SubspaceIdentifier id(raw_edited_data(test::series(y, 10.0), 10));
    CHECK_NOTHROW(id.model(2));
    CHECK_THROWS_WITH_AS(id.model(4), doctest::Contains("order exceeds rank"), Error);
    try {
      id.model(4);
    } catch (const Error& err) {
      CHECK(err.error_class() == ErrorClass::identification);
    }
    CHECK_THROWS_AS(id.model(40), Error);
  }

  TEST_CASE("a 1 Hz pole with 1 % damping converts back exactly") {
    const double dt = 0.04;
    const std::complex<double> mu = std::exp(std::complex<double>(-0.01 * 2 * test::pi, 2 * test::pi * std::sqrt(1 - 1e-4)) * dt);
    const ModalEstimate m = pole_to_modal(mu, dt, 6);
    CHECK(m.frequency == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.damping_pct == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(m.order == 6);
    CHECK_FALSE(m.unstable);
  }

  TEST_CASE("unit-circle poles have zero damping, outside poles are flagged") {
    const ModalEstimate m = pole_to_modal(std::polar(1.0, 0.3), 0.04, 2);
    CHECK(std::abs(m.damping_pct) < 1e-12);
    const ModalEstimate u = pole_to_modal(std::polar(1.01, 0.3), 0.04, 2);
    CHECK(u.unstable);
    CHECK(u.damping_pct < 0.0);
  }

  TEST_CASE("modal_params keeps one entry per pair and counts real and zero poles") {
    const double dt = 0.04;
    const std::complex<double> a = pole(2.0, 0.03, dt), b = pole(5.0, 0.01, dt);
    StateSpaceModel m;
    m.order = 6;
    m.dt = dt;
    m.a = Eigen::MatrixXd::Zero(6, 6);
    m.a.block(0, 0, 2, 2) << a.real(), -a.imag(), a.imag(), a.real();
    m.a.block(2, 2, 2, 2) << b.real(), -b.imag(), b.imag(), b.real();
    m.a(4, 4) = 0.5;
    m.a(5, 5) = 0.0;
    m.c = Eigen::MatrixXd::Ones(1, 6);
    const ModalSet s = modal_params(m);
    REQUIRE(s.modes.size() == 2);
    CHECK(s.real_poles == 1);
    CHECK(s.zero_poles == 1);
    CHECK(s.modes[0].frequency == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(s.modes[0].damping_pct == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(s.modes[1].frequency == doctest::Approx(5.0).epsilon(1e-10));
    CHECK(s.modes[1].channel_energy > 0.0);
  }

  TEST_CASE("a three-mode table in fractions of Nyquist survives the JSON export") {
    // Table shape used for reporting: normalized frequencies and damping in percent.
    const double nyquist = 12.5;
    const double f[] = {0.0668, 0.342, 0.803};
    const double d[] = {0.943, 0.170, 0.243};
    InterpretationResult r;
    r.selected_order = 20;
    StabilizationDiagram diag;
    diag.orders = {20};
    for (int i = 0; i < 3; ++i) {
      ModalEstimate m;
      m.frequency = f[i] * nyquist;
      m.damping_pct = d[i];
      m.order = 20;
      r.modes.push_back(m);
      r.unique_freqs.push_back(m.frequency);
      r.occurrence_counts.push_back(5);
    }
    const nlohmann::json j = nlohmann::json::parse(io::interpretation_json(r, "kfssi", diag, nyquist));
    CHECK(j["frequency_unit"] == "fraction of Nyquist");
    REQUIRE(j["modes"].size() == 3);
    for (int i = 0; i < 3; ++i) {
      CHECK(j["modes"][i]["frequency"].get<double>() == doctest::Approx(f[i]).epsilon(1e-14));
      CHECK(j["modes"][i]["damping_pct"].get<double>() == d[i]);
      CHECK(j["unique_freqs"][i].get<double>() == doctest::Approx(f[i]).epsilon(1e-14));
    }
  }

  TEST_CASE("empty harmonic set reproduces plain SSI exactly") {
    sim::ExcitationSpec e = sim::default_excitation();
    e.duration = 120.0;
    e.seed = 12;
    const TimeSeries ts = sim::simulate(sim::default_chain(), e);
    PipelineConfig cfg;
    cfg.orders = {2, 4, 6, 8};
    const std::vector<OrderResult> a = kfssi_pipeline(ts, HarmonicSet{}, cfg);
    const std::vector<OrderResult> b = ssi_pipeline(ts, cfg);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      REQUIRE(a[i].modes.modes.size() == b[i].modes.modes.size());
      for (std::size_t k = 0; k < a[i].modes.modes.size(); ++k) {
        CHECK(a[i].modes.modes[k].pole == b[i].modes.modes[k].pole);
      }
    }
  }

  TEST_CASE("removing three harmonics suppresses their poles and keeps the modes") {
    const sim::ChainModel model = sim::default_chain();
    sim::ExcitationSpec e = sim::default_excitation();
    e.harmonics.set.multipliers = {3, 6, 9};
    e.harmonics.amplitudes = {5, 5, 5};
    e.seed = 1;
    const TimeSeries ts = sim::simulate(model, e);
    const std::vector<double> h = e.harmonics.set.freqs();
    PipelineConfig cfg;
    const std::vector<OrderResult> plain = ssi_pipeline(ts, cfg);
    const std::vector<OrderResult> kf = kfssi_pipeline(ts, e.harmonics.set, cfg);
    CHECK(near_harmonic_poles(plain, h, 0.2) >= 1);
    CHECK(near_harmonic_poles(kf, h, 0.1) == 0);
    CHECK(matches_truth(at_order(kf, 6).modes, sim::exact_modes(model)));

    const std::vector<OrderResult> again = kfssi_pipeline(ts, e.harmonics.set, cfg);
    CHECK(again.back().modes.modes.size() == kf.back().modes.modes.size());
    CHECK(again.back().modes.modes.front().pole == kf.back().modes.modes.front().pole);
  }

  TEST_CASE("default order sweep is capped by the block rows") {
    const std::vector<std::size_t> o = default_orders(2, 30);
    CHECK(o.front() == 2);
    CHECK(o.back() == 28);
    CHECK(default_orders(10, 30).back() == 40);
  }
}
