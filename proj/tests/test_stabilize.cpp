#include <algorithm>
#include <cmath>
#include <optional>
#include <random>

#include "diagrams.hpp"
#include "doctest.h"
#include "kfssi/error.hpp"
#include "kfssi/identify.hpp"
#include "kfssi/sim.hpp"
#include "kfssi/stabilize.hpp"
#include "support.hpp"

using namespace kfssi;

namespace {

ModalEstimate mode(double f, double d = 2.0) {
  ModalEstimate m;
  m.frequency = f;
  m.damping_pct = d;
  return m;
}

// Diagram over orders 2..20 where `present(order)` lists the frequencies found.
template <typename F>
StabilizationDiagram diagram_of(F present) {
  std::vector<OrderResult> results;
  for (std::size_t n = 2; n <= 20; n += 2) {
    OrderResult r;
    r.order = n;
    for (double f : present(n)) r.modes.modes.push_back(mode(f));
    results.push_back(r);
  }
  return make_diagram(results);
}

InterpretationResult interpret(const StabilizationDiagram& d, std::size_t n_min) {
  InterpretOptions o;
  o.n_min = n_min;
  return auto_interpret(d, o);
}

std::optional<InterpretationResult> try_interpret(const StabilizationDiagram& d, std::size_t n_min) {
  try {
    return interpret(d, n_min);
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace

TEST_SUITE("stabilize") {
  TEST_CASE("a noise-free second-order pole is found at every order and stable from order 4") {
    const double dt = 0.1;
    const double w = 2.0 * test::pi, zeta = 0.005;
    Eigen::MatrixXd y(2, 2000);
    for (Eigen::Index k = 0; k < y.cols(); ++k) {
      const double t = static_cast<double>(k) * dt;
      const double env = std::exp(-zeta * w * t);
      y(0, k) = env * std::cos(w * t);
      y(1, k) = -0.6 * env * std::cos(w * t + 0.8);
    }
    // Tiny noise so orders above the true one stay identifiable.
    y += test::white(2, y.cols(), 1, 1e-7);
    const SubspaceIdentifier id(raw_edited_data(test::series(y, 1.0 / dt), 12));
    const std::vector<std::size_t> orders{2, 4, 6};
    const StabilizationDiagram d = order_sweep(orders, [&](std::size_t n) { return modal_params(id.model(n)); });
    CHECK(d.failures.empty());
    for (std::size_t n : orders) {
      bool found = false;
      for (std::size_t i = 0; i < d.entries.size(); ++i) {
        const ModalEstimate& m = d.entries[i];
        if (m.order != n || std::abs(m.frequency - 1.0) > 1e-3) continue;
        found = true;
        CHECK(m.damping_pct == doctest::Approx(0.5).epsilon(1e-3));
        if (n == 2) CHECK_FALSE(d.stable[i].has_value());
        else CHECK(d.stable[i] == std::optional<bool>(true));
      }
      CHECK(found);
    }
  }

  TEST_CASE("pure noise: no frequency persists over three orders in more than one realization") {
    // A single realization can hold a chance chain of matching poles; a
    // physical mode would chain at the same frequency in every realization.
    std::vector<std::vector<double>> chained;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const SubspaceIdentifier id(raw_edited_data(test::series(test::white(3, 15000, 40 + seed), 25.0), 30));
      const std::vector<std::size_t> orders{2, 4, 6, 8, 10, 12};
      const StabilizationDiagram d = order_sweep(orders, [&](std::size_t n) { return modal_params(id.model(n)); });
      std::vector<double> found;
      for (std::size_t i = 0; i < d.entries.size(); ++i) {
        if (!d.stable[i].value_or(false)) continue;
        for (std::size_t j = 0; j < d.entries.size(); ++j) {
          const ModalEstimate& a = d.entries[i];
          const ModalEstimate& b = d.entries[j];
          if (b.order + 2 == a.order && d.stable[j].value_or(false) &&
              std::abs(a.frequency - b.frequency) <= 0.01 * b.frequency &&
              std::abs(a.damping_pct - b.damping_pct) <= 5.0) {
            found.push_back(a.frequency);
          }
        }
      }
      chained.push_back(found);
    }
    for (std::size_t s = 0; s < chained.size(); ++s) {
      for (std::size_t t = s + 1; t < chained.size(); ++t)
        for (double f : chained[s])
          for (double g : chained[t]) CHECK(std::abs(f - g) > 0.02 * f);
    }
  }

  TEST_CASE("a single order carries no flags") {
    const std::vector<std::size_t> orders{6};
    const StabilizationDiagram d =
        order_sweep(orders, [](std::size_t) { return ModalSet{{mode(1.0), mode(2.0)}, 0, 0}; });
    REQUIRE(d.entries.size() == 2);
    for (const auto& f : d.stable) CHECK_FALSE(f.has_value());
  }

  TEST_CASE("failures are recorded and the sweep goes on") {
    const std::vector<std::size_t> orders{2, 4, 6};
    const StabilizationDiagram d = order_sweep(orders, [](std::size_t n) {
      if (n == 4) fail(ErrorClass::identification, "order exceeds rank");
      return ModalSet{{mode(1.0)}, 0, 0};
    });
    REQUIRE(d.failures.size() == 1);
    CHECK(d.failures[0].first == 4);
    REQUIRE(d.entries.size() == 2);
    // Order 6 has no predecessor entry at order 4.
    CHECK(d.stable[1] == std::optional<bool>(false));
    for (const ModalEstimate& m : d.entries) CHECK(std::find(orders.begin(), orders.end(), m.order) != orders.end());
  }

  TEST_CASE("sweep orders must be even and increasing") {
    const auto id = [](std::size_t) { return ModalSet{}; };
    CHECK_THROWS_AS(order_sweep(std::vector<std::size_t>{2, 3}, id), Error);
    CHECK_THROWS_AS(order_sweep(std::vector<std::size_t>{4, 2}, id), Error);
    CHECK_THROWS_AS(order_sweep(std::vector<std::size_t>{0, 2}, id), Error);
    CHECK_THROWS_AS(order_sweep(std::vector<std::size_t>{2, 4}, id, {0.0, 5.0}), Error);
  }

  TEST_CASE("one frequency at every order selects the lowest order") {
    const StabilizationDiagram d = diagram_of([](std::size_t) { return std::vector<double>{1.0}; });
    const InterpretationResult r = interpret(d, 5);
    CHECK(r.selected_order == 2);
    REQUIRE(r.modes.size() == 1);
    CHECK(r.modes[0].frequency == 1.0);
    CHECK(r.unique_freqs == std::vector<double>{1.0});
    CHECK(r.occurrence_counts == std::vector<std::size_t>{10});
  }

  TEST_CASE("a second cluster from order 8 upward selects order 8") {
    const StabilizationDiagram d = diagram_of([](std::size_t n) {
      return n >= 8 ? std::vector<double>{1.0, 3.0} : std::vector<double>{1.0};
    });
    const InterpretationResult r = interpret(d, 3);
    CHECK(r.selected_order == 8);
    REQUIRE(r.modes.size() == 2);
    CHECK(r.modes[0].frequency == 1.0);
    CHECK(r.modes[1].frequency == 3.0);
    CHECK(r.counts_per_order == std::vector<std::size_t>{1, 1, 1, 2, 2, 2, 2, 2, 2, 2});
  }

  TEST_CASE("no cluster reaching n_min is an identification error") {
    const StabilizationDiagram d = diagram_of([](std::size_t n) { return std::vector<double>{static_cast<double>(n)}; });
    CHECK_THROWS_WITH_AS(interpret(d, 2), doctest::Contains("no persistent modes"), Error);
  }

  TEST_CASE("heavily damped and strongly negative poles are dropped before clustering") {
    std::vector<OrderResult> results;
    for (std::size_t n = 2; n <= 8; n += 2) {
      OrderResult r;
      r.order = n;
      r.modes.modes = {mode(1.0, 2.0), mode(2.0, 35.0), mode(3.0, -4.0)};
      results.push_back(r);
    }
    const InterpretationResult r = interpret(make_diagram(results), 3);
    CHECK(r.unique_freqs == std::vector<double>{1.0});
    CHECK(r.dropped_poles == 8);
  }

  TEST_CASE("stable_only clusters flagged poles alone") {
    // 1 Hz is steady; 2 Hz wanders in damping so it is never flagged stable.
    std::vector<OrderResult> results;
    for (std::size_t n = 2; n <= 12; n += 2) {
      OrderResult r;
      r.order = n;
      r.modes.modes = {mode(1.0, 2.0), mode(2.0, (n / 2) % 2 == 0 ? 1.0 : 15.0)};
      results.push_back(r);
    }
    const StabilizationDiagram d = make_diagram(results);
    InterpretOptions o;
    CHECK(auto_interpret(d, o).unique_freqs.size() == 2);
    o.stable_only = true;
    const InterpretationResult r = auto_interpret(d, o);
    CHECK(r.unique_freqs == std::vector<double>{1.0});
    CHECK(r.selected_order == 4);
    CHECK(r.dropped_poles == 7);
  }

  TEST_CASE("three-mode KF-SSI sweep gives three clusters at the exact modes") {
    const sim::ChainModel model = sim::default_chain();
    const sim::ModalTruth truth = sim::exact_modes(model);
    sim::ExcitationSpec e = sim::default_excitation();
    e.harmonics.set.multipliers = {3, 6, 9};
    e.harmonics.amplitudes = {5, 5, 5};
    e.seed = 1;
    const StabilizationDiagram d = make_diagram(kfssi_pipeline(sim::simulate(model, e), e.harmonics.set, {}));
    InterpretOptions o;
    o.stable_only = true;
    o.n_min = d.orders.size() / 2;
    const InterpretationResult r = auto_interpret(d, o);
    REQUIRE(r.unique_freqs.size() == 3);
    REQUIRE(r.modes.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(test::rel_err(r.modes[i].frequency, truth.frequencies[i]) < 0.01);
      CHECK(test::rel_err(r.modes[i].damping_pct, 100.0 * truth.damping_ratios[i]) < 0.2);
    }
  }

  TEST_CASE("clustering examples") {
    const std::vector<double> a{1.00, 1.004, 2.0};
    const std::vector<FreqCluster> ca = cluster_freqs(a, 0.01);
    REQUIRE(ca.size() == 2);
    CHECK(ca[0].members == std::vector<std::size_t>{0, 1});
    CHECK(ca[1].members == std::vector<std::size_t>{2});
    CHECK(ca[0].representative == doctest::Approx(1.002));

    CHECK(cluster_freqs(std::vector<double>{}, 0.01).empty());

    const std::vector<double> chain{1.00, 1.009, 1.018};
    CHECK(cluster_freqs(chain, 0.01).size() == 1);
    CHECK_THROWS_AS(cluster_freqs(chain, 0.0), Error);
  }

  TEST_CASE("clusters partition their input") {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(0.1, 10.0);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> f(1 + static_cast<std::size_t>(trial));
      for (double& x : f) x = u(gen);
      std::vector<int> seen(f.size(), 0);
      double last = 0.0;
      for (const FreqCluster& c : cluster_freqs(f, 0.02)) {
        CHECK(c.representative >= last);
        last = c.representative;
        for (std::size_t i : c.members) ++seen[i];
      }
      CHECK(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
    }
  }

  TEST_CASE("interpretation does not depend on entry order within an order") {
    int compared = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      const StabilizationDiagram d = make_diagram(test::random_results(seed));
      const StabilizationDiagram p = test::shuffle_within_orders(d, seed + 1000);
      for (bool stable_only : {false, true}) {
        InterpretOptions o;
        o.stable_only = stable_only;
        std::optional<InterpretationResult> a, b;
        try {
          a = auto_interpret(d, o);
        } catch (const Error&) {
        }
        try {
          b = auto_interpret(p, o);
        } catch (const Error&) {
        }
        REQUIRE(a.has_value() == b.has_value());
        if (a) {
          CHECK(test::same_interpretation(*a, *b));
          ++compared;
        }
      }
    }
    CHECK(compared > 150);
  }

  TEST_CASE("lowering n_min never loses clusters or count") {
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      const StabilizationDiagram d = make_diagram(test::random_results(seed));
      std::size_t kept = 0, best = 0;
      for (std::size_t n_min = 8; n_min >= 1; --n_min) {
        const std::optional<InterpretationResult> r = try_interpret(d, n_min);
        const std::size_t k = r ? r->unique_freqs.size() : 0;
        const std::size_t b = r ? *std::max_element(r->counts_per_order.begin(), r->counts_per_order.end()) : 0;
        CHECK(k >= kept);
        CHECK(b >= best);
        kept = k;
        best = b;
      }
    }
  }

  TEST_CASE("lowering n_min can raise the selected order") {
    // A short-lived cluster that only a weak n_min admits moves the first
    // order holding every kept cluster upward.
    const StabilizationDiagram d = diagram_of([](std::size_t n) {
      return n == 10 || n == 12 ? std::vector<double>{1.0, 5.0} : std::vector<double>{1.0};
    });
    CHECK(interpret(d, 3).selected_order == 2);
    CHECK(interpret(d, 2).selected_order == 10);
  }

  TEST_CASE("box statistics use linear interpolation between order statistics") {
    const BoxStats b = box_stats({4.0, 1.0, 3.0, 2.0});
    CHECK(b.count == 4);
    CHECK(b.q1 == doctest::Approx(1.75));
    CHECK(b.median == doctest::Approx(2.5));
    CHECK(b.q3 == doctest::Approx(3.25));
    CHECK(b.min == 1.0);
    CHECK(b.max == 4.0);
    CHECK(b.iqr() == doctest::Approx(1.5));
    const BoxStats one = box_stats({7.0});
    CHECK(one.median == 7.0);
    CHECK(one.iqr() == 0.0);
    CHECK(std::isnan(box_stats({}).median));
  }

  TEST_CASE("box statistics ignore the order of the values") {
    std::mt19937_64 gen(9);
    std::normal_distribution<double> n(2.0, 0.5);
    std::vector<double> v(37);
    for (double& x : v) x = n(gen);
    const BoxStats ref = box_stats(v);
    for (int trial = 0; trial < 20; ++trial) {
      std::shuffle(v.begin(), v.end(), gen);
      const BoxStats b = box_stats(v);
      CHECK(b.q1 == ref.q1);
      CHECK(b.median == ref.median);
      CHECK(b.q3 == ref.q3);
    }
  }

  TEST_CASE("identical results have zero spread") {
    InterpretationResult r;
    r.modes = {mode(1.5, 2.0), mode(4.2, 5.5)};
    const std::vector<InterpretationResult> results(5, r);
    const std::vector<ModeBox> boxes = loo_aggregate(results);
    REQUIRE(boxes.size() == 2);
    for (const ModeBox& b : boxes) {
      CHECK(b.matched == 5);
      CHECK(b.missing == 0);
      CHECK(b.frequency.iqr() == 0.0);
      CHECK(b.damping_pct.iqr() == 0.0);
    }
  }

  TEST_CASE("one outlier leaves the median unchanged") {
    InterpretationResult r;
    r.modes = {mode(1.5, 2.0)};
    std::vector<InterpretationResult> results(9, r);
    InterpretationResult odd;
    odd.modes = {mode(1.52, 9.0)};
    results.push_back(odd);
    const std::vector<ModeBox> boxes = loo_aggregate(results);
    REQUIRE(boxes.size() == 1);
    CHECK(boxes[0].damping_pct.median == 2.0);
    CHECK(boxes[0].frequency.median == 1.5);
    CHECK(boxes[0].damping_pct.max == 9.0);
  }

  TEST_CASE("results missing a mode are counted, not matched") {
    InterpretationResult both, first;
    both.modes = {mode(1.5), mode(4.2)};
    first.modes = {mode(1.5)};
    const std::vector<InterpretationResult> results{both, both, first, both};
    const std::vector<ModeBox> boxes = loo_aggregate(results);
    REQUIRE(boxes.size() == 2);
    CHECK(boxes[1].matched == 3);
    CHECK(boxes[1].missing == 1);
    CHECK_THROWS_AS(loo_aggregate(std::vector<InterpretationResult>{both, both}), Error);
  }

  TEST_CASE("aggregate statistics do not depend on result order") {
    std::mt19937_64 gen(3);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<InterpretationResult> results(10);
    for (InterpretationResult& r : results) r.modes = {mode(1.5 + 0.01 * n(gen), 2.0 + 0.3 * n(gen))};
    const ModeBox ref = loo_aggregate(results)[0];
    for (int trial = 0; trial < 10; ++trial) {
      std::shuffle(results.begin(), results.end(), gen);
      const ModeBox b = loo_aggregate(results)[0];
      CHECK(b.damping_pct.median == ref.damping_pct.median);
      CHECK(b.damping_pct.q1 == ref.damping_pct.q1);
      CHECK(b.damping_pct.q3 == ref.damping_pct.q3);
      CHECK(b.frequency.median == ref.frequency.median);
    }
  }
}
