#include "kfssi/stabilize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "kfssi/error.hpp"

namespace kfssi {

namespace {

void check_orders(std::span<const std::size_t> orders) {
  for (std::size_t i = 0; i < orders.size(); ++i) {
    if (orders[i] < 2 || orders[i] % 2 != 0) invalid("order sweep: orders must be even and >= 2");
    if (i > 0 && orders[i] <= orders[i - 1]) invalid("order sweep: orders must be strictly increasing");
  }
}

void check_tolerances(const StabilityTolerances& tol) {
  if (!(tol.freq > 0.0) || !(tol.damping_pct > 0.0)) invalid("order sweep: tolerances must be > 0");
}

bool matches(const ModalEstimate& a, const ModalEstimate& b, const StabilityTolerances& tol) {
  if (!(b.frequency > 0.0)) return false;
  return std::abs(a.frequency - b.frequency) <= tol.freq * b.frequency &&
         std::abs(a.damping_pct - b.damping_pct) <= tol.damping_pct;
}

void flag_stability(StabilizationDiagram& d) {
  d.stable.assign(d.entries.size(), std::nullopt);
  for (std::size_t i = 0; i < d.entries.size(); ++i) {
    const std::size_t order = d.entries[i].order;
    const auto it = std::find(d.orders.begin(), d.orders.end(), order);
    if (it == d.orders.begin()) continue;
    const std::size_t prev = *(it - 1);
    bool stable = false;
    for (const ModalEstimate& other : d.entries) {
      if (other.order == prev && matches(d.entries[i], other, d.tolerances)) {
        stable = true;
        break;
      }
    }
    d.stable[i] = stable;
  }
}

// Canonical ordering so results do not depend on the input order of entries.
bool entry_less(const ModalEstimate& a, const ModalEstimate& b) {
  return std::tie(a.frequency, a.damping_pct) < std::tie(b.frequency, b.damping_pct);
}

}  // namespace

StabilizationDiagram order_sweep(std::span<const std::size_t> orders, const IdentifyFn& identify,
                                 const StabilityTolerances& tol) {
  check_orders(orders);
  check_tolerances(tol);
  StabilizationDiagram d;
  d.orders.assign(orders.begin(), orders.end());
  d.tolerances = tol;
  for (std::size_t n : orders) {
    try {
      for (ModalEstimate m : identify(n).modes) {
        m.order = n;
        d.entries.push_back(m);
      }
    } catch (const Error& e) {
      d.failures.emplace_back(n, e.what());
    }
  }
  flag_stability(d);
  return d;
}

StabilizationDiagram make_diagram(std::span<const OrderResult> results, const StabilityTolerances& tol) {
  std::vector<std::size_t> orders;
  for (const OrderResult& r : results) orders.push_back(r.order);
  check_orders(orders);
  check_tolerances(tol);
  StabilizationDiagram d;
  d.orders = orders;
  d.tolerances = tol;
  for (const OrderResult& r : results) {
    if (r.error) d.failures.emplace_back(r.order, *r.error);
    for (ModalEstimate m : r.modes.modes) {
      m.order = r.order;
      d.entries.push_back(m);
    }
  }
  flag_stability(d);
  return d;
}

std::vector<FreqCluster> cluster_freqs(std::span<const double> freqs, double tol) {
  if (!(tol > 0.0)) invalid("cluster_freqs: tol must be > 0");
  std::vector<std::size_t> idx(freqs.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (double f : freqs) {
    if (!std::isfinite(f)) invalid("cluster_freqs: non-finite frequency");
  }
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return freqs[a] < freqs[b]; });

  std::vector<FreqCluster> out;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (k == 0 || freqs[idx[k]] - freqs[idx[k - 1]] > tol * freqs[idx[k - 1]]) out.emplace_back();
    out.back().members.push_back(idx[k]);
  }
  for (FreqCluster& c : out) {
    const std::size_t n = c.members.size();
    const double lo = freqs[c.members[(n - 1) / 2]];
    const double hi = freqs[c.members[n / 2]];
    c.representative = 0.5 * (lo + hi);
  }
  return out;
}

InterpretationResult auto_interpret(const StabilizationDiagram& diag, const InterpretOptions& opt) {
  if (diag.orders.empty()) invalid("auto_interpret: empty diagram");
  if (opt.n_min == 0) invalid("auto_interpret: n_min must be >= 1");
  if (!(opt.max_damping_pct > opt.min_damping_pct)) invalid("auto_interpret: empty damping window");

  if (opt.stable_only && diag.stable.size() != diag.entries.size()) {
    invalid("auto_interpret: stable_only needs one stability flag per entry");
  }

  InterpretationResult r;
  std::vector<ModalEstimate> poles;
  for (std::size_t i = 0; i < diag.entries.size(); ++i) {
    const ModalEstimate& m = diag.entries[i];
    const bool unflagged = opt.stable_only && !diag.stable[i].value_or(false);
    if (unflagged || m.damping_pct > opt.max_damping_pct || m.damping_pct < opt.min_damping_pct ||
        !std::isfinite(m.frequency)) {
      ++r.dropped_poles;
    } else {
      poles.push_back(m);
    }
  }
  std::sort(poles.begin(), poles.end(), [](const ModalEstimate& a, const ModalEstimate& b) {
    return a.order != b.order ? a.order < b.order : entry_less(a, b);
  });

  std::vector<double> freqs;
  for (const ModalEstimate& m : poles) freqs.push_back(m.frequency);
  std::vector<FreqCluster> kept;
  for (FreqCluster& c : cluster_freqs(freqs, opt.tol)) {
    if (c.members.size() >= opt.n_min) kept.push_back(std::move(c));
  }
  if (kept.empty()) fail(ErrorClass::identification, "auto_interpret: no persistent modes");

  std::size_t best = 0;
  for (std::size_t o = 0; o < diag.orders.size(); ++o) {
    std::size_t count = 0;
    for (const FreqCluster& c : kept) {
      const bool present = std::any_of(c.members.begin(), c.members.end(),
                                       [&](std::size_t i) { return poles[i].order == diag.orders[o]; });
      count += present ? 1 : 0;
    }
    r.counts_per_order.push_back(count);
    if (count > r.counts_per_order[best]) best = o;
  }
  r.selected_order = diag.orders[best];

  for (const FreqCluster& c : kept) {
    r.unique_freqs.push_back(c.representative);
    r.occurrence_counts.push_back(c.members.size());
    const ModalEstimate* pick = nullptr;
    for (std::size_t i : c.members) {
      const ModalEstimate& m = poles[i];
      if (m.order != r.selected_order) continue;
      if (pick == nullptr) {
        pick = &m;
        continue;
      }
      const double da = std::abs(m.frequency - c.representative);
      const double db = std::abs(pick->frequency - c.representative);
      if (da < db || (da == db && entry_less(m, *pick))) pick = &m;
    }
    if (pick != nullptr) r.modes.push_back(*pick);
  }
  return r;
}

BoxStats box_stats(std::vector<double> values) {
  BoxStats b;
  b.count = values.size();
  if (values.empty()) {
    b.median = b.q1 = b.q3 = b.min = b.max = std::nan("");
    return b;
  }
  std::sort(values.begin(), values.end());
  auto quantile = [&](double p) {
    const double h = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  b.min = values.front();
  b.max = values.back();
  b.q1 = quantile(0.25);
  b.median = quantile(0.5);
  b.q3 = quantile(0.75);
  return b;
}

std::vector<ModeBox> loo_aggregate(std::span<const InterpretationResult> results, double match_tol) {
  if (results.size() < 3) invalid("loo_aggregate: need at least 3 results");
  if (!(match_tol > 0.0)) invalid("loo_aggregate: match tolerance must be > 0");

  std::vector<double> pooled;
  for (const InterpretationResult& r : results) {
    for (const ModalEstimate& m : r.modes) pooled.push_back(m.frequency);
  }
  std::vector<ModeBox> out;
  for (const FreqCluster& c : cluster_freqs(pooled, match_tol)) {
    ModeBox box;
    box.reference_freq = c.representative;
    std::vector<double> f;
    std::vector<double> d;
    for (const InterpretationResult& r : results) {
      const ModalEstimate* pick = nullptr;
      for (const ModalEstimate& m : r.modes) {
        const double dist = std::abs(m.frequency - c.representative);
        if (dist > match_tol * c.representative) continue;
        if (pick == nullptr || dist < std::abs(pick->frequency - c.representative) ||
            (dist == std::abs(pick->frequency - c.representative) && entry_less(m, *pick))) {
          pick = &m;
        }
      }
      if (pick == nullptr) {
        ++box.missing;
        continue;
      }
      ++box.matched;
      f.push_back(pick->frequency);
      d.push_back(pick->damping_pct);
    }
    box.frequency = box_stats(std::move(f));
    box.damping_pct = box_stats(std::move(d));
    out.push_back(box);
  }
  return out;
}

}  // namespace kfssi
