#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kfssi/identify.hpp"
#include "kfssi/signal.hpp"

namespace kfssi {

struct StabilityTolerances {
  double freq = 0.01;        // relative
  double damping_pct = 5.0;  // percentage points of zeta * 100
};

struct StabilizationDiagram {
  std::vector<std::size_t> orders;
  std::vector<ModalEstimate> entries;
  // Per entry; empty for entries of the first swept order.
  std::vector<std::optional<bool>> stable;
  // Orders whose identification failed; they contribute no entries.
  std::vector<std::pair<std::size_t, std::string>> failures;
  std::optional<Spectrum> spectrum;
  StabilityTolerances tolerances;
};

using IdentifyFn = std::function<ModalSet(std::size_t order)>;

/// Runs `identify` per order. Orders must be even, >= 2 and strictly
/// increasing. A pole is flagged stable when the previous swept order holds a
/// pole within both tolerances. An Error thrown at one order is recorded and
/// the sweep continues.
StabilizationDiagram order_sweep(std::span<const std::size_t> orders, const IdentifyFn& identify,
                                 const StabilityTolerances& tol = {});

/// Same diagram from precomputed per-order results.
StabilizationDiagram make_diagram(std::span<const OrderResult> results, const StabilityTolerances& tol = {});

struct FreqCluster {
  std::vector<std::size_t> members;  // indices into the input, ascending frequency
  double representative = 0.0;       // median
};

/// Single-linkage 1-D clustering: sort and split wherever
/// (f[i+1] - f[i]) > tol * f[i]. Chains of small gaps merge into one cluster.
/// Clusters come out in ascending frequency.
std::vector<FreqCluster> cluster_freqs(std::span<const double> freqs, double tol);

struct InterpretOptions {
  double tol = 0.02;
  std::size_t n_min = 3;
  double max_damping_pct = 20.0;
  double min_damping_pct = -1.0;
  // Only poles flagged stable against the previous order enter the clustering.
  bool stable_only = false;
};

struct InterpretationResult {
  std::size_t selected_order = 0;
  std::vector<ModalEstimate> modes;            // at selected_order, one per cluster present
  std::vector<double> unique_freqs;            // representatives of the kept clusters
  std::vector<std::size_t> occurrence_counts;  // members per kept cluster
  std::vector<std::size_t> counts_per_order;   // kept clusters present, aligned with the diagram orders
  std::size_t dropped_poles = 0;               // removed by the damping (or stability) filter
};

/// Automatic interpretation. Poles outside [min_damping_pct, max_damping_pct]
/// are dropped (as are unflagged poles with stable_only), the rest clustered
/// by frequency; clusters with at least n_min
/// members are kept. The result is the lowest order containing the largest
/// number of kept clusters; where an order holds several poles of a cluster
/// the one nearest the representative is reported. Throws
/// Error(identification) "no persistent modes" when no cluster is kept.
InterpretationResult auto_interpret(const StabilizationDiagram& diag, const InterpretOptions& opt = {});

struct BoxStats {
  std::size_t count = 0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double min = 0.0;
  double max = 0.0;

  double iqr() const { return q3 - q1; }
};

/// Quartiles by linear interpolation between order statistics.
BoxStats box_stats(std::vector<double> values);

struct ModeBox {
  double reference_freq = 0.0;  // median of the pooled cluster
  std::size_t matched = 0;
  std::size_t missing = 0;      // results with no mode within the match tolerance
  BoxStats frequency;
  BoxStats damping_pct;
};

/// Box statistics per mode over repeated results (one per left-out dataset,
/// or one per dataset). Modes of all results are pooled and clustered with
/// `match_tol`; each result contributes its mode nearest the cluster
/// representative if within `match_tol`. Needs at least 3 results.
std::vector<ModeBox> loo_aggregate(std::span<const InterpretationResult> results, double match_tol = 0.05);

}  // namespace kfssi
