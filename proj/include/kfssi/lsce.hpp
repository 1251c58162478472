#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kfssi/harmonics.hpp"
#include "kfssi/identify.hpp"
#include "kfssi/signal.hpp"

namespace kfssi {

struct CorrelationData {
  std::vector<std::size_t> lags;  // samples, 0..max_lag
  Eigen::MatrixXd values;         // channels x lags
  double rate = 0.0;
  std::size_t reference = 0;
  std::vector<std::string> names;
};

/// Unbiased correlations R_c(k) = sum_t x_c(t+k) x_ref(t) / (N - k) of the
/// mean-removed channels against channel `reference`. Requires
/// max_lag < N/4; a constant channel is an error.
CorrelationData correlations(const TimeSeries& ts, std::size_t max_lag, std::size_t reference = 0);

struct LsceOptions {
  std::size_t first_lag = 1;  // lag 0 carries the white-noise spike
  double rank_tol = 1e-12;    // relative to the largest |R| diagonal entry
};

struct LsceResult {
  // Monic polynomials, coefficients in ascending powers of z.
  Eigen::VectorXd known_factor;  // product of z^2 - 2 cos(w_h dt) z + 1
  Eigen::VectorXd free_factor;
  Eigen::VectorXd full;          // known_factor * free_factor, degree = order
  std::vector<ModalEstimate> modes;  // from the free factor's complex roots
  std::size_t real_roots = 0;
};

/// Least-squares complex exponential fit of the correlation sequence with
/// the harmonic lines imposed as exact roots. The characteristic polynomial
/// of degree `order` is K(z) G(z) where K holds the unit-circle root pairs of
/// the harmonics. Filtering the data with K leaves a sequence that obeys the
/// G recursion, so only the coefficients of G are fitted (column-pivoted QR
/// over all channels, each channel scaled by its largest |R|). Throws
/// Error(identification) on rank deficiency, quoting a condition estimate.
LsceResult modified_lsce(const CorrelationData& corr, const HarmonicSet& harmonics, std::size_t order,
                         const LsceOptions& opt = {});

/// Coefficients (ascending powers) of prod_h (z^2 - 2 cos(2 pi f_h dt) z + 1).
Eigen::VectorXd harmonic_factor(const HarmonicSet& harmonics, double dt);

}  // namespace kfssi
