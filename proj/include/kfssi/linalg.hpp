#pragma once

#include <Eigen/Dense>

namespace kfssi {

/// Lower-triangular factor of the LQ decomposition A = L Q^T (Q with
/// orthonormal columns), computed as the transpose of a Householder QR of
/// A^T. Columns of L are sign-flipped so that diag(L) >= 0, which makes L
/// unique for full-row-rank A. Requires cols >= rows.
Eigen::MatrixXd lq_lower(const Eigen::Ref<const Eigen::MatrixXd>& a);

/// max |a - b| / max(|a|, |b|) over entries where either is nonzero.
double max_relative_difference(const Eigen::Ref<const Eigen::MatrixXd>& a, const Eigen::Ref<const Eigen::MatrixXd>& b);

}  // namespace kfssi
