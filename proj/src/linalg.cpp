#include "kfssi/linalg.hpp"

#include <algorithm>
#include <cmath>

#include "kfssi/error.hpp"

namespace kfssi {

Eigen::MatrixXd lq_lower(const Eigen::Ref<const Eigen::MatrixXd>& a) {
  const Eigen::Index rows = a.rows();
  if (a.cols() < rows) invalid("lq_lower: need at least as many columns as rows");
  if (rows == 0) return Eigen::MatrixXd(0, 0);

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a.transpose());
  Eigen::MatrixXd l = qr.matrixQR().topRows(rows).triangularView<Eigen::Upper>().transpose();
  for (Eigen::Index j = 0; j < rows; ++j) {
    if (l(j, j) < 0.0) l.col(j) *= -1.0;
  }
  return l;
}

double max_relative_difference(const Eigen::Ref<const Eigen::MatrixXd>& a, const Eigen::Ref<const Eigen::MatrixXd>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) invalid("max_relative_difference: shape mismatch");
  double worst = 0.0;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      const double scale = std::max(std::abs(a(i, j)), std::abs(b(i, j)));
      if (scale > 0.0) worst = std::max(worst, std::abs(a(i, j) - b(i, j)) / scale);
    }
  }
  return worst;
}

}  // namespace kfssi
