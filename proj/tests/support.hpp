#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kfssi/signal.hpp"

namespace test {

inline constexpr double pi = 3.14159265358979323846;

inline kfssi::TimeSeries series(const Eigen::MatrixXd& data, double rate) {
  kfssi::TimeSeries ts;
  ts.rate = rate;
  ts.data = data;
  for (Eigen::Index c = 0; c < data.rows(); ++c) ts.names.push_back("ch" + std::to_string(c));
  return ts;
}

inline Eigen::MatrixXd white(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double sd = 1.0) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> n(0.0, sd);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n(gen);
  return m;
}

inline std::vector<double> tone(std::size_t n, double rate, double freq, double amp = 1.0, double phase = 0.0) {
  std::vector<double> x(n);
  for (std::size_t k = 0; k < n; ++k) x[k] = amp * std::cos(2.0 * pi * freq * static_cast<double>(k) / rate + phase);
  return x;
}

inline Eigen::RowVectorXd row(const std::vector<double>& x) {
  return Eigen::Map<const Eigen::RowVectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
}

inline double correlation(const Eigen::Ref<const Eigen::RowVectorXd>& a, const Eigen::Ref<const Eigen::RowVectorXd>& b) {
  const Eigen::RowVectorXd x = a.array() - a.mean();
  const Eigen::RowVectorXd y = b.array() - b.mean();
  return x.dot(y) / std::sqrt(x.squaredNorm() * y.squaredNorm());
}

inline double rel_err(double got, double want) { return std::abs(got - want) / std::abs(want); }

}  // namespace test
