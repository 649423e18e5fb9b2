#pragma once

#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mixreg/mixture.hpp"

namespace testsupport {

inline std::mt19937_64 engine(std::uint64_t seed) { return std::mt19937_64(seed); }

inline Eigen::MatrixXd normal_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> n01;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n01(rng);
  return m;
}

/// Ethanol table shipped in data/: columns NOx, C, E.
inline mixreg::RegressionData ethanol() {
  std::ifstream in(MIXREG_DATA_DIR "/ethanol.csv");
  std::string line;
  std::getline(in, line);
  std::vector<double> x, y;
  while (std::getline(in, line)) {
    std::stringstream s(line);
    std::string nox, c, e;
    std::getline(s, nox, ',');
    std::getline(s, c, ',');
    std::getline(s, e, ',');
    x.push_back(std::stod(nox));
    y.push_back(std::stod(e));
  }
  Eigen::MatrixXd xm = Eigen::Map<Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  return mixreg::RegressionData::with_intercept(xm, Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size())));
}

/// Two well separated lines, equal weights.
inline mixreg::RegressionData two_lines(std::uint64_t seed, Eigen::Index n, double noise = 0.3) {
  auto rng = engine(seed);
  std::normal_distribution<double> n01;
  std::bernoulli_distribution coin(0.5);
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXd y(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    x(j, 0) = n01(rng);
    y[j] = (coin(rng) ? 1.0 + 3.0 * x(j, 0) : -1.0 - 2.0 * x(j, 0)) + noise * n01(rng);
  }
  return mixreg::RegressionData::with_intercept(x, y);
}

}  // namespace testsupport
