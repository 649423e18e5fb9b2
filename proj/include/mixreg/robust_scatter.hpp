#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace mixreg {

/// Robust location/scatter of the h-subset with minimal covariance
/// determinant.
struct McdEstimate {
  Eigen::VectorXd location;
  /// Consistency-corrected scatter.
  Eigen::MatrixXd scatter;
  /// Sorted row indices of the h-subset.
  std::vector<std::size_t> support;
  /// Determinant of `scatter`.
  double determinant = 0.0;
  /// Determinant of the uncorrected h-subset covariance (divisor h), the
  /// quantity the search minimizes.
  double raw_determinant = 0.0;
};

struct McdOptions {
  std::size_t n_starts = 500;
  std::size_t initial_csteps = 2;
  std::size_t n_refined = 10;
  std::size_t max_csteps = 100;
};

/// Leverage weights w(x_j) = min(1, sqrt(b / d_j)), with d_j the squared
/// robust Mahalanobis distance and b the (1 - gamma) chi-square quantile.
struct LeverageWeights {
  Eigen::VectorXd weights;
  double cutoff_b = 0.0;
  double gamma = 0.0;
  /// Squared robust distances the weights were computed from; empty when the
  /// weights were supplied directly.
  Eigen::VectorXd distances;

  /// All weights 1 (the plain M-estimator case).
  static LeverageWeights unit(std::size_t n);
};

/// h = floor((n + p + 1) / 2).
std::size_t mcd_subset_size(std::size_t n, std::size_t p);

/// FAST-MCD on the rows of `x` (predictors only, no intercept column).
///
/// One predictor uses the exact minimal-variance contiguous window of the
/// sorted sample. Several predictors use random (p+1)-point starts, a few
/// concentration steps each, then full concentration of the best candidates.
/// The winning scatter is rescaled by median(d^2) / chi2_{0.5, p}.
///
/// Throws InvalidDimensions when n < 2(p + 1), DomainError on non-finite
/// input and DegenerateScatter when the best subset has singular covariance.
McdEstimate fast_mcd(const Eigen::MatrixXd& x, std::uint64_t seed, const McdOptions& options = {});

/// Squared distances (x_j - m)' C^{-1} (x_j - m), one per row.
Eigen::VectorXd mahalanobis_distances(const Eigen::MatrixXd& x, const McdEstimate& estimate);

/// Weights of rows of `x` under `estimate`; b uses p = x.cols() degrees of
/// freedom. Requires 0 < gamma < 1.
LeverageWeights leverage_weights(const Eigen::MatrixXd& x, const McdEstimate& estimate, double gamma);

/// Same weights given precomputed squared distances.
LeverageWeights leverage_weights_from_distances(const Eigen::VectorXd& distances, std::size_t dof, double gamma);

/// q with P(X <= q) = probability for X ~ chi-square(dof).
double chi_squared_quantile(double probability, double dof);

}  // namespace mixreg
