#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mixreg/mixture.hpp"

namespace mixreg {

// Sandwich standard errors for (beta_1..beta_g, pi_1..pi_{g-1}) with the
// scales held at their fitted values.
//
// The estimating function of observation t_j = (x_j, y_j) stacks
//   z_ij x_j eta(x_j, r_ij / sigma_i)   for i = 1..g
//   z_ij - pi_i                         for i = 1..g-1
// with eta = psi (M), w psi (Mallows) or w psi(. / w) (Schweppe). With
// M = mean dH/dtheta' and Q = mean H H', V = M^{-1} Q M^{-T} and the standard
// errors are sqrt(diag V / n).

struct CovarianceReport {
  Eigen::MatrixXd m_hat;
  Eigen::MatrixXd q_hat;
  Eigen::MatrixXd v;
  Eigen::VectorXd standard_errors;
  std::vector<std::string> names;
};

enum class Stencil { Central3, Central5 };

/// g p + (g - 1).
std::size_t reduced_parameter_count(std::size_t g, std::size_t p);

/// beta10, beta11, ..., beta{g}{p-1}, pi1, ..., pi{g-1}.
std::vector<std::string> reduced_parameter_names(std::size_t g, std::size_t p);

Eigen::VectorXd pack_reduced(const MixtureParams& params);

/// Inverse of pack_reduced; pi_g = 1 - sum of the others.
MixtureParams unpack_reduced(const Eigen::VectorXd& theta, const Eigen::VectorXd& scales, std::size_t p);

/// H(t_j, theta) for one observation.
Eigen::VectorXd estimating_function(const Eigen::VectorXd& x, double y, const MixtureParams& params,
                                    const EstimatorSpec& spec, double leverage_weight);

/// All H(t_j, theta) as rows of an n x d matrix.
Eigen::MatrixXd estimating_functions(const RegressionData& data, const MixtureParams& params,
                                     const EstimatorSpec& spec, const LeverageWeights& leverage);

/// Finite-difference Jacobian of the mean estimating function with respect
/// to the reduced parameters; per-coordinate step 1e-6 max(1, |theta_k|).
Eigen::MatrixXd mean_jacobian(const RegressionData& data, const MixtureParams& params, const EstimatorSpec& spec,
                              const LeverageWeights& leverage, Stencil stencil = Stencil::Central3);

/// Throws NonIdentifiable when M has condition number above 1e12 and
/// InvalidDimensions when n <= d.
CovarianceReport sandwich_covariance(const RegressionData& data, const MixtureParams& params,
                                     const EstimatorSpec& spec, const LeverageWeights& leverage);

/// Uses the fit's parameters and leverage weights (unit weights when absent).
CovarianceReport sandwich_covariance(const RegressionData& data, const FitResult& fit, const EstimatorSpec& spec);

}  // namespace mixreg
