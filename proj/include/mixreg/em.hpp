#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include "mixreg/mixture.hpp"

namespace mixreg {

/// Outcome of a single EM run from one starting point.
struct EmRun {
  MixtureParams params;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<Eigen::VectorXd> trace;
};

/// Iterates E-step, robustified posteriors, mixing, coefficient and scale
/// updates from `initial` until the Euclidean change of the flattened
/// parameter vector drops below config.tolerance.
///
/// Leverage weights must already match `spec` (all ones for kind == M).
/// Throws ComponentCollapse when a component degenerates.
EmRun run_em(const RegressionData& data, const EstimatorSpec& spec, const FitConfig& config,
             const MixtureParams& initial, const LeverageWeights& leverage);

/// Starting point from a uniformly random hard partition: per-group OLS,
/// residual standard deviation and group proportion. Deterministic in
/// (seed, start).
MixtureParams random_partition_start(const RegressionData& data, std::size_t g, std::uint64_t seed,
                                     std::size_t start, double sigma_floor);

/// Starting point from exact fits: each component's line passes through p
/// distinct random rows. Scales are 1.4826 MAD of the residuals of the rows
/// nearest each line; mixing is uniform. Deterministic in (seed, start).
MixtureParams elemental_start(const RegressionData& data, std::size_t g, std::uint64_t seed, std::size_t start,
                              double sigma_floor);

/// Leverage weights from MCD on the predictors; all ones for kind == M or
/// when the design has only the intercept.
LeverageWeights compute_leverage(const RegressionData& data, const EstimatorSpec& spec, std::uint64_t seed);

/// Multi-start fit. Starts follow config.start_strategy; the winner maximizes
/// robust_loglik (or gaussian_loglik, per config.selection). Tukey kernels
/// always select by gaussian_loglik. Throws FitFailed when every start
/// collapses.
FitResult fit(const RegressionData& data, std::size_t g, const EstimatorSpec& spec, const FitConfig& config);

/// Same, with caller-supplied leverage weights (ignored for kind == M).
FitResult fit(const RegressionData& data, std::size_t g, const EstimatorSpec& spec, const FitConfig& config,
              const LeverageWeights& leverage);

}  // namespace mixreg
