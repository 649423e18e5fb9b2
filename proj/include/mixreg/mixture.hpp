#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mixreg/psi_kernel.hpp"
#include "mixreg/robust_scatter.hpp"

namespace mixreg {

/// Design matrix (intercept column first) and response.
class RegressionData {
 public:
  /// Validates that the first column is all ones, sizes agree and every entry
  /// is finite. Throws InvalidDimensions / DomainError.
  RegressionData(Eigen::MatrixXd design, Eigen::VectorXd response);

  /// Prepends the intercept column to `predictors`.
  static RegressionData with_intercept(const Eigen::MatrixXd& predictors, Eigen::VectorXd response);

  const Eigen::MatrixXd& design() const noexcept { return design_; }
  const Eigen::VectorXd& response() const noexcept { return response_; }
  std::size_t n() const noexcept { return static_cast<std::size_t>(design_.rows()); }
  std::size_t p() const noexcept { return static_cast<std::size_t>(design_.cols()); }

  /// Design without the intercept column.
  Eigen::MatrixXd predictors() const { return design_.rightCols(design_.cols() - 1); }

 private:
  Eigen::MatrixXd design_;
  Eigen::VectorXd response_;
};

/// Theta = (pi_1..pi_g, beta_1..beta_g, sigma_1..sigma_g).
struct MixtureParams {
  Eigen::VectorXd mixing;
  /// p x g, column i is beta_i.
  Eigen::MatrixXd coefficients;
  Eigen::VectorXd scales;

  std::size_t g() const noexcept { return static_cast<std::size_t>(mixing.size()); }
  std::size_t p() const noexcept { return static_cast<std::size_t>(coefficients.rows()); }

  /// (pi, beta_1, ..., beta_g, sigma) concatenated.
  Eigen::VectorXd flatten() const;

  /// Reorders components so that new component i is old component perm[i].
  MixtureParams permuted(const std::vector<std::size_t>& perm) const;
};

enum class EstimatorKind { M, GmMallows, GmSchweppe };

struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::M;
  PsiKernel kernel = PsiKernel::huber();
  /// Leverage cutoff tail probability; ignored for kind == M.
  double gamma = 0.05;

  static EstimatorSpec m_huber(double c = kHuberTuning) { return {EstimatorKind::M, PsiKernel::huber(c), 0.05}; }
  static EstimatorSpec m_tukey(double c = kTukeyTuning) { return {EstimatorKind::M, PsiKernel::tukey(c), 0.05}; }
  static EstimatorSpec gm_mallows(double gamma = 0.05) {
    return {EstimatorKind::GmMallows, PsiKernel::huber(), gamma};
  }
  static EstimatorSpec gm_schweppe(double gamma = 0.05) {
    return {EstimatorKind::GmSchweppe, PsiKernel::huber(), gamma};
  }

  bool uses_leverage() const noexcept { return kind != EstimatorKind::M; }
  std::string name() const;
};

std::string to_string(EstimatorKind kind);

/// How each start of a multi-start fit is drawn.
enum class StartStrategy {
  /// Random hard partition, per-group OLS.
  RandomPartition,
  /// Exact fits through p random rows per component.
  Elemental,
  /// Even starts partition, odd starts elemental.
  Alternating,
};

/// Which objective picks the winning start.
enum class StartSelection {
  /// Pseudo-log-likelihood with zeta in place of t^2/2.
  Robust,
  /// Gaussian mixture log-likelihood.
  Gaussian,
};

std::string to_string(StartStrategy s);
std::string to_string(StartSelection s);

struct FitConfig {
  double tolerance = 1e-6;
  std::size_t max_iterations = 1000;
  std::size_t n_starts = 10;
  std::uint64_t seed = 0;
  StartStrategy start_strategy = StartStrategy::Alternating;
  StartSelection selection = StartSelection::Robust;
  /// Lower bound on every sigma_i; defaults to 1e-4 sd(y) when unset.
  std::optional<double> sigma_floor;
  /// Keep the flattened parameter vector of every iteration of the winning
  /// start.
  bool record_trace = false;
};

struct FitResult {
  MixtureParams params;
  /// n x g posteriors at `params`.
  Eigen::MatrixXd posteriors;
  double complete_loglik = 0.0;
  double gaussian_loglik = 0.0;
  /// Objective value the winning start was selected by.
  double robust_loglik = 0.0;
  double icl = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::size_t start_index = 0;
  std::optional<LeverageWeights> leverage;
  std::vector<Eigen::VectorXd> trace;
  /// Messages of starts that collapsed.
  std::vector<std::string> failed_starts;
};

/// Posterior component probabilities; each row sums to one.
Eigen::MatrixXd e_step(const RegressionData& data, const MixtureParams& params);

/// z*_ij = z_ij W*(t_ij) with t_ij = (y_j - x_j' beta_i) / sigma_i.
/// Mallows and M use psi(t)/t; Schweppe uses psi(t / w_j) / t, with limit
/// 1 / w_j at t = 0.
Eigen::MatrixXd robustified_posteriors(const Eigen::MatrixXd& posteriors, const RegressionData& data,
                                       const MixtureParams& params, const EstimatorSpec& spec,
                                       const LeverageWeights& leverage);

/// Column means of the posterior matrix.
Eigen::VectorXd update_mixing(const Eigen::MatrixXd& posteriors);

/// Weighted least squares with weights z*_ij w(x_j). Throws ComponentCollapse
/// when the weighted Gram matrix has condition number >= 1e12.
Eigen::VectorXd update_coefficients(const RegressionData& data, const Eigen::MatrixXd& zstar,
                                    const LeverageWeights& leverage, std::size_t component);

/// Multiplicative M-scale step for sigma_i^2 using the current beta_i and
/// sigma_i, floored at sigma_floor^2. Throws ComponentCollapse when the
/// component's posterior mass is at most 1e-8 n.
double update_scale(const RegressionData& data, const Eigen::MatrixXd& posteriors, const MixtureParams& params,
                    const PsiKernel& kernel, std::size_t component, double scale_constant, double sigma_floor);

/// As above, computing the scale constant from (n, p).
double update_scale(const RegressionData& data, const Eigen::MatrixXd& posteriors, const MixtureParams& params,
                    const PsiKernel& kernel, std::size_t component, std::size_t n, std::size_t p,
                    double sigma_floor);

/// Gaussian complete-data log-likelihood with soft posteriors in place of the
/// latent indicators.
double complete_loglik(const RegressionData& data, const MixtureParams& params, const Eigen::MatrixXd& posteriors);
double complete_loglik(const RegressionData& data, const FitResult& result);

/// Observed-data Gaussian mixture log-likelihood.
double gaussian_loglik(const RegressionData& data, const MixtureParams& params);

/// GM criterion zeta(x, t): rho(t) for M, w rho(t) for Mallows and
/// w^2 rho(t / w) for Schweppe.
double zeta(const EstimatorSpec& spec, double t, double w);

/// sum_j log sum_i pi_i exp(-zeta(x_j, t_ij)) / (sqrt(2 pi) sigma_i). Equals
/// gaussian_loglik when zeta(x, t) = t^2 / 2.
double robust_loglik(const RegressionData& data, const MixtureParams& params, const EstimatorSpec& spec,
                     const LeverageWeights& leverage);

/// (g - 1) + g p + g.
std::size_t free_parameter_count(std::size_t g, std::size_t p);

/// -2 l_c + d log n. Lower is better.
double icl(double complete_loglik, std::size_t d, double n);

/// Checks simplex/positivity constraints and shape consistency with `data`.
void validate_params(const MixtureParams& params, std::size_t p);

double default_sigma_floor(const RegressionData& data);

}  // namespace mixreg
