#include "mixreg/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mixreg/error.hpp"

namespace mixreg {

namespace {

using Index = Eigen::Index;

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

constexpr double kMaxGramCondition = 1e12;
constexpr double kEmptyComponentFraction = 1e-8;

}  // namespace

RegressionData::RegressionData(Eigen::MatrixXd design, Eigen::VectorXd response)
    : design_(std::move(design)), response_(std::move(response)) {
  if (design_.rows() == 0 || design_.cols() == 0) throw InvalidDimensions("empty design matrix");
  if (design_.rows() != response_.size()) throw InvalidDimensions("design rows and response length differ");
  if (!design_.allFinite() || !response_.allFinite()) throw DomainError("regression data contains non-finite values");
  if ((design_.col(0).array() != 1.0).any()) throw InvalidDimensions("first design column must be the intercept (all ones)");
}

RegressionData RegressionData::with_intercept(const Eigen::MatrixXd& predictors, Eigen::VectorXd response) {
  Eigen::MatrixXd design(predictors.rows(), predictors.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(predictors.cols()) = predictors;
  return {std::move(design), std::move(response)};
}

Eigen::VectorXd MixtureParams::flatten() const {
  const Index g = mixing.size();
  const Index p = coefficients.rows();
  Eigen::VectorXd out(g + g * p + g);
  out.head(g) = mixing;
  for (Index i = 0; i < g; ++i) out.segment(g + i * p, p) = coefficients.col(i);
  out.tail(g) = scales;
  return out;
}

MixtureParams MixtureParams::permuted(const std::vector<std::size_t>& perm) const {
  MixtureParams out = *this;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    const auto dst = static_cast<Index>(i);
    const auto src = static_cast<Index>(perm[i]);
    out.mixing[dst] = mixing[src];
    out.coefficients.col(dst) = coefficients.col(src);
    out.scales[dst] = scales[src];
  }
  return out;
}

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::M:
      return "m";
    case EstimatorKind::GmMallows:
      return "gm-mallows";
    case EstimatorKind::GmSchweppe:
      return "gm-schweppe";
  }
  return "unknown";
}

std::string to_string(StartStrategy s) {
  switch (s) {
    case StartStrategy::RandomPartition:
      return "partition";
    case StartStrategy::Elemental:
      return "elemental";
    case StartStrategy::Alternating:
      return "alternating";
  }
  return "unknown";
}

std::string to_string(StartSelection s) { return s == StartSelection::Robust ? "robust" : "gaussian"; }

std::string EstimatorSpec::name() const {
  if (kind == EstimatorKind::M) return "m-" + kernel.name();
  return to_string(kind);
}

void validate_params(const MixtureParams& params, std::size_t p) {
  const Index g = params.mixing.size();
  if (g == 0) throw InvalidDimensions("mixture needs at least one component");
  if (params.coefficients.cols() != g || params.scales.size() != g)
    throw InvalidDimensions("mixture parameter blocks disagree on g");
  if (params.coefficients.rows() != static_cast<Index>(p)) throw InvalidDimensions("coefficient length differs from p");
  if (!params.mixing.allFinite() || !params.coefficients.allFinite() || !params.scales.allFinite())
    throw DomainError("mixture parameters contain non-finite values");
  if ((params.mixing.array() < 0.0).any() || (params.mixing.array() > 1.0).any())
    throw DomainError("mixing probabilities must lie in [0, 1]");
  if (std::abs(params.mixing.sum() - 1.0) > 1e-9) throw DomainError("mixing probabilities must sum to one");
  if ((params.scales.array() <= 0.0).any()) throw DomainError("scales must be positive");
}

Eigen::MatrixXd e_step(const RegressionData& data, const MixtureParams& params) {
  const Index n = static_cast<Index>(data.n());
  const Index g = params.mixing.size();
  const Eigen::MatrixXd fitted = data.design() * params.coefficients;
  Eigen::MatrixXd logd(n, g);
  for (Index i = 0; i < g; ++i) {
    const double s = params.scales[i];
    const double log_pi = params.mixing[i] > 0.0 ? std::log(params.mixing[i]) : -INFINITY;
    const double norm = log_pi - kHalfLog2Pi - std::log(s);
    for (Index j = 0; j < n; ++j) {
      const double t = (data.response()[j] - fitted(j, i)) / s;
      logd(j, i) = norm - 0.5 * t * t;
    }
  }
  Eigen::MatrixXd z(n, g);
  for (Index j = 0; j < n; ++j) {
    const double shift = logd.row(j).maxCoeff();
    if (!std::isfinite(shift)) throw Error("posterior row has no finite log-density");
    double total = 0.0;
    for (Index i = 0; i < g; ++i) {
      z(j, i) = std::exp(logd(j, i) - shift);
      total += z(j, i);
    }
    z.row(j) /= total;
  }
  return z;
}

Eigen::MatrixXd robustified_posteriors(const Eigen::MatrixXd& posteriors, const RegressionData& data,
                                       const MixtureParams& params, const EstimatorSpec& spec,
                                       const LeverageWeights& leverage) {
  const Index n = posteriors.rows();
  const Index g = posteriors.cols();
  const Eigen::MatrixXd fitted = data.design() * params.coefficients;
  const PsiKernel& k = spec.kernel;
  Eigen::MatrixXd out(n, g);
  for (Index i = 0; i < g; ++i) {
    const double s = params.scales[i];
    for (Index j = 0; j < n; ++j) {
      const double t = (data.response()[j] - fitted(j, i)) / s;
      double weight;
      if (spec.kind == EstimatorKind::GmSchweppe) {
        const double w = leverage.weights[j];
        // psi(t/w)/t -> psi'(0)/w as t -> 0, and never exceeds it.
        weight = t == 0.0 ? 1.0 / w : std::min(k.psi(t / w) / t, 1.0 / w);
      } else {
        weight = k.residual_weight(t);
      }
      out(j, i) = posteriors(j, i) * weight;
    }
  }
  return out;
}

Eigen::VectorXd update_mixing(const Eigen::MatrixXd& posteriors) {
  return posteriors.colwise().sum().transpose() / static_cast<double>(posteriors.rows());
}

Eigen::VectorXd update_coefficients(const RegressionData& data, const Eigen::MatrixXd& zstar,
                                    const LeverageWeights& leverage, std::size_t component) {
  const auto& x = data.design();
  const Eigen::VectorXd w = zstar.col(static_cast<Index>(component)).cwiseProduct(leverage.weights);
  const Eigen::MatrixXd gram = x.transpose() * w.asDiagonal() * x;
  const Eigen::VectorXd rhs = x.transpose() * w.cwiseProduct(data.response());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo >= kMaxGramCondition)
    throw ComponentCollapse(component, "weighted Gram matrix is singular or ill-conditioned");
  return gram.ldlt().solve(rhs);
}

double update_scale(const RegressionData& data, const Eigen::MatrixXd& posteriors, const MixtureParams& params,
                    const PsiKernel& kernel, std::size_t component, double scale_constant, double sigma_floor) {
  const auto i = static_cast<Index>(component);
  const double mass = posteriors.col(i).sum();
  if (mass <= kEmptyComponentFraction * static_cast<double>(data.n()))
    throw ComponentCollapse(component, "posterior mass vanished");
  const double s = params.scales[i];
  const Eigen::VectorXd resid = data.response() - data.design() * params.coefficients.col(i);
  double acc = 0.0;
  for (Index j = 0; j < resid.size(); ++j) acc += posteriors(j, i) * kernel.chi(resid[j] / s);
  const double next = s * s / (scale_constant * mass) * acc;
  return std::max(next, sigma_floor * sigma_floor);
}

double update_scale(const RegressionData& data, const Eigen::MatrixXd& posteriors, const MixtureParams& params,
                    const PsiKernel& kernel, std::size_t component, std::size_t n, std::size_t p,
                    double sigma_floor) {
  return update_scale(data, posteriors, params, kernel, component, kernel.scale_constant_a(n, p), sigma_floor);
}

double complete_loglik(const RegressionData& data, const MixtureParams& params, const Eigen::MatrixXd& posteriors) {
  const Index n = static_cast<Index>(data.n());
  const Eigen::MatrixXd fitted = data.design() * params.coefficients;
  double total = 0.0;
  for (Index i = 0; i < params.mixing.size(); ++i) {
    const double s2 = params.scales[i] * params.scales[i];
    const double log_pi = std::log(params.mixing[i]);
    for (Index j = 0; j < n; ++j) {
      const double z = posteriors(j, i);
      if (z == 0.0) continue;
      const double r = data.response()[j] - fitted(j, i);
      total += z * (log_pi - kHalfLog2Pi - 0.5 * std::log(s2) - r * r / (2.0 * s2));
    }
  }
  return total;
}

double complete_loglik(const RegressionData& data, const FitResult& result) {
  return complete_loglik(data, result.params, result.posteriors);
}

double gaussian_loglik(const RegressionData& data, const MixtureParams& params) {
  const Index n = static_cast<Index>(data.n());
  const Index g = params.mixing.size();
  const Eigen::MatrixXd fitted = data.design() * params.coefficients;
  double total = 0.0;
  Eigen::VectorXd logd(g);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < g; ++i) {
      const double s = params.scales[i];
      const double t = (data.response()[j] - fitted(j, i)) / s;
      const double log_pi = params.mixing[i] > 0.0 ? std::log(params.mixing[i]) : -INFINITY;
      logd[i] = log_pi - kHalfLog2Pi - std::log(s) - 0.5 * t * t;
    }
    const double shift = logd.maxCoeff();
    total += shift + std::log((logd.array() - shift).exp().sum());
  }
  return total;
}

double zeta(const EstimatorSpec& spec, double t, double w) {
  switch (spec.kind) {
    case EstimatorKind::M:
      return spec.kernel.rho(t);
    case EstimatorKind::GmMallows:
      return w * spec.kernel.rho(t);
    case EstimatorKind::GmSchweppe:
      return w * w * spec.kernel.rho(t / w);
  }
  return 0.0;
}

double robust_loglik(const RegressionData& data, const MixtureParams& params, const EstimatorSpec& spec,
                     const LeverageWeights& leverage) {
  const Index n = static_cast<Index>(data.n());
  const Index g = params.mixing.size();
  const Eigen::MatrixXd fitted = data.design() * params.coefficients;
  double total = 0.0;
  Eigen::VectorXd logd(g);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < g; ++i) {
      const double s = params.scales[i];
      const double t = (data.response()[j] - fitted(j, i)) / s;
      const double log_pi = params.mixing[i] > 0.0 ? std::log(params.mixing[i]) : -INFINITY;
      logd[i] = log_pi - kHalfLog2Pi - std::log(s) - zeta(spec, t, leverage.weights[j]);
    }
    const double shift = logd.maxCoeff();
    total += shift + std::log((logd.array() - shift).exp().sum());
  }
  return total;
}

std::size_t free_parameter_count(std::size_t g, std::size_t p) { return (g - 1) + g * p + g; }

double icl(double complete_loglik, std::size_t d, double n) {
  return -2.0 * complete_loglik + static_cast<double>(d) * std::log(n);
}

double default_sigma_floor(const RegressionData& data) {
  const auto& y = data.response();
  const double n = static_cast<double>(y.size());
  if (n < 2) return 1e-4;
  const double sd = std::sqrt((y.array() - y.mean()).square().sum() / (n - 1.0));
  return sd > 0.0 ? 1e-4 * sd : 1e-4;
}

}  // namespace mixreg
