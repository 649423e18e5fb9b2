#include "mixreg/inference.hpp"

#include <cmath>
#include <numbers>

#include "mixreg/error.hpp"

namespace mixreg {

namespace {

using Index = Eigen::Index;

constexpr double kMaxJacobianCondition = 1e12;
constexpr double kRelativeStep = 1e-6;

double eta(const EstimatorSpec& spec, double t, double w) {
  switch (spec.kind) {
    case EstimatorKind::M:
      return spec.kernel.psi(t);
    case EstimatorKind::GmMallows:
      return w * spec.kernel.psi(t);
    case EstimatorKind::GmSchweppe:
      return w * spec.kernel.psi(t / w);
  }
  return 0.0;
}

Eigen::VectorXd mean_h(const RegressionData& data, const MixtureParams& params, const EstimatorSpec& spec,
                       const LeverageWeights& leverage) {
  return estimating_functions(data, params, spec, leverage).colwise().mean().transpose();
}

}  // namespace

std::size_t reduced_parameter_count(std::size_t g, std::size_t p) { return g * p + (g - 1); }

std::vector<std::string> reduced_parameter_names(std::size_t g, std::size_t p) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < g; ++i)
    for (std::size_t k = 0; k < p; ++k) names.push_back("beta" + std::to_string(i + 1) + std::to_string(k));
  for (std::size_t i = 0; i + 1 < g; ++i) names.push_back("pi" + std::to_string(i + 1));
  return names;
}

Eigen::VectorXd pack_reduced(const MixtureParams& params) {
  const Index g = params.mixing.size();
  const Index p = params.coefficients.rows();
  Eigen::VectorXd theta(g * p + g - 1);
  for (Index i = 0; i < g; ++i) theta.segment(i * p, p) = params.coefficients.col(i);
  theta.tail(g - 1) = params.mixing.head(g - 1);
  return theta;
}

MixtureParams unpack_reduced(const Eigen::VectorXd& theta, const Eigen::VectorXd& scales, std::size_t p) {
  const Index g = scales.size();
  const Index pp = static_cast<Index>(p);
  if (theta.size() != g * pp + g - 1) throw InvalidDimensions("reduced parameter vector has the wrong length");
  MixtureParams params;
  params.coefficients.resize(pp, g);
  for (Index i = 0; i < g; ++i) params.coefficients.col(i) = theta.segment(i * pp, pp);
  params.mixing.resize(g);
  params.mixing.head(g - 1) = theta.tail(g - 1);
  params.mixing[g - 1] = 1.0 - params.mixing.head(g - 1).sum();
  params.scales = scales;
  return params;
}

Eigen::VectorXd estimating_function(const Eigen::VectorXd& x, double y, const MixtureParams& params,
                                    const EstimatorSpec& spec, double leverage_weight) {
  if (!x.allFinite() || !std::isfinite(y) || !std::isfinite(leverage_weight))
    throw DomainError("estimating function input is not finite");
  const Index g = params.mixing.size();
  const Index p = params.coefficients.rows();

  Eigen::VectorXd logd(g);
  Eigen::VectorXd t(g);
  for (Index i = 0; i < g; ++i) {
    const double s = params.scales[i];
    t[i] = (y - x.dot(params.coefficients.col(i))) / s;
    const double log_pi = params.mixing[i] > 0.0 ? std::log(params.mixing[i]) : -INFINITY;
    logd[i] = log_pi - std::log(s) - 0.5 * t[i] * t[i];
  }
  const double shift = logd.maxCoeff();
  Eigen::VectorXd z = (logd.array() - shift).exp();
  z /= z.sum();

  Eigen::VectorXd h(g * p + g - 1);
  for (Index i = 0; i < g; ++i) h.segment(i * p, p) = z[i] * eta(spec, t[i], leverage_weight) * x;
  for (Index i = 0; i + 1 < g; ++i) h[g * p + i] = z[i] - params.mixing[i];
  return h;
}

Eigen::MatrixXd estimating_functions(const RegressionData& data, const MixtureParams& params,
                                     const EstimatorSpec& spec, const LeverageWeights& leverage) {
  const Index n = static_cast<Index>(data.n());
  const Index d = static_cast<Index>(reduced_parameter_count(params.g(), params.p()));
  Eigen::MatrixXd h(n, d);
  for (Index j = 0; j < n; ++j) {
    h.row(j) = estimating_function(data.design().row(j).transpose(), data.response()[j], params, spec,
                                   leverage.weights[j])
                   .transpose();
  }
  return h;
}

Eigen::MatrixXd mean_jacobian(const RegressionData& data, const MixtureParams& params, const EstimatorSpec& spec,
                              const LeverageWeights& leverage, Stencil stencil) {
  const Eigen::VectorXd theta = pack_reduced(params);
  const Index d = theta.size();
  Eigen::MatrixXd jac(d, d);
  auto at = [&](Index k, double offset) {
    Eigen::VectorXd shifted = theta;
    shifted[k] += offset;
    return mean_h(data, unpack_reduced(shifted, params.scales, params.p()), spec, leverage);
  };
  for (Index k = 0; k < d; ++k) {
    const double step = kRelativeStep * std::max(1.0, std::abs(theta[k]));
    if (stencil == Stencil::Central3) {
      jac.col(k) = (at(k, step) - at(k, -step)) / (2.0 * step);
    } else {
      jac.col(k) = (-at(k, 2.0 * step) + 8.0 * at(k, step) - 8.0 * at(k, -step) + at(k, -2.0 * step)) /
                   (12.0 * step);
    }
  }
  return jac;
}

CovarianceReport sandwich_covariance(const RegressionData& data, const MixtureParams& params,
                                     const EstimatorSpec& spec, const LeverageWeights& leverage) {
  const std::size_t d = reduced_parameter_count(params.g(), params.p());
  if (data.n() <= d) throw InvalidDimensions("sandwich covariance requires n > number of parameters");

  CovarianceReport out;
  out.names = reduced_parameter_names(params.g(), params.p());
  const Eigen::MatrixXd h = estimating_functions(data, params, spec, leverage);
  const double n = static_cast<double>(data.n());
  out.q_hat = h.transpose() * h / n;
  out.m_hat = mean_jacobian(data, params, spec, leverage);

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(out.m_hat);
  const auto& sv = svd.singularValues();
  if (!(sv.minCoeff() > 0.0) || sv.maxCoeff() / sv.minCoeff() > kMaxJacobianCondition)
    throw NonIdentifiable("Jacobian of the estimating equations is singular at the fit");

  const Eigen::MatrixXd m_inv = out.m_hat.fullPivLu().inverse();
  out.v = m_inv * out.q_hat * m_inv.transpose();
  out.standard_errors = (out.v.diagonal().array().max(0.0) / n).sqrt();
  return out;
}

CovarianceReport sandwich_covariance(const RegressionData& data, const FitResult& fit, const EstimatorSpec& spec) {
  const LeverageWeights w =
      fit.leverage && spec.uses_leverage() ? *fit.leverage : LeverageWeights::unit(data.n());
  return sandwich_covariance(data, fit.params, spec, w);
}

}  // namespace mixreg
