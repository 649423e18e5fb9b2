#include "mixreg/psi_kernel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "mixreg/error.hpp"

namespace mixreg {

namespace {

void require_finite(double t) {
  if (!std::isfinite(t)) throw DomainError("psi kernel argument is not finite");
}

// Normal mass beyond |t| = 12 is below 1e-30.
constexpr double kQuadratureHalfWidth = 12.0;

}  // namespace

PsiKernel::PsiKernel(PsiFamily family, double c) : family_(family), c_(c) {
  if (!std::isfinite(c) || c <= 0.0) throw DomainError("tuning constant must be positive and finite");
}

double PsiKernel::rho(double t) const {
  require_finite(t);
  const double a = std::abs(t);
  switch (family_) {
    case PsiFamily::Huber:
      return a <= c_ ? 0.5 * t * t : c_ * a - 0.5 * c_ * c_;
    case PsiFamily::TukeyBisquare: {
      const double sat = c_ * c_ / 6.0;
      if (a > c_) return sat;
      const double v = 1.0 - (t / c_) * (t / c_);
      return sat * (1.0 - v * v * v);
    }
  }
  return 0.0;
}

double PsiKernel::psi(double t) const {
  require_finite(t);
  switch (family_) {
    case PsiFamily::Huber:
      return std::clamp(t, -c_, c_);
    case PsiFamily::TukeyBisquare: {
      if (std::abs(t) > c_) return 0.0;
      const double v = 1.0 - (t / c_) * (t / c_);
      return t * v * v;
    }
  }
  return 0.0;
}

double PsiKernel::residual_weight(double t) const {
  require_finite(t);
  const double a = std::abs(t);
  switch (family_) {
    case PsiFamily::Huber:
      return a <= c_ ? 1.0 : c_ / a;
    case PsiFamily::TukeyBisquare: {
      if (a > c_) return 0.0;
      const double v = 1.0 - (t / c_) * (t / c_);
      return v * v;
    }
  }
  return 0.0;
}

double PsiKernel::chi(double t) const {
  require_finite(t);
  if (family_ == PsiFamily::Huber) return 0.5 * std::min(t * t, c_ * c_);
  return psi(t) * t - rho(t);
}

double PsiKernel::expected_chi() const {
  using boost::math::quadrature::gauss_kronrod;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  auto integrand = [this, inv_sqrt_2pi](double t) {
    return chi(t) * inv_sqrt_2pi * std::exp(-0.5 * t * t);
  };
  // chi is piecewise smooth with kinks at +-c; integrate each smooth piece.
  const double kink = std::min(c_, kQuadratureHalfWidth);
  const std::array<double, 4> breaks{-kQuadratureHalfWidth, -kink, kink, kQuadratureHalfWidth};
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    if (breaks[i + 1] <= breaks[i]) continue;
    total += gauss_kronrod<double, 61>::integrate(integrand, breaks[i], breaks[i + 1], 15, 1e-14);
  }
  return total;
}

double PsiKernel::scale_constant_a(std::size_t n, std::size_t p) const {
  if (p == 0 || n <= p) throw InvalidDimensions("scale constant requires n > p >= 1");
  const double factor = static_cast<double>(n - p) / static_cast<double>(n);
  return factor * expected_chi();
}

std::string PsiKernel::name() const {
  return family_ == PsiFamily::Huber ? "huber" : "tukey";
}

}  // namespace mixreg
