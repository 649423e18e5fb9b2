#pragma once

#include <cstddef>
#include <string>

namespace mixreg {

enum class PsiFamily { Huber, TukeyBisquare };

inline constexpr double kHuberTuning = 1.345;
inline constexpr double kTukeyTuning = 4.685;

/// A robust criterion family together with its tuning constant. The constant
/// applies to standardized residuals.
///
/// Huber:  rho(t) = t^2/2 for |t| <= c, c|t| - c^2/2 otherwise.
/// Tukey:  rho(t) = (c^2/6) (1 - (1 - (t/c)^2)^3) for |t| <= c, c^2/6 otherwise.
///
/// psi = rho', chi(t) = psi(t) t - rho(t) and the residual weight
/// W(t) = psi(t)/t with W(0) = psi'(0) = 1.
class PsiKernel {
 public:
  /// Throws DomainError unless c is finite and positive.
  PsiKernel(PsiFamily family, double c);

  static PsiKernel huber(double c = kHuberTuning) { return {PsiFamily::Huber, c}; }
  static PsiKernel tukey(double c = kTukeyTuning) { return {PsiFamily::TukeyBisquare, c}; }

  PsiFamily family() const noexcept { return family_; }
  double tuning() const noexcept { return c_; }

  double rho(double t) const;
  double psi(double t) const;
  double residual_weight(double t) const;
  double chi(double t) const;

  /// E[chi(T)] for T ~ N(0, 1), by adaptive Gauss-Kronrod quadrature.
  double expected_chi() const;

  /// ((n - p)/n) E[chi(T)]. Throws InvalidDimensions when n <= p or p == 0.
  double scale_constant_a(std::size_t n, std::size_t p) const;

  std::string name() const;

 private:
  PsiFamily family_;
  double c_;
};

}  // namespace mixreg
