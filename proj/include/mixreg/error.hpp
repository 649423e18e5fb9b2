#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mixreg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite or otherwise out-of-domain argument.
class DomainError : public Error {
 public:
  using Error::Error;
};

class InvalidDimensions : public Error {
 public:
  using Error::Error;
};

/// Scatter matrix is singular (or numerically so).
class DegenerateScatter : public Error {
 public:
  using Error::Error;
};

/// A mixture component lost its support or its weighted Gram matrix became
/// singular.
class ComponentCollapse : public Error {
 public:
  ComponentCollapse(std::size_t component, const std::string& what)
      : Error("component " + std::to_string(component) + ": " + what),
        component_(component) {}

  std::size_t component() const noexcept { return component_; }

 private:
  std::size_t component_;
};

/// Every start of a fit failed. Carries one message per start.
class FitFailed : public Error {
 public:
  explicit FitFailed(std::vector<std::string> causes)
      : Error(join(causes)), causes_(std::move(causes)) {}

  const std::vector<std::string>& causes() const noexcept { return causes_; }

 private:
  static std::string join(const std::vector<std::string>& causes) {
    std::string out = "all starts failed";
    for (std::size_t i = 0; i < causes.size(); ++i) {
      out += "; start " + std::to_string(i) + ": " + causes[i];
    }
    return out;
  }

  std::vector<std::string> causes_;
};

/// Jacobian of the estimating equations is singular at the fit.
class NonIdentifiable : public Error {
 public:
  using Error::Error;
};

/// Every replication failed for some estimator in a simulation plan.
class PlanFailed : public Error {
 public:
  using Error::Error;
};

}  // namespace mixreg
