#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mixreg/cli/report.hpp"

namespace mixreg::cli {

enum ExitCode : int { kExitOk = 0, kExitInput = 2, kExitFit = 3 };

struct FitRequest {
  std::filesystem::path data_path;
  std::string response;
  /// Empty means every column other than the response.
  std::vector<std::string> predictors;
  std::size_t components = 2;
  /// m, gm-mallows or gm-schweppe.
  std::string estimator = "gm-mallows";
  /// huber or tukey.
  std::string psi = "huber";
  /// Defaults to 1.345 (huber) or 4.685 (tukey).
  std::optional<double> tuning;
  double gamma = 0.05;
  FitConfig config;

  /// Throws InputError on inconsistent settings.
  EstimatorSpec estimator_spec() const;
};

/// Reads the CSV, fits, and computes sandwich standard errors. A covariance
/// failure is reported in the result (and on `warnings`), not thrown.
/// Throws InputError for bad input and FitFailed when every start collapses.
FitReport run_fit(const FitRequest& request, std::ostream& warnings);

/// Full command-line entry point; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mixreg::cli
