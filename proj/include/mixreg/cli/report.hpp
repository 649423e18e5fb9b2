#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mixreg/em.hpp"

namespace mixreg::cli {

/// Echo of the settings a fit ran with.
struct FitSettings {
  std::string estimator = "gm-mallows";
  std::string psi = "huber";
  double tuning = kHuberTuning;
  double gamma = 0.05;
  std::size_t components = 2;
  FitConfig config;
  /// The floor actually used (config.sigma_floor or the data default).
  double sigma_floor = 0.0;
};

struct InputFingerprint {
  std::string path;
  std::size_t rows = 0;
  std::vector<std::string> columns;
  std::string response;
  std::vector<std::string> predictors;
  std::string sha256;
};

struct StandardErrors {
  bool available = false;
  std::vector<std::string> names;
  std::vector<double> values;
  std::string warning;
};

struct FitReport {
  FitSettings settings;
  InputFingerprint input;
  FitResult result;
  StandardErrors standard_errors;
};

nlohmann::ordered_json to_json(const FitReport& report);
/// Throws InputError when fields are missing or mistyped.
FitReport report_from_json(const nlohmann::ordered_json& j);

/// Two-space indented JSON with a trailing newline.
std::string format_json(const FitReport& report);

/// "# key=value" metadata lines, then parameter,estimate,std_error rows.
std::string format_csv_table(const FitReport& report);

/// One row per component (coefficients) and one per observation (1-based MAP
/// component and its posterior): record,id,component,posterior,beta0..beta{p-1}.
std::string format_fitted_lines(const FitReport& report);

/// "%.17g".
std::string format_double(double v);

}  // namespace mixreg::cli
