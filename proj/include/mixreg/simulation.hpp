#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mixreg/mixture.hpp"

namespace mixreg::sim {

enum class Scenario { One, Two };
enum class ErrorCase { I, II, III, IV };

std::string to_string(Scenario s);
std::string to_string(ErrorCase c);
/// Accepts "1"/"2" and "I".."IV" (case-insensitive). Throws DomainError.
Scenario parse_scenario(const std::string& text);
ErrorCase parse_case(const std::string& text);

/// How Case IV leverage points are planted: the last rows get every predictor
/// set to `predictor_value` and the response set to `response_value`.
struct OutlierRecipe {
  double predictor_value = 20.0;
  double response_value = 0.0;
};

struct ScenarioSpec {
  Scenario scenario = Scenario::One;
  ErrorCase error_case = ErrorCase::I;
  std::size_t n = 200;
  /// Case IV only; defaults to n / 40 (5 for n = 200, 10 for n = 400).
  std::optional<std::size_t> n_outliers;
  std::uint64_t seed = 1;
  OutlierRecipe outliers;

  std::size_t outlier_count() const;
  std::size_t p() const { return scenario == Scenario::One ? 2 : 3; }
  /// True parameters; scales are 1 for every component.
  MixtureParams truth() const;
};

struct SimulatedSample {
  RegressionData data;
  /// Generating component (0-based) of each row; -1 for planted outliers.
  std::vector<int> labels;
};

/// Deterministic in (spec.seed, replication). Design, labels and errors use
/// separate random substreams.
SimulatedSample generate(const ScenarioSpec& spec, std::size_t replication);

/// Component permutation minimizing sum_i ||beta_hat_perm(i) - beta_i||^2.
/// Ties go to the lexicographically first permutation.
std::vector<std::size_t> best_permutation(const MixtureParams& estimated, const MixtureParams& truth);
MixtureParams align_labels(const MixtureParams& estimated, const MixtureParams& truth);

struct NamedEstimator {
  std::string label;
  EstimatorSpec spec;
};

/// Mixreg-Huber, Mixreg-Tukey, MixregGM-Mallows, MixregGM-Schweppe.
std::vector<NamedEstimator> standard_estimators(double gamma = 0.05);

/// Selects from standard_estimators by key: huber, tukey, gm-mallows,
/// gm-schweppe or all. Throws DomainError on unknown keys.
std::vector<NamedEstimator> select_estimators(const std::vector<std::string>& keys, double gamma = 0.05);

struct ReplicationPlan {
  ScenarioSpec scenario;
  std::size_t replications = 500;
  std::vector<NamedEstimator> estimators;
  FitConfig fit_config = [] {
    FitConfig c;
    c.n_starts = 5;
    return c;
  }();
  /// Worker threads; 0 means hardware concurrency.
  std::size_t threads = 0;
  /// Called after each finished replication with (done, total).
  std::function<void(std::size_t, std::size_t)> progress;
};

struct ParameterSummary {
  std::string name;
  double true_value = 0.0;
  double bias = 0.0;
  double mse = 0.0;
  std::size_t n_used = 0;
};

struct EstimatorSummary {
  std::string label;
  std::size_t n_failed = 0;
  std::vector<ParameterSummary> parameters;
};

struct ReplicationSummary {
  std::string title;
  /// Further "key=value" description lines (configuration, outlier recipe).
  std::vector<std::string> metadata;
  std::vector<EstimatorSummary> estimators;
};

/// Table order: beta_{i k} with k outer and i inner, then pi_1..pi_{g-1}.
std::vector<std::string> parameter_names(std::size_t g, std::size_t p);
Eigen::VectorXd parameter_vector(const MixtureParams& params);

/// Bias and MSE over the successful replications (absent entries are
/// failures). Throws PlanFailed when no replication succeeded.
EstimatorSummary summarize(const std::string& label, const std::vector<std::string>& names,
                           const Eigen::VectorXd& truth, const std::vector<std::optional<Eigen::VectorXd>>& estimates);

ReplicationSummary run_plan(const ReplicationPlan& plan);

/// Rows are parameters, columns estimators, cells "MSE (bias)".
std::string format_table(const ReplicationSummary& summary);

/// estimator,parameter,true_value,bias,mse,n_used,n_failed
std::string format_csv(const ReplicationSummary& summary);
ReplicationSummary parse_csv(const std::string& text);

/// "0.0119 (0.0008)"; negative zero prints as zero.
std::string format_cell(double mse, double bias);

}  // namespace mixreg::sim
