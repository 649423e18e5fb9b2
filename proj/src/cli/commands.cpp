#include "mixreg/cli/commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mixreg/cli/csv_table.hpp"
#include "mixreg/inference.hpp"
#include "mixreg/simulation.hpp"

namespace mixreg::cli {

namespace {

using Index = Eigen::Index;

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void write_output(const std::string& path, const std::string& content, std::ostream& out) {
  if (path.empty()) {
    out << content;
    return;
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw InputError("cannot write '" + path + "'");
  file << content;
  if (!file) throw InputError("failed writing '" + path + "'");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::size_t thread_cap() {
  const char* env = std::getenv("MIXREG_THREADS");
  if (env == nullptr || *env == '\0') return 0;
  char* end = nullptr;
  const unsigned long v = std::strtoul(env, &end, 10);
  if (*end != '\0' || v == 0) throw InputError("MIXREG_THREADS must be a positive integer");
  return v;
}

}  // namespace

EstimatorSpec FitRequest::estimator_spec() const {
  EstimatorSpec spec;
  if (estimator == "m") {
    spec.kind = EstimatorKind::M;
  } else if (estimator == "gm-mallows") {
    spec.kind = EstimatorKind::GmMallows;
  } else if (estimator == "gm-schweppe") {
    spec.kind = EstimatorKind::GmSchweppe;
  } else {
    throw InputError("unknown estimator '" + estimator + "'");
  }
  try {
    if (psi == "huber") {
      spec.kernel = PsiKernel::huber(tuning.value_or(kHuberTuning));
    } else if (psi == "tukey") {
      spec.kernel = PsiKernel::tukey(tuning.value_or(kTukeyTuning));
    } else {
      throw InputError("unknown psi function '" + psi + "'");
    }
  } catch (const DomainError& e) {
    throw InputError(std::string("invalid tuning constant: ") + e.what());
  }
  if (!(gamma > 0.0 && gamma < 1.0)) throw InputError("gamma must lie in (0, 1)");
  spec.gamma = gamma;
  return spec;
}

FitReport run_fit(const FitRequest& request, std::ostream& warnings) {
  if (request.components == 0) throw InputError("--components must be at least 1");
  if (!(request.config.tolerance > 0.0)) throw InputError("--tol must be positive");
  if (request.config.max_iterations == 0) throw InputError("--max-iter must be at least 1");
  if (request.config.n_starts == 0) throw InputError("--starts must be at least 1");
  const EstimatorSpec spec = request.estimator_spec();

  const CsvTable table = CsvTable::read(request.data_path);
  const Index response_col = table.column(request.response);
  std::vector<std::string> predictors = request.predictors;
  if (predictors.empty()) {
    for (const auto& c : table.columns)
      if (c != request.response) predictors.push_back(c);
  }
  Eigen::MatrixXd x(table.values.rows(), static_cast<Index>(predictors.size()));
  for (std::size_t k = 0; k < predictors.size(); ++k) {
    if (predictors[k] == request.response) throw InputError("response '" + request.response + "' is also a predictor");
    for (std::size_t l = 0; l < k; ++l)
      if (predictors[l] == predictors[k]) throw InputError("predictor '" + predictors[k] + "' listed twice");
    x.col(static_cast<Index>(k)) = table.values.col(table.column(predictors[k]));
  }
  const Eigen::VectorXd y = table.values.col(response_col);
  const RegressionData data = RegressionData::with_intercept(x, y);
  if (data.n() <= request.components * data.p())
    throw InputError("too few rows (" + std::to_string(data.n()) + ") for " + std::to_string(request.components) +
                     " components with " + std::to_string(data.p()) + " coefficients each");

  FitReport report;
  auto& st = report.settings;
  st.estimator = request.estimator;
  st.psi = request.psi;
  st.tuning = spec.kernel.tuning();
  st.gamma = request.gamma;
  st.components = request.components;
  st.config = request.config;
  st.sigma_floor = request.config.sigma_floor.value_or(default_sigma_floor(data));
  st.config.sigma_floor = st.sigma_floor;
  st.config.record_trace = false;

  report.input.path = request.data_path.string();
  report.input.rows = table.rows();
  report.input.columns = table.columns;
  report.input.response = request.response;
  report.input.predictors = predictors;
  report.input.sha256 = table.sha256;

  report.result = fit(data, request.components, spec, st.config);

  auto& se = report.standard_errors;
  se.names = reduced_parameter_names(request.components, data.p());
  try {
    const CovarianceReport cov = sandwich_covariance(data, report.result, spec);
    if (!cov.standard_errors.allFinite()) throw NonIdentifiable("standard errors are not finite");
    se.available = true;
    se.values.assign(cov.standard_errors.data(), cov.standard_errors.data() + cov.standard_errors.size());
  } catch (const Error& e) {
    se.available = false;
    se.values.clear();
    se.names.clear();
    se.warning = e.what();
    warnings << "warning: standard errors unavailable: " << e.what() << "\n";
  }
  return report;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Robust mixture-of-regressions fitting with M and GM estimators"};
  app.name("mixreg");
  app.require_subcommand(1);

  FitRequest req;
  std::string predictors;
  std::string output;
  std::string format = "json";
  std::string strategy = to_string(req.config.start_strategy);
  std::string selection = to_string(req.config.selection);
  std::optional<double> sigma_floor;
  req.config.seed = 1;

  auto* fit_cmd = app.add_subcommand("fit", "Fit a g-component mixture of regressions to a CSV file");
  fit_cmd->add_option("--data", req.data_path, "CSV file with a header row")->required();
  fit_cmd->add_option("--response", req.response, "Response column")->required();
  fit_cmd->add_option("--predictors", predictors, "Comma-separated predictor columns (default: all others)");
  fit_cmd->add_option("--components", req.components, "Number of components g")->capture_default_str();
  fit_cmd->add_option("--estimator", req.estimator, "m, gm-mallows or gm-schweppe")
      ->check(CLI::IsMember({"m", "gm-mallows", "gm-schweppe"}))
      ->capture_default_str();
  fit_cmd->add_option("--psi", req.psi, "huber or tukey")->check(CLI::IsMember({"huber", "tukey"}))->capture_default_str();
  fit_cmd->add_option("--tuning", req.tuning, "Tuning constant (default 1.345 huber, 4.685 tukey)");
  fit_cmd->add_option("--gamma", req.gamma, "Leverage cutoff tail probability")->capture_default_str();
  fit_cmd->add_option("--tol", req.config.tolerance, "Convergence tolerance")->capture_default_str();
  fit_cmd->add_option("--max-iter", req.config.max_iterations, "Iteration cap per start")->capture_default_str();
  fit_cmd->add_option("--starts", req.config.n_starts, "Number of random starts")->capture_default_str();
  fit_cmd->add_option("--seed", req.config.seed, "Random seed")->capture_default_str();
  fit_cmd->add_option("--start-strategy", strategy, "partition, elemental or alternating")
      ->check(CLI::IsMember({"partition", "elemental", "alternating"}))
      ->capture_default_str();
  fit_cmd->add_option("--selection", selection, "Start selection objective: robust or gaussian")
      ->check(CLI::IsMember({"robust", "gaussian"}))
      ->capture_default_str();
  fit_cmd->add_option("--sigma-floor", sigma_floor, "Lower bound on every scale (default 1e-4 sd(y))");
  fit_cmd->add_option("--output", output, "Write the report here instead of standard output");
  fit_cmd->add_option("--format", format, "json or csv-table")
      ->check(CLI::IsMember({"json", "csv-table"}))
      ->capture_default_str();

  sim::ReplicationPlan plan;
  std::string scenario = "1";
  std::string error_case = "I";
  std::string estimators = "all";
  std::optional<std::size_t> n_outliers;
  double sim_gamma = 0.05;
  std::string table_path;
  std::string csv_path;

  auto* sim_cmd = app.add_subcommand("simulate", "Run a Monte Carlo replication plan");
  sim_cmd->add_option("--scenario", scenario, "1 or 2")->capture_default_str();
  sim_cmd->add_option("--case", error_case, "I, II, III or IV")->capture_default_str();
  sim_cmd->add_option("--n", plan.scenario.n, "Sample size")->capture_default_str();
  sim_cmd->add_option("--N", plan.replications, "Number of replications")->capture_default_str();
  sim_cmd->add_option("--estimators", estimators, "Comma list of huber, tukey, gm-mallows, gm-schweppe, or all")
      ->capture_default_str();
  sim_cmd->add_option("--outliers", n_outliers, "Case IV leverage points (default n/40)");
  sim_cmd->add_option("--leverage-x", plan.scenario.outliers.predictor_value, "Case IV predictor value")
      ->capture_default_str();
  sim_cmd->add_option("--leverage-y", plan.scenario.outliers.response_value, "Case IV response value")
      ->capture_default_str();
  sim_cmd->add_option("--seed", plan.scenario.seed, "Random seed")->capture_default_str();
  sim_cmd->add_option("--starts", plan.fit_config.n_starts, "Random starts per fit")->capture_default_str();
  sim_cmd->add_option("--gamma", sim_gamma, "Leverage cutoff tail probability")->capture_default_str();
  sim_cmd->add_option("--tol", plan.fit_config.tolerance, "Convergence tolerance")->capture_default_str();
  sim_cmd->add_option("--max-iter", plan.fit_config.max_iterations, "Iteration cap per start")
      ->capture_default_str();
  sim_cmd->add_option("--output", table_path, "Write the formatted table here instead of standard output");
  sim_cmd->add_option("--csv", csv_path, "Also write the machine-readable summary CSV here");

  std::string report_path;
  std::string lines_path;
  auto* export_cmd = app.add_subcommand("export-fit", "Export fitted lines and MAP assignments from a JSON report");
  export_cmd->add_option("--report", report_path, "JSON report written by 'mixreg fit'")->required();
  export_cmd->add_option("--output", lines_path, "Write the CSV here instead of standard output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (fit_cmd->parsed()) {
      req.predictors = split_list(predictors);
      req.config.sigma_floor = sigma_floor;
      for (auto s : {StartStrategy::RandomPartition, StartStrategy::Elemental, StartStrategy::Alternating})
        if (to_string(s) == strategy) req.config.start_strategy = s;
      req.config.selection = selection == "robust" ? StartSelection::Robust : StartSelection::Gaussian;
      const FitReport report = run_fit(req, err);
      write_output(output, format == "json" ? format_json(report) : format_csv_table(report), out);
      if (!report.result.converged)
        err << "warning: best start stopped at the iteration cap without converging\n";
    } else if (sim_cmd->parsed()) {
      plan.scenario.scenario = sim::parse_scenario(scenario);
      plan.scenario.error_case = sim::parse_case(error_case);
      plan.scenario.n_outliers = n_outliers;
      if (plan.replications == 0) throw InputError("--N must be at least 1");
      if (plan.fit_config.n_starts == 0) throw InputError("--starts must be at least 1");
      if (!(sim_gamma > 0.0 && sim_gamma < 1.0)) throw InputError("--gamma must lie in (0, 1)");
      if (plan.scenario.error_case == sim::ErrorCase::IV && plan.scenario.outlier_count() >= plan.scenario.n)
        throw InputError("--outliers must be smaller than --n");
      if (plan.scenario.n < 4 * plan.scenario.p()) throw InputError("--n is too small for the scenario");
      plan.estimators = sim::select_estimators(split_list(estimators), sim_gamma);
      plan.threads = thread_cap();
      const std::size_t every = std::max<std::size_t>(1, plan.replications / 20);
      plan.progress = [&err, every](std::size_t done, std::size_t total) {
        if (done % every == 0 || done == total) err << "replication " << done << "/" << total << "\n";
      };
      const sim::ReplicationSummary summary = sim::run_plan(plan);
      write_output(table_path, sim::format_table(summary), out);
      if (!csv_path.empty()) write_output(csv_path, sim::format_csv(summary), out);
    } else if (export_cmd->parsed()) {
      nlohmann::ordered_json j;
      try {
        j = nlohmann::ordered_json::parse(read_file(report_path));
      } catch (const nlohmann::ordered_json::parse_error& e) {
        throw InputError(std::string("report is not valid JSON: ") + e.what());
      }
      write_output(lines_path, format_fitted_lines(report_from_json(j)), out);
    }
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const FitFailed& e) {
    err << "error: fit failed: " << e.what() << "\n";
    return kExitFit;
  } catch (const PlanFailed& e) {
    err << "error: " << e.what() << "\n";
    return kExitFit;
  } catch (const DegenerateScatter& e) {
    err << "error: leverage weights unavailable: " << e.what() << "\n";
    return kExitFit;
  } catch (const ComponentCollapse& e) {
    err << "error: fit failed: " << e.what() << "\n";
    return kExitFit;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitOk;
}

}  // namespace mixreg::cli
