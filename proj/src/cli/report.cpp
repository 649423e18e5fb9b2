#include "mixreg/cli/report.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

#include "mixreg/cli/csv_table.hpp"

namespace mixreg::cli {

namespace {

using json = nlohmann::ordered_json;
using Index = Eigen::Index;

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::VectorXd vector_from(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Index>(values.size()));
}

StartStrategy parse_strategy(const std::string& s) {
  for (auto v : {StartStrategy::RandomPartition, StartStrategy::Elemental, StartStrategy::Alternating})
    if (to_string(v) == s) return v;
  throw InputError("unknown start strategy '" + s + "'");
}

StartSelection parse_selection(const std::string& s) {
  for (auto v : {StartSelection::Robust, StartSelection::Gaussian})
    if (to_string(v) == s) return v;
  throw InputError("unknown start selection '" + s + "'");
}

/// Shortest text that reads back to the same double.
std::string format_short(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json to_json(const FitReport& report) {
  const auto& s = report.settings;
  const auto& r = report.result;
  json j;
  j["tool"] = "mixreg";
  j["command"] = "fit";
  j["settings"] = {
      {"estimator", s.estimator},
      {"psi", s.psi},
      {"tuning", s.tuning},
      {"gamma", s.gamma},
      {"components", s.components},
      {"tolerance", s.config.tolerance},
      {"max_iterations", s.config.max_iterations},
      {"starts", s.config.n_starts},
      {"seed", s.config.seed},
      {"start_strategy", to_string(s.config.start_strategy)},
      {"selection", to_string(s.config.selection)},
      {"sigma_floor", s.sigma_floor},
  };
  j["input"] = {
      {"path", report.input.path},
      {"rows", report.input.rows},
      {"columns", report.input.columns},
      {"response", report.input.response},
      {"predictors", report.input.predictors},
      {"sha256", report.input.sha256},
  };

  json components = json::array();
  for (Index i = 0; i < r.params.mixing.size(); ++i) {
    components.push_back({{"mixing", r.params.mixing[i]},
                          {"coefficients", vector_json(r.params.coefficients.col(i))},
                          {"scale", r.params.scales[i]}});
  }
  json posteriors = json::array();
  for (Index k = 0; k < r.posteriors.rows(); ++k) posteriors.push_back(vector_json(r.posteriors.row(k).transpose()));
  json leverage = nullptr;
  if (r.leverage) {
    leverage = {{"gamma", r.leverage->gamma},
                {"cutoff_b", r.leverage->cutoff_b},
                {"weights", vector_json(r.leverage->weights)},
                {"distances", vector_json(r.leverage->distances)}};
  }
  j["result"] = {
      {"converged", r.converged},
      {"iterations", r.iterations},
      {"start_index", r.start_index},
      {"failed_starts", r.failed_starts},
      {"gaussian_loglik", r.gaussian_loglik},
      {"robust_loglik", r.robust_loglik},
      {"complete_loglik", r.complete_loglik},
      {"icl", r.icl},
      {"free_parameters", free_parameter_count(r.params.g(), r.params.p())},
      {"components", components},
      {"posteriors", posteriors},
      {"leverage", leverage},
  };
  const auto& se = report.standard_errors;
  j["standard_errors"] = {
      {"available", se.available},
      {"names", se.names},
      {"values", se.values},
      {"warning", se.warning},
  };
  return j;
}

FitReport report_from_json(const json& j) {
  try {
    FitReport report;
    const auto& s = j.at("settings");
    auto& st = report.settings;
    st.estimator = s.at("estimator").get<std::string>();
    st.psi = s.at("psi").get<std::string>();
    st.tuning = s.at("tuning").get<double>();
    st.gamma = s.at("gamma").get<double>();
    st.components = s.at("components").get<std::size_t>();
    st.config.tolerance = s.at("tolerance").get<double>();
    st.config.max_iterations = s.at("max_iterations").get<std::size_t>();
    st.config.n_starts = s.at("starts").get<std::size_t>();
    st.config.seed = s.at("seed").get<std::uint64_t>();
    st.config.start_strategy = parse_strategy(s.at("start_strategy").get<std::string>());
    st.config.selection = parse_selection(s.at("selection").get<std::string>());
    st.sigma_floor = s.at("sigma_floor").get<double>();
    st.config.sigma_floor = st.sigma_floor;

    const auto& in = j.at("input");
    report.input.path = in.at("path").get<std::string>();
    report.input.rows = in.at("rows").get<std::size_t>();
    report.input.columns = in.at("columns").get<std::vector<std::string>>();
    report.input.response = in.at("response").get<std::string>();
    report.input.predictors = in.at("predictors").get<std::vector<std::string>>();
    report.input.sha256 = in.at("sha256").get<std::string>();

    const auto& r = j.at("result");
    auto& res = report.result;
    res.converged = r.at("converged").get<bool>();
    res.iterations = r.at("iterations").get<std::size_t>();
    res.start_index = r.at("start_index").get<std::size_t>();
    res.failed_starts = r.at("failed_starts").get<std::vector<std::string>>();
    res.gaussian_loglik = r.at("gaussian_loglik").get<double>();
    res.robust_loglik = r.at("robust_loglik").get<double>();
    res.complete_loglik = r.at("complete_loglik").get<double>();
    res.icl = r.at("icl").get<double>();

    const auto& comps = r.at("components");
    if (!comps.is_array() || comps.empty()) throw InputError("report has no components");
    const auto g = static_cast<Index>(comps.size());
    const auto p = static_cast<Index>(comps.front().at("coefficients").size());
    if (p == 0) throw InputError("report components have no coefficients");
    res.params.mixing.resize(g);
    res.params.coefficients.resize(p, g);
    res.params.scales.resize(g);
    for (Index i = 0; i < g; ++i) {
      const auto& c = comps[static_cast<std::size_t>(i)];
      const Eigen::VectorXd beta = vector_from(c.at("coefficients"));
      if (beta.size() != p) throw InputError("report components disagree on the number of coefficients");
      res.params.mixing[i] = c.at("mixing").get<double>();
      res.params.coefficients.col(i) = beta;
      res.params.scales[i] = c.at("scale").get<double>();
    }

    const auto& post = r.at("posteriors");
    res.posteriors.resize(static_cast<Index>(post.size()), g);
    for (std::size_t k = 0; k < post.size(); ++k) {
      const Eigen::VectorXd row = vector_from(post[k]);
      if (row.size() != g) throw InputError("posterior row " + std::to_string(k + 1) + " has the wrong length");
      res.posteriors.row(static_cast<Index>(k)) = row.transpose();
    }
    if (const auto& lev = r.at("leverage"); !lev.is_null()) {
      LeverageWeights w;
      w.gamma = lev.at("gamma").get<double>();
      w.cutoff_b = lev.at("cutoff_b").get<double>();
      w.weights = vector_from(lev.at("weights"));
      w.distances = vector_from(lev.at("distances"));
      res.leverage = std::move(w);
    }

    const auto& se = j.at("standard_errors");
    report.standard_errors.available = se.at("available").get<bool>();
    report.standard_errors.names = se.at("names").get<std::vector<std::string>>();
    report.standard_errors.values = se.at("values").get<std::vector<double>>();
    report.standard_errors.warning = se.at("warning").get<std::string>();
    if (report.standard_errors.names.size() != report.standard_errors.values.size())
      throw InputError("standard error names and values differ in length");
    return report;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed fit report: ") + e.what());
  }
}

std::string format_json(const FitReport& report) { return to_json(report).dump(2) + "\n"; }

std::string format_csv_table(const FitReport& report) {
  const auto& s = report.settings;
  const auto& r = report.result;
  std::ostringstream out;
  out << "# mixreg fit estimator=" << s.estimator << " psi=" << s.psi << " tuning=" << format_short(s.tuning)
      << " gamma=" << format_short(s.gamma) << " components=" << s.components
      << " tol=" << format_short(s.config.tolerance) << " max_iter=" << s.config.max_iterations
      << " starts=" << s.config.n_starts << " seed=" << s.config.seed
      << " start_strategy=" << to_string(s.config.start_strategy) << " selection=" << to_string(s.config.selection)
      << " sigma_floor=" << format_short(s.sigma_floor) << "\n";
  out << "# input rows=" << report.input.rows << " response=" << report.input.response << " predictors=";
  for (std::size_t k = 0; k < report.input.predictors.size(); ++k)
    out << (k ? ";" : "") << report.input.predictors[k];
  out << " sha256=" << report.input.sha256 << "\n";
  out << "# converged=" << (r.converged ? "true" : "false") << " iterations=" << r.iterations
      << " start_index=" << r.start_index << " failed_starts=" << r.failed_starts.size() << "\n";
  if (!report.standard_errors.available) out << "# standard errors unavailable: " << report.standard_errors.warning << "\n";

  auto se_of = [&](const std::string& name) -> std::string {
    const auto& se = report.standard_errors;
    if (!se.available) return "";
    for (std::size_t k = 0; k < se.names.size(); ++k)
      if (se.names[k] == name) return format_short(se.values[k]);
    return "";
  };
  out << "parameter,estimate,std_error\n";
  const std::size_t g = r.params.g();
  const std::size_t p = r.params.p();
  for (std::size_t i = 0; i < g; ++i) {
    const std::string name = "pi" + std::to_string(i + 1);
    out << name << ',' << format_double(r.params.mixing[static_cast<Index>(i)]) << ',' << se_of(name) << "\n";
  }
  for (std::size_t i = 0; i < g; ++i) {
    for (std::size_t k = 0; k < p; ++k) {
      const std::string name = "beta" + std::to_string(i + 1) + std::to_string(k);
      out << name << ',' << format_double(r.params.coefficients(static_cast<Index>(k), static_cast<Index>(i))) << ','
          << se_of(name) << "\n";
    }
  }
  for (std::size_t i = 0; i < g; ++i)
    out << "sigma" << i + 1 << ',' << format_double(r.params.scales[static_cast<Index>(i)]) << ",\n";
  out << "gaussian_loglik," << format_double(r.gaussian_loglik) << ",\n";
  out << "complete_loglik," << format_double(r.complete_loglik) << ",\n";
  out << "icl," << format_double(r.icl) << ",\n";
  return out.str();
}

std::string format_fitted_lines(const FitReport& report) {
  const auto& params = report.result.params;
  const auto& post = report.result.posteriors;
  const Index g = params.mixing.size();
  const Index p = params.coefficients.rows();
  std::ostringstream out;
  out << "record,id,component,posterior";
  for (Index k = 0; k < p; ++k) out << ",beta" << k;
  out << "\n";
  for (Index i = 0; i < g; ++i) {
    out << "component," << i + 1 << ',' << i + 1 << ',';
    for (Index k = 0; k < p; ++k) out << ',' << format_double(params.coefficients(k, i));
    out << "\n";
  }
  for (Index j = 0; j < post.rows(); ++j) {
    Index map = 0;
    const double best = post.row(j).maxCoeff(&map);
    out << "observation," << j + 1 << ',' << map + 1 << ',' << format_double(best);
    for (Index k = 0; k < p; ++k) out << ',';
    out << "\n";
  }
  return out.str();
}

}  // namespace mixreg::cli
