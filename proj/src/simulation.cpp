#include "mixreg/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include <boost/random/bernoulli_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/student_t_distribution.hpp>

#include "mixreg/em.hpp"
#include "mixreg/error.hpp"

namespace mixreg::sim {

namespace {

using Index = Eigen::Index;

enum class Stream : std::uint32_t { Design = 1, Labels = 2, Errors = 3, Fit = 4 };

std::mt19937_64 substream(std::uint64_t seed, std::size_t replication, Stream purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(replication),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(replication) >> 32),
                    static_cast<std::uint32_t>(purpose)};
  return std::mt19937_64(seq);
}

std::uint64_t fit_seed(std::uint64_t seed, std::size_t replication) {
  auto eng = substream(seed, replication, Stream::Fit);
  return eng();
}

std::string upper(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return s;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string format_exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string to_string(Scenario s) { return s == Scenario::One ? "1" : "2"; }

std::string to_string(ErrorCase c) {
  switch (c) {
    case ErrorCase::I:
      return "I";
    case ErrorCase::II:
      return "II";
    case ErrorCase::III:
      return "III";
    case ErrorCase::IV:
      return "IV";
  }
  return "?";
}

Scenario parse_scenario(const std::string& text) {
  if (text == "1") return Scenario::One;
  if (text == "2") return Scenario::Two;
  throw DomainError("unknown scenario '" + text + "' (expected 1 or 2)");
}

ErrorCase parse_case(const std::string& text) {
  const std::string u = upper(text);
  if (u == "I" || u == "1") return ErrorCase::I;
  if (u == "II" || u == "2") return ErrorCase::II;
  if (u == "III" || u == "3") return ErrorCase::III;
  if (u == "IV" || u == "4") return ErrorCase::IV;
  throw DomainError("unknown case '" + text + "' (expected I, II, III or IV)");
}

std::size_t ScenarioSpec::outlier_count() const {
  if (error_case != ErrorCase::IV) return 0;
  return n_outliers.value_or(n / 40);
}

MixtureParams ScenarioSpec::truth() const {
  MixtureParams t;
  t.scales = Eigen::Vector2d::Ones();
  if (scenario == Scenario::One) {
    t.mixing = Eigen::Vector2d(0.5, 0.5);
    t.coefficients.resize(2, 2);
    t.coefficients << 0.0, 0.0, 4.0, -4.0;
  } else {
    t.mixing = Eigen::Vector2d(0.25, 0.75);
    t.coefficients.resize(3, 2);
    t.coefficients << 0.0, 0.0, 1.0, -1.0, 1.0, -1.0;
  }
  return t;
}

SimulatedSample generate(const ScenarioSpec& spec, std::size_t replication) {
  const std::size_t n = spec.n;
  const Index p = static_cast<Index>(spec.p());
  const std::size_t n_out = spec.outlier_count();
  if (n == 0 || n_out > n) throw InvalidDimensions("invalid sample size or outlier count");
  const MixtureParams truth = spec.truth();

  auto design_rng = substream(spec.seed, replication, Stream::Design);
  auto label_rng = substream(spec.seed, replication, Stream::Labels);
  auto error_rng = substream(spec.seed, replication, Stream::Errors);

  boost::random::normal_distribution<double> std_normal(0.0, 1.0);
  boost::random::bernoulli_distribution<double> first_component(truth.mixing[0]);
  const double dof = spec.scenario == Scenario::One ? 4.0 : 3.0;
  boost::random::student_t_distribution<double> student(dof);
  boost::random::bernoulli_distribution<double> contaminated(0.05);
  boost::random::normal_distribution<double> wide(0.0, 5.0);

  Eigen::MatrixXd design(static_cast<Index>(n), p);
  Eigen::VectorXd y(static_cast<Index>(n));
  std::vector<int> labels(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto jj = static_cast<Index>(j);
    design(jj, 0) = 1.0;
    for (Index k = 1; k < p; ++k) design(jj, k) = std_normal(design_rng);
    const int comp = first_component(label_rng) ? 0 : 1;
    labels[j] = comp;

    double eps = 0.0;
    switch (spec.error_case) {
      case ErrorCase::I:
      case ErrorCase::IV:
        eps = std_normal(error_rng);
        break;
      case ErrorCase::II:
        eps = student(error_rng);
        break;
      case ErrorCase::III: {
        // Draw both so the stream position does not depend on the branch.
        const bool wide_draw = contaminated(error_rng);
        const double a = std_normal(error_rng);
        const double b = wide(error_rng);
        eps = wide_draw ? b : a;
        break;
      }
    }
    y[jj] = design.row(jj).dot(truth.coefficients.col(comp)) + eps;
  }
  for (std::size_t j = n - n_out; j < n; ++j) {
    const auto jj = static_cast<Index>(j);
    design.row(jj).tail(p - 1).setConstant(spec.outliers.predictor_value);
    y[jj] = spec.outliers.response_value;
    labels[j] = -1;
  }
  return {RegressionData(std::move(design), std::move(y)), std::move(labels)};
}

std::vector<std::size_t> best_permutation(const MixtureParams& estimated, const MixtureParams& truth) {
  const std::size_t g = truth.g();
  if (estimated.g() != g) throw InvalidDimensions("cannot align mixtures with different g");
  std::vector<std::size_t> perm(g);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::vector<std::size_t> best = perm;
  double best_cost = INFINITY;
  do {
    double cost = 0.0;
    for (std::size_t i = 0; i < g; ++i) {
      cost += (estimated.coefficients.col(static_cast<Index>(perm[i])) -
               truth.coefficients.col(static_cast<Index>(i)))
                  .squaredNorm();
    }
    if (cost < best_cost) {
      best_cost = cost;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

MixtureParams align_labels(const MixtureParams& estimated, const MixtureParams& truth) {
  return estimated.permuted(best_permutation(estimated, truth));
}

std::vector<NamedEstimator> standard_estimators(double gamma) {
  return {
      {"Mixreg-Huber", EstimatorSpec::m_huber()},
      {"Mixreg-Tukey", EstimatorSpec::m_tukey()},
      {"MixregGM-Mallows", EstimatorSpec::gm_mallows(gamma)},
      {"MixregGM-Schweppe", EstimatorSpec::gm_schweppe(gamma)},
  };
}

std::vector<NamedEstimator> select_estimators(const std::vector<std::string>& keys, double gamma) {
  const auto all = standard_estimators(gamma);
  static const std::map<std::string, std::size_t> index{
      {"huber", 0}, {"m-huber", 0}, {"tukey", 1}, {"m-tukey", 1}, {"gm-mallows", 2}, {"gm-schweppe", 3}};
  std::vector<NamedEstimator> out;
  for (const auto& key : keys) {
    if (key == "all") return all;
    auto it = index.find(key);
    if (it == index.end()) throw DomainError("unknown estimator '" + key + "'");
    out.push_back(all[it->second]);
  }
  if (out.empty()) throw DomainError("no estimators selected");
  return out;
}

std::vector<std::string> parameter_names(std::size_t g, std::size_t p) {
  std::vector<std::string> names;
  for (std::size_t k = 0; k < p; ++k)
    for (std::size_t i = 0; i < g; ++i) names.push_back("beta" + std::to_string(i + 1) + std::to_string(k));
  for (std::size_t i = 0; i + 1 < g; ++i) names.push_back("pi" + std::to_string(i + 1));
  return names;
}

Eigen::VectorXd parameter_vector(const MixtureParams& params) {
  const Index g = params.mixing.size();
  const Index p = params.coefficients.rows();
  Eigen::VectorXd v(g * p + g - 1);
  Index at = 0;
  for (Index k = 0; k < p; ++k)
    for (Index i = 0; i < g; ++i) v[at++] = params.coefficients(k, i);
  for (Index i = 0; i + 1 < g; ++i) v[at++] = params.mixing[i];
  return v;
}

EstimatorSummary summarize(const std::string& label, const std::vector<std::string>& names,
                           const Eigen::VectorXd& truth, const std::vector<std::optional<Eigen::VectorXd>>& estimates) {
  EstimatorSummary out;
  out.label = label;
  const Index d = truth.size();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(d);
  std::size_t used = 0;
  for (const auto& e : estimates) {
    if (!e) {
      ++out.n_failed;
      continue;
    }
    sum += *e;
    sq += (*e - truth).array().square().matrix();
    ++used;
  }
  if (used == 0) throw PlanFailed("every replication failed for estimator " + label);
  for (Index k = 0; k < d; ++k) {
    ParameterSummary ps;
    ps.name = names[static_cast<std::size_t>(k)];
    ps.true_value = truth[k];
    ps.bias = sum[k] / static_cast<double>(used) - truth[k];
    ps.mse = sq[k] / static_cast<double>(used);
    ps.n_used = used;
    out.parameters.push_back(ps);
  }
  return out;
}

ReplicationSummary run_plan(const ReplicationPlan& plan) {
  if (plan.replications == 0) throw DomainError("replication count must be at least 1");
  if (plan.estimators.empty()) throw DomainError("plan has no estimators");
  const MixtureParams truth = plan.scenario.truth();
  const std::size_t n_est = plan.estimators.size();
  const std::size_t reps = plan.replications;

  // estimates[e][r]
  std::vector<std::vector<std::optional<Eigen::VectorXd>>> estimates(
      n_est, std::vector<std::optional<Eigen::VectorXd>>(reps));

  auto run_one = [&](std::size_t r) {
    const SimulatedSample sample = generate(plan.scenario, r);
    FitConfig config = plan.fit_config;
    config.seed = fit_seed(plan.scenario.seed, r);
    std::map<double, LeverageWeights> leverage_by_gamma;
    for (std::size_t e = 0; e < n_est; ++e) {
      const EstimatorSpec& spec = plan.estimators[e].spec;
      try {
        FitResult result;
        if (spec.uses_leverage()) {
          auto it = leverage_by_gamma.find(spec.gamma);
          if (it == leverage_by_gamma.end())
            it = leverage_by_gamma.emplace(spec.gamma, compute_leverage(sample.data, spec, config.seed)).first;
          result = fit(sample.data, truth.g(), spec, config, it->second);
        } else {
          result = fit(sample.data, truth.g(), spec, config);
        }
        estimates[e][r] = parameter_vector(align_labels(result.params, truth));
      } catch (const Error&) {
        estimates[e][r].reset();
      }
    }
  };

  std::size_t threads = plan.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : plan.threads;
  threads = std::min(threads, reps);
  std::atomic<std::size_t> next{0};
  std::size_t done = 0;
  std::mutex progress_mutex;
  auto worker = [&] {
    for (std::size_t r = next++; r < reps; r = next++) {
      run_one(r);
      std::lock_guard lock(progress_mutex);
      ++done;
      if (plan.progress) plan.progress(done, reps);
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  ReplicationSummary summary;
  {
    std::ostringstream title;
    title << "Scenario " << to_string(plan.scenario.scenario) << ", Case " << to_string(plan.scenario.error_case)
          << ", n = " << plan.scenario.n;
    if (plan.scenario.error_case == ErrorCase::IV) title << " (" << plan.scenario.outlier_count() << " outliers)";
    title << ", N = " << reps << ", seed = " << plan.scenario.seed << ", starts = " << plan.fit_config.n_starts;
    summary.title = title.str();
  }
  {
    const FitConfig& c = plan.fit_config;
    std::ostringstream meta;
    meta << "tol=" << format_number(c.tolerance) << " max_iter=" << c.max_iterations << " starts=" << c.n_starts
         << " start_strategy=" << to_string(c.start_strategy) << " selection=" << to_string(c.selection);
    summary.metadata.push_back(meta.str());
    if (plan.scenario.error_case == ErrorCase::IV) {
      std::ostringstream rec;
      rec << "outliers=" << plan.scenario.outlier_count()
          << " leverage_x=" << format_number(plan.scenario.outliers.predictor_value)
          << " leverage_y=" << format_number(plan.scenario.outliers.response_value);
      summary.metadata.push_back(rec.str());
    }
  }
  const auto names = parameter_names(truth.g(), truth.p());
  const Eigen::VectorXd truth_vec = parameter_vector(truth);
  for (std::size_t e = 0; e < n_est; ++e)
    summary.estimators.push_back(summarize(plan.estimators[e].label, names, truth_vec, estimates[e]));
  return summary;
}

std::string format_cell(double mse, double bias) {
  auto fixed4 = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    std::string s = buf;
    if (s == "-0.0000") s = "0.0000";
    return s;
  };
  return fixed4(mse) + " (" + fixed4(bias) + ")";
}

std::string format_table(const ReplicationSummary& summary) {
  std::ostringstream out;
  if (!summary.title.empty()) out << summary.title << "\n";
  for (const auto& m : summary.metadata) out << m << "\n";
  if (summary.estimators.empty()) return out.str();

  const auto& rows = summary.estimators.front().parameters;
  std::vector<std::string> row_labels;
  std::size_t label_width = 9;
  for (const auto& r : rows) {
    row_labels.push_back(r.name + ": " + format_number(r.true_value));
    label_width = std::max(label_width, row_labels.back().size());
  }
  std::vector<std::size_t> widths;
  for (const auto& e : summary.estimators) widths.push_back(std::max<std::size_t>(e.label.size(), 18));

  auto pad = [](const std::string& s, std::size_t w) { return s + std::string(w > s.size() ? w - s.size() : 0, ' '); };
  out << pad("Parameter", label_width);
  for (std::size_t e = 0; e < widths.size(); ++e) out << "  " << pad(summary.estimators[e].label, widths[e]);
  out << "\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out << pad(row_labels[r], label_width);
    for (std::size_t e = 0; e < widths.size(); ++e) {
      const auto& cell = summary.estimators[e].parameters[r];
      out << "  " << pad(format_cell(cell.mse, cell.bias), widths[e]);
    }
    out << "\n";
  }
  out << pad("failed", label_width);
  for (std::size_t e = 0; e < widths.size(); ++e)
    out << "  " << pad(std::to_string(summary.estimators[e].n_failed), widths[e]);
  out << "\nNote: value in parentheses is the bias\n";
  return out.str();
}

std::string format_csv(const ReplicationSummary& summary) {
  std::ostringstream out;
  out << "# " << summary.title << "\n";
  for (const auto& m : summary.metadata) out << "# " << m << "\n";
  out << "estimator,parameter,true_value,bias,mse,n_used,n_failed\n";
  for (const auto& e : summary.estimators) {
    for (const auto& p : e.parameters) {
      out << e.label << ',' << p.name << ',' << format_exact(p.true_value) << ',' << format_exact(p.bias) << ','
          << format_exact(p.mse) << ',' << p.n_used << ',' << e.n_failed << "\n";
    }
  }
  return out.str();
}

ReplicationSummary parse_csv(const std::string& text) {
  ReplicationSummary summary;
  std::istringstream in(text);
  std::string line;
  bool header_seen = false;
  bool title_seen = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0 && !header_seen) {
      if (!title_seen) {
        summary.title = line.substr(2);
        title_seen = true;
      } else {
        summary.metadata.push_back(line.substr(2));
      }
      continue;
    }
    if (!header_seen) {
      if (line != "estimator,parameter,true_value,bias,mse,n_used,n_failed")
        throw DomainError("unexpected summary CSV header");
      header_seen = true;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7) throw DomainError("summary CSV line " + std::to_string(line_no) + " has wrong arity");
    if (summary.estimators.empty() || summary.estimators.back().label != cells[0]) {
      EstimatorSummary es;
      es.label = cells[0];
      es.n_failed = std::stoull(cells[6]);
      summary.estimators.push_back(es);
    }
    ParameterSummary ps;
    ps.name = cells[1];
    ps.true_value = std::stod(cells[2]);
    ps.bias = std::stod(cells[3]);
    ps.mse = std::stod(cells[4]);
    ps.n_used = std::stoull(cells[5]);
    summary.estimators.back().parameters.push_back(ps);
  }
  if (!header_seen) throw DomainError("summary CSV has no header");
  return summary;
}

}  // namespace mixreg::sim
