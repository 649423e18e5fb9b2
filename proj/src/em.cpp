#include "mixreg/em.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include <boost/random/uniform_int_distribution.hpp>

#include "mixreg/error.hpp"

namespace mixreg {

namespace {

using Index = Eigen::Index;

constexpr std::size_t kMaxPartitionDraws = 100;

constexpr std::uint32_t kPartitionTag = 0x5157u;
constexpr std::uint32_t kElementalTag = 0xe1e7u;
// 1 / Phi^{-1}(3/4): MAD to normal sigma.
constexpr double kMadToSigma = 1.482602218505602;

std::mt19937_64 start_engine(std::uint64_t seed, std::size_t start, std::uint32_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(start), tag};
  return std::mt19937_64(seq);
}

double median_inplace(std::vector<double>& v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

bool elemental_draw(std::size_t start, const FitConfig& config) {
  switch (config.start_strategy) {
    case StartStrategy::RandomPartition:
      return false;
    case StartStrategy::Elemental:
      return true;
    case StartStrategy::Alternating:
      return start % 2 == 1;
  }
  return false;
}

}  // namespace

EmRun run_em(const RegressionData& data, const EstimatorSpec& spec, const FitConfig& config,
             const MixtureParams& initial, const LeverageWeights& leverage) {
  validate_params(initial, data.p());
  if (leverage.weights.size() != static_cast<Index>(data.n()))
    throw InvalidDimensions("leverage weights length differs from n");
  if (config.tolerance <= 0.0 || config.max_iterations == 0) throw DomainError("invalid convergence settings");

  const double floor = config.sigma_floor.value_or(default_sigma_floor(data));
  const double a = spec.kernel.scale_constant_a(data.n(), data.p());
  const std::size_t g = initial.g();

  EmRun run;
  run.params = initial;
  if (config.record_trace) run.trace.push_back(run.params.flatten());

  for (std::size_t k = 0; k < config.max_iterations; ++k) {
    const MixtureParams& cur = run.params;
    const Eigen::MatrixXd z = e_step(data, cur);
    const Eigen::MatrixXd zstar = robustified_posteriors(z, data, cur, spec, leverage);

    MixtureParams next;
    next.mixing = update_mixing(z);
    next.coefficients.resize(cur.coefficients.rows(), cur.coefficients.cols());
    next.scales.resize(cur.scales.size());
    for (std::size_t i = 0; i < g; ++i) {
      next.coefficients.col(static_cast<Index>(i)) = update_coefficients(data, zstar, leverage, i);
      next.scales[static_cast<Index>(i)] = std::sqrt(update_scale(data, z, cur, spec.kernel, i, a, floor));
    }

    const double change = (next.flatten() - cur.flatten()).norm();
    run.params = std::move(next);
    run.iterations = k + 1;
    if (config.record_trace) run.trace.push_back(run.params.flatten());
    if (change < config.tolerance) {
      run.converged = true;
      break;
    }
  }
  return run;
}

MixtureParams random_partition_start(const RegressionData& data, std::size_t g, std::uint64_t seed,
                                     std::size_t start, double sigma_floor) {
  const std::size_t n = data.n();
  const std::size_t p = data.p();
  auto rng = start_engine(seed, start, kPartitionTag);
  boost::random::uniform_int_distribution<std::size_t> label(0, g - 1);

  std::vector<std::size_t> labels(n);
  for (std::size_t attempt = 0; attempt < kMaxPartitionDraws; ++attempt) {
    for (auto& l : labels) l = label(rng);

    MixtureParams params;
    params.mixing.resize(static_cast<Index>(g));
    params.coefficients.resize(static_cast<Index>(p), static_cast<Index>(g));
    params.scales.resize(static_cast<Index>(g));
    bool ok = true;
    for (std::size_t i = 0; i < g && ok; ++i) {
      LeverageWeights member = LeverageWeights::unit(n);
      Eigen::MatrixXd indicator = Eigen::MatrixXd::Zero(static_cast<Index>(n), 1);
      std::size_t count = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (labels[j] == i) {
          indicator(static_cast<Index>(j), 0) = 1.0;
          ++count;
        }
      }
      if (count <= p) {
        ok = false;
        break;
      }
      Eigen::VectorXd beta;
      try {
        beta = update_coefficients(data, indicator, member, 0);
      } catch (const ComponentCollapse&) {
        ok = false;
        break;
      }
      const Eigen::VectorXd resid =
          (data.response() - data.design() * beta).cwiseProduct(indicator.col(0));
      const auto ii = static_cast<Index>(i);
      params.coefficients.col(ii) = beta;
      params.scales[ii] = std::max(std::sqrt(resid.squaredNorm() / static_cast<double>(count)), sigma_floor);
      params.mixing[ii] = static_cast<double>(count) / static_cast<double>(n);
    }
    if (ok) return params;
  }
  throw ComponentCollapse(0, "could not draw a random partition with regular groups");
}

MixtureParams elemental_start(const RegressionData& data, std::size_t g, std::uint64_t seed, std::size_t start,
                              double sigma_floor) {
  const std::size_t n = data.n();
  const std::size_t p = data.p();
  if (n < g * p) throw InvalidDimensions("too few rows for elemental starts");
  auto rng = start_engine(seed, start, kElementalTag);
  const auto& x = data.design();
  const auto& y = data.response();
  const auto pp = static_cast<Index>(p);

  MixtureParams params;
  params.mixing = Eigen::VectorXd::Constant(static_cast<Index>(g), 1.0 / static_cast<double>(g));
  params.coefficients.resize(pp, static_cast<Index>(g));
  params.scales.resize(static_cast<Index>(g));

  std::vector<std::size_t> rows(n);
  for (std::size_t i = 0; i < g; ++i) {
    bool ok = false;
    for (std::size_t attempt = 0; attempt < kMaxPartitionDraws && !ok; ++attempt) {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
      // Partial Fisher-Yates: the first p entries are a uniform p-subset.
      for (std::size_t k = 0; k < p; ++k) {
        boost::random::uniform_int_distribution<std::size_t> pick(k, n - 1);
        std::swap(rows[k], rows[pick(rng)]);
      }
      Eigen::MatrixXd xs(pp, pp);
      Eigen::VectorXd ys(pp);
      for (Index k = 0; k < pp; ++k) {
        xs.row(k) = x.row(static_cast<Index>(rows[static_cast<std::size_t>(k)]));
        ys[k] = y[static_cast<Index>(rows[static_cast<std::size_t>(k)])];
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(xs);
      if (lu.rank() < pp) continue;
      params.coefficients.col(static_cast<Index>(i)) = lu.solve(ys);
      ok = true;
    }
    if (!ok) throw ComponentCollapse(i, "could not draw a regular elemental subset");
  }

  // Scales from the residuals of the rows each line is closest to.
  const Eigen::MatrixXd resid = (-(x * params.coefficients)).colwise() + y;
  std::vector<std::vector<double>> abs_resid(g);
  for (Index j = 0; j < resid.rows(); ++j) {
    Index nearest = 0;
    resid.row(j).cwiseAbs().minCoeff(&nearest);
    abs_resid[static_cast<std::size_t>(nearest)].push_back(std::abs(resid(j, nearest)));
  }
  for (std::size_t i = 0; i < g; ++i) {
    auto& r = abs_resid[i];
    // The p defining rows have zero residual; require something beyond them.
    const double mad = r.size() > p ? median_inplace(r) : 0.0;
    params.scales[static_cast<Index>(i)] = std::max(kMadToSigma * mad, sigma_floor);
  }
  return params;
}

LeverageWeights compute_leverage(const RegressionData& data, const EstimatorSpec& spec, std::uint64_t seed) {
  if (!spec.uses_leverage() || data.p() < 2) return LeverageWeights::unit(data.n());
  const Eigen::MatrixXd x = data.predictors();
  const McdEstimate est = fast_mcd(x, seed);
  return leverage_weights(x, est, spec.gamma);
}

FitResult fit(const RegressionData& data, std::size_t g, const EstimatorSpec& spec, const FitConfig& config) {
  return fit(data, g, spec, config, compute_leverage(data, spec, config.seed));
}

FitResult fit(const RegressionData& data, std::size_t g, const EstimatorSpec& spec, const FitConfig& config,
              const LeverageWeights& leverage) {
  if (g == 0) throw InvalidDimensions("number of components must be at least 1");
  if (config.n_starts == 0) throw DomainError("n_starts must be at least 1");
  const LeverageWeights weights = spec.uses_leverage() ? leverage : LeverageWeights::unit(data.n());
  const double floor = config.sigma_floor.value_or(default_sigma_floor(data));

  // A bounded rho makes the pseudo-likelihood grow without limit as a scale
  // shrinks onto a few points, so redescending kernels select by the Gaussian
  // likelihood.
  const bool robust_selection =
      config.selection == StartSelection::Robust && spec.kernel.family() == PsiFamily::Huber;

  std::optional<EmRun> best;
  double best_score = -INFINITY;
  std::size_t best_start = 0;
  std::vector<std::string> failures;
  for (std::size_t s = 0; s < config.n_starts; ++s) {
    try {
      const MixtureParams init = elemental_draw(s, config) ? elemental_start(data, g, config.seed, s, floor)
                                                           : random_partition_start(data, g, config.seed, s, floor);
      EmRun run = run_em(data, spec, config, init, weights);
      const double score = robust_selection ? robust_loglik(data, run.params, spec, weights)
                                            : gaussian_loglik(data, run.params);
      if (!std::isfinite(score)) throw Error("selection log-likelihood is not finite");
      if (!best || score > best_score) {
        best_score = score;
        best_start = s;
        best = std::move(run);
      }
    } catch (const Error& e) {
      failures.push_back(e.what());
    }
  }
  if (!best) throw FitFailed(std::move(failures));

  FitResult result;
  result.params = std::move(best->params);
  result.iterations = best->iterations;
  result.converged = best->converged;
  result.trace = std::move(best->trace);
  result.start_index = best_start;
  result.failed_starts = std::move(failures);
  result.posteriors = e_step(data, result.params);
  result.gaussian_loglik = gaussian_loglik(data, result.params);
  result.robust_loglik = robust_loglik(data, result.params, spec, weights);
  result.complete_loglik = complete_loglik(data, result.params, result.posteriors);
  result.icl = icl(result.complete_loglik, free_parameter_count(g, data.p()), static_cast<double>(data.n()));
  if (spec.uses_leverage()) result.leverage = weights;
  return result;
}

}  // namespace mixreg
