#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "mixreg/em.hpp"
#include "mixreg/error.hpp"
#include "mixreg/simulation.hpp"
#include "support.hpp"

using namespace mixreg;

namespace {

MixtureParams params2(double b10, double b11, double b20, double b21, double pi1 = 0.5, double s1 = 1.0,
                      double s2 = 1.0) {
  MixtureParams p;
  p.mixing = Eigen::Vector2d(pi1, 1.0 - pi1);
  p.coefficients.resize(2, 2);
  p.coefficients << b10, b20, b11, b21;
  p.scales = Eigen::Vector2d(s1, s2);
  return p;
}

MixtureParams random_params(std::mt19937_64& rng, Eigen::Index g, Eigen::Index p) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::normal_distribution<double> n01;
  MixtureParams out;
  out.mixing.resize(g);
  for (Eigen::Index i = 0; i < g; ++i) out.mixing[i] = u(rng);
  out.mixing /= out.mixing.sum();
  out.coefficients.resize(p, g);
  for (Eigen::Index i = 0; i < g; ++i)
    for (Eigen::Index k = 0; k < p; ++k) out.coefficients(k, i) = 3.0 * n01(rng);
  out.scales.resize(g);
  for (Eigen::Index i = 0; i < g; ++i) out.scales[i] = 0.1 + 2.0 * u(rng);
  return out;
}

// Normal-equations oracle: X'WX b = X'Wy solved through an explicit inverse.
Eigen::VectorXd wls_oracle(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
  Eigen::MatrixXd xtwx = Eigen::MatrixXd::Zero(x.cols(), x.cols());
  Eigen::VectorXd xtwy = Eigen::VectorXd::Zero(x.cols());
  for (Eigen::Index j = 0; j < x.rows(); ++j) {
    xtwx += w[j] * x.row(j).transpose() * x.row(j);
    xtwy += w[j] * y[j] * x.row(j).transpose();
  }
  return xtwx.inverse() * xtwy;
}

}  // namespace

TEST_CASE("regression data validation") {
  Eigen::MatrixXd d(3, 2);
  d << 1, 0, 1, 1, 1, 2;
  CHECK_NOTHROW(RegressionData(d, Eigen::Vector3d(1, 2, 3)));
  CHECK_THROWS_AS(RegressionData(d, Eigen::Vector2d(1, 2)), InvalidDimensions);
  Eigen::MatrixXd no_intercept = d;
  no_intercept(1, 0) = 2.0;
  CHECK_THROWS_AS(RegressionData(no_intercept, Eigen::Vector3d(1, 2, 3)), InvalidDimensions);
  CHECK_THROWS_AS(RegressionData(d, Eigen::Vector3d(1, NAN, 3)), DomainError);
}

TEST_CASE("e_step examples") {
  const auto data = testsupport::two_lines(1, 50);
  MixtureParams one;
  one.mixing = Eigen::VectorXd::Ones(1);
  one.coefficients = Eigen::Vector2d(0.0, 1.0);
  one.scales = Eigen::VectorXd::Ones(1);
  CHECK((e_step(data, one).array() == 1.0).all());

  const auto same = params2(0.2, 1.0, 0.2, 1.0);
  CHECK((e_step(data, same).array() == 0.5).all());

  Eigen::MatrixXd x(1, 1);
  x << 1.0;
  const auto point = RegressionData::with_intercept(x, Eigen::VectorXd::Constant(1, 4.0));
  const auto z = e_step(point, params2(0, 4, 0, -4));
  CHECK(z(0, 0) == doctest::Approx(1.0 / (1.0 + std::exp(-32.0))).epsilon(1e-15));
  CHECK(z(0, 1) == doctest::Approx(std::exp(-32.0) / (1.0 + std::exp(-32.0))).epsilon(1e-12));
}

TEST_CASE("e_step survives residuals of 300 standard deviations") {
  Eigen::MatrixXd x(1, 1);
  x << 0.0;
  const auto point = RegressionData::with_intercept(x, Eigen::VectorXd::Constant(1, 300.0));
  const auto z = e_step(point, params2(0, 0, 1, 0));
  CHECK(z.allFinite());
  CHECK(z.row(0).sum() == doctest::Approx(1.0));
  CHECK(z(0, 1) == 1.0);
}

TEST_CASE("posterior rows sum to one for random parameters") {
  std::mt19937_64 rng(31);
  const auto data = testsupport::two_lines(2, 60, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto g = 1 + trial % 4;
    const auto params = random_params(rng, g, 2);
    const auto z = e_step(data, params);
    CHECK(((z.rowwise().sum().array() - 1.0).abs() <= 1e-10).all());
    CHECK((z.array() >= 0.0).all());
    CHECK((z.array() <= 1.0).all());
  }
}

TEST_CASE("robustified posteriors") {
  Eigen::MatrixXd x(1, 1);
  x << 0.0;
  const auto point = RegressionData::with_intercept(x, Eigen::VectorXd::Constant(1, 2.0));
  MixtureParams one;
  one.mixing = Eigen::VectorXd::Ones(1);
  one.coefficients = Eigen::Vector2d(0.0, 0.0);
  one.scales = Eigen::VectorXd::Ones(1);
  const Eigen::MatrixXd z = Eigen::MatrixXd::Constant(1, 1, 0.8);
  const auto w1 = LeverageWeights::unit(1);
  CHECK(robustified_posteriors(z, point, one, EstimatorSpec::gm_mallows(), w1)(0, 0) ==
        doctest::Approx(0.538).epsilon(1e-14));

  const auto data = testsupport::two_lines(3, 80);
  const auto params = params2(1, 3, -1, -2, 0.5, 0.3, 0.3);
  const auto post = e_step(data, params);
  const auto unit = LeverageWeights::unit(data.n());
  const auto mallows = robustified_posteriors(post, data, params, EstimatorSpec::gm_mallows(), unit);
  const auto schweppe = robustified_posteriors(post, data, params, EstimatorSpec::gm_schweppe(), unit);
  CHECK(mallows == schweppe);

  // Inside the linear region the weights are exactly one.
  const auto wide = EstimatorSpec{EstimatorKind::GmMallows, PsiKernel::huber(1e6), 0.05};
  CHECK(robustified_posteriors(post, data, params, wide, unit) == post);

  // Schweppe at a zero residual uses the 1/w limit.
  LeverageWeights half = LeverageWeights::unit(1);
  half.weights[0] = 0.5;
  Eigen::MatrixXd on_line(1, 1);
  on_line << 0.0;
  const auto exact = RegressionData::with_intercept(on_line, Eigen::VectorXd::Zero(1));
  CHECK(robustified_posteriors(z, exact, one, EstimatorSpec::gm_schweppe(), half)(0, 0) ==
        doctest::Approx(0.8 / 0.5));
}

TEST_CASE("mixing update") {
  Eigen::MatrixXd z(3, 2);
  z << 0.2, 0.8, 0.4, 0.6, 0.6, 0.4;
  const auto pi = update_mixing(z);
  CHECK(pi[0] == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(pi[1] == doctest::Approx(0.6).epsilon(1e-15));
  Eigen::MatrixXd alt(4, 2);
  alt << 1, 0, 0, 1, 1, 0, 0, 1;
  CHECK(update_mixing(alt) == Eigen::Vector2d(0.5, 0.5));
}

TEST_CASE("coefficient update") {
  Eigen::MatrixXd x(3, 1);
  x << 1, 2, 3;
  const auto line = RegressionData::with_intercept(x, Eigen::Vector3d(1, 2, 3));
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(3, 1);
  const Eigen::VectorXd beta = update_coefficients(line, ones, LeverageWeights::unit(3), 0);
  CHECK(std::abs(beta[0]) < 1e-12);
  CHECK(beta[1] == doctest::Approx(1.0).epsilon(1e-12));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd px = testsupport::normal_matrix(rng, 25, 2);
    const Eigen::VectorXd y = testsupport::normal_matrix(rng, 25, 1).col(0);
    const auto data = RegressionData::with_intercept(px, y);
    Eigen::MatrixXd zstar(25, 2);
    LeverageWeights lev = LeverageWeights::unit(25);
    for (int j = 0; j < 25; ++j) {
      zstar(j, 0) = u(rng);
      zstar(j, 1) = u(rng);
      lev.weights[j] = u(rng);
    }
    const Eigen::VectorXd got = update_coefficients(data, zstar, lev, 1);
    const Eigen::VectorXd want = wls_oracle(data.design(), y, zstar.col(1).cwiseProduct(lev.weights));
    CHECK((got - want).norm() <= 1e-8 * std::max(1.0, want.norm()));
  }

  Eigen::MatrixXd singular = Eigen::MatrixXd::Zero(3, 2);
  singular(0, 1) = 1.0;
  try {
    update_coefficients(line, singular, LeverageWeights::unit(3), 1);
    FAIL("expected ComponentCollapse");
  } catch (const ComponentCollapse& e) {
    CHECK(e.component() == 1);
  }
}

TEST_CASE("scale update") {
  const auto k = PsiKernel::huber();
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(4, 1);
  // Residuals of +-t with chi(t) = a leave sigma unchanged.
  const double a = 0.3;
  const double t = std::sqrt(2.0 * a);
  const auto data = RegressionData::with_intercept(x, Eigen::Vector4d(t, -t, t, -t));
  MixtureParams one;
  one.mixing = Eigen::VectorXd::Ones(1);
  one.coefficients = Eigen::Vector2d(0.0, 0.0);
  one.scales = Eigen::VectorXd::Ones(1);
  const Eigen::MatrixXd z = Eigen::MatrixXd::Constant(4, 1, 0.7);
  CHECK(update_scale(data, z, one, k, 0, a, 1e-4) == doctest::Approx(1.0).epsilon(1e-14));

  const auto flat = RegressionData::with_intercept(x, Eigen::Vector4d::Zero());
  CHECK(update_scale(flat, z, one, k, 0, a, 1e-3) == doctest::Approx(1e-6).epsilon(1e-12));

  const Eigen::MatrixXd empty = Eigen::MatrixXd::Zero(4, 1);
  CHECK_THROWS_AS(update_scale(data, empty, one, k, 0, a, 1e-4), ComponentCollapse);
}

TEST_CASE("scale iteration is consistent at the normal") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> n01;
  const Eigen::Index n = 100000;
  Eigen::VectorXd y(n);
  for (Eigen::Index j = 0; j < n; ++j) y[j] = 2.0 * n01(rng);
  const auto data = RegressionData::with_intercept(Eigen::MatrixXd::Zero(n, 0), y);
  MixtureParams one;
  one.mixing = Eigen::VectorXd::Ones(1);
  one.coefficients = Eigen::VectorXd::Zero(1);
  one.scales = Eigen::VectorXd::Ones(1);
  const Eigen::MatrixXd z = Eigen::MatrixXd::Ones(n, 1);
  const auto k = PsiKernel::huber();
  for (int it = 0; it < 200; ++it) one.scales[0] = std::sqrt(update_scale(data, z, one, k, 0, n, 1, 1e-8));
  CHECK(one.scales[0] == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("scale multiplier has unit expectation at the true sigma") {
  // E[chi(T)] / a = 1 for T ~ N(0, 1) and n -> infinity; check the sample
  // multiplier against a 3-sigma Monte Carlo band.
  const auto k = PsiKernel::huber();
  std::mt19937_64 rng(78);
  std::normal_distribution<double> n01;
  const int draws = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double v = k.chi(n01(rng)) / k.expected_chi();
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / draws;
  const double se = std::sqrt((sum2 / draws - mean * mean) / draws);
  CHECK(std::abs(mean - 1.0) <= 3.0 * se);
}

TEST_CASE("log-likelihoods and ICL") {
  const auto data = testsupport::two_lines(8, 40);
  MixtureParams one;
  one.mixing = Eigen::VectorXd::Ones(1);
  one.coefficients = Eigen::Vector2d(0.1, 0.4);
  one.scales = Eigen::VectorXd::Constant(1, 1.7);
  const Eigen::VectorXd r = data.response() - data.design() * one.coefficients;
  const double s = 1.7;
  double direct = 0.0;
  for (Eigen::Index j = 0; j < r.size(); ++j)
    direct += -0.5 * std::log(2.0 * std::numbers::pi) - std::log(s) - r[j] * r[j] / (2.0 * s * s);
  CHECK(complete_loglik(data, one, Eigen::MatrixXd::Ones(40, 1)) == doctest::Approx(direct).epsilon(1e-13));
  CHECK(gaussian_loglik(data, one) == doctest::Approx(direct).epsilon(1e-13));

  // Doubling every scale with the posteriors held fixed.
  const auto p = params2(1, 3, -1, -2, 0.4, 0.5, 0.8);
  const auto z = e_step(data, p);
  MixtureParams doubled = p;
  doubled.scales *= 2.0;
  const Eigen::MatrixXd res = (-(data.design() * p.coefficients)).colwise() + data.response();
  double residual_change = 0.0;
  for (Eigen::Index i = 0; i < 2; ++i)
    for (Eigen::Index j = 0; j < res.rows(); ++j) {
      const double s2 = p.scales[i] * p.scales[i];
      residual_change += z(j, i) * (-res(j, i) * res(j, i) / (8.0 * s2) + res(j, i) * res(j, i) / (2.0 * s2));
    }
  const double expected = complete_loglik(data, p, z) - 40.0 * std::log(2.0) + residual_change;
  CHECK(complete_loglik(data, doubled, z) == doctest::Approx(expected).epsilon(1e-12));

  CHECK(free_parameter_count(2, 2) == 7);
  CHECK(icl(499.66117, 7, 88) == doctest::Approx(-967.98099).epsilon(1e-6));
  CHECK(icl(772.99552, 7, 88) == doctest::Approx(-1514.64969).epsilon(1e-6));
  CHECK(icl(0.0, 1, std::exp(1.0)) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("robust pseudo-likelihood reduces to the Gaussian one") {
  const auto data = testsupport::two_lines(9, 60);
  const auto p = params2(1, 3, -1, -2, 0.4, 0.5, 0.8);
  const auto wide = EstimatorSpec{EstimatorKind::GmMallows, PsiKernel::huber(1e6), 0.05};
  CHECK(robust_loglik(data, p, wide, LeverageWeights::unit(data.n())) ==
        doctest::Approx(gaussian_loglik(data, p)).epsilon(1e-13));
  CHECK(zeta(EstimatorSpec::gm_schweppe(), 3.0, 1.0) == zeta(EstimatorSpec::gm_mallows(), 3.0, 1.0));
  CHECK(zeta(EstimatorSpec::gm_schweppe(), 3.0, 0.5) == doctest::Approx(0.25 * PsiKernel::huber().rho(6.0)));
}

TEST_CASE("single-component fit with a huge tuning constant is least squares") {
  const auto data = testsupport::two_lines(10, 100);
  FitConfig cfg;
  cfg.n_starts = 2;
  const auto res = fit(data, 1, EstimatorSpec::m_huber(1e6), cfg);
  const Eigen::VectorXd ols = wls_oracle(data.design(), data.response(), Eigen::VectorXd::Ones(100));
  CHECK((res.params.coefficients.col(0) - ols).norm() <= 1e-6 * ols.norm());
  CHECK(res.converged);
}

TEST_CASE("mallows with unit weights follows the M trajectory exactly") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto data = testsupport::two_lines(100 + seed, 120, 0.5);
    FitConfig cfg;
    cfg.n_starts = 3;
    cfg.seed = seed;
    cfg.record_trace = true;
    const auto m = fit(data, 2, EstimatorSpec::m_huber(), cfg);
    const auto gm = fit(data, 2, EstimatorSpec::gm_mallows(), cfg, LeverageWeights::unit(data.n()));
    REQUIRE(m.trace.size() == gm.trace.size());
    for (std::size_t k = 0; k < m.trace.size(); ++k) CHECK(m.trace[k] == gm.trace[k]);
  }
}

TEST_CASE("permuting the initial labels permutes the output") {
  const auto data = testsupport::two_lines(11, 150, 0.5);
  const auto spec = EstimatorSpec::gm_mallows();
  const auto lev = compute_leverage(data, spec, 1);
  FitConfig cfg;
  const auto start = params2(0.5, 2.0, -0.5, -1.0, 0.6, 1.0, 1.2);
  const auto a = run_em(data, spec, cfg, start, lev);
  const auto b = run_em(data, spec, cfg, start.permuted({1, 0}), lev);
  CHECK(a.iterations == b.iterations);
  CHECK((a.params.permuted({1, 0}).flatten() - b.params.flatten()).norm() < 1e-12);
}

TEST_CASE("fit is deterministic and leverage depends only on the design") {
  const auto data = testsupport::two_lines(12, 150);
  FitConfig cfg;
  cfg.seed = 42;
  const auto a = fit(data, 2, EstimatorSpec::gm_schweppe(), cfg);
  const auto b = fit(data, 2, EstimatorSpec::gm_schweppe(), cfg);
  CHECK(a.params.flatten() == b.params.flatten());
  CHECK(a.posteriors == b.posteriors);
  CHECK(a.icl == b.icl);
  CHECK(a.start_index == b.start_index);

  Eigen::VectorXd other_y = data.response().reverse();
  const auto shuffled = RegressionData(data.design(), other_y);
  const auto c = fit(shuffled, 2, EstimatorSpec::gm_schweppe(), cfg);
  REQUIRE(a.leverage);
  REQUIRE(c.leverage);
  CHECK(a.leverage->weights == c.leverage->weights);
}

TEST_CASE("fit result invariants") {
  const auto data = testsupport::two_lines(13, 200);
  const auto res = fit(data, 2, EstimatorSpec::m_tukey(), FitConfig{});
  CHECK(((res.posteriors.rowwise().sum().array() - 1.0).abs() <= 1e-10).all());
  CHECK(std::abs(res.params.mixing.sum() - 1.0) <= 1e-12);
  CHECK(res.complete_loglik == doctest::Approx(complete_loglik(data, res)));
  CHECK(res.icl == doctest::Approx(-2.0 * res.complete_loglik + 7.0 * std::log(200.0)));
}

TEST_CASE("scenario 1 clean fits recover the slopes") {
  sim::ScenarioSpec spec;
  int good = 0;
  const int runs = 40;
  for (int r = 0; r < runs; ++r) {
    const auto sample = sim::generate(spec, static_cast<std::size_t>(r));
    FitConfig cfg;
    cfg.n_starts = 5;
    cfg.seed = static_cast<std::uint64_t>(r);
    const auto res = fit(sample.data, 2, EstimatorSpec::m_huber(), cfg);
    const auto aligned = sim::align_labels(res.params, spec.truth());
    if (std::abs(aligned.coefficients(1, 0) - 4.0) < 0.4 && std::abs(aligned.coefficients(1, 1) + 4.0) < 0.4) ++good;
  }
  CHECK(good >= 0.95 * runs);
}

TEST_CASE("start construction") {
  const auto data = testsupport::two_lines(14, 60);
  const auto a = random_partition_start(data, 3, 5, 0, 1e-4);
  CHECK(a.mixing.sum() == doctest::Approx(1.0));
  CHECK(a.g() == 3);
  const auto b = elemental_start(data, 2, 5, 1, 1e-4);
  CHECK(b.mixing == Eigen::Vector2d(0.5, 0.5));
  CHECK((b.scales.array() >= 1e-4).all());
  CHECK(elemental_start(data, 2, 5, 1, 1e-4).flatten() == b.flatten());
}

TEST_CASE("all starts collapsing is reported") {
  // Three points cannot support two lines with two coefficients each.
  Eigen::MatrixXd x(3, 1);
  x << 0, 1, 2;
  const auto data = RegressionData::with_intercept(x, Eigen::Vector3d(0, 1, 0));
  FitConfig cfg;
  cfg.n_starts = 2;
  try {
    fit(data, 2, EstimatorSpec::m_huber(), cfg);
    FAIL("expected FitFailed");
  } catch (const FitFailed& e) {
    CHECK(e.causes().size() == 2);
  }
}

TEST_CASE("redescending kernels select starts by the Gaussian likelihood") {
  const auto data = testsupport::two_lines(15, 150, 0.5);
  FitConfig robust;
  robust.seed = 3;
  FitConfig gaussian = robust;
  gaussian.selection = StartSelection::Gaussian;
  const auto a = fit(data, 2, EstimatorSpec::m_tukey(), robust);
  const auto b = fit(data, 2, EstimatorSpec::m_tukey(), gaussian);
  CHECK(a.start_index == b.start_index);
  CHECK(a.params.flatten() == b.params.flatten());
}
