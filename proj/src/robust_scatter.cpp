#include "mixreg/robust_scatter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <boost/math/distributions/chi_squared.hpp>

#include "mixreg/error.hpp"

namespace mixreg {

namespace {

using Index = Eigen::Index;

struct Candidate {
  std::vector<std::size_t> support;  // sorted
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  double log_det = -std::numeric_limits<double>::infinity();
  bool singular = true;
};

bool better(const Candidate& a, const Candidate& b) {
  if (a.singular != b.singular) return !a.singular;
  if (a.log_det != b.log_det) return a.log_det < b.log_det;
  return a.support < b.support;
}

// Mean and covariance (divisor m) of the listed rows.
void subset_moments(const Eigen::MatrixXd& x, const std::vector<std::size_t>& rows, Candidate& out) {
  const Index p = x.cols();
  const double m = static_cast<double>(rows.size());
  out.mean = Eigen::VectorXd::Zero(p);
  for (auto r : rows) out.mean += x.row(static_cast<Index>(r)).transpose();
  out.mean /= m;
  out.cov = Eigen::MatrixXd::Zero(p, p);
  for (auto r : rows) {
    const Eigen::VectorXd d = x.row(static_cast<Index>(r)).transpose() - out.mean;
    out.cov.noalias() += d * d.transpose();
  }
  out.cov /= m;

  Eigen::LLT<Eigen::MatrixXd> llt(out.cov);
  const double scale = std::max(out.cov.diagonal().maxCoeff(), std::numeric_limits<double>::min());
  if (llt.info() != Eigen::Success ||
      llt.matrixL().toDenseMatrix().diagonal().minCoeff() <= 1e-10 * std::sqrt(scale)) {
    out.singular = true;
    out.log_det = -std::numeric_limits<double>::infinity();
    return;
  }
  out.singular = false;
  out.log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

Eigen::VectorXd squared_distances(const Eigen::MatrixXd& x, const Eigen::VectorXd& center,
                                  const Eigen::MatrixXd& scatter) {
  Eigen::LLT<Eigen::MatrixXd> llt(scatter);
  if (llt.info() != Eigen::Success) throw DegenerateScatter("scatter matrix is not positive definite");
  Eigen::MatrixXd centered = x.rowwise() - center.transpose();
  // Solve L z = (x - m) for every row; the squared norm of z is the distance.
  Eigen::MatrixXd z = llt.matrixL().solve(centered.transpose());
  return z.colwise().squaredNorm().transpose();
}

// Indices of the h smallest distances, ties broken by index, returned sorted.
std::vector<std::size_t> smallest_h(const Eigen::VectorXd& d, std::size_t h) {
  std::vector<std::size_t> idx(static_cast<std::size_t>(d.size()));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto less = [&d](std::size_t a, std::size_t b) {
    const double da = d[static_cast<Index>(a)];
    const double db = d[static_cast<Index>(b)];
    return da != db ? da < db : a < b;
  };
  std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(h - 1), idx.end(), less);
  idx.resize(h);
  std::sort(idx.begin(), idx.end());
  return idx;
}

// One concentration step. Returns false when the support did not change.
bool concentrate(const Eigen::MatrixXd& x, std::size_t h, Candidate& c) {
  if (c.singular) return false;
  auto next = smallest_h(squared_distances(x, c.mean, c.cov), h);
  if (next == c.support) return false;
  Candidate moved;
  moved.support = std::move(next);
  subset_moments(x, moved.support, moved);
  if (moved.singular || moved.log_det < c.log_det ||
      (moved.log_det == c.log_det && moved.support < c.support)) {
    c = std::move(moved);
    return !c.singular;
  }
  return false;
}

double median(Eigen::VectorXd v) {
  std::vector<double> s(v.data(), v.data() + v.size());
  std::sort(s.begin(), s.end());
  const std::size_t n = s.size();
  return n % 2 == 1 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
}

Candidate exact_univariate(const Eigen::MatrixXd& x, std::size_t h) {
  const std::size_t n = static_cast<std::size_t>(x.rows());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&x](std::size_t a, std::size_t b) {
    return x(static_cast<Index>(a), 0) < x(static_cast<Index>(b), 0);
  });

  Candidate best;
  bool have = false;
  for (std::size_t start = 0; start + h <= n; ++start) {
    Candidate c;
    c.support.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(start + h));
    std::sort(c.support.begin(), c.support.end());
    subset_moments(x, c.support, c);
    if (!have || better(c, best)) {
      best = std::move(c);
      have = true;
    }
  }
  return best;
}

Candidate random_start(const Eigen::MatrixXd& x, std::mt19937_64& rng) {
  const std::size_t n = static_cast<std::size_t>(x.rows());
  const std::size_t p = static_cast<std::size_t>(x.cols());
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  // Partial Fisher-Yates: draw points until the subset covariance is regular.
  Candidate c;
  for (std::size_t k = 0; k < n; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, n - 1);
    std::swap(perm[k], perm[pick(rng)]);
    if (k + 1 < p + 1) continue;
    c.support.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(k + 1));
    std::sort(c.support.begin(), c.support.end());
    subset_moments(x, c.support, c);
    if (!c.singular) break;
  }
  return c;
}

void validate_predictors(const Eigen::MatrixXd& x) {
  const auto n = static_cast<std::size_t>(x.rows());
  const auto p = static_cast<std::size_t>(x.cols());
  if (p == 0) throw InvalidDimensions("MCD requires at least one predictor column");
  if (n < 2 * (p + 1)) throw InvalidDimensions("MCD requires n >= 2(p + 1)");
  if (!x.allFinite()) throw DomainError("predictor matrix contains non-finite values");
}

}  // namespace

LeverageWeights LeverageWeights::unit(std::size_t n) {
  LeverageWeights w;
  w.weights = Eigen::VectorXd::Ones(static_cast<Index>(n));
  return w;
}

std::size_t mcd_subset_size(std::size_t n, std::size_t p) { return (n + p + 1) / 2; }

double chi_squared_quantile(double probability, double dof) {
  if (!(probability > 0.0 && probability < 1.0)) throw DomainError("probability must lie in (0, 1)");
  boost::math::chi_squared dist(dof);
  return boost::math::quantile(dist, probability);
}

McdEstimate fast_mcd(const Eigen::MatrixXd& x, std::uint64_t seed, const McdOptions& options) {
  validate_predictors(x);
  const auto n = static_cast<std::size_t>(x.rows());
  const auto p = static_cast<std::size_t>(x.cols());
  const std::size_t h = mcd_subset_size(n, p);

  Candidate best;
  if (p == 1) {
    best = exact_univariate(x, h);
  } else {
    std::mt19937_64 rng(seed);
    std::vector<Candidate> pool;
    pool.reserve(options.n_starts);
    for (std::size_t s = 0; s < options.n_starts; ++s) {
      Candidate c = random_start(x, rng);
      if (c.singular) continue;
      // Expand the elemental start to an h-subset.
      c.support = smallest_h(squared_distances(x, c.mean, c.cov), h);
      subset_moments(x, c.support, c);
      for (std::size_t k = 0; k < options.initial_csteps; ++k) {
        if (!concentrate(x, h, c)) break;
      }
      pool.push_back(std::move(c));
    }
    if (pool.empty()) throw DegenerateScatter("no regular elemental subset found");

    std::sort(pool.begin(), pool.end(), better);
    pool.erase(std::unique(pool.begin(), pool.end(),
                           [](const Candidate& a, const Candidate& b) { return a.support == b.support; }),
               pool.end());
    if (pool.size() > options.n_refined) pool.resize(options.n_refined);
    for (auto& c : pool) {
      for (std::size_t k = 0; k < options.max_csteps; ++k) {
        if (!concentrate(x, h, c)) break;
      }
    }
    best = *std::min_element(pool.begin(), pool.end(), better);
  }

  if (best.singular) throw DegenerateScatter("covariance of the best h-subset is singular");

  McdEstimate est;
  est.location = best.mean;
  est.support = best.support;
  est.raw_determinant = std::exp(best.log_det);
  const double factor =
      median(squared_distances(x, best.mean, best.cov)) / chi_squared_quantile(0.5, static_cast<double>(p));
  est.scatter = best.cov * factor;
  est.determinant = est.raw_determinant * std::pow(factor, static_cast<double>(p));
  return est;
}

Eigen::VectorXd mahalanobis_distances(const Eigen::MatrixXd& x, const McdEstimate& estimate) {
  if (x.cols() != estimate.location.size()) throw InvalidDimensions("estimate dimension does not match data");
  return squared_distances(x, estimate.location, estimate.scatter);
}

LeverageWeights leverage_weights_from_distances(const Eigen::VectorXd& distances, std::size_t dof, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("gamma must lie in (0, 1)");
  LeverageWeights out;
  out.gamma = gamma;
  out.cutoff_b = chi_squared_quantile(1.0 - gamma, static_cast<double>(dof));
  out.distances = distances;
  out.weights.resize(distances.size());
  for (Index j = 0; j < distances.size(); ++j) {
    const double d = distances[j];
    out.weights[j] = d <= out.cutoff_b ? 1.0 : std::sqrt(out.cutoff_b / d);
  }
  return out;
}

LeverageWeights leverage_weights(const Eigen::MatrixXd& x, const McdEstimate& estimate, double gamma) {
  return leverage_weights_from_distances(mahalanobis_distances(x, estimate), static_cast<std::size_t>(x.cols()),
                                         gamma);
}

}  // namespace mixreg
