#include "texbank/vocab.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <set>

namespace texbank {
namespace {

double squared_distance(const Eigen::Ref<const Vector>& a, const double* b) {
  double d = 0.0;
  for (Index i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    d += t * t;
  }
  return d;
}

std::pair<Index, double> nearest(const Matrix& centers, const Eigen::Ref<const Vector>& f) {
  Index best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Index k = 0; k < centers.rows(); ++k) {
    const double d = squared_distance(f, centers.row(k).data());
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return {best, best_d};
}

Index count_distinct_rows(const Matrix& x, Index enough) {
  std::set<std::vector<double>> seen;
  for (Index i = 0; i < x.rows() && static_cast<Index>(seen.size()) < enough; ++i)
    seen.insert(std::vector<double>(x.row(i).data(), x.row(i).data() + x.cols()));
  return static_cast<Index>(seen.size());
}

Matrix kmeanspp_seed(const Matrix& x, Index k, std::mt19937_64& rng) {
  const Index n = x.rows();
  Matrix centers(k, x.cols());
  std::uniform_int_distribution<Index> pick(0, n - 1);
  centers.row(0) = x.row(pick(rng));
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) d2[i] = squared_distance(x.row(i).transpose(), centers.row(0).data());
  for (Index c = 1; c < k; ++c) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    Index chosen = 0;
    if (total > 0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      chosen = n - 1;
      for (Index i = 0; i < n; ++i) {
        target -= d2[i];
        if (target < 0 && d2[i] > 0) {
          chosen = i;
          break;
        }
      }
      while (d2[chosen] == 0 && chosen > 0) --chosen;  // never re-pick a center
    }
    centers.row(c) = x.row(chosen);
    for (Index i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], squared_distance(x.row(i).transpose(), centers.row(c).data()));
  }
  return centers;
}

struct ComponentTerms {
  Vector log_weight;  // log pi_k - 0.5 * sum log(2 pi var)
  Matrix inv_var;
};

ComponentTerms component_terms(const GmmModel& gmm) {
  ComponentTerms t;
  t.log_weight.resize(gmm.size());
  t.inv_var = gmm.variances.cwiseInverse();
  for (Index k = 0; k < gmm.size(); ++k) {
    double s = 0.0;
    for (Index d = 0; d < gmm.dim(); ++d) s += std::log(2 * std::numbers::pi * gmm.variances(k, d));
    t.log_weight[k] = std::log(gmm.priors[k]) - 0.5 * s;
  }
  return t;
}

// Per-component log joint log(pi_k N(f | k)); returns log-sum-exp.
double log_joint(const GmmModel& gmm, const ComponentTerms& t, const Eigen::Ref<const Vector>& f,
                 Vector& out) {
  out.resize(gmm.size());
  for (Index k = 0; k < gmm.size(); ++k) {
    double q = 0.0;
    for (Index d = 0; d < gmm.dim(); ++d) {
      const double diff = f[d] - gmm.means(k, d);
      q += diff * diff * t.inv_var(k, d);
    }
    out[k] = t.log_weight[k] - 0.5 * q;
  }
  const double m = out.maxCoeff();
  return m + std::log((out.array() - m).exp().sum());
}

void check_gmm_input(const GmmModel& gmm, Index dim) {
  if (gmm.size() == 0) throw std::invalid_argument("empty mixture");
  if (gmm.dim() != dim) throw std::invalid_argument("descriptor and mixture dimensions differ");
}

}  // namespace

Matrix PcaWhitener::transform(const Matrix& samples) const {
  if (samples.cols() != input_dim()) throw std::invalid_argument("whitener input dimension mismatch");
  Matrix centered = samples.rowwise() - mean.transpose();
  Matrix projected = centered * basis;
  return projected * eigenvalues.cwiseSqrt().cwiseInverse().asDiagonal();
}

PcaWhitener fit_pca_whitener(const Matrix& samples, Index target_dim) {
  const Index n = samples.rows();
  const Index dim = samples.cols();
  if (target_dim < 1 || target_dim > dim)
    throw std::invalid_argument("PCA target dimension must be in [1, D]");
  if (n <= target_dim) throw std::invalid_argument("PCA needs more samples than target dimensions");

  PcaWhitener w;
  w.mean = samples.colwise().mean().transpose();
  const Matrix centered = samples.rowwise() - w.mean.transpose();
  const Matrix cov = (centered.transpose() * centered) / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  if (eig.info() != Eigen::Success) throw Error("covariance eigendecomposition failed");

  // Eigen sorts ascending.
  const Vector& values = eig.eigenvalues();
  const double largest = std::max(values[dim - 1], 0.0);
  const double floor = largest > 0 ? 1e-10 * largest : 1e-12;
  w.basis.resize(dim, target_dim);
  w.eigenvalues.resize(target_dim);
  for (Index j = 0; j < target_dim; ++j) {
    const Index src = dim - 1 - j;
    Vector column = eig.eigenvectors().col(src);
    Index pivot = 0;
    column.cwiseAbs().maxCoeff(&pivot);
    if (column[pivot] < 0) column = -column;
    w.basis.col(j) = column;
    w.eigenvalues[j] = std::max(values[src], floor);
  }
  return w;
}

Index nearest_center(const Codebook& codebook, const Eigen::Ref<const Vector>& f) {
  if (f.size() != codebook.dim()) throw std::invalid_argument("descriptor and codebook dimensions differ");
  return nearest(codebook.centers, f).first;
}

KmeansResult train_kmeans(const Matrix& samples, const KmeansOptions& options) {
  const Index n = samples.rows();
  const Index k = options.clusters;
  if (k < 1) throw std::invalid_argument("k-means needs at least one cluster");
  if (n < k) throw std::invalid_argument("k-means needs at least K samples");
  if (count_distinct_rows(samples, k) < k) throw Error("fewer distinct samples than clusters");

  std::mt19937_64 rng(options.seed);
  KmeansResult result;
  Matrix centers = kmeanspp_seed(samples, k, rng);
  std::vector<Index> assign(static_cast<std::size_t>(n), -1);
  std::vector<double> dist(static_cast<std::size_t>(n), 0.0);

  for (int it = 0; it < std::max(options.max_iterations, 1); ++it) {
    bool changed = false;
    double objective = 0.0;
    for (Index i = 0; i < n; ++i) {
      const auto [c, d] = nearest(centers, samples.row(i).transpose());
      changed |= assign[i] != c;
      assign[i] = c;
      dist[i] = d;
      objective += d;
    }
    result.objective.push_back(objective);
    if (!changed && it > 0) break;
    if (it + 1 == options.max_iterations) break;

    Matrix sums = Matrix::Zero(k, samples.cols());
    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    for (Index i = 0; i < n; ++i) {
      sums.row(assign[i]) += samples.row(i);
      ++counts[assign[i]];
    }
    std::vector<bool> taken(static_cast<std::size_t>(n), false);
    for (Index c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        centers.row(c) = sums.row(c) / static_cast<double>(counts[c]);
        continue;
      }
      // Empty cluster: move it onto the worst-fit point.
      Index far = -1;
      for (Index i = 0; i < n; ++i)
        if (!taken[i] && (far < 0 || dist[i] > dist[far])) far = i;
      taken[far] = true;
      centers.row(c) = samples.row(far);
      dist[far] = 0.0;
    }
  }
  result.codebook.centers = std::move(centers);
  result.assignment = std::move(assign);
  return result;
}

Codebook kmeans(const Matrix& samples, const KmeansOptions& options) {
  return train_kmeans(samples, options).codebook;
}

Vector gmm_posteriors(const GmmModel& gmm, const Eigen::Ref<const Vector>& f) {
  check_gmm_input(gmm, f.size());
  const auto terms = component_terms(gmm);
  Vector lj;
  const double lse = log_joint(gmm, terms, f, lj);
  return (lj.array() - lse).exp();
}

double gmm_log_density(const GmmModel& gmm, const Eigen::Ref<const Vector>& f) {
  check_gmm_input(gmm, f.size());
  const auto terms = component_terms(gmm);
  Vector lj;
  return log_joint(gmm, terms, f, lj);
}

double gmm_mean_log_likelihood(const GmmModel& gmm, const Matrix& samples) {
  check_gmm_input(gmm, samples.cols());
  const auto terms = component_terms(gmm);
  Vector lj;
  double total = 0.0;
  for (Index i = 0; i < samples.rows(); ++i) total += log_joint(gmm, terms, samples.row(i).transpose(), lj);
  return total / static_cast<double>(samples.rows());
}

GmmResult train_gmm(const Matrix& samples, const GmmOptions& options) {
  const Index n = samples.rows();
  const Index dim = samples.cols();
  const Index k = options.components;
  if (k < 1) throw std::invalid_argument("GMM needs at least one component");
  if (n < k) throw std::invalid_argument("GMM needs at least K samples");

  // Work on globally centred data to limit cancellation in the moments.
  const Vector shift = samples.colwise().mean().transpose();
  const Matrix x = samples.rowwise() - shift.transpose();
  const Vector data_var = x.array().square().colwise().sum().transpose() / static_cast<double>(n);
  GmmResult result;
  result.variance_floor = std::max(options.variance_floor_factor * data_var.mean(), 1e-12);
  const double vfloor = result.variance_floor;

  GmmModel& gmm = result.model;
  {
    const auto km = train_kmeans(x, {k, 20, options.seed});
    gmm.means = km.codebook.centers;
    gmm.variances.resize(k, dim);
    gmm.priors.resize(k);
    Matrix sq = Matrix::Zero(k, dim);
    std::vector<double> counts(static_cast<std::size_t>(k), 0.0);
    for (Index i = 0; i < n; ++i) {
      const Index c = km.assignment[i];
      sq.row(c) += (x.row(i) - gmm.means.row(c)).array().square().matrix();
      counts[c] += 1.0;
    }
    for (Index c = 0; c < k; ++c) {
      for (Index d = 0; d < dim; ++d) {
        const double v = counts[c] > 1 ? sq(c, d) / counts[c] : data_var[d];
        gmm.variances(c, d) = std::max(v, vfloor);
      }
      gmm.priors[c] = std::max(counts[c] / static_cast<double>(n), options.prior_floor);
    }
    gmm.priors /= gmm.priors.sum();
  }

  Vector mass(k);
  Matrix first(k, dim);
  Matrix second(k, dim);
  auto e_step = [&] {
    const auto terms = component_terms(gmm);
    mass.setZero();
    first.setZero();
    second.setZero();
    Vector lj;
    double total = 0.0;
    for (Index i = 0; i < n; ++i) {
      const auto f = x.row(i);
      const double lse = log_joint(gmm, terms, f.transpose(), lj);
      total += lse;
      for (Index c = 0; c < k; ++c) {
        const double g = std::exp(lj[c] - lse);
        if (g == 0.0) continue;
        mass[c] += g;
        first.row(c) += g * f;
        second.row(c) += g * f.array().square().matrix();
      }
    }
    return total / static_cast<double>(n);
  };
  auto m_step = [&] {
    for (Index c = 0; c < k; ++c) {
      if (mass[c] > 0) {
        gmm.means.row(c) = first.row(c) / mass[c];
        for (Index d = 0; d < dim; ++d) {
          const double mu = gmm.means(c, d);
          gmm.variances(c, d) = std::max(second(c, d) / mass[c] - mu * mu, vfloor);
        }
      }
      gmm.priors[c] = std::max(mass[c] / static_cast<double>(n), options.prior_floor);
    }
    gmm.priors /= gmm.priors.sum();
  };

  double ll = e_step();
  result.log_likelihood.push_back(ll);
  for (int it = 0; it < options.max_iterations; ++it) {
    m_step();
    const double next = e_step();
    result.log_likelihood.push_back(next);
    const bool converged = std::abs(next - ll) < options.tolerance * std::max(std::abs(ll), 1e-12);
    ll = next;
    if (converged) break;
  }
  gmm.means.rowwise() += shift.transpose();
  return result;
}

GmmModel fit_gmm(const Matrix& samples, const GmmOptions& options) {
  return train_gmm(samples, options).model;
}

}  // namespace texbank
