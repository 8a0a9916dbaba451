#pragma once

#include "texbank/types.hpp"

#include <cstdint>
#include <vector>

namespace texbank {

/// y = diag(eigenvalues)^(-1/2) * basis^T * (f - mean)
struct PcaWhitener {
  Vector mean;
  Matrix basis;        // D x D', orthonormal columns
  Vector eigenvalues;  // D', descending, floored

  Index input_dim() const { return mean.size(); }
  Index output_dim() const { return basis.cols(); }
  Matrix transform(const Matrix& samples) const;
};

/// Sample covariance uses 1/n. Eigenvalues below 1e-10 times the largest are
/// raised to that floor.
PcaWhitener fit_pca_whitener(const Matrix& samples, Index target_dim);

struct Codebook {
  Matrix centers;  // K x D

  Index size() const { return centers.rows(); }
  Index dim() const { return centers.cols(); }
};

/// Index of the nearest center, lowest index on ties.
Index nearest_center(const Codebook& codebook, const Eigen::Ref<const Vector>& f);

struct KmeansOptions {
  Index clusters = 4096;
  int max_iterations = 100;
  std::uint64_t seed = 0;
};

struct KmeansResult {
  Codebook codebook;
  std::vector<Index> assignment;
  std::vector<double> objective;  // sum of squared distances, per iteration
};

/// k-means++ seeding followed by Lloyd iterations. Empty clusters are reseeded
/// from the point farthest from its center.
KmeansResult train_kmeans(const Matrix& samples, const KmeansOptions& options);
Codebook kmeans(const Matrix& samples, const KmeansOptions& options);

struct GmmModel {
  Vector priors;     // K
  Matrix means;      // K x D
  Matrix variances;  // K x D, diagonal covariances

  Index size() const { return priors.size(); }
  Index dim() const { return means.cols(); }
};

struct GmmOptions {
  Index components = 256;
  int max_iterations = 100;
  double tolerance = 1e-6;  // relative change of the mean log-likelihood
  double variance_floor_factor = 1e-4;
  double prior_floor = 1e-6;
  std::uint64_t seed = 0;
};

struct GmmResult {
  GmmModel model;
  std::vector<double> log_likelihood;  // mean per sample, after each EM step
  double variance_floor = 0.0;
};

/// EM for a diagonal-covariance mixture, initialised from k-means.
GmmResult train_gmm(const Matrix& samples, const GmmOptions& options);
GmmModel fit_gmm(const Matrix& samples, const GmmOptions& options);

/// Posterior responsibilities of every component, computed in log space.
Vector gmm_posteriors(const GmmModel& gmm, const Eigen::Ref<const Vector>& f);

/// log p(f) under the mixture.
double gmm_log_density(const GmmModel& gmm, const Eigen::Ref<const Vector>& f);

/// Mean log-likelihood of the rows of samples.
double gmm_mean_log_likelihood(const GmmModel& gmm, const Matrix& samples);

}  // namespace texbank
