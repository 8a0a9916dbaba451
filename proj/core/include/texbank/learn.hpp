#pragma once

#include "texbank/types.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace texbank {

enum class KernelKind : std::uint32_t { Linear = 0, Hellinger = 1, AdditiveChi2 = 2, ExpChi2 = 3 };

const char* to_string(KernelKind kind);
KernelKind parse_kernel_kind(const std::string& text);

struct KernelSpec {
  KernelKind kind = KernelKind::Linear;
  std::optional<double> lambda;  // exp-chi2 only
  bool normalize = false;

  /// Throws std::invalid_argument unless lambda is set (and positive) exactly
  /// when kind is ExpChi2.
  void validate() const;
};

/// Gram matrix between the rows of x and the rows of y. Hellinger uses the
/// signed square root embedding, so it also accepts signed data; the chi2
/// kinds reject negative components.
Matrix compute_kernel(const Matrix& x, const Matrix& y, const KernelSpec& spec);

/// k(x_i, x_i) for every row.
Vector kernel_diagonal(const Matrix& x, const KernelSpec& spec);

/// sum_i (a_i - b_i)^2 / (a_i + b_i), terms with a_i + b_i = 0 skipped.
double chi2_distance(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b);

/// Reciprocal of the mean off-diagonal chi2 distance. Rows must be
/// nonnegative and sum to one.
double estimate_chi2_lambda(const Matrix& x);

/// K'(i, j) = K(i, j) / sqrt(diag_x(i) * diag_y(j)).
Matrix normalize_kernel(const Matrix& kxy, const Vector& diag_x, const Vector& diag_y);

struct SvmOptions {
  double C = 1.0;
  double gap_tolerance = 1e-4;  // relative to the primal objective
  std::int64_t max_passes = 1'000'000;
  std::uint64_t seed = 0;
};

/// One-vs-all linear classifier, score_c(x) = <w_c, x> + b_c.
struct LinearClassifier {
  Matrix weights;  // classes x d
  Vector bias;     // classes
  std::vector<std::string> labels;

  Index classes() const { return weights.rows(); }
  Index dim() const { return weights.cols(); }
  Matrix decision_values(const Matrix& x) const;  // n x classes
  std::vector<int> predict(const Matrix& x) const;
};

struct BinarySvm {
  Vector w;
  double b = 0.0;
  Vector alpha;
  std::int64_t passes = 0;
  double primal = 0.0;
  double dual = 0.0;
};

/// Hinge-loss SVM, bias handled as an extra unit feature, solved by dual
/// coordinate descent. y must be +1/-1.
BinarySvm train_binary_svm(const Matrix& x, std::span<const int> y, const SvmOptions& options);

/// labels hold class indices in [0, classes).
LinearClassifier train_linear_svm_ova(const Matrix& x, std::span<const int> labels,
                                      const SvmOptions& options = {},
                                      std::vector<std::string> names = {});

/// One-vs-all on a binary membership matrix (n x classes, nonzero = positive),
/// for multi-label data.
LinearClassifier train_linear_svm_multilabel(const Matrix& x, const Eigen::MatrixXi& membership,
                                             const SvmOptions& options = {},
                                             std::vector<std::string> names = {});

/// Dual one-vs-all SVM over a precomputed kernel.
struct KernelModel {
  Matrix dual;       // classes x n_train, alpha_i * y_i, zero off the support
  Vector bias;
  KernelSpec spec;
  Matrix training;   // rows used to evaluate the kernel at test time; may be empty
  std::vector<std::string> labels;
  bool degenerate = false;

  Index classes() const { return dual.rows(); }
  /// Scores from a kernel between test rows and training rows.
  Matrix decision_values_from_kernel(const Matrix& k_test_train) const;
  /// Requires `training`.
  Matrix decision_values(const Matrix& x) const;
  std::vector<int> predict_from_kernel(const Matrix& k_test_train) const;
};

/// Rejects non-square or asymmetric kernels and kernels whose smallest
/// eigenvalue is below -1e-6 * trace / n.
KernelModel train_kernel_svm_ova(const Matrix& kernel, std::span<const int> labels,
                                 const SvmOptions& options = {}, KernelSpec spec = {},
                                 std::vector<std::string> names = {});

/// Rescales each class so the median positive and negative training scores
/// become +1 and -1. Classes whose positive median does not exceed the
/// negative median are left unchanged with a warning.
LinearClassifier recalibrate(const LinearClassifier& clf, const Matrix& x,
                             std::span<const int> labels);

/// Platt sigmoid p(s) = 1 / (1 + exp(A s + B)).
struct CalibrationParams {
  double A = 0.0;
  double B = 0.0;

  double probability(double score) const;
};

/// Newton fit with Platt's smoothed targets. Labels are +1/-1 (or 1/0).
CalibrationParams platt_calibrate(std::span<const double> scores, std::span<const int> labels);

double sigmoid(double z);
double median(std::vector<double> values);

}  // namespace texbank
