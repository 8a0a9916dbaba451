#include "texbank/learn.hpp"

#include <Eigen/Eigenvalues>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace texbank {
namespace {

void check_options(const SvmOptions& o) {
  if (!(o.C > 0) || !std::isfinite(o.C)) throw std::invalid_argument("SVM C must be positive");
  if (!(o.gap_tolerance > 0)) throw std::invalid_argument("SVM gap tolerance must be positive");
  if (o.max_passes < 1) throw std::invalid_argument("SVM needs at least one pass");
}

void check_binary_labels(std::span<const int> y, Index n) {
  if (static_cast<Index>(y.size()) != n) throw std::invalid_argument("label count does not match sample count");
  for (int v : y)
    if (v != 1 && v != -1) throw std::invalid_argument("binary SVM labels must be +1 or -1");
}

Index count_classes(std::span<const int> labels, const std::vector<std::string>& names) {
  if (labels.empty()) throw std::invalid_argument("no training labels");
  int top = -1;
  for (int l : labels) {
    if (l < 0) throw std::invalid_argument("class labels must be nonnegative");
    top = std::max(top, l);
  }
  Index classes = top + 1;
  if (!names.empty()) {
    if (static_cast<Index>(names.size()) < classes) throw std::invalid_argument("fewer class names than labels");
    classes = static_cast<Index>(names.size());
  }
  if (classes < 2) throw std::invalid_argument("one-vs-all training needs at least two classes");
  std::vector<bool> seen(static_cast<std::size_t>(classes), false);
  for (int l : labels) seen[l] = true;
  for (Index c = 0; c < classes; ++c)
    if (!seen[c]) throw std::invalid_argument("class " + std::to_string(c) + " has no training example");
  return classes;
}

std::vector<std::string> default_names(std::vector<std::string> names, Index classes) {
  if (names.empty())
    for (Index c = 0; c < classes; ++c) names.push_back(std::to_string(c));
  return names;
}

// Dual coordinate descent for the hinge loss. The problem is described by a
// callback that returns the margin y_i f(x_i) of the current iterate and a
// callback that applies alpha_i += delta.
struct DualCdState {
  Vector alpha;
  std::int64_t passes = 0;
  double primal = 0.0;
  double dual = 0.0;
};

template <class Margin, class Update, class NormSq>
DualCdState dual_coordinate_descent(Index n, const Vector& qdiag, const SvmOptions& o, Margin margin,
                                    Update update, NormSq half_norm_sq) {
  DualCdState s;
  s.alpha = Vector::Zero(n);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::mt19937_64 rng(o.seed);
  for (s.passes = 1; s.passes <= o.max_passes; ++s.passes) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Index i : order) {
      if (qdiag[i] <= 0) continue;
      const double g = margin(i) - 1.0;
      const double a = s.alpha[i];
      const double next = std::clamp(a - g / qdiag[i], 0.0, o.C);
      if (next != a) {
        update(i, next - a);
        s.alpha[i] = next;
      }
    }
    const double reg = half_norm_sq();
    double loss = 0.0;
    for (Index i = 0; i < n; ++i) loss += std::max(0.0, 1.0 - margin(i));
    s.primal = reg + o.C * loss;
    s.dual = s.alpha.sum() - reg;
    if (s.primal - s.dual <= o.gap_tolerance * std::abs(s.primal)) break;
  }
  s.passes = std::min(s.passes, o.max_passes);
  return s;
}

}  // namespace

Matrix LinearClassifier::decision_values(const Matrix& x) const {
  if (x.cols() != dim()) throw std::invalid_argument("feature dimension does not match classifier");
  Matrix s = x * weights.transpose();
  s.rowwise() += bias.transpose();
  return s;
}

std::vector<int> LinearClassifier::predict(const Matrix& x) const {
  const Matrix s = decision_values(x);
  std::vector<int> out(static_cast<std::size_t>(s.rows()));
  for (Index i = 0; i < s.rows(); ++i) {
    Index best = 0;
    s.row(i).maxCoeff(&best);
    out[i] = static_cast<int>(best);
  }
  return out;
}

BinarySvm train_binary_svm(const Matrix& x, std::span<const int> y, const SvmOptions& options) {
  check_options(options);
  check_binary_labels(y, x.rows());
  const Index n = x.rows();
  const Index d = x.cols();
  // Augmented weight (w, b) for features (x, 1).
  Vector w = Vector::Zero(d + 1);
  Vector qdiag = (x.rowwise().squaredNorm().array() + 1.0).matrix();
  auto margin = [&](Index i) { return y[i] * (x.row(i).dot(w.head(d)) + w[d]); };
  auto update = [&](Index i, double delta) {
    w.head(d) += (delta * y[i]) * x.row(i).transpose();
    w[d] += delta * y[i];
  };
  auto half_norm_sq = [&] { return 0.5 * w.squaredNorm(); };
  auto state = dual_coordinate_descent(n, qdiag, options, margin, update, half_norm_sq);

  BinarySvm out;
  out.w = w.head(d);
  out.b = w[d];
  out.alpha = std::move(state.alpha);
  out.passes = state.passes;
  out.primal = state.primal;
  out.dual = state.dual;
  return out;
}

LinearClassifier train_linear_svm_ova(const Matrix& x, std::span<const int> labels,
                                      const SvmOptions& options, std::vector<std::string> names) {
  if (static_cast<Index>(labels.size()) != x.rows())
    throw std::invalid_argument("label count does not match sample count");
  const Index classes = count_classes(labels, names);
  Eigen::MatrixXi membership = Eigen::MatrixXi::Zero(x.rows(), classes);
  for (Index i = 0; i < x.rows(); ++i) membership(i, labels[i]) = 1;
  return train_linear_svm_multilabel(x, membership, options, default_names(std::move(names), classes));
}

LinearClassifier train_linear_svm_multilabel(const Matrix& x, const Eigen::MatrixXi& membership,
                                             const SvmOptions& options, std::vector<std::string> names) {
  if (membership.rows() != x.rows()) throw std::invalid_argument("membership rows do not match sample count");
  if (x.rows() == 0) throw std::invalid_argument("no training samples");
  const Index classes = membership.cols();
  if (classes < 1) throw std::invalid_argument("no classes");
  names = default_names(std::move(names), classes);
  if (static_cast<Index>(names.size()) != classes) throw std::invalid_argument("class name count mismatch");

  LinearClassifier clf;
  clf.weights.resize(classes, x.cols());
  clf.bias.resize(classes);
  clf.labels = std::move(names);
  std::vector<int> y(static_cast<std::size_t>(x.rows()));
  for (Index c = 0; c < classes; ++c) {
    for (Index i = 0; i < x.rows(); ++i) y[i] = membership(i, c) != 0 ? 1 : -1;
    const auto svm = train_binary_svm(x, y, options);
    if (svm.passes >= options.max_passes)
      spdlog::warn("SVM for class '{}' stopped at the pass limit before reaching the gap tolerance",
                   clf.labels[c]);
    clf.weights.row(c) = svm.w.transpose();
    clf.bias[c] = svm.b;
  }
  return clf;
}

Matrix KernelModel::decision_values_from_kernel(const Matrix& k_test_train) const {
  if (k_test_train.cols() != dual.cols())
    throw std::invalid_argument("kernel columns do not match the number of training samples");
  Matrix s = k_test_train * dual.transpose();
  s.rowwise() += bias.transpose();
  return s;
}

Matrix KernelModel::decision_values(const Matrix& x) const {
  if (training.rows() == 0) throw std::invalid_argument("kernel model has no stored training vectors");
  return decision_values_from_kernel(compute_kernel(x, training, spec));
}

std::vector<int> KernelModel::predict_from_kernel(const Matrix& k_test_train) const {
  const Matrix s = decision_values_from_kernel(k_test_train);
  std::vector<int> out(static_cast<std::size_t>(s.rows()));
  for (Index i = 0; i < s.rows(); ++i) {
    Index best = 0;
    s.row(i).maxCoeff(&best);
    out[i] = static_cast<int>(best);
  }
  return out;
}

KernelModel train_kernel_svm_ova(const Matrix& kernel, std::span<const int> labels,
                                 const SvmOptions& options, KernelSpec spec,
                                 std::vector<std::string> names) {
  check_options(options);
  const Index n = kernel.rows();
  if (kernel.cols() != n) throw std::invalid_argument("precomputed kernel must be square");
  if (static_cast<Index>(labels.size()) != n) throw std::invalid_argument("label count does not match kernel size");
  if (!kernel.allFinite()) throw std::invalid_argument("kernel has non-finite entries");
  const double scale = std::max(kernel.cwiseAbs().maxCoeff(), 1e-300);
  if ((kernel - kernel.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
    throw std::invalid_argument("precomputed kernel is not symmetric");
  const double trace = kernel.trace();
  {
    const Matrix sym = 0.5 * (kernel + kernel.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues()[0] < -1e-6 * std::abs(trace) / static_cast<double>(n))
      throw std::invalid_argument("precomputed kernel is not positive semidefinite");
  }
  const Index classes = count_classes(labels, names);

  KernelModel model;
  model.spec = std::move(spec);
  model.labels = default_names(std::move(names), classes);
  model.dual = Matrix::Zero(classes, n);
  model.bias = Vector::Zero(classes);
  const Matrix off = kernel - Matrix(kernel.diagonal().asDiagonal());
  model.degenerate = off.cwiseAbs().maxCoeff() <= 1e-12 * scale;
  if (model.degenerate)
    spdlog::warn("precomputed kernel is diagonal; the SVM can only separate training points by their bias");

  const Vector qdiag = (kernel.diagonal().array() + 1.0).matrix();
  std::vector<int> y(static_cast<std::size_t>(n));
  for (Index c = 0; c < classes; ++c) {
    for (Index i = 0; i < n; ++i) y[i] = labels[i] == c ? 1 : -1;
    // f = (K + 1) (alpha .* y), kept up to date with every coordinate step.
    Vector f = Vector::Zero(n);
    Vector ay = Vector::Zero(n);
    auto margin = [&](Index i) { return y[i] * f[i]; };
    auto update = [&](Index i, double delta) {
      const double step = delta * y[i];
      ay[i] += step;
      f += step * (kernel.col(i).array() + 1.0).matrix();
    };
    auto half_norm_sq = [&] { return 0.5 * ay.dot(f); };
    const auto state = dual_coordinate_descent(n, qdiag, options, margin, update, half_norm_sq);
    if (state.passes >= options.max_passes)
      spdlog::warn("kernel SVM for class '{}' stopped at the pass limit", model.labels[c]);
    model.dual.row(c) = ay.transpose();
    model.bias[c] = ay.sum();
  }
  return model;
}

namespace {

std::string class_name(const std::vector<std::string>& labels, Index c) {
  return c < static_cast<Index>(labels.size()) ? labels[c] : std::to_string(c);
}

}  // namespace

LinearClassifier recalibrate(const LinearClassifier& clf, const Matrix& x, std::span<const int> labels) {
  if (static_cast<Index>(labels.size()) != x.rows())
    throw std::invalid_argument("label count does not match sample count");
  LinearClassifier out = clf;
  const Matrix scores = clf.decision_values(x);
  for (Index c = 0; c < clf.classes(); ++c) {
    std::vector<double> pos;
    std::vector<double> neg;
    for (Index i = 0; i < x.rows(); ++i) (labels[i] == c ? pos : neg).push_back(scores(i, c));
    if (pos.empty() || neg.empty()) {
      spdlog::warn("class '{}' lacks positive or negative training scores; not recalibrated", class_name(clf.labels, c));
      continue;
    }
    const double mp = median(pos);
    const double mn = median(neg);
    if (!(mp > mn)) {
      spdlog::warn("class '{}' has positive median {} <= negative median {}; not recalibrated",
                   class_name(clf.labels, c), mp, mn);
      continue;
    }
    const double a = 2.0 / (mp - mn);
    out.weights.row(c) = a * clf.weights.row(c);
    out.bias[c] = a * (clf.bias[c] - mn) - 1.0;
  }
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty set");
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2);
  std::nth_element(values.begin(), mid, values.end());
  const double upper = *mid;
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), mid);
  return 0.5 * (lower + upper);
}

}  // namespace texbank
