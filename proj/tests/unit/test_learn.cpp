#include "texbank/learn.hpp"

#include "generators.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>
#include <spdlog/sinks/ringbuffer_sink.h>
#include <spdlog/spdlog.h>

#include <Eigen/Eigenvalues>

#include <cmath>

using namespace texbank;
namespace tt = texbank::testing;

namespace {

Matrix rows(std::initializer_list<std::initializer_list<double>> r) {
  Matrix m(static_cast<Index>(r.size()), static_cast<Index>(r.begin()->size()));
  Index i = 0;
  for (const auto& row : r) {
    Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

// Two Gaussian blobs in d dimensions, labels 0/1.
void two_blobs(tt::Rng& rng, Index n_per, Index d, double gap, Matrix& x, std::vector<int>& y) {
  std::normal_distribution<double> g(0.0, 1.0);
  x.resize(2 * n_per, d);
  y.assign(static_cast<std::size_t>(2 * n_per), 0);
  for (Index i = 0; i < 2 * n_per; ++i) {
    const int c = i < n_per ? 0 : 1;
    y[static_cast<std::size_t>(i)] = c;
    for (Index j = 0; j < d; ++j) x(i, j) = g(rng) + (j == 0 ? (c ? gap : -gap) : 0.0);
  }
}

class CapturedLog {
public:
  CapturedLog() : sink_(std::make_shared<spdlog::sinks::ringbuffer_sink_mt>(64)) {
    previous_ = spdlog::default_logger();
    spdlog::set_default_logger(std::make_shared<spdlog::logger>("capture", sink_));
  }
  ~CapturedLog() { spdlog::set_default_logger(previous_); }
  std::size_t warnings() const {
    std::size_t n = 0;
    for (const auto& line : sink_->last_formatted()) n += line.find("warning") != std::string::npos;
    return n;
  }

private:
  std::shared_ptr<spdlog::sinks::ringbuffer_sink_mt> sink_;
  std::shared_ptr<spdlog::logger> previous_;
};

}  // namespace

TEST(Kernels, HandValues) {
  const Matrix a = rows({{0.25, 0.75}});
  const Matrix b = rows({{0.5, 0.5}});
  EXPECT_NEAR(compute_kernel(a, b, {KernelKind::Linear})(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(compute_kernel(a, b, {KernelKind::Hellinger})(0, 0),
              std::sqrt(0.125) + std::sqrt(0.375), 1e-15);
  EXPECT_NEAR(compute_kernel(a, b, {KernelKind::AdditiveChi2})(0, 0), 2 * 0.125 / 0.75 + 2 * 0.375 / 1.25,
              1e-15);
  EXPECT_NEAR(chi2_distance(a.row(0).transpose(), b.row(0).transpose()), 0.0625 / 0.75 + 0.0625 / 1.25, 1e-15);
  KernelSpec e{KernelKind::ExpChi2, 2.0};
  EXPECT_NEAR(compute_kernel(a, b, e)(0, 0), std::exp(-2.0 * (0.0625 / 0.75 + 0.0625 / 1.25)), 1e-15);
}

TEST(Kernels, HellingerSignedSqrt) {
  const Matrix a = rows({{-4.0, 9.0}});
  EXPECT_NEAR(compute_kernel(a, a, {KernelKind::Hellinger})(0, 0), 13.0, 1e-12);
  EXPECT_THROW(compute_kernel(a, a, {KernelKind::AdditiveChi2}), std::invalid_argument);
}

TEST(Kernels, ZeroComponentsSkipped) {
  const Matrix a = rows({{0.0, 1.0}});
  EXPECT_EQ(chi2_distance(a.row(0).transpose(), a.row(0).transpose()), 0.0);
  EXPECT_NEAR(compute_kernel(a, a, {KernelKind::AdditiveChi2})(0, 0), 1.0, 1e-15);
}

TEST(Kernels, SpecValidation) {
  EXPECT_THROW((KernelSpec{KernelKind::ExpChi2}.validate()), std::invalid_argument);
  EXPECT_THROW((KernelSpec{KernelKind::ExpChi2, -1.0}.validate()), std::invalid_argument);
  EXPECT_THROW((KernelSpec{KernelKind::Linear, 1.0}.validate()), std::invalid_argument);
  EXPECT_NO_THROW((KernelSpec{KernelKind::ExpChi2, 0.5}.validate()));
  for (auto k : {KernelKind::Linear, KernelKind::Hellinger, KernelKind::AdditiveChi2, KernelKind::ExpChi2})
    EXPECT_EQ(parse_kernel_kind(to_string(k)), k);
}

TEST(Kernels, RandomGramsArePsdAndSymmetric) {
  tt::Rng rng(1);
  for (auto kind : {KernelKind::Linear, KernelKind::Hellinger, KernelKind::AdditiveChi2, KernelKind::ExpChi2}) {
    const Matrix x = tt::random_nonnegative_rows(rng, 30, 6, true);
    KernelSpec spec{kind};
    if (kind == KernelKind::ExpChi2) spec.lambda = estimate_chi2_lambda(x);
    const Matrix k = compute_kernel(x, x, spec);
    EXPECT_LE((k - k.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-9 * k.trace());
    const Vector diag = kernel_diagonal(x, spec);
    for (Index i = 0; i < 30; ++i) EXPECT_NEAR(diag[i], k(i, i), 1e-12);
  }
}

TEST(Kernels, LambdaIsReciprocalMeanDistance) {
  const Matrix x = rows({{1, 0}, {0, 1}, {0.5, 0.5}});
  // Pairwise chi2: 2, 2/3, 2/3.
  EXPECT_NEAR(estimate_chi2_lambda(x), 1.0 / ((2.0 + 4.0 / 3.0) / 3.0), 1e-12);
  EXPECT_THROW(estimate_chi2_lambda(rows({{1, 0}})), std::invalid_argument);
  EXPECT_THROW(estimate_chi2_lambda(rows({{1, 1}, {0, 1}})), std::invalid_argument);
  EXPECT_THROW(estimate_chi2_lambda(rows({{1, 0}, {1, 0}})), Error);
}

TEST(Kernels, NormalizedDiagonalIsOne) {
  tt::Rng rng(2);
  const Matrix x = tt::random_nonnegative_rows(rng, 12, 5, false) + Matrix::Constant(12, 5, 0.01);
  for (auto kind : {KernelKind::Linear, KernelKind::AdditiveChi2}) {
    const Matrix k = compute_kernel(x, x, {kind, std::nullopt, true});
    for (Index i = 0; i < 12; ++i) EXPECT_EQ(k(i, i), 1.0);
    const Matrix raw = compute_kernel(x, x, {kind});
    const Vector d = raw.diagonal();
    EXPECT_LE((normalize_kernel(raw, d, d) - k).cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_THROW(normalize_kernel(Matrix::Ones(1, 1), Vector::Zero(1), Vector::Ones(1)), std::invalid_argument);
}

TEST(LinearSvm, SeparableFourPoints) {
  const Matrix x = rows({{2, 0}, {3, 1}, {-2, 0}, {-3, -1}});
  const std::vector<int> y{0, 0, 1, 1};
  const auto clf = train_linear_svm_ova(x, y, {.C = 10.0});
  EXPECT_EQ(clf.predict(x), y);
  const auto bin = train_binary_svm(x, std::vector<int>{1, 1, -1, -1}, {.C = 10.0});
  for (Index i = 0; i < 4; ++i) {
    const double m = (i < 2 ? 1 : -1) * (x.row(i).dot(bin.w) + bin.b);
    EXPECT_GE(m, 1.0 - 1e-3);
  }
}

TEST(LinearSvm, MatchesIndependentDualSolver) {
  tt::Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    Matrix x;
    std::vector<int> cls;
    two_blobs(rng, 20, 3, 1.0, x, cls);
    std::vector<int> y(cls.size());
    for (std::size_t i = 0; i < cls.size(); ++i) y[i] = cls[i] ? 1 : -1;
    const double c = 0.5;
    const auto got = train_binary_svm(x, y, {.C = c, .gap_tolerance = 1e-8, .seed = static_cast<std::uint64_t>(trial)});
    const auto ref = tt::svm_dual_oracle(x, y, c);
    EXPECT_LE((got.w - ref.w).norm(), 1e-3 * std::max(1.0, ref.w.norm()));
    EXPECT_NEAR(got.b, ref.b, 1e-3 * std::max(1.0, std::abs(ref.b)));
    EXPECT_LE(got.primal - got.dual, 1e-8 * std::abs(got.primal) + 1e-12);
  }
}

TEST(LinearSvm, DefaultGapAndDeterminism) {
  tt::Rng rng(4);
  Matrix x;
  std::vector<int> cls;
  two_blobs(rng, 50, 4, 0.7, x, cls);
  std::vector<int> y(cls.size());
  for (std::size_t i = 0; i < cls.size(); ++i) y[i] = cls[i] ? 1 : -1;
  const auto a = train_binary_svm(x, y, {.seed = 9});
  const auto b = train_binary_svm(x, y, {.seed = 9});
  EXPECT_EQ(a.w, b.w);
  EXPECT_LE(a.primal - a.dual, 1e-4 * std::abs(a.primal));
  EXPECT_GE(a.alpha.minCoeff(), 0.0);
  EXPECT_LE(a.alpha.maxCoeff(), 1.0);
}

TEST(LinearSvm, RejectsBadLabels) {
  const Matrix x = rows({{1}, {2}});
  EXPECT_THROW(train_linear_svm_ova(x, std::vector<int>{0, 0}), std::invalid_argument);
  EXPECT_THROW(train_linear_svm_ova(x, std::vector<int>{0}), std::invalid_argument);
  EXPECT_THROW(train_binary_svm(x, std::vector<int>{1, 2}, {}), std::invalid_argument);
  EXPECT_THROW(train_linear_svm_ova(x, std::vector<int>{0, 1}, {.C = 0.0}), std::invalid_argument);
}

TEST(LinearSvm, MultilabelMembership) {
  const Matrix x = rows({{1, 0}, {0, 1}, {1, 1}, {-1, -1}});
  Eigen::MatrixXi m(4, 2);
  m << 1, 0, 0, 1, 1, 1, 0, 0;
  const auto clf = train_linear_svm_multilabel(x, m, {.C = 10.0});
  const Matrix s = clf.decision_values(x);
  for (Index i = 0; i < 4; ++i)
    for (Index c = 0; c < 2; ++c) EXPECT_EQ(s(i, c) > 0, m(i, c) == 1) << i << "," << c;
}

TEST(KernelSvm, LinearKernelMatchesLinearSvm) {
  tt::Rng rng(5);
  Matrix x;
  std::vector<int> y;
  two_blobs(rng, 15, 3, 1.2, x, y);
  const SvmOptions opt{.C = 1.0, .gap_tolerance = 1e-9};
  const auto lin = train_linear_svm_ova(x, y, opt);
  const auto ker = train_kernel_svm_ova(compute_kernel(x, x, {}), y, opt);
  const Matrix test = tt::random_matrix(rng, 10, 3, -3, 3);
  const Matrix a = lin.decision_values(test);
  const Matrix b = ker.decision_values_from_kernel(compute_kernel(test, x, {}));
  EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-3);
  EXPECT_EQ(ker.predict_from_kernel(compute_kernel(x, x, {})), lin.predict(x));
}

TEST(KernelSvm, IdentityKernelIsDegenerate) {
  CapturedLog log;
  const auto model = train_kernel_svm_ova(Matrix::Identity(6, 6), std::vector<int>{0, 0, 0, 1, 1, 1});
  EXPECT_TRUE(model.degenerate);
  EXPECT_GE(log.warnings(), 1u);
}

TEST(KernelSvm, RejectsInvalidKernels) {
  const std::vector<int> y{0, 1};
  EXPECT_THROW(train_kernel_svm_ova(Matrix::Ones(2, 3), y), std::invalid_argument);
  EXPECT_THROW(train_kernel_svm_ova(rows({{1, 0.5}, {0.2, 1}}), y), std::invalid_argument);
  EXPECT_THROW(train_kernel_svm_ova(rows({{1, 3}, {3, 1}}), y), std::invalid_argument);
  EXPECT_THROW(train_kernel_svm_ova(Matrix::Identity(3, 3), y), std::invalid_argument);
}

TEST(KernelSvm, ModelEvaluatesItsOwnKernel) {
  tt::Rng rng(6);
  const Matrix x = tt::random_nonnegative_rows(rng, 20, 4, true);
  std::vector<int> y(20);
  for (int i = 0; i < 20; ++i) y[i] = x(i, 0) > x(i, 1) ? 1 : 0;
  if (std::count(y.begin(), y.end(), 1) == 0 || std::count(y.begin(), y.end(), 0) == 0) GTEST_SKIP();
  const KernelSpec spec{KernelKind::AdditiveChi2};
  auto model = train_kernel_svm_ova(compute_kernel(x, x, spec), y, {}, spec);
  model.training = x;
  EXPECT_LE((model.decision_values(x) - model.decision_values_from_kernel(compute_kernel(x, x, spec)))
                .cwiseAbs()
                .maxCoeff(),
            1e-12);
}

TEST(Recalibrate, ScaledScoresMapToUnitMedians) {
  LinearClassifier clf;
  clf.weights = rows({{5.0}, {-5.0}});
  clf.bias = Vector::Zero(2);
  const Matrix x = rows({{1}, {2}, {3}, {-1}, {-2}, {-3}});
  const std::vector<int> y{0, 0, 0, 1, 1, 1};
  const auto r = recalibrate(clf, x, y);
  const Matrix s = r.decision_values(x);
  std::vector<double> pos, neg;
  for (Index i = 0; i < 6; ++i) (y[i] == 0 ? pos : neg).push_back(s(i, 0));
  EXPECT_NEAR(median(pos), 1.0, 1e-12);
  EXPECT_NEAR(median(neg), -1.0, 1e-12);
  EXPECT_EQ(r.predict(x), clf.predict(x));
}

TEST(Recalibrate, InvertedClassLeftAlone) {
  CapturedLog log;
  LinearClassifier clf;
  clf.weights = rows({{-1.0}, {1.0}});
  clf.bias = Vector::Zero(2);
  const Matrix x = rows({{1}, {2}, {-1}, {-2}});
  const auto r = recalibrate(clf, x, std::vector<int>{0, 0, 1, 1});
  EXPECT_EQ(r.weights.row(0), clf.weights.row(0));
  EXPECT_GE(log.warnings(), 1u);
}

TEST(Median, EvenAndOdd) {
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 3, 2}), 2.5);
  EXPECT_THROW(median({}), std::invalid_argument);
}

TEST(Platt, SeparableScoresGiveConfidentProbabilities) {
  std::vector<double> s;
  std::vector<int> y;
  for (int i = 0; i < 200; ++i) {
    s.push_back(1.0 + 0.01 * i);
    y.push_back(1);
    s.push_back(-1.0 - 0.01 * i);
    y.push_back(-1);
  }
  const auto p = platt_calibrate(s, y);
  EXPECT_LT(p.A, 0.0);
  EXPECT_GE(p.probability(2.0), 0.99);
  EXPECT_LE(p.probability(-2.0), 0.01);
}

TEST(Platt, MonotoneAndMatchesLabelConventions) {
  tt::Rng rng(7);
  std::normal_distribution<double> g(0, 1);
  std::vector<double> s;
  std::vector<int> pm, zo;
  for (int i = 0; i < 300; ++i) {
    const int lab = i % 2;
    s.push_back(g(rng) + (lab ? 1.0 : -1.0));
    pm.push_back(lab ? 1 : -1);
    zo.push_back(lab);
  }
  const auto a = platt_calibrate(s, pm);
  const auto b = platt_calibrate(s, zo);
  EXPECT_EQ(a.A, b.A);
  EXPECT_EQ(a.B, b.B);
  EXPECT_LT(a.probability(-1.0), a.probability(0.0));
  EXPECT_LT(a.probability(0.0), a.probability(1.0));
}

TEST(Platt, FitIsStationary) {
  // Gradient of the smoothed-target log loss vanishes at the fit.
  tt::Rng rng(8);
  std::normal_distribution<double> g(0, 1);
  std::vector<double> s;
  std::vector<int> y;
  for (int i = 0; i < 100; ++i) {
    s.push_back(g(rng) + (i % 3 == 0 ? 0.8 : -0.5));
    y.push_back(i % 3 == 0 ? 1 : -1);
  }
  const auto p = platt_calibrate(s, y);
  const double np = 34, nn = 66;
  double ga = 0, gb = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double t = y[i] == 1 ? (np + 1) / (np + 2) : 1 / (nn + 2);
    const double q = p.probability(s[i]);
    ga += (t - q) * s[i];
    gb += t - q;
  }
  EXPECT_NEAR(ga, 0.0, 1e-4);
  EXPECT_NEAR(gb, 0.0, 1e-4);
}

TEST(Platt, Errors) {
  EXPECT_THROW(platt_calibrate(std::vector<double>{1, 2}, std::vector<int>{1, 1}), std::invalid_argument);
  EXPECT_THROW(platt_calibrate(std::vector<double>{1, 1}, std::vector<int>{1, -1}), Error);
  EXPECT_THROW(platt_calibrate(std::vector<double>{1}, std::vector<int>{1, -1}), std::invalid_argument);
}

TEST(Sigmoid, StableAtExtremes) {
  EXPECT_EQ(sigmoid(0.0), 0.5);
  EXPECT_EQ(sigmoid(-1000.0), 0.0);
  EXPECT_EQ(sigmoid(1000.0), 1.0);
  EXPECT_NEAR(sigmoid(2.0) + sigmoid(-2.0), 1.0, 1e-15);
}
