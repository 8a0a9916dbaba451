#include "texbank/learn.hpp"

#include <cmath>

namespace texbank {
namespace {

void require_nonnegative(const Matrix& m, const char* what) {
  if ((m.array() < 0).any())
    throw std::invalid_argument(std::string(what) + " has negative components; chi2 kernels need nonnegative data");
}

Matrix signed_sqrt(const Matrix& m) {
  return m.unaryExpr([](double v) { return std::copysign(std::sqrt(std::abs(v)), v); });
}

double additive_chi2(const double* a, const double* b, Index d) {
  double s = 0.0;
  for (Index i = 0; i < d; ++i) {
    const double den = a[i] + b[i];
    if (den > 0) s += 2.0 * a[i] * b[i] / den;
  }
  return s;
}

double chi2(const double* a, const double* b, Index d) {
  double s = 0.0;
  for (Index i = 0; i < d; ++i) {
    const double den = a[i] + b[i];
    if (den > 0) {
      const double diff = a[i] - b[i];
      s += diff * diff / den;
    }
  }
  return s;
}

}  // namespace

const char* to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::Linear: return "linear";
    case KernelKind::Hellinger: return "hellinger";
    case KernelKind::AdditiveChi2: return "additive_chi2";
    case KernelKind::ExpChi2: return "exp_chi2";
  }
  return "unknown";
}

KernelKind parse_kernel_kind(const std::string& text) {
  for (auto k : {KernelKind::Linear, KernelKind::Hellinger, KernelKind::AdditiveChi2, KernelKind::ExpChi2})
    if (text == to_string(k)) return k;
  throw std::invalid_argument("unknown kernel '" + text + "'");
}

void KernelSpec::validate() const {
  if (kind == KernelKind::ExpChi2) {
    if (!lambda || !(*lambda > 0) || !std::isfinite(*lambda))
      throw std::invalid_argument("exp_chi2 needs a positive lambda");
  } else if (lambda) {
    throw std::invalid_argument("lambda only applies to exp_chi2");
  }
}

double chi2_distance(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("chi2 operands differ in length");
  const Vector va = a;
  const Vector vb = b;
  return chi2(va.data(), vb.data(), va.size());
}

Matrix compute_kernel(const Matrix& x, const Matrix& y, const KernelSpec& spec) {
  spec.validate();
  if (x.cols() != y.cols()) throw std::invalid_argument("kernel operands differ in dimension");
  Matrix k;
  switch (spec.kind) {
    case KernelKind::Linear: k = x * y.transpose(); break;
    case KernelKind::Hellinger: k = signed_sqrt(x) * signed_sqrt(y).transpose(); break;
    case KernelKind::AdditiveChi2:
    case KernelKind::ExpChi2: {
      require_nonnegative(x, "left operand");
      require_nonnegative(y, "right operand");
      k.resize(x.rows(), y.rows());
      const bool expo = spec.kind == KernelKind::ExpChi2;
      for (Index i = 0; i < x.rows(); ++i)
        for (Index j = 0; j < y.rows(); ++j)
          k(i, j) = expo ? std::exp(-*spec.lambda * chi2(x.row(i).data(), y.row(j).data(), x.cols()))
                         : additive_chi2(x.row(i).data(), y.row(j).data(), x.cols());
      break;
    }
  }
  if (spec.normalize) {
    // For a self-kernel use its own diagonal so the result has exact ones there.
    if (&x == &y || (x.rows() == y.rows() && x == y)) {
      const Vector d = k.diagonal();
      k = normalize_kernel(k, d, d);
    } else {
      k = normalize_kernel(k, kernel_diagonal(x, spec), kernel_diagonal(y, spec));
    }
  }
  return k;
}

Vector kernel_diagonal(const Matrix& x, const KernelSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case KernelKind::Linear: return x.rowwise().squaredNorm();
    case KernelKind::Hellinger: return x.cwiseAbs().rowwise().sum();
    case KernelKind::AdditiveChi2: require_nonnegative(x, "operand"); return x.rowwise().sum();
    case KernelKind::ExpChi2: require_nonnegative(x, "operand"); return Vector::Ones(x.rows());
  }
  return {};
}

double estimate_chi2_lambda(const Matrix& x) {
  if (x.rows() < 2) throw std::invalid_argument("lambda estimation needs at least two vectors");
  require_nonnegative(x, "input");
  for (Index i = 0; i < x.rows(); ++i)
    if (std::abs(x.row(i).sum() - 1.0) > 1e-6)
      throw std::invalid_argument("lambda estimation needs L1-normalised rows");
  double total = 0.0;
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = i + 1; j < x.rows(); ++j) total += chi2(x.row(i).data(), x.row(j).data(), x.cols());
  const double pairs = 0.5 * static_cast<double>(x.rows()) * static_cast<double>(x.rows() - 1);
  const double mean = total / pairs;
  if (!(mean > 0)) throw Error("all vectors are identical; mean chi2 distance is zero");
  return 1.0 / mean;
}

Matrix normalize_kernel(const Matrix& kxy, const Vector& diag_x, const Vector& diag_y) {
  if (kxy.rows() != diag_x.size() || kxy.cols() != diag_y.size())
    throw std::invalid_argument("kernel and diagonal sizes differ");
  if ((diag_x.array() <= 0).any() || (diag_y.array() <= 0).any())
    throw std::invalid_argument("kernel normalisation needs a positive diagonal");
  Matrix out(kxy.rows(), kxy.cols());
  for (Index i = 0; i < kxy.rows(); ++i)
    for (Index j = 0; j < kxy.cols(); ++j) out(i, j) = kxy(i, j) / std::sqrt(diag_x[i] * diag_y[j]);
  return out;
}

}  // namespace texbank
