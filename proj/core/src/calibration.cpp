#include "texbank/learn.hpp"

#include <algorithm>
#include <cmath>

namespace texbank {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double CalibrationParams::probability(double score) const { return sigmoid(-(A * score + B)); }

// Newton's method with backtracking on Platt's smoothed-target likelihood,
// following the numerically careful formulation of Lin, Lin and Weng.
CalibrationParams platt_calibrate(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("score and label counts differ");
  const std::size_t n = scores.size();
  double prior1 = 0;
  double prior0 = 0;
  for (int l : labels) {
    if (l == 1) ++prior1;
    else if (l == -1 || l == 0) ++prior0;
    else throw std::invalid_argument("calibration labels must be +1/-1 or 1/0");
  }
  if (prior1 == 0 || prior0 == 0) throw std::invalid_argument("calibration needs both positive and negative labels");
  for (double s : scores)
    if (!std::isfinite(s)) throw std::invalid_argument("non-finite calibration score");
  if (std::all_of(scores.begin(), scores.end(), [&](double s) { return s == scores[0]; }))
    throw Error("all calibration scores are equal");

  const double hi = (prior1 + 1.0) / (prior1 + 2.0);
  const double lo = 1.0 / (prior0 + 2.0);
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = labels[i] == 1 ? hi : lo;

  constexpr int kMaxIterations = 100;
  constexpr double kMinStep = 1e-10;
  constexpr double kSigma = 1e-12;
  constexpr double kEps = 1e-5;

  double a = 0.0;
  double b = std::log((prior0 + 1.0) / (prior1 + 1.0));
  auto objective = [&](double aa, double bb) {
    double f = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double fapb = scores[i] * aa + bb;
      f += fapb >= 0 ? t[i] * fapb + std::log1p(std::exp(-fapb))
                     : (t[i] - 1.0) * fapb + std::log1p(std::exp(fapb));
    }
    return f;
  };
  double fval = objective(a, b);

  for (int it = 0; it < kMaxIterations; ++it) {
    double h11 = kSigma;
    double h22 = kSigma;
    double h21 = 0.0;
    double g1 = 0.0;
    double g2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double fapb = scores[i] * a + b;
      double p;
      double q;
      if (fapb >= 0) {
        const double e = std::exp(-fapb);
        p = e / (1.0 + e);
        q = 1.0 / (1.0 + e);
      } else {
        const double e = std::exp(fapb);
        p = 1.0 / (1.0 + e);
        q = e / (1.0 + e);
      }
      const double d2 = p * q;
      h11 += scores[i] * scores[i] * d2;
      h22 += d2;
      h21 += scores[i] * d2;
      const double d1 = t[i] - p;
      g1 += scores[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < kEps && std::abs(g2) < kEps) break;

    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;
    double step = 1.0;
    bool moved = false;
    while (step >= kMinStep) {
      const double na = a + step * da;
      const double nb = b + step * db;
      const double nf = objective(na, nb);
      if (nf < fval + 1e-4 * step * gd) {
        a = na;
        b = nb;
        fval = nf;
        moved = true;
        break;
      }
      step /= 2.0;
    }
    if (!moved) break;  // line search failed
  }
  return {a, b};
}

}  // namespace texbank
