#include "texbank/metrics.hpp"

#include "texbank/types.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>

namespace texbank {
namespace {

void check_same_size(int w1, int h1, int w2, int h2) {
  if (w1 != w2 || h1 != h2) throw std::invalid_argument("label maps differ in size");
}

double plug_in_entropy(const std::map<long long, double>& counts, double n) {
  double h = 0.0;
  for (const auto& [key, c] : counts) {
    if (c <= 0) continue;
    const double p = c / n;
    h -= p * std::log(p);
  }
  return h;
}

}  // namespace

PixelLabelMap PixelLabelMap::filled(int width, int height, Label value) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("label map size must be positive");
  return {width, height, std::vector<Label>(static_cast<std::size_t>(width) * height, value)};
}

ClassAccuracy per_class_accuracy(std::span<const int> truth, std::span<const int> predicted, int classes) {
  if (truth.size() != predicted.size()) throw std::invalid_argument("truth and prediction counts differ");
  if (classes < 1) throw std::invalid_argument("class count must be positive");
  std::vector<double> total(static_cast<std::size_t>(classes), 0.0);
  std::vector<double> correct(static_cast<std::size_t>(classes), 0.0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= classes) throw std::invalid_argument("ground-truth label out of range");
    total[truth[i]] += 1;
    if (predicted[i] == truth[i]) correct[truth[i]] += 1;
  }
  ClassAccuracy out;
  out.per_class.resize(static_cast<std::size_t>(classes));
  for (int c = 0; c < classes; ++c) {
    if (total[c] == 0) throw Error("class " + std::to_string(c) + " has no ground-truth items");
    out.per_class[c] = correct[c] / total[c];
  }
  out.mean = std::accumulate(out.per_class.begin(), out.per_class.end(), 0.0) / classes;
  return out;
}

const char* to_string(ApVariant variant) {
  return variant == ApVariant::Pascal08 ? "pascal08" : "eleven_point";
}

double average_precision(std::span<const double> scores, std::span<const std::uint8_t> positives,
                         ApVariant variant) {
  if (scores.size() != positives.size()) throw std::invalid_argument("score and flag counts differ");
  const std::size_t n = scores.size();
  const auto total_pos = std::count_if(positives.begin(), positives.end(), [](auto p) { return p != 0; });
  if (total_pos == 0) throw Error("average precision needs at least one positive");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::vector<double> precision(n);
  std::vector<double> recall(n);
  double tp = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (positives[order[r]]) tp += 1;
    precision[r] = tp / static_cast<double>(r + 1);
    recall[r] = tp / static_cast<double>(total_pos);
  }
  // Precision envelope: best precision at this rank or any later one.
  std::vector<double> envelope(precision);
  for (std::size_t r = n; r-- > 1;) envelope[r - 1] = std::max(envelope[r - 1], envelope[r]);

  if (variant == ApVariant::Pascal08) {
    double sum = 0.0;
    for (std::size_t r = 0; r < n; ++r)
      if (positives[order[r]]) sum += envelope[r];
    return sum / static_cast<double>(total_pos);
  }
  double sum = 0.0;
  for (int i = 0; i <= 10; ++i) {
    const double level = i / 10.0;
    double best = 0.0;
    for (std::size_t r = 0; r < n; ++r)
      if (recall[r] >= level - 1e-12) {
        best = envelope[r];
        break;
      }
    sum += best;
  }
  return sum / 11.0;
}

std::vector<double> pixel_class_recall(const PixelLabelMap& predicted, const PixelLabelMap& truth) {
  check_same_size(predicted.width, predicted.height, truth.width, truth.height);
  Label top = 0;
  for (Label l : truth.labels) top = std::max(top, l);
  std::vector<double> total(static_cast<std::size_t>(top) + 1, 0.0);
  std::vector<double> correct(total.size(), 0.0);
  for (std::size_t i = 0; i < truth.labels.size(); ++i) {
    const Label g = truth.labels[i];
    if (g == 0) continue;
    total[g] += 1;
    if (predicted.labels[i] == g) correct[g] += 1;
  }
  std::vector<double> recall(total.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t c = 1; c < total.size(); ++c)
    if (total[c] > 0) recall[c] = correct[c] / total[c];
  return recall;
}

double pixel_accuracy(const PixelLabelMap& predicted, const PixelLabelMap& truth, bool normalize_per_class) {
  check_same_size(predicted.width, predicted.height, truth.width, truth.height);
  if (normalize_per_class) {
    const auto recall = pixel_class_recall(predicted, truth);
    double sum = 0.0;
    int present = 0;
    for (double r : recall)
      if (!std::isnan(r)) {
        sum += r;
        ++present;
      }
    if (present == 0) throw Error("ground truth has no labelled pixels");
    return sum / present;
  }
  double labelled = 0;
  double correct = 0;
  for (std::size_t i = 0; i < truth.labels.size(); ++i) {
    if (truth.labels[i] == 0) continue;
    labelled += 1;
    if (predicted.labels[i] == truth.labels[i]) correct += 1;
  }
  if (labelled == 0) throw Error("ground truth has no labelled pixels");
  return correct / labelled;
}

double osa_pixel_accuracy(const PixelLabelMap& predicted, const MultiLabelMap& truth) {
  check_same_size(predicted.width, predicted.height, truth.width, truth.height);
  if (truth.labels.size() != predicted.labels.size()) throw std::invalid_argument("label map storage mismatch");
  double labelled = 0;
  double correct = 0;
  for (std::size_t i = 0; i < truth.labels.size(); ++i) {
    const auto& set = truth.labels[i];
    if (set.empty()) continue;
    labelled += 1;
    if (std::find(set.begin(), set.end(), predicted.labels[i]) != set.end()) correct += 1;
  }
  if (labelled == 0) throw Error("ground truth has no labelled pixels");
  return correct / labelled;
}

double entropy(std::span<const int> values) {
  if (values.empty()) throw std::invalid_argument("entropy of an empty sample");
  std::map<long long, double> counts;
  for (int v : values) counts[v] += 1;
  return plug_in_entropy(counts, static_cast<double>(values.size()));
}

double mutual_information(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw std::invalid_argument("paired samples differ in length");
  if (a.empty()) throw std::invalid_argument("mutual information of an empty sample");
  const double n = static_cast<double>(a.size());
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> pa;
  std::map<int, double> pb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1;
    pa[a[i]] += 1;
    pb[b[i]] += 1;
  }
  double mi = 0.0;
  for (const auto& [key, c] : joint) {
    const double pxy = c / n;
    mi += pxy * std::log(c * n / (pa[key.first] * pb[key.second]));
  }
  return std::max(mi, 0.0);
}

InformationRatios mutual_information_reduction(std::span<const int> attribute, std::span<const int> category) {
  for (int v : attribute)
    if (v != 0 && v != 1) throw std::invalid_argument("attribute samples must be 0 or 1");
  const double ha = entropy(attribute);
  const double hc = entropy(category);
  if (ha <= 0) throw Error("attribute is constant; its entropy is zero");
  if (hc <= 0) throw Error("category is constant; its entropy is zero");
  InformationRatios r;
  r.mutual_information = mutual_information(attribute, category);
  r.over_category_entropy = std::clamp(r.mutual_information / hc, 0.0, 1.0);
  r.over_attribute_entropy = std::clamp(r.mutual_information / ha, 0.0, 1.0);
  return r;
}

void write_report_csv(std::ostream& out, const std::vector<ReportRow>& rows) {
  const auto old_precision = out.precision();
  out << std::setprecision(12);
  out << "metric,per_class,aggregate\n";
  for (const auto& row : rows) {
    if (row.metric.find_first_of(",\"\n") != std::string::npos)
      throw std::invalid_argument("metric name must not contain separators");
    out << row.metric << ',';
    for (std::size_t i = 0; i < row.per_class.size(); ++i) out << (i ? ";" : "") << row.per_class[i];
    out << ',' << row.aggregate << '\n';
  }
  out.precision(old_precision);
}

}  // namespace texbank
