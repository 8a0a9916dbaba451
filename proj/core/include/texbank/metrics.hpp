#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace texbank {

struct ClassAccuracy {
  double mean = 0.0;
  std::vector<double> per_class;  // recall of each class
};

/// Mean over classes of per-class recall. Every class in [0, classes) must
/// occur in the ground truth.
ClassAccuracy per_class_accuracy(std::span<const int> truth, std::span<const int> predicted,
                                 int classes);

enum class ApVariant { Pascal08, ElevenPoint };

const char* to_string(ApVariant variant);

/// Ties in score keep their input order. Throws when there are no positives.
double average_precision(std::span<const double> scores, std::span<const std::uint8_t> positives,
                         ApVariant variant = ApVariant::Pascal08);

using Label = std::uint16_t;

/// Per-pixel labels; 0 means unlabelled in ground truth.
struct PixelLabelMap {
  int width = 0;
  int height = 0;
  std::vector<Label> labels;

  Label at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
  Label& at(int x, int y) { return labels[static_cast<std::size_t>(y) * width + x]; }
  static PixelLabelMap filled(int width, int height, Label value);
};

/// Per-pixel label sets; an empty set marks an unlabelled pixel.
struct MultiLabelMap {
  int width = 0;
  int height = 0;
  std::vector<std::vector<Label>> labels;
};

/// Pixels whose ground truth is 0 are ignored. Normalised: mean per-class
/// recall over classes present; otherwise correct / labelled.
double pixel_accuracy(const PixelLabelMap& predicted, const PixelLabelMap& truth,
                      bool normalize_per_class);

/// Per-class recall behind the normalised variant, indexed by label (entry 0
/// unused). Classes absent from the ground truth are NaN.
std::vector<double> pixel_class_recall(const PixelLabelMap& predicted, const PixelLabelMap& truth);

/// A prediction is correct when it is one of the pixel's labels.
double osa_pixel_accuracy(const PixelLabelMap& predicted, const MultiLabelMap& truth);

struct InformationRatios {
  double mutual_information = 0.0;
  double over_category_entropy = 0.0;   // I(A,C) / H(C)
  double over_attribute_entropy = 0.0;  // I(A,C) / H(A)
};

/// Plug-in estimates (natural log) from the empirical joint of a binary
/// attribute and a categorical variable.
InformationRatios mutual_information_reduction(std::span<const int> attribute,
                                               std::span<const int> category);

/// Mutual information of two discrete variables given as paired samples.
double mutual_information(std::span<const int> a, std::span<const int> b);
double entropy(std::span<const int> values);

/// One CSV row per metric: name, per-class breakdown (';' separated), aggregate.
struct ReportRow {
  std::string metric;
  std::vector<double> per_class;
  double aggregate = 0.0;
};

void write_report_csv(std::ostream& out, const std::vector<ReportRow>& rows);

}  // namespace texbank
